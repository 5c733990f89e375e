use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::treebank::{BinaryTree, Label};

pub const UNK_WORD: &str = "<unk>";
pub const UNK_ID: usize = 0;

/// Word, character, POS and label inventories, all with dense ids from 0.
///
/// Word and character id 0 is the unknown entry. Label id 0 is `∅` in both
/// the general and unary inventories.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VocabularyData", into = "VocabularyData")]
pub struct Vocabulary {
    words: Vec<String>,
    word_counts: Vec<usize>,
    chars: Vec<char>,
    pos: Vec<String>,
    general: Vec<Label>,
    unary: Vec<Label>,
    word_ids: HashMap<String, usize>,
    char_ids: HashMap<char, usize>,
    pos_ids: HashMap<String, usize>,
    general_ids: HashMap<Label, usize>,
    unary_ids: HashMap<Label, usize>,
}

#[derive(Clone, Serialize, Deserialize)]
struct VocabularyData {
    words: Vec<String>,
    word_counts: Vec<usize>,
    chars: Vec<char>,
    pos: Vec<String>,
    general: Vec<Label>,
    unary: Vec<Label>,
}

impl From<VocabularyData> for Vocabulary {
    fn from(d: VocabularyData) -> Self {
        Vocabulary::from_parts(d.words, d.word_counts, d.chars, d.pos, d.general, d.unary)
    }
}

impl From<Vocabulary> for VocabularyData {
    fn from(v: Vocabulary) -> Self {
        VocabularyData {
            words: v.words,
            word_counts: v.word_counts,
            chars: v.chars,
            pos: v.pos,
            general: v.general,
            unary: v.unary,
        }
    }
}

fn index<T: Clone + Eq + std::hash::Hash>(items: &[T]) -> HashMap<T, usize> {
    items.iter().cloned().enumerate().map(|(i, x)| (x, i)).collect()
}

impl Vocabulary {
    fn from_parts(
        words: Vec<String>,
        word_counts: Vec<usize>,
        chars: Vec<char>,
        pos: Vec<String>,
        general: Vec<Label>,
        unary: Vec<Label>,
    ) -> Self {
        Vocabulary {
            word_ids: index(&words),
            char_ids: index(&chars),
            pos_ids: index(&pos),
            general_ids: index(&general),
            unary_ids: index(&unary),
            words,
            word_counts,
            chars,
            pos,
            general,
            unary,
        }
    }

    /// Builds all inventories from training trees only.
    pub fn from_trees<'a>(trees: impl IntoIterator<Item = &'a BinaryTree>) -> Self {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        let mut chars = BTreeSet::new();
        let mut pos = BTreeSet::new();
        let mut general = BTreeSet::new();
        let mut unary = BTreeSet::new();
        for tree in trees {
            for leaf in tree.leaves() {
                *counts.entry(leaf.token.clone()).or_default() += 1;
                chars.extend(leaf.token.chars());
                pos.insert(leaf.pos.clone());
                unary.insert(leaf.unary.clone());
            }
            for span in tree.spans().iter() {
                general.insert(span.label.clone());
            }
        }
        general.remove(&Label::Empty);
        unary.remove(&Label::Empty);

        let mut words = vec![UNK_WORD.to_string()];
        let mut word_counts = vec![0];
        for (w, c) in counts {
            words.push(w);
            word_counts.push(c);
        }
        // '\0' never occurs in treebank text; it stands in for unknown chars.
        let chars: Vec<char> = std::iter::once('\0').chain(chars).collect();
        let general: Vec<Label> = std::iter::once(Label::Empty).chain(general).collect();
        let unary: Vec<Label> = std::iter::once(Label::Empty).chain(unary).collect();
        Vocabulary::from_parts(words, word_counts, chars, pos.into_iter().collect(), general, unary)
    }

    pub fn word_id(&self, word: &str) -> usize {
        self.word_ids.get(word).copied().unwrap_or(UNK_ID)
    }

    /// Training-set frequency of a word id (0 for the unknown entry).
    pub fn word_count(&self, id: usize) -> usize {
        self.word_counts[id]
    }

    pub fn char_id(&self, c: char) -> usize {
        self.char_ids.get(&c).copied().unwrap_or(UNK_ID)
    }

    pub fn pos_id(&self, tag: &str) -> Option<usize> {
        self.pos_ids.get(tag).copied()
    }

    pub fn general_id(&self, label: &Label) -> Option<usize> {
        self.general_ids.get(label).copied()
    }

    pub fn unary_id(&self, label: &Label) -> Option<usize> {
        self.unary_ids.get(label).copied()
    }

    pub fn general_label(&self, id: usize) -> &Label {
        &self.general[id]
    }

    pub fn unary_label(&self, id: usize) -> &Label {
        &self.unary[id]
    }

    pub fn general_labels(&self) -> &[Label] {
        &self.general
    }

    pub fn unary_labels(&self) -> &[Label] {
        &self.unary
    }

    pub fn pos_tags(&self) -> &[String] {
        &self.pos
    }

    pub fn num_words(&self) -> usize {
        self.words.len()
    }

    pub fn num_chars(&self) -> usize {
        self.chars.len()
    }

    pub fn num_pos(&self) -> usize {
        self.pos.len()
    }

    pub fn num_general(&self) -> usize {
        self.general.len()
    }

    pub fn num_unary(&self) -> usize {
        self.unary.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treebank::{binarize, parse_bracketed};

    fn vocab() -> Vocabulary {
        let trees = parse_bracketed(
            "(S (NP (PRP She)) (VP (VBZ enjoys) (S (VP (VBG playing) (NP (NN tennis))))) (. .))\n\
             (S (NP (PRP She)) (VP (VBZ plays)))",
        )
        .unwrap();
        let bins: Vec<_> = trees.iter().map(binarize).collect();
        Vocabulary::from_trees(&bins)
    }

    #[test]
    fn dense_ids_with_reserved_entries() {
        let v = vocab();
        assert_eq!(v.word_id(UNK_WORD), UNK_ID);
        assert_eq!(v.word_id("never-seen"), UNK_ID);
        assert_eq!(v.word_count(v.word_id("She")), 2);
        assert_eq!(v.word_count(v.word_id("tennis")), 1);
        assert_eq!(v.general_label(0), &Label::Empty);
        assert_eq!(v.unary_label(0), &Label::Empty);
        assert!(v.general_id(&Label::named("S+VP")).is_some());
        assert!(v.unary_id(&Label::named("NP")).is_some());
        assert_eq!(v.pos_id("XYZ"), None);
        assert_eq!(v.char_id('z'), UNK_ID);
        assert_ne!(v.char_id('S'), UNK_ID);
    }

    #[test]
    fn serde_round_trip() {
        let v = vocab();
        let json = serde_json::to_string(&v).unwrap();
        let back: Vocabulary = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
    }
}
