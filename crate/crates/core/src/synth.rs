//! Seeded generator of small English-like constituency trees, used for
//! training smoke tests and the trainability checks when no treebank is
//! available.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::treebank::SyntaxTree;

const DT: &[&str] = &["the", "a", "this", "that", "every", "some", "no", "each"];
const NN: &[&str] = &[
    "dog", "cat", "man", "woman", "child", "teacher", "park", "house", "river", "book", "ball", "game", "city",
    "garden", "car", "letter", "table", "window", "song", "doctor", "farmer", "student", "road", "apple", "idea",
    "story", "market", "bridge", "boat", "lamp", "tennis", "music", "paper", "forest", "island", "bird",
];
const NNS: &[&str] = &[
    "dogs", "cats", "children", "teachers", "books", "games", "cities", "songs", "students", "apples", "stories",
    "boats", "birds", "friends", "letters", "trees", "flowers", "windows",
];
const NNP: &[&str] = &["John", "Mary", "Paris", "London", "Alice", "Bob", "Tokyo", "Emma", "Oslo", "Maria"];
const PRP: &[&str] = &["she", "he", "they", "we", "it", "I", "you"];
const JJ: &[&str] = &[
    "big", "small", "old", "new", "red", "happy", "quiet", "bright", "dark", "young", "tall", "cold", "warm",
    "strange", "green", "quick",
];
const RB: &[&str] = &["very", "quite", "really", "rather", "too"];
const IN: &[&str] = &["in", "on", "near", "with", "under", "behind", "from", "into", "over"];
const VBZ_T: &[&str] = &["sees", "likes", "reads", "finds", "wants", "owns", "builds", "paints", "visits", "writes"];
const VBD_T: &[&str] = &["saw", "liked", "read", "found", "wanted", "built", "painted", "visited", "wrote", "opened"];
const VBD_I: &[&str] = &["slept", "ran", "left", "laughed", "arrived", "smiled", "waited", "fell"];
const VBZ_I: &[&str] = &["sleeps", "runs", "laughs", "waits", "sings", "works"];
const VBZ_S: &[&str] = &["enjoys", "loves", "hates", "prefers", "avoids"];
const VBG: &[&str] = &["playing", "reading", "painting", "watching", "building", "writing", "visiting"];
const VBZ_C: &[&str] = &["is", "seems", "looks"];
const MD: &[&str] = &["will", "can", "should", "might", "must"];
const VB: &[&str] = &["see", "read", "find", "visit", "build", "open", "paint", "write"];
const CC: &[&str] = &["and", "but", "or"];
const SAY: &[&str] = &["said", "thought", "knew", "believed"];

struct Gen {
    rng: ChaCha8Rng,
}

impl Gen {
    fn word(&mut self, pos: &str, words: &[&str]) -> SyntaxTree {
        SyntaxTree::leaf(pos, *words.choose(&mut self.rng).expect("nonempty lexicon"))
    }

    fn chance(&mut self, p: f64) -> bool {
        self.rng.gen::<f64>() < p
    }

    fn np(&mut self, depth: usize) -> SyntaxTree {
        let base = match self.rng.gen_range(0..10) {
            0 | 1 => vec![self.word("DT", DT), self.word("NN", NN)],
            2 => vec![self.word("DT", DT), self.word("JJ", JJ), self.word("NN", NN)],
            3 => vec![self.word("PRP", PRP)],
            4 => vec![self.word("NNP", NNP)],
            5 => vec![self.word("NNS", NNS)],
            6 => vec![self.word("JJ", JJ), self.word("NNS", NNS)],
            7 => vec![self.word("NNP", NNP), self.word("NNP", NNP)],
            8 => vec![self.word("DT", DT), self.word("NNS", NNS)],
            _ => vec![self.word("NN", NN)],
        };
        let np = SyntaxTree::node("NP", base);
        if depth < 3 && self.chance(0.2) {
            SyntaxTree::node("NP", vec![np, self.pp(depth + 1)])
        } else {
            np
        }
    }

    fn pp(&mut self, depth: usize) -> SyntaxTree {
        SyntaxTree::node("PP", vec![self.word("IN", IN), self.np(depth + 1)])
    }

    fn adjp(&mut self) -> SyntaxTree {
        if self.chance(0.4) {
            SyntaxTree::node("ADJP", vec![self.word("RB", RB), self.word("JJ", JJ)])
        } else {
            SyntaxTree::node("ADJP", vec![self.word("JJ", JJ)])
        }
    }

    fn vp(&mut self, depth: usize) -> SyntaxTree {
        let deep = depth < 3;
        let mut children = match self.rng.gen_range(0..12) {
            0 | 1 => vec![self.word("VBZ", VBZ_T), self.np(depth + 1)],
            2 | 3 => vec![self.word("VBD", VBD_T), self.np(depth + 1)],
            4 => vec![self.word("VBD", VBD_I)],
            5 => vec![self.word("VBZ", VBZ_I)],
            6 if deep => {
                // Gerund complement: S over a lone VP collapses to a unary chain.
                let inner = SyntaxTree::node("VP", vec![self.word("VBG", VBG), self.np(depth + 1)]);
                vec![self.word("VBZ", VBZ_S), SyntaxTree::node("S", vec![inner])]
            }
            7 => vec![self.word("VBZ", VBZ_C), self.adjp()],
            8 if deep => {
                let inner = SyntaxTree::node("VP", vec![self.word("VB", VB), self.np(depth + 1)]);
                vec![self.word("MD", MD), inner]
            }
            9 if deep => {
                let clause = self.clause(depth + 1);
                let sbar = SyntaxTree::node("SBAR", vec![SyntaxTree::leaf("IN", "that"), clause]);
                vec![self.word("VBD", SAY), sbar]
            }
            _ => vec![self.word("VBD", VBD_T), self.np(depth + 1)],
        };
        if deep && self.chance(0.25) {
            children.push(self.pp(depth + 1));
        }
        SyntaxTree::node("VP", children)
    }

    fn clause(&mut self, depth: usize) -> SyntaxTree {
        SyntaxTree::node("S", vec![self.np(depth), self.vp(depth)])
    }

    fn sentence(&mut self) -> SyntaxTree {
        let body = if self.chance(0.1) {
            let a = self.clause(1);
            let b = self.clause(1);
            vec![a, SyntaxTree::leaf("CC", *CC.choose(&mut self.rng).expect("nonempty")), b]
        } else {
            vec![self.np(0), self.vp(0)]
        };
        let mut children = body;
        if self.chance(0.85) {
            children.push(SyntaxTree::leaf(".", "."));
        }
        SyntaxTree::node("S", children)
    }
}

/// `count` trees with at most `max_len` tokens, identical for identical seeds.
pub fn generate_treebank(count: usize, seed: u64, max_len: usize) -> Vec<SyntaxTree> {
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
    };
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let t = g.sentence();
        if t.len() >= 2 && t.len() <= max_len.max(2) {
            out.push(t);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treebank::{binarize, debinarize, parse_bracketed, write_bracketed};

    #[test]
    fn deterministic_and_bounded() {
        let a = generate_treebank(200, 5, 20);
        assert_eq!(a, generate_treebank(200, 5, 20));
        assert_ne!(a, generate_treebank(200, 6, 20));
        assert!(a.iter().all(|t| (2..=20).contains(&t.len()) && t.is_well_formed()));
    }

    #[test]
    fn trees_round_trip() {
        for t in generate_treebank(300, 1, 30) {
            let text = write_bracketed(&t);
            assert_eq!(parse_bracketed(&text).unwrap(), vec![t.clone()]);
            assert_eq!(debinarize(&binarize(&t)), t);
        }
    }

    #[test]
    fn contains_unary_chains() {
        let trees = generate_treebank(300, 2, 40);
        let chained = trees
            .iter()
            .filter(|t| binarize(t).spans().iter().any(|s| s.label.as_str().contains('+')))
            .count();
        assert!(chained > 0);
    }
}
