//! Greedy top-down decoding of score tables into a binary tree.
//!
//! Spans are 1-based and inclusive; table rows and columns are 0-based.

use std::collections::{HashMap, VecDeque};

use thiserror::Error;

use crate::model::{forward, ModelError, ModelParams, ScoreTables, Vocabulary};
use crate::treebank::{BinaryTree, Binarizer, Label, SyntaxTree};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("score tables cover {tables} positions but the sentence has {tokens} tokens")]
    LengthMismatch { tables: usize, tokens: usize },
    #[error("{kind} table has {columns} label columns but the inventory has {labels} labels")]
    LabelMismatch {
        kind: &'static str,
        columns: usize,
        labels: usize,
    },
    #[error("empty sentence")]
    Empty,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A span waiting in the decoding queue.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SpanTask {
    pub i: usize,
    pub j: usize,
    pub label: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DecodeOptions {
    /// Sum log-probabilities instead of probabilities when scoring splits.
    pub log_space: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LabelKind {
    General,
    Unary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decoded {
    pub tree: BinaryTree,
    /// Split-score evaluations: the sum of `j - i` over every popped span.
    pub work: usize,
}

fn term(p: f64, log_space: bool) -> f64 {
    if log_space {
        p.ln()
    } else {
        p
    }
}

fn split_score_with(tables: &ScoreTables, i: usize, k: usize, j: usize, log_space: bool) -> f64 {
    let gp = |a: usize, b: usize| term(tables.gp[[a - 1, b - 1]], log_space);
    let sp = |a: usize| term(tables.sp[[a - 1, a - 1]], log_space);
    if k == i {
        sp(i) + gp(i + 1, j)
    } else if k == j - 1 {
        gp(j - 1, i) + sp(j)
    } else {
        gp(k, i) + gp(k + 1, j)
    }
}

/// Score of splitting `(i, j)` into `(i, k)` and `(k+1, j)`.
///
/// # Panics
/// If `i <= k < j <= n` does not hold.
pub fn split_score(tables: &ScoreTables, i: usize, k: usize, j: usize) -> f64 {
    assert!(
        i >= 1 && i <= k && k < j && j <= tables.len(),
        "split ({i}, {k}, {j}) out of range for n = {}",
        tables.len()
    );
    split_score_with(tables, i, k, j, false)
}

fn best_split_with(tables: &ScoreTables, i: usize, j: usize, log_space: bool) -> usize {
    let mut best = i;
    let mut best_score = f64::NEG_INFINITY;
    for k in i..j {
        let s = split_score_with(tables, i, k, j, log_space);
        if s > best_score {
            best = k;
            best_score = s;
        }
    }
    best
}

/// Highest-scoring split point; ties go to the smallest `k`.
pub fn best_split(tables: &ScoreTables, i: usize, j: usize) -> usize {
    assert!(i >= 1 && i < j && j <= tables.len(), "span ({i}, {j}) cannot be split");
    best_split_with(tables, i, j, false)
}

/// Argmax label id at a 1-based position; ties go to the smallest id.
pub fn assign_label(tables: &ScoreTables, position: usize, kind: LabelKind) -> usize {
    let table = match kind {
        LabelKind::General => &tables.gc,
        LabelKind::Unary => &tables.uc,
    };
    let row = table.row(position - 1);
    let mut best = 0;
    for (l, &p) in row.iter().enumerate() {
        if p > row[best] {
            best = l;
        }
    }
    best
}

/// Queue-based decoding. `tokens` are `(word, POS)` pairs; `general` and
/// `unary` map label ids to labels.
pub fn decode(
    tables: &ScoreTables,
    tokens: &[(&str, &str)],
    general: &[Label],
    unary: &[Label],
    options: DecodeOptions,
) -> Result<Decoded, DecodeError> {
    let n = tokens.len();
    if n == 0 {
        return Err(DecodeError::Empty);
    }
    if tables.len() != n || tables.sp.nrows() != n || tables.gc.nrows() != n || tables.uc.nrows() != n {
        return Err(DecodeError::LengthMismatch {
            tables: tables.len(),
            tokens: n,
        });
    }
    for (kind, columns, labels) in [
        ("general label", tables.gc.ncols(), general.len()),
        ("unary label", tables.uc.ncols(), unary.len()),
    ] {
        if columns != labels {
            return Err(DecodeError::LabelMismatch { kind, columns, labels });
        }
    }

    let mut splits: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
    let mut work = 0;
    if n > 1 {
        let mut queue = VecDeque::new();
        queue.push_back(SpanTask {
            i: 1,
            j: n,
            label: assign_label(tables, 1, LabelKind::General),
        });
        while let Some(SpanTask { i, j, label }) = queue.pop_front() {
            work += j - i;
            if j <= i + 1 {
                splits.insert((i, j), (label, i));
                continue;
            }
            let k = best_split_with(tables, i, j, options.log_space);
            splits.insert((i, j), (label, k));
            if k > i {
                queue.push_back(SpanTask {
                    i,
                    j: k,
                    label: assign_label(tables, k, LabelKind::General),
                });
            }
            if k + 1 < j {
                queue.push_back(SpanTask {
                    i: k + 1,
                    j,
                    label: assign_label(tables, k + 1, LabelKind::General),
                });
            }
        }
    }

    let tree = assemble(1, n, &splits, tables, tokens, general, unary);
    Ok(Decoded { tree, work })
}

fn assemble(
    i: usize,
    j: usize,
    splits: &HashMap<(usize, usize), (usize, usize)>,
    tables: &ScoreTables,
    tokens: &[(&str, &str)],
    general: &[Label],
    unary: &[Label],
) -> BinaryTree {
    if i == j {
        let (word, pos) = tokens[i - 1];
        let u = assign_label(tables, i, LabelKind::Unary);
        return BinaryTree::leaf(i, word, pos, unary[u].clone());
    }
    let (label, k) = splits[&(i, j)];
    BinaryTree::node(
        general[label].clone(),
        assemble(i, k, splits, tables, tokens, general, unary),
        assemble(k + 1, j, splits, tables, tokens, general, unary),
    )
}

/// Decodes with the label inventories of a vocabulary.
pub fn decode_with_vocab(
    tables: &ScoreTables,
    tokens: &[(&str, &str)],
    vocab: &Vocabulary,
    options: DecodeOptions,
) -> Result<Decoded, DecodeError> {
    decode(tables, tokens, vocab.general_labels(), vocab.unary_labels(), options)
}

#[derive(Clone, Debug, Default)]
pub struct ParseOptions {
    pub decode: DecodeOptions,
    pub binarizer: Binarizer,
}

/// Scores, decodes and debinarizes one POS-tagged sentence.
pub fn parse_sentence(
    tokens: &[(&str, &str)],
    params: &ModelParams,
    vocab: &Vocabulary,
) -> Result<SyntaxTree, DecodeError> {
    parse_sentence_with(tokens, params, vocab, &ParseOptions::default()).map(|(t, _)| t)
}

/// Like [`parse_sentence`], also returning the split-work count.
pub fn parse_sentence_with(
    tokens: &[(&str, &str)],
    params: &ModelParams,
    vocab: &Vocabulary,
    options: &ParseOptions,
) -> Result<(SyntaxTree, usize), DecodeError> {
    let tables = forward(tokens, params, vocab)?;
    let decoded = decode_with_vocab(&tables, tokens, vocab, options.decode)?;
    Ok((options.binarizer.debinarize(&decoded.tree), decoded.work))
}
