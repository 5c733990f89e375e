//! Treebank trees, their binarized form, and labeled span extraction.
//!
//! N-ary trees come from bracketed files ([`parse_bracketed`]), are turned
//! into strictly binary trees with dummy (`∅`) nodes and collapsed unary
//! chains ([`Binarizer`]), and can be recovered exactly afterwards.

mod binarize;
mod bracketed;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use binarize::{binarize, debinarize, Binarizer, DEFAULT_DELIMITER, DEFAULT_FALLBACK_ROOT};
pub use bracketed::{parse_bracketed, write_bracketed, TreebankError};

/// A nonterminal label, or the dummy label introduced by binarization.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    /// `∅`: a span created by binarization, or a leaf without a unary chain.
    Empty,
    Named(String),
}

impl Label {
    pub fn named(s: impl Into<String>) -> Self {
        Label::Named(s.into())
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, Label::Empty)
    }

    pub fn as_str(&self) -> &str {
        match self {
            Label::Empty => EMPTY_LABEL_TEXT,
            Label::Named(s) => s,
        }
    }

    /// Inverse of `Display`: `"∅"` maps back to [`Label::Empty`].
    pub fn from_text(s: &str) -> Self {
        if s == EMPTY_LABEL_TEXT {
            Label::Empty
        } else {
            Label::Named(s.to_string())
        }
    }
}

pub const EMPTY_LABEL_TEXT: &str = "∅";

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl From<&str> for Label {
    fn from(s: &str) -> Self {
        Label::from_text(s)
    }
}

/// An n-ary constituency tree as found in a treebank.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SyntaxTree {
    Node {
        label: String,
        children: Vec<SyntaxTree>,
    },
    /// A preterminal: POS tag over a single token.
    Leaf { pos: String, token: String },
}

impl SyntaxTree {
    pub fn node(label: impl Into<String>, children: Vec<SyntaxTree>) -> Self {
        SyntaxTree::Node {
            label: label.into(),
            children,
        }
    }

    pub fn leaf(pos: impl Into<String>, token: impl Into<String>) -> Self {
        SyntaxTree::Leaf {
            pos: pos.into(),
            token: token.into(),
        }
    }

    /// `(token, pos)` pairs in left-to-right order.
    pub fn leaves(&self) -> Vec<(&str, &str)> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<(&'a str, &'a str)>) {
        match self {
            SyntaxTree::Leaf { pos, token } => out.push((token, pos)),
            SyntaxTree::Node { children, .. } => {
                for c in children {
                    c.collect_leaves(out);
                }
            }
        }
    }

    pub fn len(&self) -> usize {
        match self {
            SyntaxTree::Leaf { .. } => 1,
            SyntaxTree::Node { children, .. } => children.iter().map(SyntaxTree::len).sum(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every internal node has at least one child.
    pub fn is_well_formed(&self) -> bool {
        match self {
            SyntaxTree::Leaf { .. } => true,
            SyntaxTree::Node { children, .. } => {
                !children.is_empty() && children.iter().all(SyntaxTree::is_well_formed)
            }
        }
    }

    /// Labeled spans of all nonterminal nodes (preterminals excluded), in
    /// pre-order. Unary chains contribute one span per node.
    pub fn labeled_spans(&self) -> Vec<(usize, usize, String)> {
        let mut out = Vec::new();
        self.collect_spans(1, &mut out);
        out
    }

    fn collect_spans(&self, start: usize, out: &mut Vec<(usize, usize, String)>) -> usize {
        match self {
            SyntaxTree::Leaf { .. } => start,
            SyntaxTree::Node { label, children } => {
                let slot = out.len();
                out.push((start, start, label.clone()));
                let mut next = start;
                for c in children {
                    next = c.collect_spans(next, out) + 1;
                }
                out[slot].1 = next - 1;
                next - 1
            }
        }
    }
}

impl fmt::Display for SyntaxTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&write_bracketed(self))
    }
}

/// Terminal of a [`BinaryTree`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryLeaf {
    /// 1-based token position.
    pub position: usize,
    pub token: String,
    pub pos: String,
    /// Collapsed unary chain directly above the preterminal, `∅` if none.
    pub unary: Label,
}

/// Strictly binary tree over `n` leaves with `n - 1` internal nodes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BinaryTree {
    Node {
        label: Label,
        left: Box<BinaryTree>,
        right: Box<BinaryTree>,
    },
    Leaf(BinaryLeaf),
}

impl BinaryTree {
    pub fn node(label: Label, left: BinaryTree, right: BinaryTree) -> Self {
        BinaryTree::Node {
            label,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn leaf(position: usize, token: impl Into<String>, pos: impl Into<String>, unary: Label) -> Self {
        BinaryTree::Leaf(BinaryLeaf {
            position,
            token: token.into(),
            pos: pos.into(),
            unary,
        })
    }

    /// Number of leaves.
    pub fn len(&self) -> usize {
        match self {
            BinaryTree::Leaf(_) => 1,
            BinaryTree::Node { left, right, .. } => left.len() + right.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn internal_nodes(&self) -> usize {
        match self {
            BinaryTree::Leaf(_) => 0,
            BinaryTree::Node { left, right, .. } => 1 + left.internal_nodes() + right.internal_nodes(),
        }
    }

    pub fn leaves(&self) -> Vec<&BinaryLeaf> {
        let mut out = Vec::with_capacity(self.len());
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a BinaryLeaf>) {
        match self {
            BinaryTree::Leaf(l) => out.push(l),
            BinaryTree::Node { left, right, .. } => {
                left.collect_leaves(out);
                right.collect_leaves(out);
            }
        }
    }

    /// Span `(first, last)` covered by this subtree, from leaf positions.
    pub fn span(&self) -> (usize, usize) {
        match self {
            BinaryTree::Leaf(l) => (l.position, l.position),
            BinaryTree::Node { left, right, .. } => (left.span().0, right.span().1),
        }
    }

    pub fn label(&self) -> &Label {
        match self {
            BinaryTree::Leaf(l) => &l.unary,
            BinaryTree::Node { label, .. } => label,
        }
    }

    /// Leaf positions read `1..=n` left to right.
    pub fn has_consecutive_positions(&self) -> bool {
        self.leaves()
            .iter()
            .enumerate()
            .all(|(i, l)| l.position == i + 1)
    }

    /// The `n - 1` internal labeled spans, in pre-order.
    pub fn spans(&self) -> SpanSet {
        let mut spans = Vec::with_capacity(self.len().saturating_sub(1));
        self.collect_spans(&mut spans);
        SpanSet { spans }
    }

    fn collect_spans(&self, out: &mut Vec<LabeledSpan>) {
        if let BinaryTree::Node { label, left, right } = self {
            let (start, end) = self.span();
            out.push(LabeledSpan {
                start,
                end,
                label: label.clone(),
            });
            left.collect_spans(out);
            right.collect_spans(out);
        }
    }

    /// Singleton spans `(i, i)` carrying each leaf's unary label.
    pub fn unary_spans(&self) -> SpanSet {
        SpanSet {
            spans: self
                .leaves()
                .into_iter()
                .map(|l| LabeledSpan {
                    start: l.position,
                    end: l.position,
                    label: l.unary.clone(),
                })
                .collect(),
        }
    }
}

/// Internal labeled spans of a binary tree.
pub fn spans_of(tree: &BinaryTree) -> SpanSet {
    tree.spans()
}

/// Inclusive 1-based span with a label.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LabeledSpan {
    pub start: usize,
    pub end: usize,
    pub label: Label,
}

impl LabeledSpan {
    pub fn new(start: usize, end: usize, label: impl Into<Label>) -> Self {
        LabeledSpan {
            start,
            end,
            label: label.into(),
        }
    }

    pub fn width(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn bounds(&self) -> (usize, usize) {
        (self.start, self.end)
    }
}

impl fmt::Display for LabeledSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(({}, {}), {})", self.start, self.end, self.label)
    }
}

/// Two intervals cross when they overlap without one containing the other.
pub fn spans_cross(a: (usize, usize), b: (usize, usize)) -> bool {
    let overlap = a.0 <= b.1 && b.0 <= a.1;
    let nested = (a.0 <= b.0 && b.1 <= a.1) || (b.0 <= a.0 && a.1 <= b.1);
    overlap && !nested
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SpanSet {
    pub spans: Vec<LabeledSpan>,
}

impl SpanSet {
    pub fn len(&self) -> usize {
        self.spans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, LabeledSpan> {
        self.spans.iter()
    }

    /// Any two spans are nested or disjoint.
    pub fn is_laminar(&self) -> bool {
        self.spans.iter().enumerate().all(|(a, x)| {
            self.spans[a + 1..]
                .iter()
                .all(|y| !spans_cross(x.bounds(), y.bounds()))
        })
    }

    /// Spans sorted by `(start, end, label)`, for order-insensitive comparison.
    pub fn sorted(&self) -> Vec<LabeledSpan> {
        let mut v = self.spans.clone();
        v.sort();
        v
    }
}

impl<'a> IntoIterator for &'a SpanSet {
    type Item = &'a LabeledSpan;
    type IntoIter = std::slice::Iter<'a, LabeledSpan>;

    fn into_iter(self) -> Self::IntoIter {
        self.spans.iter()
    }
}

impl fmt::Display for SpanSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, s) in self.spans.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}", s)?;
        }
        f.write_str("}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crossing() {
        assert!(spans_cross((2, 3), (3, 4)));
        assert!(!spans_cross((1, 4), (2, 3)));
        assert!(!spans_cross((1, 2), (3, 4)));
        assert!(!spans_cross((2, 3), (2, 3)));
    }

    #[test]
    fn syntax_tree_spans_include_unary_chain_nodes() {
        let t = parse_bracketed("(S (NP (NN a)) (VP (VB b) (S (VP (VB c)))))").unwrap();
        let spans = t[0].labeled_spans();
        assert_eq!(
            spans,
            vec![
                (1, 3, "S".to_string()),
                (1, 1, "NP".to_string()),
                (2, 3, "VP".to_string()),
                (3, 3, "S".to_string()),
                (3, 3, "VP".to_string()),
            ]
        );
    }

    #[test]
    fn label_text_round_trip() {
        assert_eq!(Label::from_text("∅"), Label::Empty);
        assert_eq!(Label::from_text("S+VP").to_string(), "S+VP");
    }
}
