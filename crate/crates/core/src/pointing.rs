//! Pointing representation of binary trees.
//!
//! Every token `i` points to `p_i`, the far end of the largest span that
//! starts or ends at `i`, and carries that span's label. Position `n` points
//! back to `1` with the root label. The mapping is a bijection on binary
//! trees: [`tree_to_pointing`] and [`pointing_to_tree`] are mutual inverses.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::treebank::{spans_cross, BinaryLeaf, BinaryTree, Label, LabeledSpan};

/// A single decision `query -> target` with the label of the span it names.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Pointing {
    pub query: usize,
    pub target: usize,
    pub label: Label,
}

impl Pointing {
    pub fn new(query: usize, target: usize, label: impl Into<Label>) -> Self {
        Pointing {
            query,
            target,
            label: label.into(),
        }
    }

    /// The undirected span `(min, max)` this decision names.
    pub fn span(&self) -> (usize, usize) {
        (self.query.min(self.target), self.query.max(self.target))
    }
}

/// One pointing decision per token position.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct PointingSet {
    pub entries: Vec<Pointing>,
}

impl PointingSet {
    pub fn new(entries: Vec<Pointing>) -> Self {
        PointingSet { entries }
    }

    /// Entries from `(query, target)` pairs, all labeled `∅`.
    pub fn unlabeled(pairs: &[(usize, usize)]) -> Self {
        PointingSet {
            entries: pairs
                .iter()
                .map(|&(q, t)| Pointing::new(q, t, Label::Empty))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entry whose query is `i`.
    pub fn get(&self, i: usize) -> Option<&Pointing> {
        self.entries.iter().find(|e| e.query == i)
    }

    /// Targets ordered by query position.
    pub fn targets(&self) -> Vec<usize> {
        let mut sorted = self.entries.clone();
        sorted.sort_by_key(|e| e.query);
        sorted.into_iter().map(|e| e.target).collect()
    }
}

impl fmt::Display for PointingSet {
    /// Debug text format: one `i -> p label` line per entry.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            writeln!(f, "{} -> {} {}", e.query, e.target, e.label)?;
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: expected `i -> p label`, got {text:?}")]
pub struct PointingTextError {
    pub line: usize,
    pub text: String,
}

impl FromStr for PointingSet {
    type Err = PointingTextError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut entries = Vec::new();
        for (idx, raw) in s.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let bad = || PointingTextError {
                line: idx + 1,
                text: raw.to_string(),
            };
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 4 || parts[1] != "->" {
                return Err(bad());
            }
            let query = parts[0].parse().map_err(|_| bad())?;
            let target = parts[2].parse().map_err(|_| bad())?;
            entries.push(Pointing::new(query, target, Label::from_text(parts[3])));
        }
        Ok(PointingSet { entries })
    }
}

/// Converts a binary tree to its pointing set by walking up from each leaf
/// until the current span neither starts nor ends at that leaf.
///
/// Single-token trees map to the empty set.
pub fn tree_to_pointing(tree: &BinaryTree) -> PointingSet {
    let n = tree.len();
    if n < 2 {
        return PointingSet::default();
    }
    let arena = Arena::from_tree(tree);
    let mut entries = Vec::with_capacity(n);
    for i in 1..=n {
        let mut node = arena.leaf_of[i];
        let (mut x, mut y) = (i, i);
        let mut target = i;
        let mut label = Label::Empty;
        while x == i || y == i {
            target = x + y - i;
            label = arena.nodes[node].label.clone();
            match arena.nodes[node].parent {
                Some(parent) => {
                    node = parent;
                    (x, y) = arena.nodes[node].span;
                }
                None => break,
            }
        }
        entries.push(Pointing::new(i, target, label));
    }
    PointingSet { entries }
}

struct ArenaNode {
    span: (usize, usize),
    label: Label,
    parent: Option<usize>,
}

/// Flattened tree with parent links.
struct Arena {
    nodes: Vec<ArenaNode>,
    /// `leaf_of[i]` is the arena index of leaf `i` (index 0 unused).
    leaf_of: Vec<usize>,
}

impl Arena {
    fn from_tree(tree: &BinaryTree) -> Self {
        let mut arena = Arena {
            nodes: Vec::new(),
            leaf_of: vec![0; tree.len() + 1],
        };
        arena.add(tree, None);
        arena
    }

    fn add(&mut self, tree: &BinaryTree, parent: Option<usize>) {
        let idx = self.nodes.len();
        self.nodes.push(ArenaNode {
            span: tree.span(),
            label: tree.label().clone(),
            parent,
        });
        match tree {
            BinaryTree::Leaf(l) => self.leaf_of[l.position] = idx,
            BinaryTree::Node { left, right, .. } => {
                self.add(left, Some(idx));
                self.add(right, Some(idx));
            }
        }
    }
}

/// A reason a pointing set does not describe a binary tree.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum Violation {
    #[error("query position {0} has no entry")]
    MissingQuery(usize),
    #[error("query position {0} appears more than once")]
    DuplicateQuery(usize),
    #[error("entry {query} -> {target} points outside 1..={n}")]
    TargetOutOfRange { query: usize, target: usize, n: usize },
    #[error("entry {0} points to itself")]
    SelfPointing(usize),
    #[error("entry {n} must point to 1, found {n} -> {target}")]
    LastEntryNotTrivial { n: usize, target: usize },
    #[error("entries {first} and {second} both name span ({}, {})", span.0, span.1)]
    DuplicateSpan {
        first: usize,
        second: usize,
        span: (usize, usize),
    },
    #[error(
        "spans ({}, {}) from entry {first} and ({}, {}) from entry {second} overlap at token {token}",
        first_span.0, first_span.1, second_span.0, second_span.1
    )]
    Overlap {
        first: usize,
        second: usize,
        first_span: (usize, usize),
        second_span: (usize, usize),
        token: usize,
    },
    #[error("no entry names the whole sentence (1, {0})")]
    MissingRoot(usize),
    #[error("root span labeled {first} by entry 1 but {last} by entry {n}")]
    RootLabelMismatch { first: Label, last: Label, n: usize },
    #[error("span ({}, {}) has {arity} children", span.0, span.1)]
    NotBinary { span: (usize, usize), arity: usize },
    #[error("entry {query} -> {target} is not the largest span at {query} (expected -> {expected})")]
    NotMaximal {
        query: usize,
        target: usize,
        expected: usize,
    },
    #[error("span ({}, {}) labeled {label} by entry {query}, tree label is {expected}", span.0, span.1)]
    LabelMismatch {
        query: usize,
        span: (usize, usize),
        label: Label,
        expected: Label,
    },
    #[error("{entries} entries but {leaves} leaves")]
    LeafCountMismatch { entries: usize, leaves: usize },
}

/// Result of [`validate_pointing`]; empty when the set is valid.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Diagnostics {
    pub violations: Vec<Violation>,
}

impl Diagnostics {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn first(&self) -> Option<&Violation> {
        self.violations.first()
    }
}

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_valid() {
            return f.write_str("valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{}", v)?;
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PointingError {
    #[error("invalid pointing set: {0}")]
    Invalid(Violation),
}

/// Checks that a pointing set describes some binary tree: coverage of every
/// query, distinct and laminar spans including `(1, n)`, and maximality of
/// each span at its query (re-derived from the assembled tree).
pub fn validate_pointing(p: &PointingSet) -> Diagnostics {
    match assemble(p) {
        Ok(shape) => {
            let violations = check_maximality(p, &shape);
            Diagnostics { violations }
        }
        Err(violations) => Diagnostics { violations },
    }
}

/// Rebuilds the binary tree described by `p` over the given leaves.
///
/// Leaf positions are renumbered `1..=n` in the given order.
pub fn pointing_to_tree(p: &PointingSet, leaves: &[BinaryLeaf]) -> Result<BinaryTree, PointingError> {
    let n = leaves.len();
    let leaf = |i: usize| {
        let mut l = leaves[i - 1].clone();
        l.position = i;
        BinaryTree::Leaf(l)
    };
    if n == 1 && p.is_empty() {
        return Ok(leaf(1));
    }
    if p.len() != n {
        return Err(PointingError::Invalid(Violation::LeafCountMismatch {
            entries: p.len(),
            leaves: n,
        }));
    }
    let shape = assemble(p).map_err(|mut v| PointingError::Invalid(v.remove(0)))?;
    if let Some(v) = check_maximality(p, &shape).into_iter().next() {
        return Err(PointingError::Invalid(v));
    }
    Ok(shape.build(0, &leaf))
}

/// Interval tree assembled from the spans of entries `1..n-1`.
struct Shape {
    nodes: Vec<ShapeNode>,
}

struct ShapeNode {
    span: (usize, usize),
    label: Label,
    /// Child node indices sorted by start.
    children: Vec<usize>,
}

impl Shape {
    fn build(&self, idx: usize, leaf: &dyn Fn(usize) -> BinaryTree) -> BinaryTree {
        let node = &self.nodes[idx];
        let mut parts = Vec::with_capacity(2);
        let mut at = node.span.0;
        let mut kids = node.children.iter().peekable();
        while at <= node.span.1 {
            match kids.peek() {
                Some(&&c) if self.nodes[c].span.0 == at => {
                    parts.push(self.build(c, leaf));
                    at = self.nodes[c].span.1 + 1;
                    kids.next();
                }
                _ => {
                    parts.push(leaf(at));
                    at += 1;
                }
            }
        }
        debug_assert_eq!(parts.len(), 2);
        let right = parts.pop().expect("binary node");
        let left = parts.pop().expect("binary node");
        BinaryTree::node(node.label.clone(), left, right)
    }

    fn arity(&self, idx: usize) -> usize {
        let node = &self.nodes[idx];
        let covered: usize = node
            .children
            .iter()
            .map(|&c| self.nodes[c].span.1 + 1 - self.nodes[c].span.0)
            .sum();
        node.children.len() + (node.span.1 + 1 - node.span.0 - covered)
    }
}

/// Structural checks plus assembly of the laminar family into a tree.
fn assemble(p: &PointingSet) -> Result<Shape, Vec<Violation>> {
    let n = p.len();
    let mut violations = Vec::new();

    let mut by_query: Vec<Option<&Pointing>> = vec![None; n + 1];
    for e in &p.entries {
        if e.query == 0 || e.query > n {
            violations.push(Violation::TargetOutOfRange {
                query: e.query,
                target: e.target,
                n,
            });
            continue;
        }
        if by_query[e.query].is_some() {
            violations.push(Violation::DuplicateQuery(e.query));
            continue;
        }
        by_query[e.query] = Some(e);
        if e.target == 0 || e.target > n {
            violations.push(Violation::TargetOutOfRange {
                query: e.query,
                target: e.target,
                n,
            });
        } else if e.target == e.query {
            violations.push(Violation::SelfPointing(e.query));
        }
    }
    for (i, slot) in by_query.iter().enumerate().skip(1) {
        if slot.is_none() {
            violations.push(Violation::MissingQuery(i));
        }
    }
    if n == 0 {
        return Ok(Shape { nodes: Vec::new() });
    }
    if n == 1 {
        // A single token has no spans to point at.
        violations.push(Violation::SelfPointing(1));
    }
    if !violations.is_empty() {
        return Err(violations);
    }
    let entry = |i: usize| by_query[i].expect("coverage checked");

    let last = entry(n);
    if last.target != 1 {
        violations.push(Violation::LastEntryNotTrivial {
            n,
            target: last.target,
        });
    }

    // Spans named by entries 1..n-1.
    let spans: Vec<(usize, LabeledSpan)> = (1..n)
        .map(|i| {
            let e = entry(i);
            let (s, t) = e.span();
            (i, LabeledSpan::new(s, t, e.label.clone()))
        })
        .collect();

    for (a, (qa, sa)) in spans.iter().enumerate() {
        for (qb, sb) in &spans[a + 1..] {
            if sa.bounds() == sb.bounds() {
                violations.push(Violation::DuplicateSpan {
                    first: *qa,
                    second: *qb,
                    span: sa.bounds(),
                });
            } else if spans_cross(sa.bounds(), sb.bounds()) {
                violations.push(Violation::Overlap {
                    first: *qa,
                    second: *qb,
                    first_span: sa.bounds(),
                    second_span: sb.bounds(),
                    token: sa.start.max(sb.start),
                });
            }
        }
    }

    match spans.iter().find(|(_, s)| s.bounds() == (1, n)) {
        None => violations.push(Violation::MissingRoot(n)),
        Some((_, root)) => {
            if root.label != last.label && last.target == 1 {
                violations.push(Violation::RootLabelMismatch {
                    first: root.label.clone(),
                    last: last.label.clone(),
                    n,
                });
            }
        }
    }
    if !violations.is_empty() {
        return Err(violations);
    }

    // Widest first; equal-width distinct laminar spans are disjoint, so the
    // start-position tie-break only fixes a deterministic order.
    let mut ordered: Vec<&LabeledSpan> = spans.iter().map(|(_, s)| s).collect();
    ordered.sort_by(|a, b| b.width().cmp(&a.width()).then(a.start.cmp(&b.start)));

    let mut shape = Shape {
        nodes: Vec::with_capacity(n - 1),
    };
    for s in ordered {
        let idx = shape.nodes.len();
        shape.nodes.push(ShapeNode {
            span: s.bounds(),
            label: s.label.clone(),
            children: Vec::new(),
        });
        if idx == 0 {
            debug_assert_eq!(s.bounds(), (1, n));
            continue;
        }
        let mut at = 0;
        'descend: loop {
            for &c in &shape.nodes[at].children {
                let (cs, ce) = shape.nodes[c].span;
                if cs <= s.start && s.end <= ce {
                    at = c;
                    continue 'descend;
                }
            }
            break;
        }
        let kids = &mut shape.nodes[at].children;
        kids.push(idx);
        let spans_of: Vec<usize> = kids.clone();
        let mut sorted = spans_of;
        sorted.sort_by_key(|&c| shape.nodes[c].span.0);
        shape.nodes[at].children = sorted;
    }

    for idx in 0..shape.nodes.len() {
        let arity = shape.arity(idx);
        if arity != 2 {
            violations.push(Violation::NotBinary {
                span: shape.nodes[idx].span,
                arity,
            });
        }
    }
    if violations.is_empty() {
        Ok(shape)
    } else {
        Err(violations)
    }
}

/// Compares every entry against the pointing re-derived from the tree.
fn check_maximality(p: &PointingSet, shape: &Shape) -> Vec<Violation> {
    let n = p.len();
    if n < 2 {
        return Vec::new();
    }
    let placeholder = |i: usize| BinaryTree::leaf(i, "", "", Label::Empty);
    let tree = shape.build(0, &placeholder);
    let derived = tree_to_pointing(&tree);
    let mut violations = Vec::new();
    for e in &p.entries {
        let d = &derived.entries[e.query - 1];
        if d.target != e.target {
            violations.push(Violation::NotMaximal {
                query: e.query,
                target: e.target,
                expected: d.target,
            });
        } else if d.label != e.label {
            violations.push(Violation::LabelMismatch {
                query: e.query,
                span: e.span(),
                label: e.label.clone(),
                expected: d.label.clone(),
            });
        }
    }
    violations
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treebank::{binarize, parse_bracketed};

    fn tennis_example() -> BinaryTree {
        let t = parse_bracketed(
            "(S (NP (PRP She)) (VP (VBZ enjoys) (S (VP (VBG playing) (NP (NN tennis))))) (. .))",
        )
        .unwrap();
        binarize(&t[0])
    }

    fn leaf(i: usize) -> BinaryTree {
        BinaryTree::leaf(i, format!("w{i}"), "X", Label::Empty)
    }

    #[test]
    fn tennis_example_pointing() {
        let p = tree_to_pointing(&tennis_example());
        let expected = PointingSet::new(vec![
            Pointing::new(1, 5, "S"),
            Pointing::new(2, 5, Label::Empty),
            Pointing::new(3, 4, "S+VP"),
            Pointing::new(4, 2, "VP"),
            Pointing::new(5, 1, "S"),
        ]);
        assert_eq!(p, expected);
    }

    #[test]
    fn two_leaf_tree() {
        let t = BinaryTree::node(Label::named("S"), leaf(1), leaf(2));
        let p = tree_to_pointing(&t);
        assert_eq!(
            p,
            PointingSet::new(vec![Pointing::new(1, 2, "S"), Pointing::new(2, 1, "S")])
        );
        let leaves: Vec<_> = t.leaves().into_iter().cloned().collect();
        assert_eq!(pointing_to_tree(&p, &leaves).unwrap(), t);
    }

    #[test]
    fn left_branching_three_leaves() {
        let t = BinaryTree::node(
            Label::named("S"),
            BinaryTree::node(Label::Empty, leaf(1), leaf(2)),
            leaf(3),
        );
        let p = tree_to_pointing(&t);
        assert_eq!(
            p,
            PointingSet::new(vec![
                Pointing::new(1, 3, "S"),
                Pointing::new(2, 1, Label::Empty),
                Pointing::new(3, 1, "S"),
            ])
        );
    }

    #[test]
    fn single_token_is_empty() {
        let t = BinaryTree::leaf(1, "a", "A", Label::named("X"));
        assert!(tree_to_pointing(&t).is_empty());
        let leaves = vec![t.leaves()[0].clone()];
        assert_eq!(pointing_to_tree(&PointingSet::default(), &leaves).unwrap(), t);
    }

    #[test]
    fn tennis_example_inverse() {
        let t = tennis_example();
        let leaves: Vec<_> = t.leaves().into_iter().cloned().collect();
        let back = pointing_to_tree(&tree_to_pointing(&t), &leaves).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn crossing_spans_rejected_at_token_three() {
        let p = PointingSet::unlabeled(&[(1, 4), (2, 3), (3, 4), (4, 1)]);
        let d = validate_pointing(&p);
        assert!(!d.is_valid());
        assert_eq!(
            d.first(),
            Some(&Violation::Overlap {
                first: 2,
                second: 3,
                first_span: (2, 3),
                second_span: (3, 4),
                token: 3,
            })
        );
    }

    #[test]
    fn duplicate_spans_rejected() {
        let p = PointingSet::unlabeled(&[(1, 2), (2, 1), (3, 1)]);
        let d = validate_pointing(&p);
        assert!(matches!(
            d.first(),
            Some(Violation::DuplicateSpan { first: 1, second: 2, span: (1, 2) })
        ));
    }

    #[test]
    fn right_branching_three_is_valid() {
        // (1 (2 3)): token 2 starts the largest span (2, 3).
        let p = PointingSet::unlabeled(&[(1, 3), (2, 3), (3, 1)]);
        assert!(validate_pointing(&p).is_valid());
    }

    fn catalan(k: usize) -> usize {
        let mut c = vec![1usize; k + 1];
        for m in 1..=k {
            c[m] = (0..m).map(|a| c[a] * c[m - 1 - a]).sum();
        }
        c[k]
    }

    /// Every assignment of targets for small n: exactly Catalan(n-1) are
    /// accepted, and each accepted set is the pointing of its own tree.
    #[test]
    fn brute_force_over_all_target_assignments() {
        for n in 2..=6usize {
            let mut accepted = 0;
            let total = (n - 1).pow(n as u32);
            for code in 0..total {
                let mut rest = code;
                let pairs: Vec<(usize, usize)> = (1..=n)
                    .map(|i| {
                        let r = rest % (n - 1);
                        rest /= n - 1;
                        // Skip over the query itself.
                        let t = if r + 1 >= i { r + 2 } else { r + 1 };
                        (i, t)
                    })
                    .collect();
                let p = PointingSet::unlabeled(&pairs);
                if validate_pointing(&p).is_valid() {
                    accepted += 1;
                    let leaves: Vec<_> = (1..=n)
                        .map(|i| BinaryLeaf {
                            position: i,
                            token: String::new(),
                            pos: String::new(),
                            unary: Label::Empty,
                        })
                        .collect();
                    let t = pointing_to_tree(&p, &leaves).unwrap();
                    assert_eq!(tree_to_pointing(&t), p);
                }
            }
            assert_eq!(accepted, catalan(n - 1), "n = {n}");
        }
    }

    #[test]
    fn root_labels_must_agree() {
        let p = PointingSet::new(vec![Pointing::new(1, 2, "S"), Pointing::new(2, 1, "NP")]);
        assert!(matches!(
            validate_pointing(&p).first(),
            Some(Violation::RootLabelMismatch { .. })
        ));
    }

    #[test]
    fn coverage_problems_reported() {
        let p = PointingSet::unlabeled(&[(1, 3), (1, 3), (3, 3)]);
        let d = validate_pointing(&p);
        assert!(d.violations.contains(&Violation::DuplicateQuery(1)));
        assert!(d.violations.contains(&Violation::MissingQuery(2)));
        assert!(d.violations.contains(&Violation::SelfPointing(3)));
        let p = PointingSet::unlabeled(&[(1, 9), (2, 1)]);
        assert!(matches!(
            validate_pointing(&p).first(),
            Some(Violation::TargetOutOfRange { query: 1, target: 9, n: 2 })
        ));
    }

    #[test]
    fn pointing_to_tree_reports_first_violation() {
        let p = PointingSet::unlabeled(&[(1, 4), (2, 3), (3, 4), (4, 1)]);
        let leaves: Vec<_> = (1..=4)
            .map(|i| BinaryLeaf {
                position: i,
                token: format!("w{i}"),
                pos: "X".into(),
                unary: Label::Empty,
            })
            .collect();
        let err = pointing_to_tree(&p, &leaves).unwrap_err();
        assert!(matches!(err, PointingError::Invalid(Violation::Overlap { token: 3, .. })));
        let err = pointing_to_tree(&p, &leaves[..3]).unwrap_err();
        assert!(matches!(err, PointingError::Invalid(Violation::LeafCountMismatch { .. })));
    }

    #[test]
    fn text_format_round_trip() {
        let p = tree_to_pointing(&tennis_example());
        let text = p.to_string();
        assert_eq!(text.lines().next(), Some("1 -> 5 S"));
        assert_eq!(text.lines().nth(1), Some("2 -> 5 ∅"));
        assert_eq!(text.parse::<PointingSet>().unwrap(), p);
        assert!("1 => 2 S".parse::<PointingSet>().is_err());
    }
}
