use super::{BinaryLeaf, BinaryTree, Label, SyntaxTree};

pub const DEFAULT_DELIMITER: &str = "+";
pub const DEFAULT_FALLBACK_ROOT: &str = "TOP";

/// Right-branching binarization with unary-chain collapsing.
///
/// A node with children `c1..cm` (`m > 2`) becomes `c1` paired with a `∅`
/// node over `c2..cm`. Unary chains above an internal node become one atomic
/// label joined by `delimiter`; chains directly above a preterminal become
/// the leaf's unary label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Binarizer {
    pub delimiter: String,
    /// Root label used when debinarizing a tree whose root is `∅`.
    pub fallback_root: String,
}

impl Default for Binarizer {
    fn default() -> Self {
        Binarizer {
            delimiter: DEFAULT_DELIMITER.to_string(),
            fallback_root: DEFAULT_FALLBACK_ROOT.to_string(),
        }
    }
}

impl Binarizer {
    pub fn new(delimiter: impl Into<String>) -> Self {
        Binarizer {
            delimiter: delimiter.into(),
            ..Default::default()
        }
    }

    pub fn binarize(&self, tree: &SyntaxTree) -> BinaryTree {
        let mut next = 1;
        self.bin(tree, &mut Vec::new(), &mut next)
    }

    /// `chain` holds the labels of enclosing unary nodes not yet attached.
    fn bin<'a>(&self, tree: &'a SyntaxTree, chain: &mut Vec<&'a str>, next: &mut usize) -> BinaryTree {
        match tree {
            SyntaxTree::Leaf { pos, token } => {
                let unary = self.collapse(chain);
                let position = *next;
                *next += 1;
                BinaryTree::Leaf(BinaryLeaf {
                    position,
                    token: token.clone(),
                    pos: pos.clone(),
                    unary,
                })
            }
            SyntaxTree::Node { label, children } if children.len() == 1 => {
                chain.push(label);
                self.bin(&children[0], chain, next)
            }
            SyntaxTree::Node { label, children } => {
                chain.push(label);
                let label = self.collapse(chain);
                let mut bins: Vec<BinaryTree> = children
                    .iter()
                    .map(|c| self.bin(c, &mut Vec::new(), next))
                    .collect();
                let mut right = bins.pop().expect("node has children");
                while bins.len() > 1 {
                    let left = bins.pop().expect("checked length");
                    right = BinaryTree::node(Label::Empty, left, right);
                }
                let left = bins.pop().expect("at least two children");
                BinaryTree::node(label, left, right)
            }
        }
    }

    fn collapse(&self, chain: &mut Vec<&str>) -> Label {
        if chain.is_empty() {
            Label::Empty
        } else {
            let joined = chain.join(&self.delimiter);
            chain.clear();
            Label::Named(joined)
        }
    }

    /// Inverse of [`Binarizer::binarize`]: dissolves `∅` nodes and expands
    /// collapsed labels back into unary chains.
    pub fn debinarize(&self, tree: &BinaryTree) -> SyntaxTree {
        match tree {
            BinaryTree::Leaf(leaf) => {
                let pre = SyntaxTree::Leaf {
                    pos: leaf.pos.clone(),
                    token: leaf.token.clone(),
                };
                self.expand(&leaf.unary, vec![pre])
            }
            BinaryTree::Node { label, left, right } => {
                let mut children = Vec::new();
                self.splice(left, &mut children);
                self.splice(right, &mut children);
                match label {
                    Label::Empty => SyntaxTree::Node {
                        label: self.fallback_root.clone(),
                        children,
                    },
                    named => self.expand(named, children),
                }
            }
        }
    }

    fn splice(&self, tree: &BinaryTree, out: &mut Vec<SyntaxTree>) {
        match tree {
            BinaryTree::Node {
                label: Label::Empty,
                left,
                right,
            } => {
                self.splice(left, out);
                self.splice(right, out);
            }
            other => out.push(self.debinarize(other)),
        }
    }

    /// Wraps `children` in the chain encoded by `label`, outermost first.
    fn expand(&self, label: &Label, children: Vec<SyntaxTree>) -> SyntaxTree {
        match label {
            Label::Empty => {
                debug_assert_eq!(children.len(), 1);
                children.into_iter().next().expect("single child")
            }
            Label::Named(s) => {
                let mut node = children;
                for part in s.rsplit(self.delimiter.as_str()) {
                    node = vec![SyntaxTree::Node {
                        label: part.to_string(),
                        children: node,
                    }];
                }
                node.pop().expect("at least one part")
            }
        }
    }
}

/// [`Binarizer::binarize`] with the default `+` delimiter.
pub fn binarize(tree: &SyntaxTree) -> BinaryTree {
    Binarizer::default().binarize(tree)
}

/// [`Binarizer::debinarize`] with the default delimiter and `TOP` fallback.
pub fn debinarize(tree: &BinaryTree) -> SyntaxTree {
    Binarizer::default().debinarize(tree)
}
