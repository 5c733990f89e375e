use log::warn;
use thiserror::Error;

use super::SyntaxTree;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TreebankError {
    #[error("unbalanced parentheses at line {line}, column {column}: {message}")]
    Unbalanced {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("malformed bracketing at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Open,
    Close,
    Atom(String),
}

#[derive(Debug, Clone)]
struct Located {
    tok: Tok,
    line: usize,
    column: usize,
}

fn tokenize(text: &str) -> Vec<Located> {
    let mut out = Vec::new();
    let mut line = 1;
    let mut column = 0;
    let mut atom = String::new();
    let mut atom_at = (1, 1);

    let flush = |atom: &mut String, at: (usize, usize), out: &mut Vec<Located>| {
        if !atom.is_empty() {
            out.push(Located {
                tok: Tok::Atom(std::mem::take(atom)),
                line: at.0,
                column: at.1,
            });
        }
    };

    for ch in text.chars() {
        column += 1;
        match ch {
            '(' | ')' => {
                flush(&mut atom, atom_at, &mut out);
                out.push(Located {
                    tok: if ch == '(' { Tok::Open } else { Tok::Close },
                    line,
                    column,
                });
            }
            c if c.is_whitespace() => {
                flush(&mut atom, atom_at, &mut out);
                if c == '\n' {
                    line += 1;
                    column = 0;
                }
            }
            c => {
                if atom.is_empty() {
                    atom_at = (line, column);
                }
                atom.push(c);
            }
        }
    }
    flush(&mut atom, atom_at, &mut out);
    out
}

/// Raw s-expression before interpretation as a tree.
enum Sexp {
    Atom(String),
    List(Vec<Sexp>, usize, usize),
}

struct Reader {
    toks: Vec<Located>,
    at: usize,
    end: (usize, usize),
}

impl Reader {
    fn list(&mut self) -> Result<Sexp, TreebankError> {
        let open = self.toks[self.at].clone();
        self.at += 1;
        let mut items = Vec::new();
        loop {
            let Some(t) = self.toks.get(self.at).cloned() else {
                return Err(TreebankError::Unbalanced {
                    line: self.end.0,
                    column: self.end.1,
                    message: format!(
                        "'(' opened at line {}, column {} is never closed",
                        open.line, open.column
                    ),
                });
            };
            match t.tok {
                Tok::Open => items.push(self.list()?),
                Tok::Close => {
                    self.at += 1;
                    return Ok(Sexp::List(items, open.line, open.column));
                }
                Tok::Atom(a) => {
                    self.at += 1;
                    items.push(Sexp::Atom(a));
                }
            }
        }
    }
}

/// Labels kept verbatim even though they contain `-`.
const PROTECTED_LABELS: [&str; 3] = ["-NONE-", "-LRB-", "-RRB-"];

/// Drops function tags and trace indices: everything from the first `-` or
/// `=` after the first character.
pub(crate) fn strip_label(label: &str) -> String {
    if PROTECTED_LABELS.contains(&label) {
        return label.to_string();
    }
    match label
        .char_indices()
        .skip(1)
        .find(|&(_, c)| c == '-' || c == '=')
    {
        Some((i, _)) => label[..i].to_string(),
        None => label.to_string(),
    }
}

fn interpret(sexp: Sexp) -> Result<Vec<SyntaxTree>, TreebankError> {
    let Sexp::List(items, line, column) = sexp else {
        unreachable!("top-level items are lists");
    };
    let syntax = |message: &str| TreebankError::Syntax {
        line,
        column,
        message: message.to_string(),
    };
    let mut items = items.into_iter();
    match items.next() {
        None => Err(syntax("empty brackets")),
        // Unlabeled wrapper: `( (S ...) )`.
        Some(first @ Sexp::List(..)) => {
            let mut trees = interpret(first)?;
            for item in items {
                match item {
                    l @ Sexp::List(..) => trees.extend(interpret(l)?),
                    Sexp::Atom(a) => {
                        return Err(syntax(&format!("unexpected token '{}' in unlabeled bracket", a)))
                    }
                }
            }
            Ok(trees)
        }
        Some(Sexp::Atom(label)) => {
            let rest: Vec<Sexp> = items.collect();
            if rest.is_empty() {
                return Err(syntax(&format!("bracket '{}' has no children", label)));
            }
            let atoms = rest.iter().filter(|s| matches!(s, Sexp::Atom(_))).count();
            if atoms > 0 {
                if rest.len() != 1 {
                    return Err(syntax(&format!(
                        "preterminal '{}' must dominate exactly one token",
                        label
                    )));
                }
                let Some(Sexp::Atom(token)) = rest.into_iter().next() else {
                    unreachable!()
                };
                return Ok(vec![SyntaxTree::Leaf { pos: label, token }]);
            }
            let mut children = Vec::with_capacity(rest.len());
            for c in rest {
                children.extend(interpret(c)?);
            }
            Ok(vec![SyntaxTree::Node {
                label: strip_label(&label),
                children,
            }])
        }
    }
}

/// Removes `-NONE-` leaves and any nonterminal left without children.
fn prune_empty(tree: SyntaxTree) -> Option<SyntaxTree> {
    match tree {
        SyntaxTree::Leaf { ref pos, .. } if pos == "-NONE-" => None,
        leaf @ SyntaxTree::Leaf { .. } => Some(leaf),
        SyntaxTree::Node { label, children } => {
            let children: Vec<_> = children.into_iter().filter_map(prune_empty).collect();
            if children.is_empty() {
                None
            } else {
                Some(SyntaxTree::Node { label, children })
            }
        }
    }
}

/// Reads zero or more PTB-style bracketed trees.
///
/// Nonterminal labels lose function tags and trace indices, `-NONE-` empty
/// elements are removed, and trees left empty afterwards are skipped with a
/// warning.
pub fn parse_bracketed(text: &str) -> Result<Vec<SyntaxTree>, TreebankError> {
    let toks = tokenize(text);
    let end = toks.last().map(|t| (t.line, t.column)).unwrap_or((1, 1));
    let mut reader = Reader { toks, at: 0, end };
    let mut trees = Vec::new();
    while let Some(t) = reader.toks.get(reader.at).cloned() {
        match t.tok {
            Tok::Open => {
                for tree in interpret(reader.list()?)? {
                    match prune_empty(tree) {
                        Some(tree) => trees.push(tree),
                        None => warn!(
                            "skipping tree at line {}, column {}: empty after removing -NONE- elements",
                            t.line, t.column
                        ),
                    }
                }
            }
            Tok::Close => {
                return Err(TreebankError::Unbalanced {
                    line: t.line,
                    column: t.column,
                    message: "')' without matching '('".into(),
                })
            }
            Tok::Atom(a) => {
                return Err(TreebankError::Syntax {
                    line: t.line,
                    column: t.column,
                    message: format!("token '{}' outside of any bracket", a),
                })
            }
        }
    }
    Ok(trees)
}

/// Canonical single-line bracketing.
pub fn write_bracketed(tree: &SyntaxTree) -> String {
    let mut out = String::new();
    write_into(tree, &mut out);
    out
}

fn write_into(tree: &SyntaxTree, out: &mut String) {
    match tree {
        SyntaxTree::Leaf { pos, token } => {
            out.push('(');
            out.push_str(pos);
            out.push(' ');
            out.push_str(token);
            out.push(')');
        }
        SyntaxTree::Node { label, children } => {
            out.push('(');
            out.push_str(label);
            for c in children {
                out.push(' ');
                write_into(c, out);
            }
            out.push(')');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TENNIS_EXAMPLE: &str =
        "(S (NP (PRP She)) (VP (VBZ enjoys) (S (VP (VBG playing) (NP (NN tennis))))) (. .))";

    #[test]
    fn reads_tennis_example_sentence() {
        let trees = parse_bracketed(TENNIS_EXAMPLE).unwrap();
        assert_eq!(trees.len(), 1);
        let SyntaxTree::Node { label, .. } = &trees[0] else {
            panic!("expected a node")
        };
        assert_eq!(label, "S");
        let words: Vec<_> = trees[0].leaves().iter().map(|l| l.0).collect();
        assert_eq!(words, ["She", "enjoys", "playing", "tennis", "."]);
    }

    #[test]
    fn minimal_wrapped_tree() {
        let trees = parse_bracketed("((X (T a)))").unwrap();
        assert_eq!(
            trees,
            vec![SyntaxTree::node("X", vec![SyntaxTree::leaf("T", "a")])]
        );
    }

    #[test]
    fn unbalanced_input_reports_position() {
        let err = parse_bracketed("(S (NP").unwrap_err();
        assert!(matches!(err, TreebankError::Unbalanced { line: 1, .. }), "{err}");
        let err = parse_bracketed("(S (NP (NN a)))\n)").unwrap_err();
        assert_eq!(
            err,
            TreebankError::Unbalanced {
                line: 2,
                column: 1,
                message: "')' without matching '('".into()
            }
        );
    }

    #[test]
    fn strips_function_tags_and_traces() {
        assert_eq!(strip_label("NP-SBJ-1"), "NP");
        assert_eq!(strip_label("NP=2"), "NP");
        assert_eq!(strip_label("PRP$"), "PRP$");
        assert_eq!(strip_label("-NONE-"), "-NONE-");
        assert_eq!(strip_label("-LRB-"), "-LRB-");
        let t = parse_bracketed("( (S-TPC-2 (NP-SBJ (PRP It)) (VP (VBZ is))) )").unwrap();
        assert_eq!(write_bracketed(&t[0]), "(S (NP (PRP It)) (VP (VBZ is)))");
    }

    #[test]
    fn removes_empty_elements() {
        let t = parse_bracketed("(S (NP-SBJ (-NONE- *T*-1)) (VP (VB go)) (. .))").unwrap();
        assert_eq!(write_bracketed(&t[0]), "(S (VP (VB go)) (. .))");
        // A tree that is nothing but empty elements is dropped.
        let t = parse_bracketed("(S (NP (-NONE- *)))\n(X (T a))").unwrap();
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn several_trees_across_lines() {
        let text = "(S (NP (NN a))\n   (VP (VB b)))\n\n( (X (T c)) )\n";
        let t = parse_bracketed(text).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(write_bracketed(&t[1]), "(X (T c))");
        assert!(parse_bracketed("   \n").unwrap().is_empty());
    }

    #[test]
    fn writer_round_trip() {
        let t = parse_bracketed(TENNIS_EXAMPLE).unwrap();
        assert_eq!(write_bracketed(&t[0]), TENNIS_EXAMPLE);
        assert_eq!(parse_bracketed(&write_bracketed(&t[0])).unwrap(), t);
        let single = SyntaxTree::node("X", vec![SyntaxTree::leaf("T", "a")]);
        assert_eq!(write_bracketed(&single), "(X (T a))");
        let collapsed = SyntaxTree::node("S+VP", vec![SyntaxTree::leaf("VB", "go")]);
        assert_eq!(write_bracketed(&collapsed), "(S+VP (VB go))");
    }

    #[test]
    fn rejects_mixed_children() {
        assert!(matches!(
            parse_bracketed("(NP a (NN b))"),
            Err(TreebankError::Syntax { .. })
        ));
        assert!(matches!(parse_bracketed("()"), Err(TreebankError::Syntax { .. })));
        assert!(matches!(parse_bracketed("word"), Err(TreebankError::Syntax { .. })));
    }
}
