//! Labeled bracketing scores in the evalb style, and the parsing-speed
//! benchmark.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::time::Instant;

use thiserror::Error;

use crate::decoder::{parse_sentence_with, DecodeError, ParseOptions};
use crate::model::Model;
use crate::treebank::SyntaxTree;

/// POS tags removed by the Collins-style parameter file.
pub const COLLINS_PUNCTUATION: [&str; 5] = [",", ":", "``", "''", "."];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("sentence {sentence}: gold has {gold} tokens, prediction has {pred}")]
    TokenMismatch { sentence: usize, gold: usize, pred: usize },
    #[error("gold has {gold} sentences, prediction has {pred}")]
    LengthMismatch { gold: usize, pred: usize },
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EvalOptions {
    /// POS tags whose tokens are deleted from both trees before comparison.
    pub punct_exclude: BTreeSet<String>,
}

impl EvalOptions {
    pub fn collins() -> Self {
        EvalOptions {
            punct_exclude: COLLINS_PUNCTUATION.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Per-sentence bracket counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SpanCounts {
    pub length: usize,
    pub matched: usize,
    pub gold: usize,
    pub pred: usize,
}

impl SpanCounts {
    pub fn is_exact(&self) -> bool {
        self.matched == self.gold && self.matched == self.pred
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EvalResult {
    pub matched: usize,
    pub gold_total: usize,
    pub pred_total: usize,
    pub lp: f64,
    pub lr: f64,
    pub f1: f64,
    pub exact_match: usize,
    pub sentences: usize,
}

impl EvalResult {
    /// Micro-averaged scores over sentence counts.
    pub fn from_counts(counts: &[SpanCounts]) -> Self {
        let matched = counts.iter().map(|c| c.matched).sum();
        let gold_total = counts.iter().map(|c| c.gold).sum();
        let pred_total = counts.iter().map(|c| c.pred).sum();
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let lp = ratio(matched, pred_total);
        let lr = ratio(matched, gold_total);
        let f1 = if lp + lr > 0.0 { 2.0 * lp * lr / (lp + lr) } else { 0.0 };
        EvalResult {
            matched,
            gold_total,
            pred_total,
            lp,
            lr,
            f1,
            exact_match: counts.iter().filter(|c| c.is_exact()).count(),
            sentences: counts.len(),
        }
    }
}

impl fmt::Display for EvalResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "sentences\t{}", self.sentences)?;
        writeln!(f, "matched\t{}", self.matched)?;
        writeln!(f, "gold\t{}", self.gold_total)?;
        writeln!(f, "pred\t{}", self.pred_total)?;
        writeln!(f, "LP\t{:.4}", self.lp)?;
        writeln!(f, "LR\t{:.4}", self.lr)?;
        writeln!(f, "F1\t{:.4}", self.f1)?;
        write!(f, "exact\t{}", self.exact_match)
    }
}

/// Removes tokens whose POS is excluded; nodes left empty disappear.
fn strip(tree: &SyntaxTree, exclude: &BTreeSet<String>) -> Option<SyntaxTree> {
    match tree {
        SyntaxTree::Leaf { pos, .. } => (!exclude.contains(pos)).then(|| tree.clone()),
        SyntaxTree::Node { label, children } => {
            let kept: Vec<SyntaxTree> = children.iter().filter_map(|c| strip(c, exclude)).collect();
            (!kept.is_empty()).then(|| SyntaxTree::node(label.clone(), kept))
        }
    }
}

fn span_bag(tree: &SyntaxTree, options: &EvalOptions) -> HashMap<(usize, usize, String), usize> {
    let mut bag = HashMap::new();
    let stripped = if options.punct_exclude.is_empty() {
        Some(tree.clone())
    } else {
        strip(tree, &options.punct_exclude)
    };
    if let Some(t) = stripped {
        for span in t.labeled_spans() {
            *bag.entry(span).or_insert(0) += 1;
        }
    }
    bag
}

/// Compares the multisets of labeled spans of two trees over the same tokens.
pub fn eval_spans(gold: &SyntaxTree, pred: &SyntaxTree, options: &EvalOptions) -> Result<SpanCounts, EvalError> {
    if gold.len() != pred.len() {
        return Err(EvalError::TokenMismatch {
            sentence: 1,
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    let g = span_bag(gold, options);
    let p = span_bag(pred, options);
    let matched = g
        .iter()
        .map(|(span, &c)| c.min(p.get(span).copied().unwrap_or(0)))
        .sum();
    Ok(SpanCounts {
        length: gold.len(),
        matched,
        gold: g.values().sum(),
        pred: p.values().sum(),
    })
}

/// Scores aligned corpora; also returns the per-sentence counts.
pub fn corpus_eval(
    gold: &[SyntaxTree],
    pred: &[SyntaxTree],
    options: &EvalOptions,
) -> Result<(EvalResult, Vec<SpanCounts>), EvalError> {
    if gold.len() != pred.len() {
        return Err(EvalError::LengthMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    let counts = gold
        .iter()
        .zip(pred)
        .enumerate()
        .map(|(s, (g, p))| {
            eval_spans(g, p, options).map_err(|e| match e {
                EvalError::TokenMismatch { gold, pred, .. } => EvalError::TokenMismatch {
                    sentence: s + 1,
                    gold,
                    pred,
                },
                other => other,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((EvalResult::from_counts(&counts), counts))
}

/// Per-sentence lines (`id`, length, matched, gold, pred) followed by the
/// summary, all tab-separated.
pub fn format_report(result: &EvalResult, per_sentence: Option<&[SpanCounts]>) -> String {
    let mut out = String::new();
    if let Some(counts) = per_sentence {
        out.push_str("id\tlength\tmatched\tgold\tpred\n");
        for (i, c) in counts.iter().enumerate() {
            out.push_str(&format!("{}\t{}\t{}\t{}\t{}\n", i + 1, c.length, c.matched, c.gold, c.pred));
        }
    }
    out.push_str(&result.to_string());
    out.push('\n');
    out
}

/// Right-branching baseline: `(root w1 (inner w2 (inner ... (inner wn-1 wn))))`
/// with the most frequent root label and the most frequent label of the
/// other multi-token constituents in a training corpus.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RightBranching {
    pub root: String,
    pub inner: String,
}

fn most_frequent(counts: BTreeMap<String, usize>, fallback: &str) -> String {
    // Ties go to the lexicographically smallest label.
    counts
        .into_iter()
        .fold(None, |best: Option<(String, usize)>, (l, c)| match best {
            Some((_, b)) if b >= c => best,
            _ => Some((l, c)),
        })
        .map_or_else(|| fallback.to_string(), |(l, _)| l)
}

impl RightBranching {
    pub fn from_trees(trees: &[SyntaxTree]) -> Self {
        let mut roots = BTreeMap::new();
        let mut inner = BTreeMap::new();
        for t in trees {
            if let SyntaxTree::Node { label, .. } = t {
                *roots.entry(label.clone()).or_insert(0) += 1;
            }
            for (k, (i, j, label)) in t.labeled_spans().into_iter().enumerate() {
                // The first span in pre-order is the root.
                if k > 0 && j > i {
                    *inner.entry(label).or_insert(0) += 1;
                }
            }
        }
        let root = most_frequent(roots, "S");
        let inner = most_frequent(inner, &root);
        RightBranching { root, inner }
    }

    pub fn parse(&self, tokens: &[(&str, &str)]) -> SyntaxTree {
        let leaf = |&(w, p): &(&str, &str)| SyntaxTree::leaf(p, w);
        let n = tokens.len();
        if n <= 1 {
            return SyntaxTree::node(self.root.clone(), tokens.iter().map(leaf).collect());
        }
        let mut tree = SyntaxTree::node(self.inner.clone(), vec![leaf(&tokens[n - 2]), leaf(&tokens[n - 1])]);
        for i in (1..n - 2).rev() {
            tree = SyntaxTree::node(self.inner.clone(), vec![leaf(&tokens[i]), tree]);
        }
        if n == 2 {
            return SyntaxTree::node(self.root.clone(), tokens.iter().map(leaf).collect());
        }
        SyntaxTree::node(self.root.clone(), vec![leaf(&tokens[0]), tree])
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BenchResult {
    pub sentences: usize,
    pub tokens: usize,
    pub seconds: f64,
    pub sents_per_sec: f64,
    /// Total split-score evaluations across all sentences.
    pub work: usize,
}

impl fmt::Display for BenchResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "sentences\t{}", self.sentences)?;
        writeln!(f, "tokens\t{}", self.tokens)?;
        writeln!(f, "seconds\t{:.6}", self.seconds)?;
        writeln!(f, "sents_per_sec\t{:.2}", self.sents_per_sec)?;
        write!(f, "split_work\t{}", self.work)
    }
}

/// Parses sentences one at a time and times the whole run.
pub fn speed_benchmark(
    sentences: &[Vec<(String, String)>],
    model: &Model,
    options: &ParseOptions,
) -> Result<BenchResult, DecodeError> {
    if sentences.is_empty() {
        return Ok(BenchResult::default());
    }
    let start = Instant::now();
    let mut work = 0;
    let mut tokens = 0;
    for s in sentences {
        let pairs: Vec<(&str, &str)> = s.iter().map(|(w, p)| (w.as_str(), p.as_str())).collect();
        let (_, w) = parse_sentence_with(&pairs, &model.params, &model.vocab, options)?;
        work += w;
        tokens += s.len();
    }
    let seconds = start.elapsed().as_secs_f64();
    Ok(BenchResult {
        sentences: sentences.len(),
        tokens,
        seconds,
        sents_per_sec: sentences.len() as f64 / seconds.max(f64::MIN_POSITIVE),
        work,
    })
}
