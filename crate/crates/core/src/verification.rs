//! Independent oracles: exhaustive tree enumeration, pointing round trips,
//! a recursive reference decoder, score tables with known decodes, and a
//! property runner for the command line.

use std::fmt;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::decoder::{decode, DecodeOptions};
use crate::evaluation::{eval_spans, EvalOptions};
use crate::model::ScoreTables;
use crate::pointing::{pointing_to_tree, tree_to_pointing, validate_pointing, PointingSet};
use crate::synth::generate_treebank;
use crate::treebank::{binarize, debinarize, BinaryLeaf, BinaryTree, Label};

pub const MAX_ENUMERATION: usize = 12;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VerificationError {
    #[error("leaf count {n} is outside 2..={max}")]
    OutOfRange { n: usize, max: usize },
    #[error("label pool is empty")]
    EmptyPool,
}

/// `Catalan(k) = C(2k, k) / (k + 1)`.
pub fn catalan(k: usize) -> u64 {
    (0..k as u64).fold(1u64, |c, i| c * 2 * (2 * i + 1) / (i + 2))
}

/// Unlabeled tree shape.
#[derive(Clone, Debug)]
enum Shape {
    Leaf,
    Node(Box<Shape>, Box<Shape>),
}

fn shapes(n: usize) -> Vec<Shape> {
    let mut table: Vec<Vec<Shape>> = vec![Vec::new(), vec![Shape::Leaf]];
    for size in 2..=n {
        let mut all = Vec::new();
        for left in 1..size {
            for l in &table[left] {
                for r in &table[size - left] {
                    all.push(Shape::Node(Box::new(l.clone()), Box::new(r.clone())));
                }
            }
        }
        table.push(all);
    }
    table.swap_remove(n)
}

fn label_shape(shape: &Shape, next: &mut usize, pool: &[Label], rng: &mut ChaCha8Rng) -> BinaryTree {
    match shape {
        Shape::Leaf => {
            *next += 1;
            let unary = pool.choose(rng).expect("nonempty pool").clone();
            BinaryTree::leaf(*next, format!("w{next}"), "X", unary)
        }
        Shape::Node(l, r) => {
            let label = pool.choose(rng).expect("nonempty pool").clone();
            let left = label_shape(l, next, pool, rng);
            let right = label_shape(r, next, pool, rng);
            BinaryTree::node(label, left, right)
        }
    }
}

/// Every binary tree shape over `n` leaves exactly once, with node and
/// unary labels drawn from `label_pool` by a seeded generator.
pub fn enumerate_binary_trees(n: usize, label_pool: &[Label], seed: u64) -> Result<Vec<BinaryTree>, VerificationError> {
    if !(2..=MAX_ENUMERATION).contains(&n) {
        return Err(VerificationError::OutOfRange {
            n,
            max: MAX_ENUMERATION,
        });
    }
    if label_pool.is_empty() {
        return Err(VerificationError::EmptyPool);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(shapes(n)
        .iter()
        .map(|s| label_shape(s, &mut 0, label_pool, &mut rng))
        .collect())
}

/// A small pool including the empty label and chained labels.
pub fn default_label_pool() -> Vec<Label> {
    ["∅", "S", "NP", "VP", "PP", "S+VP", "SBAR"]
        .iter()
        .map(|s| Label::from_text(s))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoundtripReport {
    pub n_max: usize,
    pub checked: usize,
    pub mismatches: usize,
    /// Description of the first failing tree.
    pub first_counterexample: Option<String>,
}

impl RoundtripReport {
    pub fn passed(&self) -> bool {
        self.mismatches == 0
    }
}

/// Tree to pointing to tree over every shape with `2 <= n <= n_max`.
pub fn roundtrip_report(n_max: usize) -> Result<RoundtripReport, VerificationError> {
    roundtrip_report_with(n_max, 0, |_| {})
}

/// Like [`roundtrip_report`], applying `corrupt` to each pointing set
/// before inverting it.
pub fn roundtrip_report_with(
    n_max: usize,
    seed: u64,
    corrupt: impl Fn(&mut PointingSet),
) -> Result<RoundtripReport, VerificationError> {
    let pool = default_label_pool();
    let mut report = RoundtripReport {
        n_max,
        checked: 0,
        mismatches: 0,
        first_counterexample: None,
    };
    for n in 2..=n_max {
        for tree in enumerate_binary_trees(n, &pool, seed.wrapping_add(n as u64))? {
            report.checked += 1;
            let mut p = tree_to_pointing(&tree);
            corrupt(&mut p);
            let leaves: Vec<BinaryLeaf> = tree.leaves().into_iter().cloned().collect();
            let back = pointing_to_tree(&p, &leaves);
            if back.as_ref() != Ok(&tree) {
                report.mismatches += 1;
                if report.first_counterexample.is_none() {
                    let got = match back {
                        Ok(t) => t.spans().to_string(),
                        Err(e) => e.to_string(),
                    };
                    report.first_counterexample =
                        Some(format!("tree {} -> pointing {} -> {}", tree.spans(), p.to_string().replace('\n', "; "), got));
                }
            }
        }
    }
    Ok(report)
}

fn ref_argmax(row: ndarray::ArrayView1<f64>) -> usize {
    let mut best = 0;
    let mut k = 1;
    while k < row.len() {
        if row[k] > row[best] {
            best = k;
        }
        k += 1;
    }
    best
}

fn ref_split(t: &ScoreTables, i: usize, j: usize) -> usize {
    // 1-based bounds; rows and columns of the tables are 0-based.
    let mut best_k = i;
    let mut best = f64::NEG_INFINITY;
    for k in i..j {
        let left = if k == i { t.sp[[i - 1, i - 1]] } else { t.gp[[k - 1, i - 1]] };
        let right = if k + 1 == j { t.sp[[j - 1, j - 1]] } else { t.gp[[k, j - 1]] };
        let s = left + right;
        if s > best {
            best = s;
            best_k = k;
        }
    }
    best_k
}

fn ref_rec(
    t: &ScoreTables,
    i: usize,
    j: usize,
    label: usize,
    tokens: &[(&str, &str)],
    general: &[Label],
    unary: &[Label],
) -> BinaryTree {
    if i == j {
        let (w, p) = tokens[i - 1];
        return BinaryTree::leaf(i, w, p, unary[ref_argmax(t.uc.row(i - 1))].clone());
    }
    let k = if j == i + 1 { i } else { ref_split(t, i, j) };
    let left = ref_rec(t, i, k, ref_argmax(t.gc.row(k - 1)), tokens, general, unary);
    let right = ref_rec(t, k + 1, j, ref_argmax(t.gc.row(k)), tokens, general, unary);
    BinaryTree::node(general[label].clone(), left, right)
}

/// Plain recursive transcription of the greedy split-and-label rules for
/// the span `(i, j)`; shares no code with the queue-based decoder.
pub fn reference_decode(
    tables: &ScoreTables,
    i: usize,
    j: usize,
    tokens: &[(&str, &str)],
    general: &[Label],
    unary: &[Label],
) -> BinaryTree {
    ref_rec(tables, i, j, ref_argmax(tables.gc.row(i - 1)), tokens, general, unary)
}

fn normalize_rows(mut m: Array2<f64>) -> Array2<f64> {
    for mut row in m.rows_mut() {
        let s = row.sum();
        row /= s;
    }
    m
}

/// Row-stochastic tables with strictly positive entries.
pub fn random_tables(n: usize, general: usize, unary: usize, rng: &mut ChaCha8Rng) -> ScoreTables {
    let mut draw = |r: usize, c: usize| normalize_rows(Array2::from_shape_fn((r, c), |_| rng.gen_range(1e-3..1.0)));
    ScoreTables {
        gp: draw(n, n),
        sp: draw(n, n),
        gc: draw(n, general),
        uc: draw(n, unary),
    }
}

/// Tables peaked at a tree's gold pointing targets, singleton
/// self-pointing, and its labels; uniform elsewhere.
pub fn oracle_tables(tree: &BinaryTree, general: &[Label], unary: &[Label]) -> ScoreTables {
    let n = tree.len();
    let peak = |m: &mut Array2<f64>, row: usize, col: usize| {
        m.row_mut(row).fill(1.0);
        m[[row, col]] = 10.0 * m.ncols() as f64;
    };
    let mut gp = Array2::ones((n, n));
    let mut sp = Array2::ones((n, n));
    let mut gc = Array2::ones((n, general.len()));
    let mut uc = Array2::ones((n, unary.len()));
    for p in &tree_to_pointing(tree).entries {
        peak(&mut gp, p.query - 1, p.target - 1);
        if let Some(l) = general.iter().position(|g| *g == p.label) {
            peak(&mut gc, p.query - 1, l);
        }
    }
    for (i, leaf) in tree.leaves().iter().enumerate() {
        peak(&mut sp, i, i);
        if let Some(l) = unary.iter().position(|u| *u == leaf.unary) {
            peak(&mut uc, i, l);
        }
    }
    ScoreTables {
        gp: normalize_rows(gp),
        sp: normalize_rows(sp),
        gc: normalize_rows(gc),
        uc: normalize_rows(uc),
    }
}

/// Every internal span is `(i, n)`: the decoder always splits at `k = i`.
pub fn chain_tree(n: usize) -> BinaryTree {
    let leaf = |i: usize| BinaryTree::leaf(i, format!("w{i}"), "X", Label::Empty);
    let mut t = leaf(n);
    for i in (1..n).rev() {
        t = BinaryTree::node(Label::named("X"), leaf(i), t);
    }
    t
}

/// Splits every span at its midpoint.
pub fn balanced_tree(n: usize) -> BinaryTree {
    fn build(i: usize, j: usize) -> BinaryTree {
        if i == j {
            return BinaryTree::leaf(i, format!("w{i}"), "X", Label::Empty);
        }
        let k = (i + j) / 2;
        BinaryTree::node(Label::named("X"), build(i, k), build(k + 1, j))
    }
    build(1, n)
}

/// Split-score evaluations a greedy top-down decoder spends on a tree: the
/// sum of `j - i` over its internal spans, computed from the tree alone.
pub fn predicted_work(tree: &BinaryTree) -> usize {
    tree.spans().iter().map(|s| s.end - s.start).sum()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PropertyResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for PropertyResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{status}\t{}\t{}", self.name, self.detail)
    }
}

fn tokens(n: usize) -> Vec<(String, String)> {
    (1..=n).map(|i| (format!("w{i}"), "X".to_string())).collect()
}

fn pairs(t: &[(String, String)]) -> Vec<(&str, &str)> {
    t.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect()
}

fn is_valid_decode(tree: &BinaryTree, n: usize) -> bool {
    let spans = tree.spans();
    tree.len() == n
        && tree.internal_nodes() == n - 1
        && tree.span() == (1, n)
        && spans.is_laminar()
        && tree.has_consecutive_positions()
}

/// Runs the property table at the given level (largest enumerated leaf
/// count, 2..=10); higher levels check more instances.
pub fn run_verification(level: usize) -> Result<Vec<PropertyResult>, VerificationError> {
    if !(2..=10).contains(&level) {
        return Err(VerificationError::OutOfRange { n: level, max: 10 });
    }
    let mut out = Vec::new();
    let mut record = |name: &str, passed: bool, detail: String| {
        out.push(PropertyResult {
            name: name.to_string(),
            passed,
            detail,
        })
    };
    let pool = default_label_pool();

    let mut counts_ok = true;
    for n in 2..=level {
        counts_ok &= enumerate_binary_trees(n, &pool, 1)?.len() as u64 == catalan(n - 1);
    }
    record(
        "enumeration-catalan",
        counts_ok,
        format!("n = 2..={level}, {} shapes at n = {level}", catalan(level - 1)),
    );

    let rt = roundtrip_report(level)?;
    record(
        "pointing-roundtrip",
        rt.passed(),
        match &rt.first_counterexample {
            None => format!("{} trees, 0 mismatches", rt.checked),
            Some(c) => format!("{} mismatches; first: {c}", rt.mismatches),
        },
    );

    let mut valid = true;
    for n in 2..=level {
        for tree in enumerate_binary_trees(n, &pool, 2)? {
            valid &= validate_pointing(&tree_to_pointing(&tree)).is_valid();
        }
    }
    record("pointing-validity", valid, "every enumerated tree yields a valid set".into());

    let instances = 50 * level;
    let mut rng = ChaCha8Rng::seed_from_u64(level as u64);
    let mut decode_failures = 0;
    let mut oracle_mismatches = 0;
    for _ in 0..instances {
        let n = rng.gen_range(2..=(6 * level).max(3));
        let t = random_tables(n, pool.len(), pool.len(), &mut rng);
        let toks = tokens(n);
        match decode(&t, &pairs(&toks), &pool, &pool, DecodeOptions::default()) {
            Ok(d) => {
                decode_failures += usize::from(!is_valid_decode(&d.tree, n));
                oracle_mismatches += usize::from(d.tree != reference_decode(&t, 1, n, &pairs(&toks), &pool, &pool));
            }
            Err(_) => decode_failures += 1,
        }
    }
    record(
        "decode-validity",
        decode_failures == 0,
        format!("{instances} random tables, {decode_failures} failures"),
    );
    record(
        "decode-reference",
        oracle_mismatches == 0,
        format!("{instances} random tables, {oracle_mismatches} mismatches"),
    );

    let mut recovered = 0;
    let mut total = 0;
    for n in 2..=level.min(8) {
        for tree in enumerate_binary_trees(n, &pool, 3)? {
            let toks: Vec<(String, String)> = tree.leaves().iter().map(|l| (l.token.clone(), l.pos.clone())).collect();
            let t = oracle_tables(&tree, &pool, &pool);
            total += 1;
            if let Ok(d) = decode(&t, &pairs(&toks), &pool, &pool, DecodeOptions::default()) {
                recovered += usize::from(d.tree == tree);
            }
        }
    }
    record(
        "decode-oracle-tables",
        recovered == total,
        format!("{recovered}/{total} trees recovered"),
    );

    let n = 1usize << (level - 1).clamp(4, 9);
    let label = [Label::named("X")];
    let empty = [Label::Empty];
    let toks = tokens(n);
    let work = |tree: &BinaryTree| {
        decode(&oracle_tables(tree, &label, &empty), &pairs(&toks), &label, &empty, DecodeOptions::default())
            .map(|d| d.work)
            .unwrap_or(usize::MAX)
    };
    let chain = work(&chain_tree(n));
    let balanced = work(&balanced_tree(n));
    let bound = 2.0 * n as f64 * (n as f64).log2();
    record(
        "work-bounds",
        chain == n * (n - 1) / 2 && (balanced as f64) <= bound,
        format!("n = {n}: chain {chain} (expected {}), balanced {balanced} (bound {bound:.0})", n * (n - 1) / 2),
    );

    let trees = generate_treebank(20 * level, level as u64, 40);
    let perfect = trees.iter().all(|t| {
        eval_spans(t, &debinarize(&binarize(t)), &EvalOptions::default()).is_ok_and(|c| c.is_exact())
    });
    record(
        "binarize-eval-identity",
        perfect,
        format!("{} generated trees", trees.len()),
    );
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalan_numbers() {
        let known = [1u64, 1, 2, 5, 14, 42, 132, 429, 1430, 4862, 16796, 58786];
        for (k, &c) in known.iter().enumerate() {
            assert_eq!(catalan(k), c);
        }
    }

    #[test]
    fn enumeration_counts_and_distinctness() {
        let pool = default_label_pool();
        for n in 2..=9 {
            let trees = enumerate_binary_trees(n, &pool, 1).unwrap();
            assert_eq!(trees.len() as u64, catalan(n - 1));
            let mut shapes: Vec<Vec<(usize, usize)>> =
                trees.iter().map(|t| t.spans().sorted().iter().map(|s| s.bounds()).collect()).collect();
            shapes.sort();
            shapes.dedup();
            assert_eq!(shapes.len(), trees.len());
        }
        assert_eq!(enumerate_binary_trees(3, &pool, 1).unwrap().len(), 2);
    }

    #[test]
    fn enumeration_is_seeded() {
        let pool = default_label_pool();
        assert_eq!(enumerate_binary_trees(6, &pool, 4), enumerate_binary_trees(6, &pool, 4));
        assert_ne!(enumerate_binary_trees(6, &pool, 4), enumerate_binary_trees(6, &pool, 5));
    }

    #[test]
    fn enumeration_range() {
        let pool = default_label_pool();
        assert!(enumerate_binary_trees(1, &pool, 0).is_err());
        assert!(enumerate_binary_trees(13, &pool, 0).is_err());
        assert_eq!(enumerate_binary_trees(4, &[], 0), Err(VerificationError::EmptyPool));
    }

    #[test]
    fn roundtrip_small_and_fault_injection() {
        let r = roundtrip_report(2).unwrap();
        assert_eq!((r.checked, r.mismatches), (1, 0));
        let r = roundtrip_report(7).unwrap();
        assert!(r.passed());
        assert_eq!(r.checked as u64, (1..=6).map(catalan).sum::<u64>());

        let r = roundtrip_report_with(5, 0, |p| {
            p.entries[0].label = Label::named("CORRUPT");
        })
        .unwrap();
        assert_eq!(r.mismatches, r.checked);
        assert!(r.first_counterexample.unwrap().contains("CORRUPT"));
    }

    #[test]
    fn reference_decode_basics() {
        let pool = default_label_pool();
        let toks = tokens(2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = random_tables(2, pool.len(), pool.len(), &mut rng);
        let tree = reference_decode(&t, 1, 2, &pairs(&toks), &pool, &pool);
        assert_eq!(tree.internal_nodes(), 1);

        let n = 7;
        let toks = tokens(n);
        let uniform = ScoreTables {
            gp: Array2::from_elem((n, n), 1.0 / n as f64),
            sp: Array2::from_elem((n, n), 1.0 / n as f64),
            gc: Array2::from_elem((n, 2), 0.5),
            uc: Array2::from_elem((n, 2), 0.5),
        };
        let labels = [Label::named("A"), Label::named("B")];
        let tree = reference_decode(&uniform, 1, n, &pairs(&toks), &labels, &labels);
        let spans: Vec<(usize, usize)> = tree.spans().iter().map(|s| s.bounds()).collect();
        assert_eq!(spans, (1..n).map(|i| (i, n)).collect::<Vec<_>>());
    }

    #[test]
    fn oracle_tables_recover_trees() {
        let pool = default_label_pool();
        for n in 2..=7 {
            for tree in enumerate_binary_trees(n, &pool, 9).unwrap() {
                let toks: Vec<(String, String)> = tree.leaves().iter().map(|l| (l.token.clone(), l.pos.clone())).collect();
                let t = oracle_tables(&tree, &pool, &pool);
                assert!(t.is_row_stochastic(1e-12));
                let d = decode(&t, &pairs(&toks), &pool, &pool, DecodeOptions::default()).unwrap();
                assert_eq!(d.tree, tree);
                assert_eq!(d.work, predicted_work(&tree));
            }
        }
    }

    #[test]
    fn work_closed_forms() {
        assert_eq!(predicted_work(&chain_tree(512)), 130_816);
        let balanced = predicted_work(&balanced_tree(512));
        assert!(balanced as f64 <= 2.0 * 512.0 * 9.0);
        // Each of the 9 levels of a perfect tree covers 512 tokens in
        // disjoint spans of 2^(9-d) tokens.
        let expected: usize = (0..9).map(|d| (1usize << d) * ((512 >> d) - 1)).sum();
        assert_eq!(balanced, expected);
        // Chain over balanced tracks (n / 2) / log2 n within a factor of 2.
        let ratio = 130_816.0 / balanced as f64;
        let predicted = 256.0 / 9.0;
        assert!(ratio / predicted < 2.0 && predicted / ratio < 2.0, "{ratio} vs {predicted}");
    }

    #[test]
    fn verification_level_four_passes() {
        let results = run_verification(4).unwrap();
        for r in &results {
            assert!(r.passed, "{r}");
        }
        assert!(run_verification(11).is_err());
        assert!(run_verification(1).is_err());
    }
}
