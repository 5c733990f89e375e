use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ptrparse::decoder::{decode, DecodeOptions};
use ptrparse::evaluation::{corpus_eval, EvalOptions};
use ptrparse::pointing::{pointing_to_tree, tree_to_pointing, validate_pointing};
use ptrparse::synth::generate_treebank;
use ptrparse::treebank::{
    binarize, debinarize, parse_bracketed, spans_cross, write_bracketed, BinaryTree, Label, SyntaxTree,
};
use ptrparse::verification::{default_label_pool, oracle_tables, random_tables, reference_decode};

fn random_tree(n: usize, seed: u64) -> BinaryTree {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool = default_label_pool();
    let unary = [Label::Empty, Label::named("NP"), Label::named("S+VP")];
    fn build(i: usize, j: usize, rng: &mut ChaCha8Rng, pool: &[Label], unary: &[Label]) -> BinaryTree {
        if i == j {
            let u = unary[rng.gen_range(0..unary.len())].clone();
            return BinaryTree::leaf(i, format!("w{i}"), "NN", u);
        }
        let k = rng.gen_range(i..j);
        let label = pool[rng.gen_range(0..pool.len())].clone();
        BinaryTree::node(label, build(i, k, rng, pool, unary), build(k + 1, j, rng, pool, unary))
    }
    build(1, n, &mut rng, &pool, &unary)
}

fn tokens_of(tree: &BinaryTree) -> Vec<(String, String)> {
    tree.leaves().iter().map(|l| (l.token.clone(), l.pos.clone())).collect()
}

fn unlabeled_spans(tree: &BinaryTree) -> Vec<(usize, usize)> {
    let mut s: Vec<_> = tree.spans().iter().map(|s| s.bounds()).collect();
    s.sort();
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn pointing_round_trips(n in 2usize..40, seed in any::<u64>()) {
        let tree = random_tree(n, seed);
        let p = tree_to_pointing(&tree);
        prop_assert_eq!(p.len(), n);
        prop_assert!(validate_pointing(&p).is_valid());
        let leaves: Vec<_> = tree.leaves().into_iter().cloned().collect();
        prop_assert_eq!(pointing_to_tree(&p, &leaves).unwrap(), tree);
    }

    #[test]
    fn binary_spans_are_laminar(n in 1usize..40, seed in any::<u64>()) {
        let tree = random_tree(n, seed);
        let spans = tree.spans();
        prop_assert_eq!(spans.len(), n - 1);
        prop_assert!(spans.is_laminar());
        let b = unlabeled_spans(&tree);
        for x in &b {
            for y in &b {
                prop_assert!(!spans_cross(*x, *y));
            }
        }
    }

    #[test]
    fn bracketed_and_binarized_round_trip(seed in any::<u64>()) {
        for t in generate_treebank(5, seed, 25) {
            let text = write_bracketed(&t);
            prop_assert_eq!(parse_bracketed(&text).unwrap(), vec![t.clone()]);
            prop_assert_eq!(debinarize(&binarize(&t)), t);
        }
    }

    #[test]
    fn decode_matches_reference(n in 2usize..24, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let general = default_label_pool();
        let unary = vec![Label::Empty, Label::named("NP")];
        let tables = random_tables(n, general.len(), unary.len(), &mut rng);
        let words: Vec<String> = (1..=n).map(|i| format!("w{i}")).collect();
        let tokens: Vec<(&str, &str)> = words.iter().map(|w| (w.as_str(), "NN")).collect();
        let decoded = decode(&tables, &tokens, &general, &unary, DecodeOptions::default()).unwrap();
        prop_assert_eq!(decoded.tree.len(), n);
        prop_assert!(decoded.tree.has_consecutive_positions());
        prop_assert!(decoded.tree.spans().is_laminar());
        prop_assert_eq!(decoded.tree.spans().len(), n - 1);
        prop_assert!(decoded.work >= n - 1 && decoded.work <= n * (n - 1) / 2);
        prop_assert_eq!(&decoded.tree, &reference_decode(&tables, 1, n, &tokens, &general, &unary));
        prop_assert!(validate_pointing(&tree_to_pointing(&decoded.tree)).is_valid());
    }

    #[test]
    fn oracle_tables_recover_tree(n in 2usize..30, seed in any::<u64>()) {
        let tree = random_tree(n, seed);
        let general = default_label_pool();
        let unary = vec![Label::Empty, Label::named("NP"), Label::named("S+VP")];
        let tables = oracle_tables(&tree, &general, &unary);
        let owned = tokens_of(&tree);
        let tokens: Vec<(&str, &str)> = owned.iter().map(|(w, p)| (w.as_str(), p.as_str())).collect();
        let decoded = decode(&tables, &tokens, &general, &unary, DecodeOptions::default()).unwrap();
        prop_assert_eq!(decoded.tree, tree);
    }

    #[test]
    fn f1_is_symmetric_and_order_invariant(seed in any::<u64>(), rot in 0usize..8) {
        let gold = generate_treebank(8, seed, 20);
        let pred: Vec<SyntaxTree> = gold
            .iter()
            .enumerate()
            .map(|(i, g)| {
                let shape = random_tree(g.len(), seed.wrapping_add(i as u64));
                let mut b = binarize(g);
                // Same tokens and labels in a random bracketing.
                b = relabel_shape(&shape, &b);
                debinarize(&b)
            })
            .collect();
        let opts = EvalOptions::collins();
        let (ab, _) = corpus_eval(&gold, &pred, &opts).unwrap();
        let (ba, _) = corpus_eval(&pred, &gold, &opts).unwrap();
        prop_assert!((ab.f1 - ba.f1).abs() < 1e-12);
        prop_assert!((ab.lp - ba.lr).abs() < 1e-12);
        prop_assert_eq!(ab.matched, ba.matched);

        let mut g2 = gold.clone();
        let mut p2 = pred.clone();
        g2.rotate_left(rot);
        p2.rotate_left(rot);
        let (rotated, _) = corpus_eval(&g2, &p2, &opts).unwrap();
        prop_assert_eq!(rotated.matched, ab.matched);
        prop_assert!((rotated.f1 - ab.f1).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&ab.f1));
    }
}

/// `shape`'s bracketing with `source`'s leaves and the labels of
/// `source`'s spans where the bracket also exists there.
fn relabel_shape(shape: &BinaryTree, source: &BinaryTree) -> BinaryTree {
    let leaves = source.leaves();
    let spans = source.spans();
    fn go(t: &BinaryTree, leaves: &[&ptrparse::treebank::BinaryLeaf], spans: &ptrparse::treebank::SpanSet) -> BinaryTree {
        match t {
            BinaryTree::Leaf(l) => BinaryTree::Leaf(leaves[l.position - 1].clone()),
            BinaryTree::Node { left, right, .. } => {
                let bounds = t.span();
                let label = spans
                    .iter()
                    .find(|s| s.bounds() == bounds)
                    .map(|s| s.label.clone())
                    .unwrap_or(Label::Empty);
                BinaryTree::node(label, go(left, leaves, spans), go(right, leaves, spans))
            }
        }
    }
    go(shape, &leaves, &spans)
}
