//! Supervision targets, the summed cross-entropy objective, its gradients,
//! Adam with linear warm-up, and the epoch loop with dev-F1 selection.

use std::fmt;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::decoder::{parse_sentence_with, DecodeError, ParseOptions};
use crate::evaluation::{corpus_eval, EvalError, EvalOptions};
use crate::model::{
    backprop, forward, forward_cached, log_softmax_at, EncodedSentence, LogitGrads, Model, ModelConfig, ModelError,
    ModelParams, ScoreTables, Vocabulary, UNK_ID,
};
use crate::pointing::tree_to_pointing;
use crate::treebank::{BinaryTree, Label, SyntaxTree};

#[derive(Debug, Error)]
pub enum TrainingError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("empty batch")]
    EmptyBatch,
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
    #[error("label '{0}' is not in the label inventory")]
    UnknownLabel(Label),
    #[error("non-finite gradient in tensor {tensor}")]
    NonFinite { tensor: String },
    #[error("training diverged at epoch {epoch}, step {step}: batch loss {loss}")]
    Diverged { epoch: usize, step: usize, loss: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Per-position supervision. `gp` and `sp` hold 1-based target positions;
/// `gc` and `uc` hold label ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TargetSet {
    pub gp: Vec<usize>,
    pub sp: Vec<usize>,
    pub gc: Vec<usize>,
    pub uc: Vec<usize>,
}

/// Targets read off the pointing representation of a gold tree. A
/// single-token tree only supervises its unary label.
pub fn targets_from_tree(tree: &BinaryTree, vocab: &Vocabulary) -> Result<TargetSet, TrainingError> {
    let uc = tree
        .leaves()
        .iter()
        .map(|l| vocab.unary_id(&l.unary).ok_or_else(|| TrainingError::UnknownLabel(l.unary.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    let pointing = tree_to_pointing(tree);
    let mut gp = Vec::with_capacity(pointing.len());
    let mut gc = Vec::with_capacity(pointing.len());
    for p in &pointing.entries {
        gp.push(p.target);
        gc.push(vocab.general_id(&p.label).ok_or_else(|| TrainingError::UnknownLabel(p.label.clone()))?);
    }
    let sp = (1..=gp.len()).collect();
    Ok(TargetSet { gp, sp, gc, uc })
}

/// Sum over positions of the negative log-probability of each target.
pub fn loss(tables: &ScoreTables, targets: &TargetSet) -> f64 {
    let nll = |t: &Array2<f64>, row: usize, col: usize| -t[[row, col]].ln();
    let mut total = 0.0;
    for (i, &p) in targets.gp.iter().enumerate() {
        total += nll(&tables.gp, i, p - 1);
    }
    for (i, &p) in targets.sp.iter().enumerate() {
        total += nll(&tables.sp, i, p - 1);
    }
    for (i, &l) in targets.gc.iter().enumerate() {
        total += nll(&tables.gc, i, l);
    }
    for (i, &l) in targets.uc.iter().enumerate() {
        total += nll(&tables.uc, i, l);
    }
    total
}

/// One tensor per parameter tensor, same shapes.
pub type Gradients = ModelParams;

fn check_finite(g: &Gradients) -> Result<(), TrainingError> {
    match g.tensors().into_iter().find(|(_, t)| t.iter().any(|x| !x.is_finite())) {
        Some((name, _)) => Err(TrainingError::NonFinite { tensor: name }),
        None => Ok(()),
    }
}

/// Cross-entropy over the supervised rows and its gradient with respect to
/// the logits: `softmax - onehot`.
fn logit_loss(logits: &Array2<f64>, probs: &Array2<f64>, targets: &[usize], offset: usize) -> (f64, Array2<f64>) {
    let mut grad = Array2::zeros(logits.raw_dim());
    let mut total = 0.0;
    for (i, &t) in targets.iter().enumerate() {
        let t = t - offset;
        total -= log_softmax_at(logits.row(i), t);
        grad.row_mut(i).assign(&probs.row(i));
        grad[[i, t]] -= 1.0;
    }
    (total, grad)
}

/// Loss of one sentence and its exact gradient with respect to every parameter.
pub fn backward(
    sentence: &EncodedSentence,
    params: &ModelParams,
    targets: &TargetSet,
) -> Result<(f64, Gradients), TrainingError> {
    let (tables, cache) = forward_cached(sentence.clone(), params)?;
    let (l_gp, gp) = logit_loss(&cache.gp_logits, &tables.gp, &targets.gp, 1);
    let (l_sp, sp) = logit_loss(&cache.sp_logits, &tables.sp, &targets.sp, 1);
    let (l_gc, gc) = logit_loss(&cache.gc_logits, &tables.gc, &targets.gc, 0);
    let (l_uc, uc) = logit_loss(&cache.uc_logits, &tables.uc, &targets.uc, 0);
    let grads = backprop(params, &cache, &LogitGrads { gp, sp, gc, uc });
    check_finite(&grads)?;
    Ok((l_gp + l_sp + l_gc + l_uc, grads))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub warmup_steps: usize,
    /// Sentences per batch.
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Probability of replacing a rare training word with the unknown word.
    pub oov_dropout: f64,
    /// Words seen fewer times than this are rare.
    pub rare_threshold: usize,
    /// Rescale the batch gradient to at most this global L2 norm.
    pub clip_norm: Option<f64>,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            learning_rate: 0.001,
            warmup_steps: 100,
            batch_size: 4,
            epochs: 50,
            seed: 1,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            oov_dropout: 0.5,
            rare_threshold: 2,
            clip_norm: None,
        }
    }
}

impl Hyperparams {
    pub fn steps_per_epoch(&self, corpus_len: usize) -> usize {
        corpus_len.div_ceil(self.batch_size.max(1))
    }

    pub fn validate(&self, corpus_len: usize) -> Result<(), TrainingError> {
        let bad = |m: &str| Err(TrainingError::InvalidHyperparams(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if self.warmup_steps == 0 {
            return bad("warm-up steps must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.beta1 == 0.0 || self.beta2 == 0.0 {
            return bad("Adam moment coefficients must lie in (0, 1)");
        }
        if self.epsilon <= 0.0 {
            return bad("epsilon must be positive");
        }
        if matches!(self.clip_norm, Some(c) if c.is_nan() || c <= 0.0) {
            return bad("clip norm must be positive");
        }
        if !(0.0..=1.0).contains(&self.oov_dropout) {
            return bad("OOV dropout must be a probability");
        }
        let total = self.epochs * self.steps_per_epoch(corpus_len);
        if self.warmup_steps > total {
            return Err(TrainingError::InvalidHyperparams(format!(
                "warm-up of {} steps exceeds the {} total steps",
                self.warmup_steps, total
            )));
        }
        Ok(())
    }
}

/// `base * min(1, step / warmup)` for 1-based `step`.
pub fn learning_rate(step: usize, hyper: &Hyperparams) -> f64 {
    hyper.learning_rate * (step as f64 / hyper.warmup_steps as f64).min(1.0)
}

/// First and second moment estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: ModelParams,
    pub v: ModelParams,
    /// Number of updates applied so far.
    pub step: usize,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        AdamState {
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
        }
    }
}

/// One bias-corrected Adam update; returns the learning rate used.
pub fn adam_step(params: &mut ModelParams, grads: &Gradients, state: &mut AdamState, hyper: &Hyperparams) -> f64 {
    state.step += 1;
    let t = state.step as i32;
    let lr = learning_rate(state.step, hyper);
    let (b1, b2, eps) = (hyper.beta1, hyper.beta2, hyper.epsilon);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let tensors = params.tensors_mut();
    let ms = state.m.tensors_mut();
    let vs = state.v.tensors_mut();
    for ((((_, p), (_, g)), (_, m)), (_, v)) in tensors.into_iter().zip(grads.tensors()).zip(ms).zip(vs) {
        ndarray::Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        });
    }
    lr
}

/// Global L2 norm over every gradient tensor.
pub fn gradient_norm(grads: &Gradients) -> f64 {
    grads
        .tensors()
        .iter()
        .map(|(_, t)| t.iter().map(|x| x * x).sum::<f64>())
        .sum::<f64>()
        .sqrt()
}

/// Scales `grads` down so its global norm is at most `max`; returns the
/// norm before clipping.
pub fn clip_gradients(grads: &mut Gradients, max: f64) -> f64 {
    let norm = gradient_norm(grads);
    if norm > max {
        for (_, t) in grads.tensors_mut() {
            *t *= max / norm;
        }
    }
    norm
}

/// One line of the training log.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    /// NaN when there is no dev set.
    pub dev_f1: f64,
    pub lr: f64,
}

impl fmt::Display for EpochLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{:.6}\t{:.4}\t{:.6}", self.epoch, self.mean_loss, self.dev_f1, self.lr)
    }
}

pub const EPOCH_LOG_HEADER: &str = "epoch\tmean_loss\tdev_f1\tlr";

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// The checkpoint with the best dev F1, latest on ties (the last one
    /// without a dev set).
    pub model: Model,
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_dev_f1: f64,
}

fn leaf_pairs(tree: &BinaryTree) -> Vec<(&str, &str)> {
    tree.leaves().iter().map(|l| (l.token.as_str(), l.pos.as_str())).collect()
}

/// Replaces rare words by the unknown word with the configured probability.
fn drop_rare(sent: &EncodedSentence, vocab: &Vocabulary, hyper: &Hyperparams, rng: &mut ChaCha8Rng) -> EncodedSentence {
    let mut out = sent.clone();
    for w in out.words.iter_mut() {
        if *w != UNK_ID && vocab.word_count(*w) < hyper.rare_threshold && rng.gen::<f64>() < hyper.oov_dropout {
            *w = UNK_ID;
        }
    }
    out
}

const SHUFFLE_SALT: u64 = 0x5348_5546;
const DROPOUT_SALT: u64 = 0x4452_4f50;

/// Labeled F1 of the model's parses against gold trees.
pub fn dev_f1(model: &Model, dev: &[SyntaxTree], options: &ParseOptions) -> Result<f64, TrainingError> {
    let pred = dev
        .par_iter()
        .map(|t| {
            let pairs: Vec<(&str, &str)> = t.leaves();
            parse_sentence_with(&pairs, &model.params, &model.vocab, options).map(|(t, _)| t)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(corpus_eval(dev, &pred, &EvalOptions::default())?.0.f1)
}

/// Fraction of gold pointing entries (including the final root entry)
/// whose target is the argmax of the gp row. The self-pointing column is
/// skipped: it is never a target and the decoder never reads it.
pub fn pointing_accuracy(model: &Model, trees: &[BinaryTree]) -> Result<f64, TrainingError> {
    let mut correct = 0;
    let mut total = 0;
    for tree in trees {
        if tree.len() < 2 {
            continue;
        }
        let tables = forward(&leaf_pairs(tree), &model.params, &model.vocab)?;
        for p in &tree_to_pointing(tree).entries {
            let row = tables.gp.row(p.query - 1);
            let q = p.query - 1;
            let argmax = (0..row.len())
                .filter(|&k| k != q)
                .fold(None, |b: Option<usize>, k| match b {
                    Some(b) if row[b] >= row[k] => Some(b),
                    _ => Some(k),
                })
                .expect("n >= 2");
            correct += usize::from(argmax + 1 == p.target);
            total += 1;
        }
    }
    Ok(if total == 0 { 1.0 } else { correct as f64 / total as f64 })
}

/// Trains a fresh model on `corpus`, selecting the epoch with the best dev F1.
pub fn train(
    corpus: &[BinaryTree],
    dev: &[SyntaxTree],
    config: &ModelConfig,
    hyper: &Hyperparams,
) -> Result<TrainOutcome, TrainingError> {
    train_with_callback(corpus, dev, config, hyper, &ParseOptions::default(), |_| {})
}

/// Like [`train`], calling `on_epoch` after every epoch.
pub fn train_with_callback(
    corpus: &[BinaryTree],
    dev: &[SyntaxTree],
    config: &ModelConfig,
    hyper: &Hyperparams,
    parse_options: &ParseOptions,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome, TrainingError> {
    if corpus.is_empty() {
        return Err(TrainingError::EmptyCorpus);
    }
    hyper.validate(corpus.len())?;
    let vocab = Vocabulary::from_trees(corpus);
    let mut model = Model::new(config.clone(), vocab, hyper.seed);
    let examples = corpus
        .iter()
        .map(|t| {
            let sent = model.encode_sentence(&leaf_pairs(t))?;
            Ok((sent, targets_from_tree(t, &model.vocab)?))
        })
        .collect::<Result<Vec<_>, TrainingError>>()?;

    let mut adam = AdamState::new(&model.params);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut log = Vec::with_capacity(hyper.epochs);
    let mut best: Option<(Model, usize, f64)> = None;

    for epoch in 1..=hyper.epochs {
        let mut shuffle = ChaCha8Rng::seed_from_u64(hyper.seed ^ SHUFFLE_SALT);
        shuffle.set_stream(epoch as u64);
        order.shuffle(&mut shuffle);

        let mut epoch_loss = 0.0;
        let mut lr = 0.0;
        for batch in order.chunks(hyper.batch_size) {
            if batch.is_empty() {
                return Err(TrainingError::EmptyBatch);
            }
            let results = batch
                .par_iter()
                .map(|&idx| {
                    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed ^ DROPOUT_SALT);
                    rng.set_stream(((epoch as u64) << 32) | idx as u64);
                    let (sent, targets) = &examples[idx];
                    let sent = drop_rare(sent, &model.vocab, hyper, &mut rng);
                    backward(&sent, &model.params, targets)
                })
                .collect::<Vec<_>>();

            // Fixed summation order regardless of scheduling.
            let mut grads = model.params.zeros_like();
            let mut batch_loss = 0.0;
            for r in results {
                let (l, g) = r?;
                batch_loss += l;
                for ((_, acc), (_, t)) in grads.tensors_mut().into_iter().zip(g.tensors()) {
                    *acc += t;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            if !batch_loss.is_finite() {
                return Err(TrainingError::Diverged {
                    epoch,
                    step: adam.step + 1,
                    loss: batch_loss * scale,
                });
            }
            for (_, t) in grads.tensors_mut() {
                *t *= scale;
            }
            if let Some(max) = hyper.clip_norm {
                clip_gradients(&mut grads, max);
            }
            epoch_loss += batch_loss;
            lr = adam_step(&mut model.params, &grads, &mut adam, hyper);
        }

        let f1 = if dev.is_empty() {
            f64::NAN
        } else {
            dev_f1(&model, dev, parse_options)?
        };
        let entry = EpochLog {
            epoch,
            mean_loss: epoch_loss / examples.len() as f64,
            dev_f1: f1,
            lr,
        };
        log::info!("{entry}");
        on_epoch(&entry);
        log.push(entry);
        let improved = match &best {
            None => true,
            // Ties go to the later, longer-trained epoch.
            Some((_, _, b)) => dev.is_empty() || f1 >= *b,
        };
        if improved {
            best = Some((model.clone(), epoch, f1));
        }
    }

    let (model, best_epoch, best_dev_f1) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        model,
        log,
        best_epoch,
        best_dev_f1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treebank::{binarize, parse_bracketed};

    const FIG: &str = "(S (NP (PRP She)) (VP (VBZ enjoys) (S (VP (VBG playing) (NP (NN tennis))))) (. .))";

    fn tennis() -> (BinaryTree, Vocabulary) {
        let t = binarize(&parse_bracketed(FIG).unwrap()[0]);
        let v = Vocabulary::from_trees([&t]);
        (t, v)
    }

    fn names(ids: &[usize], labels: &[Label]) -> Vec<String> {
        ids.iter().map(|&i| labels[i].to_string()).collect()
    }

    #[test]
    fn tennis_targets() {
        let (t, v) = tennis();
        let ts = targets_from_tree(&t, &v).unwrap();
        assert_eq!(ts.gp, vec![5, 5, 4, 2, 1]);
        assert_eq!(ts.sp, vec![1, 2, 3, 4, 5]);
        assert_eq!(names(&ts.gc, v.general_labels()), ["S", "∅", "S+VP", "VP", "S"]);
        assert_eq!(names(&ts.uc, v.unary_labels()), ["NP", "∅", "∅", "NP", "∅"]);
        assert!(ts.gp.iter().enumerate().all(|(i, &p)| p != i + 1));
    }

    #[test]
    fn two_and_one_leaf_targets() {
        let t = binarize(&parse_bracketed("(S (A a) (B b))").unwrap()[0]);
        let v = Vocabulary::from_trees([&t]);
        let ts = targets_from_tree(&t, &v).unwrap();
        assert_eq!((ts.gp.clone(), ts.sp.clone()), (vec![2, 1], vec![1, 2]));
        assert_eq!(names(&ts.gc, v.general_labels()), ["S", "S"]);

        let t = binarize(&parse_bracketed("(NP (A a))").unwrap()[0]);
        let v = Vocabulary::from_trees([&t]);
        let ts = targets_from_tree(&t, &v).unwrap();
        assert!(ts.gp.is_empty() && ts.sp.is_empty() && ts.gc.is_empty());
        assert_eq!(names(&ts.uc, v.unary_labels()), ["NP"]);
    }

    #[test]
    fn unknown_label_is_reported() {
        let (_, v) = tennis();
        let other = binarize(&parse_bracketed("(FRAG (A a) (B b))").unwrap()[0]);
        assert!(matches!(targets_from_tree(&other, &v), Err(TrainingError::UnknownLabel(_))));
    }

    fn uniform_tables(n: usize, labels: usize) -> ScoreTables {
        ScoreTables {
            gp: Array2::from_elem((n, n), 1.0 / n as f64),
            sp: Array2::from_elem((n, n), 1.0 / n as f64),
            gc: Array2::from_elem((n, labels), 1.0 / labels as f64),
            uc: Array2::from_elem((n, labels), 1.0 / labels as f64),
        }
    }

    #[test]
    fn uniform_loss_is_sum_of_log_supports() {
        let ts = TargetSet {
            gp: vec![4, 4, 2, 1],
            sp: vec![1, 2, 3, 4],
            gc: vec![0, 1, 2, 3],
            uc: vec![3, 0, 0, 1],
        };
        let l = loss(&uniform_tables(4, 4), &ts);
        assert!((l - 16.0 * 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn saturated_tables_have_tiny_loss() {
        let ts = TargetSet {
            gp: vec![3, 3, 1],
            sp: vec![1, 2, 3],
            gc: vec![1, 0, 1],
            uc: vec![0, 1, 0],
        };
        let mut t = uniform_tables(3, 2);
        let onehot = |m: &mut Array2<f64>, targets: &[usize], offset: usize| {
            let c = m.ncols() as f64;
            for (i, &x) in targets.iter().enumerate() {
                m.row_mut(i).fill(1e-6 / (c - 1.0));
                m[[i, x - offset]] = 1.0 - 1e-6;
            }
        };
        onehot(&mut t.gp, &ts.gp, 1);
        onehot(&mut t.sp, &ts.sp, 1);
        onehot(&mut t.gc, &ts.gc, 0);
        onehot(&mut t.uc, &ts.uc, 0);
        assert!(loss(&t, &ts) < 1e-3);
    }

    #[test]
    fn random_tables_match_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 6;
        let mut draw = |r: usize, c: usize| {
            let mut m = Array2::from_shape_fn((r, c), |_| rng.gen_range(0.05..1.0));
            for mut row in m.rows_mut() {
                let s = row.sum();
                row /= s;
            }
            m
        };
        let t = ScoreTables {
            gp: draw(n, n),
            sp: draw(n, n),
            gc: draw(n, 5),
            uc: draw(n, 3),
        };
        let ts = TargetSet {
            gp: vec![6, 6, 2, 6, 4, 1],
            sp: (1..=6).collect(),
            gc: vec![0, 4, 2, 3, 1, 0],
            uc: vec![2, 1, 0, 0, 1, 2],
        };
        let mut expected = 0.0;
        for i in 0..n {
            expected += -(t.gp[[i, ts.gp[i] - 1]].ln());
            expected += -(t.sp[[i, i]].ln());
            expected += -(t.gc[[i, ts.gc[i]]].ln());
            expected += -(t.uc[[i, ts.uc[i]]].ln());
        }
        assert!((loss(&t, &ts) - expected).abs() < 1e-12);
    }

    fn tiny() -> (Model, EncodedSentence, TargetSet) {
        let (t, v) = tennis();
        let m = Model::new(ModelConfig::tiny(), v, 11);
        let s = m.encode_sentence(&leaf_pairs(&t)).unwrap();
        let ts = targets_from_tree(&t, &m.vocab).unwrap();
        (m, s, ts)
    }

    #[test]
    fn backward_loss_matches_loss_of_forward() {
        let (m, s, ts) = tiny();
        let (l, _) = backward(&s, &m.params, &ts).unwrap();
        let tables = m.score_encoded(s).unwrap();
        assert!((l - loss(&tables, &ts)).abs() < 1e-10);
    }

    #[test]
    fn uniform_init_loss_is_analytic() {
        let (mut m, s, ts) = tiny();
        for f in [&mut m.params.gp, &mut m.params.sp, &mut m.params.gc, &mut m.params.uc] {
            f.w2.fill(0.0);
            f.b2.fill(0.0);
        }
        let (l, _) = backward(&s, &m.params, &ts).unwrap();
        let n = 5f64;
        let expected = 2.0 * n * n.ln()
            + n * (m.vocab.num_general() as f64).ln()
            + n * (m.vocab.num_unary() as f64).ln();
        assert!((l - expected).abs() < 1e-12);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let (mut m, s, ts) = tiny();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for (_, t) in m.params.tensors_mut() {
            t.mapv_inplace(|x| x + rng.gen_range(-0.1..0.1));
        }
        let (_, g) = backward(&s, &m.params, &ts).unwrap();
        let f = |p: &ModelParams| loss(&forward_cached(s.clone(), p).unwrap().0, &ts);
        let h = 1e-4;
        let names: Vec<String> = m.params.tensors().into_iter().map(|(n, _)| n).collect();
        for (k, name) in names.iter().enumerate() {
            let analytic = g.tensors()[k].1.clone();
            let mut num = Vec::with_capacity(analytic.len());
            for idx in 0..analytic.len() {
                let mut p = m.params.clone();
                p.tensors_mut()[k].1.as_slice_mut().unwrap()[idx] += h;
                let up = f(&p);
                p.tensors_mut()[k].1.as_slice_mut().unwrap()[idx] -= 2.0 * h;
                let down = f(&p);
                num.push((up - down) / (2.0 * h));
            }
            let a = analytic.as_slice().unwrap();
            let diff = a.iter().zip(&num).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(num.iter().map(|x| x * x).sum::<f64>().sqrt());
            let err = if scale < 1e-10 { diff } else { diff / scale };
            assert!(err < 1e-4, "{name}: relative error {err}");
        }
    }

    #[test]
    fn empty_label_targets_leave_label_outputs_untouched() {
        let (m, s, mut ts) = tiny();
        ts.gc.clear();
        ts.uc.clear();
        let (_, g) = backward(&s, &m.params, &ts).unwrap();
        assert!(g.gc_out.iter().all(|&x| x == 0.0));
        assert!(g.uc_out.iter().all(|&x| x == 0.0));
        assert!(g.gc.w1.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn non_finite_gradient_names_tensor() {
        let (mut m, s, ts) = tiny();
        m.params.gc_out[[0, 0]] = f64::NAN;
        match backward(&s, &m.params, &ts) {
            Err(TrainingError::NonFinite { tensor }) => assert!(!tensor.is_empty()),
            other => panic!("expected a non-finite error, got {other:?}"),
        }
    }

    #[test]
    fn warmup_schedule() {
        let h = Hyperparams {
            learning_rate: 0.008,
            warmup_steps: 100,
            ..Hyperparams::default()
        };
        assert_eq!(learning_rate(50, &h), 0.004);
        assert_eq!(learning_rate(100, &h), 0.008);
        assert_eq!(learning_rate(500, &h), 0.008);
        assert_eq!(learning_rate(1, &h), 0.008 / 100.0);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let (mut m, _, _) = tiny();
        let before = m.params.clone();
        let mut st = AdamState::new(&m.params);
        let z = m.params.zeros_like();
        adam_step(&mut m.params, &z, &mut st, &Hyperparams::default());
        assert_eq!(m.params, before);
    }

    #[test]
    fn two_step_scalar_trace() {
        let (mut m, _, _) = tiny();
        let h = Hyperparams {
            learning_rate: 0.1,
            warmup_steps: 1,
            ..Hyperparams::default()
        };
        let mut st = AdamState::new(&m.params);
        let x0 = m.params.gc_out[[0, 0]];
        let mut g = m.params.zeros_like();
        // Step 1, g = 0.5: m = 0.05, v = 0.00025, mhat = 0.5, vhat = 0.25.
        g.gc_out[[0, 0]] = 0.5;
        adam_step(&mut m.params, &g, &mut st, &h);
        let x1 = x0 - 0.1 * 0.5 / (0.5 + 1e-8);
        assert!((m.params.gc_out[[0, 0]] - x1).abs() < 1e-12);
        // Step 2, g = -1: m = 0.045 - 0.1 = -0.055, v = 0.00024975 + 0.001.
        g.gc_out[[0, 0]] = -1.0;
        adam_step(&mut m.params, &g, &mut st, &h);
        let mhat = -0.055 / (1.0 - 0.81);
        let vhat: f64 = (0.999 * 0.00025 + 0.001 * 1.0) / (1.0 - 0.998001);
        let x2 = x1 - 0.1 * mhat / (vhat.sqrt() + 1e-8);
        assert!((m.params.gc_out[[0, 0]] - x2).abs() < 1e-12);
    }

    #[test]
    fn hyperparameter_validation() {
        let h = Hyperparams::default();
        assert!(h.validate(1000).is_ok());
        assert!(h.validate(4).is_err());
        assert!(Hyperparams { batch_size: 0, ..h.clone() }.validate(1000).is_err());
        assert!(Hyperparams { learning_rate: -1.0, ..h.clone() }.validate(1000).is_err());
        assert!(Hyperparams { beta1: 1.0, ..h }.validate(1000).is_err());
    }

    #[test]
    fn empty_corpus() {
        assert!(matches!(
            train(&[], &[], &ModelConfig::tiny(), &Hyperparams::default()),
            Err(TrainingError::EmptyCorpus)
        ));
    }

    #[test]
    fn log_line_is_tab_separated() {
        let e = EpochLog {
            epoch: 3,
            mean_loss: 1.5,
            dev_f1: 0.25,
            lr: 0.004,
        };
        assert_eq!(e.to_string(), "3\t1.500000\t0.2500\t0.004000");
        assert_eq!(e.to_string().split('\t').count(), EPOCH_LOG_HEADER.split('\t').count());
    }
}
