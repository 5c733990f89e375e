//! The span scorer: embeddings, a self-attention encoder, four task heads,
//! and the softmax pointing and labeling tables computed from them.

mod backward;
mod checkpoint;
mod forward;
mod params;
mod vocab;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub(crate) use backward::{backprop, LogitGrads};
pub use checkpoint::{CheckpointError, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub(crate) use forward::{forward_cached, log_softmax_at};
pub use forward::{
    char_encode, embed_sentence, encode, forward, head_transform, label_tables, pointing_tables, softmax_rows,
    EncodedSentence,
};
pub use params::{EncoderLayer, FeedForward, Head, ModelConfig, ModelParams};
pub use vocab::{Vocabulary, UNK_ID, UNK_WORD};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("unknown POS tag '{0}' (the tag inventory is fixed at training time)")]
    UnknownPos(String),
    #[error("sentence of {len} tokens exceeds the maximum length {max}")]
    SentenceTooLong { len: usize, max: usize },
    #[error("empty sentence")]
    EmptySentence,
}

/// Per-sentence model output. Every row is a probability distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreTables {
    /// `gp[[i, k]]`: general pointing from `i` to `k` (0-based indices).
    pub gp: Array2<f64>,
    /// `sp[[i, k]]`: singleton pointing from `i` to `k`.
    pub sp: Array2<f64>,
    /// `gc[[i, l]]`: general label `l` at query `i`.
    pub gc: Array2<f64>,
    /// `uc[[i, l]]`: unary label `l` at position `i`.
    pub uc: Array2<f64>,
}

impl ScoreTables {
    pub fn len(&self) -> usize {
        self.gp.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All rows sum to one within `tol` and every entry is in `(0, 1]`.
    pub fn is_row_stochastic(&self, tol: f64) -> bool {
        [&self.gp, &self.sp, &self.gc, &self.uc].iter().all(|t| {
            t.rows()
                .into_iter()
                .all(|r| (r.sum() - 1.0).abs() <= tol && r.iter().all(|&p| p > 0.0 && p <= 1.0))
        })
    }
}

/// Configuration, vocabulary and parameters: everything needed to score.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub vocab: Vocabulary,
    pub params: ModelParams,
}

impl Model {
    pub fn new(config: ModelConfig, vocab: Vocabulary, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = ModelParams::init(&config, &vocab, &mut rng);
        Model { config, vocab, params }
    }

    pub fn encode_sentence(&self, tokens: &[(&str, &str)]) -> Result<EncodedSentence, ModelError> {
        let sent = EncodedSentence::new(tokens, &self.vocab)?;
        if sent.len() > self.config.max_len {
            return Err(ModelError::SentenceTooLong {
                len: sent.len(),
                max: self.config.max_len,
            });
        }
        Ok(sent)
    }

    pub fn score(&self, tokens: &[(&str, &str)]) -> Result<ScoreTables, ModelError> {
        forward(tokens, &self.params, &self.vocab)
    }

    pub fn score_encoded(&self, sentence: EncodedSentence) -> Result<ScoreTables, ModelError> {
        forward_cached(sentence, &self.params).map(|(t, _)| t)
    }

    /// Sign of every ReLU pre-activation in the encoder and heads, in a
    /// fixed order. Finite-difference checks use it to spot perturbations
    /// that cross a kink.
    pub fn relu_pattern(&self, sentence: EncodedSentence) -> Result<Vec<bool>, ModelError> {
        let (_, cache) = forward_cached(sentence, &self.params)?;
        let ffs = cache.layers.iter().map(|l| &l.ff).chain(cache.heads.iter().map(|h| &h.cache));
        Ok(ffs.flat_map(|ff| ff.pre.iter().map(|&x| x > 0.0)).collect())
    }
}
