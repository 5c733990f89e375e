use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Vocabulary;

/// Sizes of every parameter group.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Width of embeddings and encoder states.
    pub dim: usize,
    pub char_dim: usize,
    /// Number of self-attention layers.
    pub layers: usize,
    /// Hidden width of the encoder's position-wise feed-forward sublayer.
    pub ff_hidden: usize,
    /// Hidden width of the gp and sp heads.
    pub pointing_hidden: usize,
    /// Hidden width of the gc and uc heads.
    pub label_hidden: usize,
    /// Output width of all four heads.
    pub head_dim: usize,
    /// Longest sentence the position table covers.
    pub max_len: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            dim: 64,
            char_dim: 32,
            layers: 2,
            ff_hidden: 128,
            pointing_hidden: 128,
            label_hidden: 64,
            head_dim: 64,
            max_len: 256,
        }
    }
}

impl ModelConfig {
    /// A very small configuration for gradient checks and unit tests.
    pub fn tiny() -> Self {
        ModelConfig {
            dim: 6,
            char_dim: 4,
            layers: 2,
            ff_hidden: 7,
            pointing_hidden: 8,
            label_hidden: 5,
            head_dim: 6,
            max_len: 16,
        }
    }
}

/// Position-wise two-layer network `ReLU(x W1 + b1) W2 + b2`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeedForward {
    pub w1: Array2<f64>,
    pub b1: Array2<f64>,
    pub w2: Array2<f64>,
    pub b2: Array2<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderLayer {
    pub wq: Array2<f64>,
    pub wk: Array2<f64>,
    pub wv: Array2<f64>,
    pub wo: Array2<f64>,
    pub norm1_gain: Array2<f64>,
    pub norm1_bias: Array2<f64>,
    pub ff: FeedForward,
    pub norm2_gain: Array2<f64>,
    pub norm2_bias: Array2<f64>,
}

/// Which of the four task-specific heads.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Head {
    GeneralPointing,
    SingletonPointing,
    GeneralLabel,
    UnaryLabel,
}

impl Head {
    pub const ALL: [Head; 4] = [
        Head::GeneralPointing,
        Head::SingletonPointing,
        Head::GeneralLabel,
        Head::UnaryLabel,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            Head::GeneralPointing => "gp",
            Head::SingletonPointing => "sp",
            Head::GeneralLabel => "gc",
            Head::UnaryLabel => "uc",
        }
    }
}

/// Every trainable tensor. Biases and gains are `1 x k` rows.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub word_emb: Array2<f64>,
    pub char_emb: Array2<f64>,
    pub char_in: Array2<f64>,
    pub char_rec: Array2<f64>,
    pub char_bias: Array2<f64>,
    pub char_proj: Array2<f64>,
    pub pos_emb: Array2<f64>,
    pub position_emb: Array2<f64>,
    pub layers: Vec<EncoderLayer>,
    pub gp: FeedForward,
    pub sp: FeedForward,
    pub gc: FeedForward,
    pub uc: FeedForward,
    /// Column `l` is the classifier vector of general label `l`.
    pub gc_out: Array2<f64>,
    /// Column `l` is the classifier vector of unary label `l`.
    pub uc_out: Array2<f64>,
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, bound: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-bound..bound))
}

fn xavier(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    uniform(rng, rows, cols, bound)
}

impl FeedForward {
    fn init(rng: &mut ChaCha8Rng, input: usize, hidden: usize, output: usize, out_scale: f64) -> Self {
        FeedForward {
            w1: xavier(rng, input, hidden),
            b1: Array2::zeros((1, hidden)),
            w2: xavier(rng, hidden, output) * out_scale,
            b2: Array2::zeros((1, output)),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w1.ncols()
    }
}

impl ModelParams {
    /// Random initialization; identical for identical seeds.
    pub fn init(config: &ModelConfig, vocab: &Vocabulary, rng: &mut ChaCha8Rng) -> Self {
        let d = config.dim;
        let c = config.char_dim;
        let emb = 0.1;
        ModelParams {
            word_emb: uniform(rng, vocab.num_words(), d, emb),
            char_emb: uniform(rng, vocab.num_chars(), c, emb),
            char_in: xavier(rng, c, c),
            char_rec: xavier(rng, c, c) * 0.5,
            char_bias: Array2::zeros((1, c)),
            char_proj: xavier(rng, c, d),
            pos_emb: uniform(rng, vocab.num_pos(), d, emb),
            position_emb: uniform(rng, config.max_len, d, emb),
            layers: (0..config.layers)
                .map(|_| EncoderLayer {
                    wq: xavier(rng, d, d),
                    wk: xavier(rng, d, d),
                    wv: xavier(rng, d, d),
                    wo: xavier(rng, d, d),
                    norm1_gain: Array2::ones((1, d)),
                    norm1_bias: Array2::zeros((1, d)),
                    ff: FeedForward::init(rng, d, config.ff_hidden, d, 1.0),
                    norm2_gain: Array2::ones((1, d)),
                    norm2_bias: Array2::zeros((1, d)),
                })
                .collect(),
            // Small output layers keep the initial score tables close to uniform.
            gp: FeedForward::init(rng, d, config.pointing_hidden, config.head_dim, 0.1),
            sp: FeedForward::init(rng, d, config.pointing_hidden, config.head_dim, 0.1),
            gc: FeedForward::init(rng, d, config.label_hidden, config.head_dim, 0.1),
            uc: FeedForward::init(rng, d, config.label_hidden, config.head_dim, 0.1),
            gc_out: xavier(rng, config.head_dim, vocab.num_general()),
            uc_out: xavier(rng, config.head_dim, vocab.num_unary()),
        }
    }

    pub fn head(&self, head: Head) -> &FeedForward {
        match head {
            Head::GeneralPointing => &self.gp,
            Head::SingletonPointing => &self.sp,
            Head::GeneralLabel => &self.gc,
            Head::UnaryLabel => &self.uc,
        }
    }

    pub fn head_mut(&mut self, head: Head) -> &mut FeedForward {
        match head {
            Head::GeneralPointing => &mut self.gp,
            Head::SingletonPointing => &mut self.sp,
            Head::GeneralLabel => &mut self.gc,
            Head::UnaryLabel => &mut self.uc,
        }
    }

    pub fn dim(&self) -> usize {
        self.word_emb.ncols()
    }

    /// Same shapes, all zeros.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, t) in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    /// Every tensor with a stable name, in a fixed order.
    pub fn tensors(&self) -> Vec<(String, &Array2<f64>)> {
        let mut out: Vec<(String, &Array2<f64>)> = vec![
            ("word_emb".into(), &self.word_emb),
            ("char_emb".into(), &self.char_emb),
            ("char_in".into(), &self.char_in),
            ("char_rec".into(), &self.char_rec),
            ("char_bias".into(), &self.char_bias),
            ("char_proj".into(), &self.char_proj),
            ("pos_emb".into(), &self.pos_emb),
            ("position_emb".into(), &self.position_emb),
        ];
        for (k, l) in self.layers.iter().enumerate() {
            out.extend([
                (format!("layer{k}.wq"), &l.wq),
                (format!("layer{k}.wk"), &l.wk),
                (format!("layer{k}.wv"), &l.wv),
                (format!("layer{k}.wo"), &l.wo),
                (format!("layer{k}.norm1_gain"), &l.norm1_gain),
                (format!("layer{k}.norm1_bias"), &l.norm1_bias),
                (format!("layer{k}.ff.w1"), &l.ff.w1),
                (format!("layer{k}.ff.b1"), &l.ff.b1),
                (format!("layer{k}.ff.w2"), &l.ff.w2),
                (format!("layer{k}.ff.b2"), &l.ff.b2),
                (format!("layer{k}.norm2_gain"), &l.norm2_gain),
                (format!("layer{k}.norm2_bias"), &l.norm2_bias),
            ]);
        }
        for head in Head::ALL {
            let f = self.head(head);
            let h = head.short_name();
            out.extend([
                (format!("{h}.w1"), &f.w1),
                (format!("{h}.b1"), &f.b1),
                (format!("{h}.w2"), &f.w2),
                (format!("{h}.b2"), &f.b2),
            ]);
        }
        out.push(("gc_out".into(), &self.gc_out));
        out.push(("uc_out".into(), &self.uc_out));
        out
    }

    /// Mutable counterpart of [`ModelParams::tensors`], same order.
    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Array2<f64>)> {
        let mut out: Vec<(String, &mut Array2<f64>)> = vec![
            ("word_emb".into(), &mut self.word_emb),
            ("char_emb".into(), &mut self.char_emb),
            ("char_in".into(), &mut self.char_in),
            ("char_rec".into(), &mut self.char_rec),
            ("char_bias".into(), &mut self.char_bias),
            ("char_proj".into(), &mut self.char_proj),
            ("pos_emb".into(), &mut self.pos_emb),
            ("position_emb".into(), &mut self.position_emb),
        ];
        for (k, l) in self.layers.iter_mut().enumerate() {
            out.extend([
                (format!("layer{k}.wq"), &mut l.wq),
                (format!("layer{k}.wk"), &mut l.wk),
                (format!("layer{k}.wv"), &mut l.wv),
                (format!("layer{k}.wo"), &mut l.wo),
                (format!("layer{k}.norm1_gain"), &mut l.norm1_gain),
                (format!("layer{k}.norm1_bias"), &mut l.norm1_bias),
                (format!("layer{k}.ff.w1"), &mut l.ff.w1),
                (format!("layer{k}.ff.b1"), &mut l.ff.b1),
                (format!("layer{k}.ff.w2"), &mut l.ff.w2),
                (format!("layer{k}.ff.b2"), &mut l.ff.b2),
                (format!("layer{k}.norm2_gain"), &mut l.norm2_gain),
                (format!("layer{k}.norm2_bias"), &mut l.norm2_bias),
            ]);
        }
        for (h, f) in [
            ("gp", &mut self.gp),
            ("sp", &mut self.sp),
            ("gc", &mut self.gc),
            ("uc", &mut self.uc),
        ] {
            out.extend([
                (format!("{h}.w1"), &mut f.w1),
                (format!("{h}.b1"), &mut f.b1),
                (format!("{h}.w2"), &mut f.w2),
                (format!("{h}.b2"), &mut f.b2),
            ]);
        }
        out.push(("gc_out".into(), &mut self.gc_out));
        out.push(("uc_out".into(), &mut self.uc_out));
        out
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, t)| t.iter().all(|x| x.is_finite()))
    }
}
