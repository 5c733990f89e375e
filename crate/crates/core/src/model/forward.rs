use ndarray::{s, Array1, Array2, ArrayView1, Axis};

use super::params::{EncoderLayer, FeedForward, Head, ModelParams};
use super::{ModelError, ScoreTables, Vocabulary};

pub(crate) const NORM_EPS: f64 = 1e-5;

/// A sentence mapped to vocabulary ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedSentence {
    pub words: Vec<usize>,
    pub pos: Vec<usize>,
    pub chars: Vec<Vec<usize>>,
}

impl EncodedSentence {
    pub fn new(tokens: &[(&str, &str)], vocab: &Vocabulary) -> Result<Self, ModelError> {
        if tokens.is_empty() {
            return Err(ModelError::EmptySentence);
        }
        let mut words = Vec::with_capacity(tokens.len());
        let mut pos = Vec::with_capacity(tokens.len());
        let mut chars = Vec::with_capacity(tokens.len());
        for &(word, tag) in tokens {
            words.push(vocab.word_id(word));
            pos.push(vocab.pos_id(tag).ok_or_else(|| ModelError::UnknownPos(tag.to_string()))?);
            chars.push(word.chars().map(|c| vocab.char_id(c)).collect());
        }
        Ok(EncodedSentence { words, pos, chars })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Row-wise softmax with the row maximum subtracted first.
pub fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        row.mapv_inplace(|x| (x - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    out
}

/// `log softmax(row)[target]`, computed stably.
pub(crate) fn log_softmax_at(row: ArrayView1<f64>, target: usize) -> f64 {
    let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    let lse = row.iter().map(|&x| (x - max).exp()).sum::<f64>().ln() + max;
    row[target] - lse
}

pub(crate) struct CharCache {
    pub ids: Vec<usize>,
    /// `h_0 = 0, h_1, ..., h_T`.
    pub states: Vec<Array1<f64>>,
}

pub(crate) struct NormCache {
    pub xhat: Array2<f64>,
    pub inv_std: Array1<f64>,
}

pub(crate) struct FeedForwardCache {
    pub pre: Array2<f64>,
    pub act: Array2<f64>,
}

pub(crate) struct LayerCache {
    pub input: Array2<f64>,
    pub q: Array2<f64>,
    pub k: Array2<f64>,
    pub v: Array2<f64>,
    pub attn: Array2<f64>,
    pub context: Array2<f64>,
    pub norm1: NormCache,
    pub mid: Array2<f64>,
    pub ff: FeedForwardCache,
    pub norm2: NormCache,
}

pub(crate) struct HeadOutput {
    pub cache: FeedForwardCache,
    pub out: Array2<f64>,
}

/// Everything the backward pass needs.
pub(crate) struct ForwardCache {
    pub sentence: EncodedSentence,
    pub chars: Vec<CharCache>,
    pub layers: Vec<LayerCache>,
    pub hidden: Array2<f64>,
    pub heads: [HeadOutput; 4],
    pub gp_logits: Array2<f64>,
    pub sp_logits: Array2<f64>,
    pub gc_logits: Array2<f64>,
    pub uc_logits: Array2<f64>,
}

pub(crate) fn char_forward(ids: &[usize], params: &ModelParams) -> (Array1<f64>, CharCache) {
    let c = params.char_in.nrows();
    let mut states = Vec::with_capacity(ids.len() + 1);
    states.push(Array1::zeros(c));
    let bias = params.char_bias.row(0);
    for &id in ids {
        let prev = states.last().expect("h_0 present");
        let mut a = params.char_emb.row(id).dot(&params.char_in) + prev.dot(&params.char_rec);
        a += &bias;
        a.mapv_inplace(f64::tanh);
        states.push(a);
    }
    let out = states.last().expect("h_0 present").dot(&params.char_proj);
    (
        out,
        CharCache {
            ids: ids.to_vec(),
            states,
        },
    )
}

/// Final state of a simple recurrence over the word's character embeddings,
/// projected to the model width. Unknown characters use the unknown entry.
pub fn char_encode(word: &str, params: &ModelParams, vocab: &Vocabulary) -> Array1<f64> {
    let ids: Vec<usize> = word.chars().map(|c| vocab.char_id(c)).collect();
    char_forward(&ids, params).0
}

pub(crate) fn embed_forward(sent: &EncodedSentence, params: &ModelParams) -> (Array2<f64>, Vec<CharCache>) {
    let n = sent.len();
    let d = params.dim();
    let mut e = Array2::zeros((n, d));
    let mut caches = Vec::with_capacity(n);
    for i in 0..n {
        let (ch, cache) = char_forward(&sent.chars[i], params);
        let mut row = e.row_mut(i);
        row += &ch;
        row += &params.word_emb.row(sent.words[i]);
        row += &params.pos_emb.row(sent.pos[i]);
        caches.push(cache);
    }
    (e, caches)
}

/// Per-token sum of character, word and POS embeddings.
pub fn embed_sentence(
    tokens: &[(&str, &str)],
    params: &ModelParams,
    vocab: &Vocabulary,
) -> Result<Array2<f64>, ModelError> {
    let sent = EncodedSentence::new(tokens, vocab)?;
    Ok(embed_forward(&sent, params).0)
}

pub(crate) fn layer_norm(r: &Array2<f64>, gain: &Array2<f64>, bias: &Array2<f64>) -> (Array2<f64>, NormCache) {
    let d = r.ncols() as f64;
    let mean = r.sum_axis(Axis(1)) / d;
    let centered = r - &mean.view().insert_axis(Axis(1));
    let var = centered.mapv(|x| x * x).sum_axis(Axis(1)) / d;
    let inv_std = var.mapv(|v| 1.0 / (v + NORM_EPS).sqrt());
    let xhat = centered * inv_std.view().insert_axis(Axis(1));
    let out = &xhat * gain + bias;
    (out, NormCache { xhat, inv_std })
}

pub(crate) fn ff_forward(x: &Array2<f64>, f: &FeedForward) -> (Array2<f64>, FeedForwardCache) {
    let pre = x.dot(&f.w1) + &f.b1;
    let act = pre.mapv(|v| v.max(0.0));
    let out = act.dot(&f.w2) + &f.b2;
    (out, FeedForwardCache { pre, act })
}

pub(crate) fn layer_forward(x: &Array2<f64>, l: &EncoderLayer) -> (Array2<f64>, LayerCache) {
    let scale = 1.0 / (x.ncols() as f64).sqrt();
    let q = x.dot(&l.wq);
    let k = x.dot(&l.wk);
    let v = x.dot(&l.wv);
    let attn = softmax_rows(&(q.dot(&k.t()) * scale));
    let context = attn.dot(&v);
    let (mid, norm1) = layer_norm(&(x + &context.dot(&l.wo)), &l.norm1_gain, &l.norm1_bias);
    let (f, ff) = ff_forward(&mid, &l.ff);
    let (out, norm2) = layer_norm(&(&mid + &f), &l.norm2_gain, &l.norm2_bias);
    let cache = LayerCache {
        input: x.clone(),
        q,
        k,
        v,
        attn,
        context,
        norm1,
        mid,
        ff,
        norm2,
    };
    (out, cache)
}

pub(crate) fn encode_forward(
    embeddings: &Array2<f64>,
    params: &ModelParams,
) -> Result<(Array2<f64>, Vec<LayerCache>), ModelError> {
    let n = embeddings.nrows();
    let max = params.position_emb.nrows();
    if n > max {
        return Err(ModelError::SentenceTooLong { len: n, max });
    }
    let mut x = embeddings + &params.position_emb.slice(s![..n, ..]);
    let mut caches = Vec::with_capacity(params.layers.len());
    for l in &params.layers {
        let (next, cache) = layer_forward(&x, l);
        caches.push(cache);
        x = next;
    }
    Ok((x, caches))
}

/// Adds position embeddings, then applies each self-attention layer
/// (single head, residual, layer norm, feed-forward, residual, layer norm).
pub fn encode(embeddings: &Array2<f64>, params: &ModelParams) -> Result<Array2<f64>, ModelError> {
    encode_forward(embeddings, params).map(|(h, _)| h)
}

/// One head's feed-forward network applied to every position.
pub fn head_transform(hidden: &Array2<f64>, head: Head, params: &ModelParams) -> Array2<f64> {
    ff_forward(hidden, params.head(head)).0
}

/// `gp(i, k) = softmax_k(h_i . h_k)` for each pointing head.
pub fn pointing_tables(h_gp: &Array2<f64>, h_sp: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
    (
        softmax_rows(&h_gp.dot(&h_gp.t())),
        softmax_rows(&h_sp.dot(&h_sp.t())),
    )
}

/// `gc(l | i) = softmax_l(h_i . w_l)`, and likewise for `uc`.
pub fn label_tables(h_gc: &Array2<f64>, h_uc: &Array2<f64>, params: &ModelParams) -> (Array2<f64>, Array2<f64>) {
    (
        softmax_rows(&h_gc.dot(&params.gc_out)),
        softmax_rows(&h_uc.dot(&params.uc_out)),
    )
}

pub(crate) fn forward_cached(
    sentence: EncodedSentence,
    params: &ModelParams,
) -> Result<(ScoreTables, ForwardCache), ModelError> {
    let (embeddings, chars) = embed_forward(&sentence, params);
    let (hidden, layers) = encode_forward(&embeddings, params)?;
    let heads = Head::ALL.map(|h| {
        let (out, cache) = ff_forward(&hidden, params.head(h));
        HeadOutput { cache, out }
    });
    let gp_logits = heads[0].out.dot(&heads[0].out.t());
    let sp_logits = heads[1].out.dot(&heads[1].out.t());
    let gc_logits = heads[2].out.dot(&params.gc_out);
    let uc_logits = heads[3].out.dot(&params.uc_out);
    let tables = ScoreTables {
        gp: softmax_rows(&gp_logits),
        sp: softmax_rows(&sp_logits),
        gc: softmax_rows(&gc_logits),
        uc: softmax_rows(&uc_logits),
    };
    let cache = ForwardCache {
        sentence,
        chars,
        layers,
        hidden,
        heads,
        gp_logits,
        sp_logits,
        gc_logits,
        uc_logits,
    };
    Ok((tables, cache))
}

/// Scores a POS-tagged sentence.
pub fn forward(tokens: &[(&str, &str)], params: &ModelParams, vocab: &Vocabulary) -> Result<ScoreTables, ModelError> {
    let sentence = EncodedSentence::new(tokens, vocab)?;
    forward_cached(sentence, params).map(|(t, _)| t)
}
