use ndarray::{Array1, Array2, Axis};

use super::forward::{CharCache, FeedForwardCache, ForwardCache, LayerCache, NormCache};
use super::params::{EncoderLayer, FeedForward, ModelParams};

/// Loss gradients with respect to the four logit matrices.
pub(crate) struct LogitGrads {
    pub gp: Array2<f64>,
    pub sp: Array2<f64>,
    pub gc: Array2<f64>,
    pub uc: Array2<f64>,
}

fn sum_rows(m: &Array2<f64>) -> Array2<f64> {
    m.sum_axis(Axis(0)).insert_axis(Axis(0))
}

/// Returns the gradient with respect to the normalized input and adds the
/// gain and bias gradients.
fn norm_backward(
    dout: &Array2<f64>,
    cache: &NormCache,
    gain: &Array2<f64>,
    dgain: &mut Array2<f64>,
    dbias: &mut Array2<f64>,
) -> Array2<f64> {
    *dgain += &sum_rows(&(dout * &cache.xhat));
    *dbias += &sum_rows(dout);
    let dxhat = dout * gain;
    let d = dout.ncols() as f64;
    let sum_dxhat = dxhat.sum_axis(Axis(1)).insert_axis(Axis(1));
    let sum_dxhat_xhat = (&dxhat * &cache.xhat).sum_axis(Axis(1)).insert_axis(Axis(1));
    let inner = &dxhat * d - &sum_dxhat - &cache.xhat * &sum_dxhat_xhat;
    inner * &(cache.inv_std.view().insert_axis(Axis(1)).mapv(|s| s / d))
}

fn ff_backward(
    x: &Array2<f64>,
    cache: &FeedForwardCache,
    f: &FeedForward,
    g: &mut FeedForward,
    dout: &Array2<f64>,
) -> Array2<f64> {
    g.w2 += &cache.act.t().dot(dout);
    g.b2 += &sum_rows(dout);
    let mut dpre = dout.dot(&f.w2.t());
    dpre.zip_mut_with(&cache.pre, |d, &p| {
        if p <= 0.0 {
            *d = 0.0
        }
    });
    g.w1 += &x.t().dot(&dpre);
    g.b1 += &sum_rows(&dpre);
    dpre.dot(&f.w1.t())
}

fn layer_backward(cache: &LayerCache, l: &EncoderLayer, g: &mut EncoderLayer, dout: &Array2<f64>) -> Array2<f64> {
    let dr2 = norm_backward(dout, &cache.norm2, &l.norm2_gain, &mut g.norm2_gain, &mut g.norm2_bias);
    let dmid = &dr2 + &ff_backward(&cache.mid, &cache.ff, &l.ff, &mut g.ff, &dr2);
    let dr1 = norm_backward(&dmid, &cache.norm1, &l.norm1_gain, &mut g.norm1_gain, &mut g.norm1_bias);

    let x = &cache.input;
    let scale = 1.0 / (x.ncols() as f64).sqrt();
    g.wo += &cache.context.t().dot(&dr1);
    let dcontext = dr1.dot(&l.wo.t());
    let dattn = dcontext.dot(&cache.v.t());
    let dv = cache.attn.t().dot(&dcontext);
    let row_dot = (&dattn * &cache.attn).sum_axis(Axis(1)).insert_axis(Axis(1));
    let dscores = &cache.attn * &(&dattn - &row_dot) * scale;
    let dq = dscores.dot(&cache.k);
    let dk = dscores.t().dot(&cache.q);
    g.wq += &x.t().dot(&dq);
    g.wk += &x.t().dot(&dk);
    g.wv += &x.t().dot(&dv);
    dr1 + dq.dot(&l.wq.t()) + dk.dot(&l.wk.t()) + dv.dot(&l.wv.t())
}

fn char_backward(cache: &CharCache, params: &ModelParams, g: &mut ModelParams, dout: ndarray::ArrayView1<f64>) {
    let t_len = cache.ids.len();
    let last = &cache.states[t_len];
    g.char_proj += &outer(last.view(), dout);
    let mut dh: Array1<f64> = params.char_proj.dot(&dout);
    for t in (1..=t_len).rev() {
        let h = &cache.states[t];
        let da: Array1<f64> = &dh * &h.mapv(|v| 1.0 - v * v);
        let id = cache.ids[t - 1];
        g.char_in += &outer(params.char_emb.row(id), da.view());
        g.char_rec += &outer(cache.states[t - 1].view(), da.view());
        g.char_bias.row_mut(0).scaled_add(1.0, &da);
        let dx = params.char_in.dot(&da);
        g.char_emb.row_mut(id).scaled_add(1.0, &dx);
        dh = params.char_rec.dot(&da);
    }
}

fn outer(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> Array2<f64> {
    let a2 = a.insert_axis(Axis(1));
    let b2 = b.insert_axis(Axis(0));
    a2.dot(&b2)
}

/// Backpropagates logit gradients through the whole model.
pub(crate) fn backprop(params: &ModelParams, cache: &ForwardCache, dl: &LogitGrads) -> ModelParams {
    let mut g = params.zeros_like();

    // Pointing logits are h h^T, so dh = (dG + dG^T) h.
    let d_gp = (&dl.gp + &dl.gp.t()).dot(&cache.heads[0].out);
    let d_sp = (&dl.sp + &dl.sp.t()).dot(&cache.heads[1].out);
    g.gc_out += &cache.heads[2].out.t().dot(&dl.gc);
    let d_gc = dl.gc.dot(&params.gc_out.t());
    g.uc_out += &cache.heads[3].out.t().dot(&dl.uc);
    let d_uc = dl.uc.dot(&params.uc_out.t());

    let mut dhidden = Array2::zeros(cache.hidden.raw_dim());
    for (k, dout) in [d_gp, d_sp, d_gc, d_uc].iter().enumerate() {
        let head = super::Head::ALL[k];
        dhidden += &ff_backward(
            &cache.hidden,
            &cache.heads[k].cache,
            params.head(head),
            g.head_mut(head),
            dout,
        );
    }

    let mut dx = dhidden;
    for (k, lc) in cache.layers.iter().enumerate().rev() {
        dx = layer_backward(lc, &params.layers[k], &mut g.layers[k], &dx);
    }

    let sent = &cache.sentence;
    for i in 0..sent.len() {
        let row = dx.row(i);
        g.position_emb.row_mut(i).scaled_add(1.0, &row);
        g.word_emb.row_mut(sent.words[i]).scaled_add(1.0, &row);
        g.pos_emb.row_mut(sent.pos[i]).scaled_add(1.0, &row);
        char_backward(&cache.chars[i], params, &mut g, row);
    }
    g
}

#[cfg(test)]
pub(super) fn char_backward_for_test(
    cache: &CharCache,
    params: &ModelParams,
    g: &mut ModelParams,
    dout: ndarray::ArrayView1<f64>,
) {
    char_backward(cache, params, g, dout)
}

#[cfg(test)]
pub(super) fn layer_backward_for_test(
    cache: &LayerCache,
    l: &EncoderLayer,
    g: &mut EncoderLayer,
    dout: &Array2<f64>,
) -> Array2<f64> {
    layer_backward(cache, l, g, dout)
}
