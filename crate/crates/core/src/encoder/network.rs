//! Forward and backward passes of the embedding + encoder stack.

use super::mat::{linear, linear_backward, weight, Mat};
use super::params::{Gradients, LayerParams, Parameters, Tensor};
use crate::error::{Error, Result};

/// Token ids with their segment row (0 for odd sentences, 1 for even).
/// Positions are implicit: `0..len`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceInput {
    pub tokens: Vec<u32>,
    pub segments: Vec<usize>,
}

impl SequenceInput {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

fn to_f64(t: &Tensor<f32>) -> Vec<f64> {
    t.data.iter().map(|&v| f64::from(v)).collect()
}

struct LayerWeights {
    query: Vec<Mat>,
    key: Vec<Mat>,
    value: Vec<Mat>,
    output: Mat,
    norm1_gain: Vec<f64>,
    norm1_bias: Vec<f64>,
    w1: Mat,
    b1: Vec<f64>,
    w2: Mat,
    b2: Vec<f64>,
    norm2_gain: Vec<f64>,
    norm2_bias: Vec<f64>,
}

fn per_head(t: &Tensor<f32>, heads: usize, h: usize) -> Vec<Mat> {
    let all = to_f64(t);
    all.chunks(h * h)
        .take(heads)
        .map(|c| weight(c, h, h))
        .collect()
}

impl LayerWeights {
    fn new(p: &LayerParams<f32>, d: usize, heads: usize) -> Self {
        let h = d / heads;
        Self {
            query: per_head(&p.query, heads, h),
            key: per_head(&p.key, heads, h),
            value: per_head(&p.value, heads, h),
            output: weight(&to_f64(&p.output), d, d),
            norm1_gain: to_f64(&p.norm1_gain),
            norm1_bias: to_f64(&p.norm1_bias),
            w1: weight(&to_f64(&p.ffn_w1), d, d),
            b1: to_f64(&p.ffn_b1),
            w2: weight(&to_f64(&p.ffn_w2), d, d),
            b2: to_f64(&p.ffn_b2),
            norm2_gain: to_f64(&p.norm2_gain),
            norm2_bias: to_f64(&p.norm2_bias),
        }
    }
}

struct HeadCache {
    z: Mat,
    q: Mat,
    k: Mat,
    v: Mat,
    attn: Mat,
}

struct NormCache {
    xhat: Mat,
    inv_std: Vec<f64>,
}

struct LayerCache {
    heads: Vec<HeadCache>,
    concat: Mat,
    norm1: NormCache,
    y1: Mat,
    u: Mat,
    pre_relu: Mat,
    norm2: NormCache,
}

/// Everything the backward pass needs, plus read access for diagnostics.
pub struct ForwardPass {
    input: SequenceInput,
    embedded: Mat,
    weights: Vec<LayerWeights>,
    layers: Vec<LayerCache>,
    output: Mat,
}

impl ForwardPass {
    pub fn embedded(&self) -> &Mat {
        &self.embedded
    }

    pub fn output(&self) -> &Mat {
        &self.output
    }

    pub fn into_output(self) -> Mat {
        self.output
    }

    /// Softmax weights of `head` in `layer`, one row per query position.
    pub fn attention(&self, layer: usize, head: usize) -> &Mat {
        &self.layers[layer].heads[head].attn
    }

    /// Normalized pre-gain layer-norm output: `which` 0 after attention,
    /// 1 after the feed-forward block.
    pub fn normalized(&self, layer: usize, which: usize) -> &Mat {
        match which {
            0 => &self.layers[layer].norm1.xhat,
            _ => &self.layers[layer].norm2.xhat,
        }
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }
}

/// z_t = E[token_t] + P[t] + B[segment_t].
pub(crate) fn embed_sequence(input: &SequenceInput, params: &Parameters) -> Result<Mat> {
    let cfg = &params.config;
    let d = cfg.d;
    if input.len() > cfg.max_positions {
        return Err(Error::contract(format!(
            "sequence of {} tokens exceeds max_positions {}",
            input.len(),
            cfg.max_positions
        )));
    }
    let mut z = Mat::zeros(input.len(), d);
    for (t, (&tok, &seg)) in input.tokens.iter().zip(&input.segments).enumerate() {
        let tok = tok as usize;
        if tok >= cfg.vocab_size {
            return Err(Error::contract(format!(
                "token id {tok} outside vocabulary of {}",
                cfg.vocab_size
            )));
        }
        let e = &params.word_emb.data[tok * d..(tok + 1) * d];
        let p = &params.pos_emb.data[t * d..(t + 1) * d];
        let b = &params.seg_emb.data[seg * d..(seg + 1) * d];
        for (j, out) in z.row_mut(t).iter_mut().enumerate() {
            *out = f64::from(e[j]) + f64::from(p[j]) + f64::from(b[j]);
        }
    }
    Ok(z)
}

fn softmax_rows(s: &mut Mat) {
    for i in 0..s.rows() {
        let row = s.row_mut(i);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

fn layer_norm(x: &Mat, gain: &[f64], bias: &[f64], eps: f64) -> (Mat, NormCache) {
    let (rows, cols) = x.shape();
    let mut xhat = Mat::zeros(rows, cols);
    let mut y = Mat::zeros(rows, cols);
    let mut inv_std = Vec::with_capacity(rows);
    for i in 0..rows {
        let r = x.row(i);
        let mean = r.iter().sum::<f64>() / cols as f64;
        let var = r.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
        let is = 1.0 / (var + eps).sqrt();
        inv_std.push(is);
        for j in 0..cols {
            let n = (r[j] - mean) * is;
            xhat.row_mut(i)[j] = n;
            y.row_mut(i)[j] = gain[j] * n + bias[j];
        }
    }
    (y, NormCache { xhat, inv_std })
}

fn layer_norm_backward(
    dy: &Mat,
    cache: &NormCache,
    gain: &[f64],
    dgain: &mut [f64],
    dbias: &mut [f64],
) -> Mat {
    let (rows, cols) = dy.shape();
    let mut dx = Mat::zeros(rows, cols);
    for i in 0..rows {
        let g = dy.row(i);
        let xh = cache.xhat.row(i);
        let mut dxhat = vec![0.0; cols];
        for j in 0..cols {
            dgain[j] += g[j] * xh[j];
            dbias[j] += g[j];
            dxhat[j] = g[j] * gain[j];
        }
        let mean_d = dxhat.iter().sum::<f64>() / cols as f64;
        let mean_dx = dxhat.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>() / cols as f64;
        for j in 0..cols {
            dx.row_mut(i)[j] = cache.inv_std[i] * (dxhat[j] - mean_d - xh[j] * mean_dx);
        }
    }
    dx
}

fn layer_forward(x: &Mat, w: &LayerWeights, heads: usize, eps: f64) -> (Mat, LayerCache) {
    let (t, d) = x.shape();
    let h = d / heads;
    let scale = 1.0 / (h as f64).sqrt();
    let mut concat = Mat::zeros(t, d);
    let mut head_caches = Vec::with_capacity(heads);
    for j in 0..heads {
        let z = x.columns(j * h, h);
        let q = linear(&z, &w.query[j], None);
        let k = linear(&z, &w.key[j], None);
        let v = linear(&z, &w.value[j], None);
        let mut attn = q.matmul_t(&k);
        attn.scale(scale);
        softmax_rows(&mut attn);
        concat.set_columns(j * h, &attn.matmul(&v));
        head_caches.push(HeadCache { z, q, k, v, attn });
    }
    let mut r1 = linear(&concat, &w.output, None);
    r1.add_assign(x);
    let (y1, norm1) = layer_norm(&r1, &w.norm1_gain, &w.norm1_bias, eps);

    let u = linear(&y1, &w.w1, Some(&w.b1));
    let pre_relu = linear(&u, &w.w2, Some(&w.b2));
    let mut r2 = pre_relu.clone();
    for i in 0..t {
        for (a, b) in r2.row_mut(i).iter_mut().zip(y1.row(i)) {
            *a = a.max(0.0) + b;
        }
    }
    let (y2, norm2) = layer_norm(&r2, &w.norm2_gain, &w.norm2_bias, eps);
    (
        y2,
        LayerCache {
            heads: head_caches,
            concat,
            norm1,
            y1,
            u,
            pre_relu,
            norm2,
        },
    )
}

/// Embeds `input` and runs every encoder layer.
pub fn forward(input: &SequenceInput, params: &Parameters) -> Result<ForwardPass> {
    let cfg = &params.config;
    let embedded = embed_sequence(input, params)?;
    let weights: Vec<LayerWeights> = params
        .layers
        .iter()
        .map(|l| LayerWeights::new(l, cfg.d, cfg.heads))
        .collect();
    let mut x = embedded.clone();
    let mut layers = Vec::with_capacity(weights.len());
    for (l, w) in weights.iter().enumerate() {
        let (y, cache) = layer_forward(&x, w, cfg.heads, cfg.ln_epsilon);
        if !y.all_finite() {
            return Err(Error::Numeric {
                layer: l,
                detail: "non-finite activation in encoder output".into(),
            });
        }
        layers.push(cache);
        x = y;
    }
    Ok(ForwardPass {
        input: input.clone(),
        embedded,
        weights,
        layers,
        output: x,
    })
}

/// Accumulates into `grads` the gradient of a scalar whose derivative with
/// respect to the encoder output is `d_output`.
pub(crate) fn backward(pass: &ForwardPass, d_output: &Mat, grads: &mut Gradients) {
    let cfg = &grads.config;
    let heads = cfg.heads;
    let d = cfg.d;
    let h = d / heads;
    let scale = 1.0 / (h as f64).sqrt();

    let mut dx = d_output.clone();
    for (l, (cache, w)) in pass.layers.iter().zip(&pass.weights).enumerate().rev() {
        let g = &mut grads.layers[l];

        // second sublayer: LN(y1 + relu(W2(W1 y1 + b1) + b2))
        let dr2 = layer_norm_backward(
            &dx,
            &cache.norm2,
            &w.norm2_gain,
            &mut g.norm2_gain.data,
            &mut g.norm2_bias.data,
        );
        let mut dpre = dr2.clone();
        for i in 0..dpre.rows() {
            for (dv, &pv) in dpre.row_mut(i).iter_mut().zip(cache.pre_relu.row(i)) {
                if pv <= 0.0 {
                    *dv = 0.0;
                }
            }
        }
        let du = linear_backward(
            &dpre,
            &cache.u,
            &w.w2,
            &mut g.ffn_w2.data,
            Some(&mut g.ffn_b2.data),
        );
        let mut dy1 = linear_backward(
            &du,
            &cache.y1,
            &w.w1,
            &mut g.ffn_w1.data,
            Some(&mut g.ffn_b1.data),
        );
        dy1.add_assign(&dr2);

        // first sublayer: LN(x + W0 [heads])
        let dr1 = layer_norm_backward(
            &dy1,
            &cache.norm1,
            &w.norm1_gain,
            &mut g.norm1_gain.data,
            &mut g.norm1_bias.data,
        );
        let dconcat = linear_backward(&dr1, &cache.concat, &w.output, &mut g.output.data, None);
        let mut dinput = dr1;
        for (j, hc) in cache.heads.iter().enumerate() {
            let dhead = dconcat.columns(j * h, h);
            let da = dhead.matmul_t(&hc.v);
            let dv = hc.attn.t_matmul(&dhead);
            let mut ds = Mat::zeros(da.rows(), da.cols());
            for i in 0..da.rows() {
                let a = hc.attn.row(i);
                let g_row = da.row(i);
                let inner: f64 = a.iter().zip(g_row).map(|(p, q)| p * q).sum();
                for (k, out) in ds.row_mut(i).iter_mut().enumerate() {
                    *out = a[k] * (g_row[k] - inner) * scale;
                }
            }
            let dq = ds.matmul(&hc.k);
            let dk = ds.t_matmul(&hc.q);
            let span = j * h * h..(j + 1) * h * h;
            let mut dz = linear_backward(
                &dq,
                &hc.z,
                &w.query[j],
                &mut g.query.data[span.clone()],
                None,
            );
            dz.add_assign(&linear_backward(
                &dk,
                &hc.z,
                &w.key[j],
                &mut g.key.data[span.clone()],
                None,
            ));
            dz.add_assign(&linear_backward(
                &dv,
                &hc.z,
                &w.value[j],
                &mut g.value.data[span],
                None,
            ));
            dinput.add_columns(j * h, &dz);
        }
        dx = dinput;
    }

    for (t, (&tok, &seg)) in pass
        .input
        .tokens
        .iter()
        .zip(&pass.input.segments)
        .enumerate()
    {
        let row = dx.row(t);
        let tok = tok as usize;
        for j in 0..d {
            grads.word_emb.data[tok * d + j] += row[j];
            grads.pos_emb.data[t * d + j] += row[j];
            grads.seg_emb.data[seg * d + j] += row[j];
        }
    }
}
