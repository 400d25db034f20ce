//! GPT-2 decoder forward pass (f32, inference mode) that keeps only the
//! attention probabilities.

use super::attention::{AttentionTensor, NeuronDetail};
use super::weights::{LayerNorm, Linear, WeightBundle};
use crate::error::{Error, Result};
use crate::tokenizer::TokenId;

/// `c[m x n] = a[m x k] * b[k x n]`, all row-major.
fn matmul(a: &[f32], b: &[f32], m: usize, k: usize, n: usize) -> Vec<f32> {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    let mut c = vec![0.0f32; m * n];
    // SAFETY: the slices hold exactly m*k, k*n and m*n elements (asserted and
    // allocated above) and the strides describe dense row-major layouts.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            n as isize,
            1,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
    c
}

fn linear(x: &[f32], rows: usize, lin: &Linear) -> Vec<f32> {
    let mut y = matmul(x, &lin.weight, rows, lin.d_in, lin.d_out);
    for row in y.chunks_exact_mut(lin.d_out) {
        for (v, b) in row.iter_mut().zip(&lin.bias) {
            *v += b;
        }
    }
    y
}

fn layer_norm(x: &[f32], d: usize, ln: &LayerNorm, eps: f32) -> Vec<f32> {
    let mut out = Vec::with_capacity(x.len());
    for row in x.chunks_exact(d) {
        let mean = row.iter().sum::<f32>() / d as f32;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f32>() / d as f32;
        let inv = 1.0 / (var + eps).sqrt();
        out.extend(
            row.iter()
                .zip(ln.weight.iter().zip(&ln.bias))
                .map(|(v, (w, b))| (v - mean) * inv * w + b),
        );
    }
    out
}

/// Tanh approximation of GELU, as in the released model.
fn gelu(x: f32) -> f32 {
    const C: f32 = 0.797_884_6; // sqrt(2 / pi)
    0.5 * x * (1.0 + (C * (x + 0.044_715 * x * x * x)).tanh())
}

/// Softmax in place with max subtraction.
pub(crate) fn softmax(v: &mut [f32]) {
    let max = v.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

fn dot(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Probe {
    layer: usize,
    head: usize,
    position: usize,
    detail: Option<NeuronDetail>,
}

/// Runs layers `0..=last_layer`, writing every head's probabilities into
/// `attn`. Work after the last needed attention is skipped.
fn run(bundle: &WeightBundle, ids: &[TokenId], last_layer: usize, attn: &mut AttentionTensor, mut probe: Option<&mut Probe>) -> Result<()> {
    let c = &bundle.config;
    let n = ids.len();
    if n == 0 {
        return Err(Error::EmptyInput("token sequence"));
    }
    if n > c.n_ctx {
        return Err(Error::Length { len: n, n_ctx: c.n_ctx });
    }
    let d = c.d_model;
    let dh = c.d_head;
    let scale = (dh as f32).sqrt();

    let mut x = Vec::with_capacity(n * d);
    for (pos, &id) in ids.iter().enumerate() {
        let id = id as usize;
        if id >= c.vocab_size {
            return Err(Error::Range {
                what: "token id",
                index: id,
                limit: c.vocab_size,
            });
        }
        let te = &bundle.wte[id * d..(id + 1) * d];
        let pe = &bundle.wpe[pos * d..(pos + 1) * d];
        x.extend(te.iter().zip(pe).map(|(a, b)| a + b));
    }

    let mut scores = vec![0.0f32; n];
    for (l, block) in bundle.blocks.iter().enumerate().take(last_layer + 1) {
        let h = layer_norm(&x, d, &block.ln_1, c.layer_norm_epsilon);
        let qkv = linear(&h, n, &block.attn_qkv);
        let mut ctx = vec![0.0f32; n * d];
        for head in 0..c.n_heads {
            let q = |i: usize| &qkv[i * 3 * d + head * dh..][..dh];
            let k = |j: usize| &qkv[i_k(j, d) + head * dh..][..dh];
            let v = |j: usize| &qkv[i_k(j, d) + d + head * dh..][..dh];
            let probs = attn.head_mut(l, head);
            for i in 0..n {
                let row = &mut scores[..=i];
                for (j, s) in row.iter_mut().enumerate() {
                    *s = dot(q(i), k(j)) / scale;
                }
                if let Some(p) = probe.as_deref_mut() {
                    if (p.layer, p.head, p.position) == (l, head, i) {
                        let products: Vec<Vec<f32>> = (0..=i).map(|j| q(i).iter().zip(k(j)).map(|(a, b)| a * b).collect()).collect();
                        p.detail = Some(NeuronDetail {
                            layer: l,
                            head,
                            position: i,
                            query: q(i).to_vec(),
                            keys: (0..=i).map(|j| k(j).to_vec()).collect(),
                            elementwise_products: products,
                            dot_products: row.to_vec(),
                            softmax: Vec::new(),
                        });
                    }
                }
                softmax(row);
                probs[i * n..i * n + i + 1].copy_from_slice(row);
                let out = &mut ctx[i * d + head * dh..][..dh];
                for (j, &p) in row.iter().enumerate() {
                    for (o, vv) in out.iter_mut().zip(v(j)) {
                        *o += p * vv;
                    }
                }
                if let Some(p) = probe.as_deref_mut() {
                    if let Some(detail) = p.detail.as_mut().filter(|dt| (dt.layer, dt.head, dt.position) == (l, head, i)) {
                        detail.softmax = row.to_vec();
                    }
                }
            }
        }
        if l == last_layer {
            break;
        }
        let attn_out = linear(&ctx, n, &block.attn_proj);
        for (a, b) in x.iter_mut().zip(&attn_out) {
            *a += b;
        }
        let h2 = layer_norm(&x, d, &block.ln_2, c.layer_norm_epsilon);
        let mut ff = linear(&h2, n, &block.mlp_fc);
        ff.iter_mut().for_each(|v| *v = gelu(*v));
        let ff_out = linear(&ff, n, &block.mlp_proj);
        for (a, b) in x.iter_mut().zip(&ff_out) {
            *a += b;
        }
    }
    Ok(())
}

/// Row offset of position `j`'s key block inside the fused qkv buffer.
#[inline]
fn i_k(j: usize, d: usize) -> usize {
    j * 3 * d + d
}

/// Attention of every layer and head for one token sequence.
pub fn forward_attention(bundle: &WeightBundle, ids: &[TokenId]) -> Result<AttentionTensor> {
    let c = &bundle.config;
    let mut attn = AttentionTensor::zeros(c.n_layers, c.n_heads, ids.len());
    run(bundle, ids, c.n_layers - 1, &mut attn, None)?;
    Ok(attn)
}

/// Query, keys and their products behind one attention row.
pub fn neuron_detail(bundle: &WeightBundle, ids: &[TokenId], layer: usize, head: usize, position: usize) -> Result<NeuronDetail> {
    let c = &bundle.config;
    for (what, index, limit) in [
        ("layer", layer, c.n_layers),
        ("head", head, c.n_heads),
        ("position", position, ids.len()),
    ] {
        if index >= limit {
            return Err(Error::Range { what, index, limit });
        }
    }
    let mut attn = AttentionTensor::zeros(layer + 1, c.n_heads, ids.len());
    let mut probe = Probe {
        layer,
        head,
        position,
        detail: None,
    };
    run(bundle, ids, layer, &mut attn, Some(&mut probe))?;
    Ok(probe.detail.expect("probe position is inside the sequence"))
}
