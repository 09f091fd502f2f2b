use crate::error::{Error, Result};

use super::tensor::masked_softmax;

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionOutput {
    pub output: Vec<Vec<f64>>,
    pub weights: Vec<Vec<f64>>,
}

/// `softmax(Q Kᵀ / sqrt(d_k)) V` where keys with `mask[j] == false` get
/// weight zero.
pub fn scaled_dot_attention(
    q: &[Vec<f64>],
    k: &[Vec<f64>],
    v: &[Vec<f64>],
    mask: &[bool],
) -> Result<AttentionOutput> {
    let dk = q.first().map_or(0, Vec::len);
    if dk == 0 {
        return Err(Error::invalid("queries must be non-empty"));
    }
    if k.len() != v.len() || k.len() != mask.len() {
        return Err(Error::DimensionMismatch {
            expected: k.len(),
            got: v.len().min(mask.len()),
        });
    }
    if k.is_empty() {
        return Err(Error::invalid("keys must be non-empty"));
    }
    let dv = v[0].len();
    for row in q.iter().chain(k) {
        if row.len() != dk {
            return Err(Error::DimensionMismatch {
                expected: dk,
                got: row.len(),
            });
        }
    }
    if let Some(row) = v.iter().find(|r| r.len() != dv) {
        return Err(Error::DimensionMismatch {
            expected: dv,
            got: row.len(),
        });
    }
    if !mask.iter().any(|m| *m) {
        return Err(Error::invalid("every key position is masked"));
    }
    let scale = 1.0 / (dk as f64).sqrt();
    let mut output = Vec::with_capacity(q.len());
    let mut weights = Vec::with_capacity(q.len());
    for qi in q {
        let mut w: Vec<f64> = k
            .iter()
            .map(|kj| qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() * scale)
            .collect();
        masked_softmax(&mut w, mask);
        let mut out = vec![0.0; dv];
        for (wj, vj) in w.iter().zip(v) {
            for (o, x) in out.iter_mut().zip(vj) {
                *o += wj * x;
            }
        }
        output.push(out);
        weights.push(w);
    }
    Ok(AttentionOutput { output, weights })
}

/// Multi-head attention core over projected `q`, `k`, `v` (each `n × d`,
/// heads occupying contiguous column blocks). Returns the concatenated
/// context and each head's `n × n` weights.
pub(crate) fn multi_head_forward(
    q: &[f64],
    k: &[f64],
    v: &[f64],
    n: usize,
    d: usize,
    heads: usize,
    valid: &[bool],
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let dk = d / heads;
    let scale = 1.0 / (dk as f64).sqrt();
    let mut ctx = vec![0.0; n * d];
    let mut probs = Vec::with_capacity(heads);
    for h in 0..heads {
        let off = h * dk;
        let mut p = vec![0.0; n * n];
        for i in 0..n {
            let qi = &q[i * d + off..i * d + off + dk];
            let row = &mut p[i * n..(i + 1) * n];
            for j in 0..n {
                if valid[j] {
                    let kj = &k[j * d + off..j * d + off + dk];
                    row[j] = qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() * scale;
                }
            }
            masked_softmax(row, valid);
            let out = &mut ctx[i * d + off..i * d + off + dk];
            for j in 0..n {
                let w = row[j];
                if w == 0.0 {
                    continue;
                }
                for (o, x) in out.iter_mut().zip(&v[j * d + off..j * d + off + dk]) {
                    *o += w * x;
                }
            }
        }
        probs.push(p);
    }
    (ctx, probs)
}

/// Gradients w.r.t. `q`, `k`, `v` given the gradient of the context.
#[allow(clippy::too_many_arguments)]
pub(crate) fn multi_head_backward(
    q: &[f64],
    k: &[f64],
    v: &[f64],
    n: usize,
    d: usize,
    heads: usize,
    probs: &[Vec<f64>],
    dctx: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let dk = d / heads;
    let scale = 1.0 / (dk as f64).sqrt();
    let mut dq = vec![0.0; n * d];
    let mut dk_out = vec![0.0; n * d];
    let mut dv = vec![0.0; n * d];
    let mut dp = vec![0.0; n];
    for (h, p) in probs.iter().enumerate() {
        let off = h * dk;
        for i in 0..n {
            let dci = &dctx[i * d + off..i * d + off + dk];
            let row = &p[i * n..(i + 1) * n];
            let mut dot = 0.0;
            for j in 0..n {
                if row[j] == 0.0 {
                    dp[j] = 0.0;
                    continue;
                }
                let vj = &v[j * d + off..j * d + off + dk];
                dp[j] = dci.iter().zip(vj).map(|(a, b)| a * b).sum();
                dot += row[j] * dp[j];
                for (g, c) in dv[j * d + off..j * d + off + dk].iter_mut().zip(dci) {
                    *g += row[j] * c;
                }
            }
            for j in 0..n {
                if row[j] == 0.0 {
                    continue;
                }
                let ds = row[j] * (dp[j] - dot) * scale;
                for t in 0..dk {
                    dq[i * d + off + t] += ds * k[j * d + off + t];
                    dk_out[j * d + off + t] += ds * q[i * d + off + t];
                }
            }
        }
    }
    (dq, dk_out, dv)
}
