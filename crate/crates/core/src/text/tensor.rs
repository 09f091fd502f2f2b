//! Row-major dense kernels with their backward passes. A matrix with `n`
//! rows and `d` columns is a flat slice of length `n * d`.

pub(crate) const LN_EPS: f64 = 1e-12;

/// `y = x W + b` with `W` stored as `din × dout`.
pub(crate) fn linear(x: &[f64], n: usize, din: usize, w: &[f64], b: &[f64], dout: usize) -> Vec<f64> {
    let mut y = Vec::with_capacity(n * dout);
    for i in 0..n {
        y.extend_from_slice(b);
        let row = &mut y[i * dout..(i + 1) * dout];
        for (k, xv) in x[i * din..(i + 1) * din].iter().enumerate() {
            if *xv == 0.0 {
                continue;
            }
            for (o, wv) in row.iter_mut().zip(&w[k * dout..(k + 1) * dout]) {
                *o += xv * wv;
            }
        }
    }
    y
}

/// Accumulates `dW += xᵀ dy`, `db += Σ dy` and returns `dx = dy Wᵀ`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn linear_backward(
    x: &[f64],
    n: usize,
    din: usize,
    w: &[f64],
    dout: usize,
    dy: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
) -> Vec<f64> {
    let mut dx = vec![0.0; n * din];
    for i in 0..n {
        let dyr = &dy[i * dout..(i + 1) * dout];
        for (g, d) in db.iter_mut().zip(dyr) {
            *g += d;
        }
        for k in 0..din {
            let xv = x[i * din + k];
            let wr = &w[k * dout..(k + 1) * dout];
            let dwr = &mut dw[k * dout..(k + 1) * dout];
            let mut acc = 0.0;
            for o in 0..dout {
                dwr[o] += xv * dyr[o];
                acc += dyr[o] * wr[o];
            }
            dx[i * din + k] = acc;
        }
    }
    dx
}

pub(crate) struct LnCache {
    pub xhat: Vec<f64>,
    pub inv_std: Vec<f64>,
}

/// Per-row normalization to zero mean and unit variance, before the affine
/// map.
pub fn layer_norm_rows(x: &[f64], d: usize) -> Vec<f64> {
    normalize_rows(x, d).0
}

fn normalize_rows(x: &[f64], d: usize) -> (Vec<f64>, Vec<f64>) {
    let n = x.len() / d;
    let mut xhat = Vec::with_capacity(x.len());
    let mut inv_std = Vec::with_capacity(n);
    for row in x.chunks(d) {
        let mean = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let is = 1.0 / (var + LN_EPS).sqrt();
        xhat.extend(row.iter().map(|v| (v - mean) * is));
        inv_std.push(is);
    }
    (xhat, inv_std)
}

pub(crate) fn layer_norm(x: &[f64], d: usize, g: &[f64], b: &[f64]) -> (Vec<f64>, LnCache) {
    let (xhat, inv_std) = normalize_rows(x, d);
    let y = xhat
        .chunks(d)
        .flat_map(|row| row.iter().zip(g).zip(b).map(|((v, g), b)| v * g + b))
        .collect();
    (y, LnCache { xhat, inv_std })
}

pub(crate) fn layer_norm_backward(
    cache: &LnCache,
    d: usize,
    g: &[f64],
    dy: &[f64],
    dg: &mut [f64],
    db: &mut [f64],
) -> Vec<f64> {
    let mut dx = Vec::with_capacity(dy.len());
    let mut dxhat = vec![0.0; d];
    for (i, dyr) in dy.chunks(d).enumerate() {
        let xr = &cache.xhat[i * d..(i + 1) * d];
        for j in 0..d {
            dg[j] += dyr[j] * xr[j];
            db[j] += dyr[j];
            dxhat[j] = dyr[j] * g[j];
        }
        let m1 = dxhat.iter().sum::<f64>() / d as f64;
        let m2 = dxhat.iter().zip(xr).map(|(a, b)| a * b).sum::<f64>() / d as f64;
        let is = cache.inv_std[i];
        dx.extend((0..d).map(|j| is * (dxhat[j] - m1 - xr[j] * m2)));
    }
    dx
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

pub(crate) fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

pub(crate) fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + 0.044715 * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
}

/// Softmax over the entries where `valid` holds; the rest get exactly 0.
pub(crate) fn masked_softmax(scores: &mut [f64], valid: &[bool]) {
    let max = scores
        .iter()
        .zip(valid)
        .filter(|(_, v)| **v)
        .map(|(s, _)| *s)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (s, v) in scores.iter_mut().zip(valid) {
        *s = if *v { (*s - max).exp() } else { 0.0 };
        sum += *s;
    }
    for s in scores.iter_mut() {
        *s /= sum;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{check_gradient, finite_diff_gradient};
    use crate::synth::SynthRng;

    fn rand_vec(rng: &mut SynthRng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect()
    }

    #[test]
    fn linear_matches_loops() {
        let mut rng = SynthRng::new(1);
        let (n, din, dout) = (3, 4, 2);
        let x = rand_vec(&mut rng, n * din);
        let w = rand_vec(&mut rng, din * dout);
        let b = rand_vec(&mut rng, dout);
        let y = linear(&x, n, din, &w, &b, dout);
        for i in 0..n {
            for o in 0..dout {
                let e: f64 = b[o] + (0..din).map(|k| x[i * din + k] * w[k * dout + o]).sum::<f64>();
                assert!((y[i * dout + o] - e).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn linear_backward_matches_finite_differences() {
        let mut rng = SynthRng::new(2);
        let (n, din, dout) = (3, 4, 5);
        let x = rand_vec(&mut rng, n * din);
        let w = rand_vec(&mut rng, din * dout);
        let b = rand_vec(&mut rng, dout);
        let r = rand_vec(&mut rng, n * dout);
        let loss = |x: &[f64]| linear(x, n, din, &w, &b, dout).iter().zip(&r).map(|(a, b)| a * b).sum::<f64>();
        let mut dw = vec![0.0; w.len()];
        let mut db = vec![0.0; dout];
        let dx = linear_backward(&x, n, din, &w, dout, &r, &mut dw, &mut db);
        let num = finite_diff_gradient(loss, &x, 1e-6).unwrap();
        assert!(check_gradient(&dx, &num).unwrap() < 1e-8);
    }

    #[test]
    fn layer_norm_moments() {
        let mut rng = SynthRng::new(3);
        let x: Vec<f64> = (0..40).map(|_| 5.0 + 3.0 * rng.normal()).collect();
        let y = layer_norm_rows(&x, 8);
        for row in y.chunks(8) {
            let m = row.iter().sum::<f64>() / 8.0;
            let v = row.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / 8.0;
            assert!(m.abs() < 1e-10);
            assert!((v - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn layer_norm_backward_matches_finite_differences() {
        let mut rng = SynthRng::new(4);
        let d = 6;
        let x = rand_vec(&mut rng, 2 * d);
        let g = rand_vec(&mut rng, d);
        let b = rand_vec(&mut rng, d);
        let r = rand_vec(&mut rng, 2 * d);
        let loss = |x: &[f64]| layer_norm(x, d, &g, &b).0.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>();
        let (_, cache) = layer_norm(&x, d, &g, &b);
        let mut dg = vec![0.0; d];
        let mut db = vec![0.0; d];
        let dx = layer_norm_backward(&cache, d, &g, &r, &mut dg, &mut db);
        let num = finite_diff_gradient(loss, &x, 1e-6).unwrap();
        assert!(check_gradient(&dx, &num).unwrap() < 1e-7);
    }

    #[test]
    fn gelu_derivative() {
        for x in [-3.0, -0.5, 0.0, 0.7, 2.5] {
            let num = (gelu(x + 1e-6) - gelu(x - 1e-6)) / 2e-6;
            assert!((gelu_grad(x) - num).abs() < 1e-8);
        }
        assert_eq!(gelu(0.0), 0.0);
    }

    #[test]
    fn softmax_respects_mask() {
        let mut s = vec![1.0, 2.0, 50.0, 3.0];
        masked_softmax(&mut s, &[true, true, false, true]);
        assert_eq!(s[2], 0.0);
        assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }
}
