//! Quick gradient and invariant checks behind the `check` subcommand.

use serde::Serialize;

use crate::garch::{garch_filter, garch_log_likelihood_with_init, GarchParams};
use crate::lstm::{compute_gradients, mse, LstmNetwork, Window};
use crate::numerics::{check_gradient, finite_diff_gradient};
use crate::series::rmse;
use crate::synth::SynthRng;
use crate::text::{
    encoder_forward, layer_norm_rows, masked_loss, masked_loss_and_grad, regression_loss, regression_loss_and_grad,
    scaled_dot_attention, EncoderConfig, MaskedExample, TextEncoderModel, TextExample, TokenSequence, CLS, MASK,
};
use crate::training::ParamSet;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
}

fn result(name: &str, value: f64, threshold: f64) -> CheckResult {
    CheckResult {
        name: name.to_string(),
        passed: value.is_finite() && value < threshold,
        value,
        threshold,
    }
}

fn rmse_oracle(rng: &mut SynthRng) -> f64 {
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = 1 + rng.below(50);
        let a: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let mut s = 0.0;
        for i in 0..n {
            s += (a[i] - b[i]).powi(2);
        }
        let oracle = (s / n as f64).sqrt();
        worst = worst.max((rmse(&a, &b).unwrap_or(f64::NAN) - oracle).abs());
    }
    worst
}

fn garch_oracle() -> f64 {
    let p = GarchParams::new(0.0, 0.1, 0.2, 0.7);
    let r = [0.5, -0.3];
    let s0: f64 = 1.0;
    let s1 = 0.1 + 0.2 * 0.25 + 0.7 * s0;
    let hand = -0.5 * ((2.0 * std::f64::consts::PI).ln() * 2.0 + s0.ln() + 0.25 / s0 + s1.ln() + 0.09 / s1);
    let path = garch_filter(&p, &r, s0).unwrap_or_default();
    let ll = garch_log_likelihood_with_init(&p, &r, s0);
    let path_err = if path.len() == 2 { (path[1] - s1).abs() } else { f64::NAN };
    path_err.max((ll - hand).abs())
}

// Central-difference steps. Some weights have gradients of 1e-9 to 1e-8,
// where roundoff at a 1e-5 step alone costs ~1e-4 relative error.
const LSTM_STEP: f64 = 3e-4;
const ENCODER_STEP: f64 = 6e-5;

fn lstm_gradients(rng: &mut SynthRng, draws: u64) -> f64 {
    let mut worst: f64 = 0.0;
    for d in 0..draws {
        let Ok(net) = LstmNetwork::new(8, 4, 5, d) else { return f64::NAN };
        let batch: Vec<Window> = (0..3)
            .map(|_| Window {
                input: (0..5).map(|_| rng.uniform(-1.0, 1.0)).collect(),
                target: rng.uniform(-1.0, 1.0),
            })
            .collect();
        let Ok((_, g)) = compute_gradients(&net, &batch) else { return f64::NAN };
        let mut probe = net.clone();
        let num = finite_diff_gradient(
            |x| {
                let _ = probe.load_flat(x);
                mse(&probe, &batch).unwrap_or(f64::NAN)
            },
            &net.to_flat(),
            LSTM_STEP,
        );
        match num.and_then(|n| check_gradient(&g.to_flat(), &n)) {
            Ok(e) => worst = worst.max(e),
            Err(_) => return f64::NAN,
        }
    }
    worst
}

fn small_encoder(seed: u64) -> Option<TextEncoderModel> {
    let cfg = EncoderConfig {
        vocab_size: 20,
        d_model: 16,
        heads: 2,
        blocks: 1,
        d_ff: 16,
        max_len: 12,
    };
    let mut m = TextEncoderModel::new(cfg, seed).ok()?;
    let mut rng = SynthRng::new(seed ^ 0x77);
    m.visit_mut(&mut |t| t.iter_mut().for_each(|v| *v += 0.2 * rng.normal()));
    Some(m)
}

fn random_ids(rng: &mut SynthRng, n: usize) -> Vec<usize> {
    std::iter::once(CLS).chain((1..n).map(|_| 4 + rng.below(16))).collect()
}

fn encoder_gradients(rng: &mut SynthRng, draws: u64, masked: bool) -> f64 {
    let mut worst: f64 = 0.0;
    for d in 0..draws {
        let Some(m) = small_encoder(d) else { return f64::NAN };
        let mut probe = m.clone();
        let x0 = m.to_flat();
        let (analytic, numeric) = if masked {
            let batch: Vec<MaskedExample> = (0..2)
                .map(|_| {
                    let mut ids = random_ids(rng, 6);
                    let t = ids[3];
                    ids[3] = MASK;
                    MaskedExample { ids, targets: vec![(3, t)] }
                })
                .collect();
            let a = masked_loss_and_grad(&m, &batch).map(|(_, g)| g.to_flat());
            let n = finite_diff_gradient(
                |x| {
                    let _ = probe.load_flat(x);
                    masked_loss(&probe, &batch).unwrap_or(f64::NAN)
                },
                &x0,
                ENCODER_STEP,
            );
            (a, n)
        } else {
            let batch: Vec<TextExample> = (0..2)
                .map(|_| TextExample { ids: random_ids(rng, 5), target: rng.normal() })
                .collect();
            let a = regression_loss_and_grad(&m, &batch).map(|(_, g)| g.to_flat());
            let n = finite_diff_gradient(
                |x| {
                    let _ = probe.load_flat(x);
                    regression_loss(&probe, &batch).unwrap_or(f64::NAN)
                },
                &x0,
                ENCODER_STEP,
            );
            (a, n)
        };
        match (analytic, numeric) {
            (Ok(a), Ok(n)) => match check_gradient(&a, &n) {
                Ok(e) => worst = worst.max(e),
                Err(_) => return f64::NAN,
            },
            _ => return f64::NAN,
        }
    }
    worst
}

/// Worst row-sum error, worst masked weight and worst PAD-extension drift.
fn attention_invariants(rng: &mut SynthRng, instances: usize) -> (f64, f64, f64) {
    let (mut row, mut masked, mut drift) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..instances {
        let n = 2 + rng.below(8);
        let dk = 1 + rng.below(6);
        let mat = |rng: &mut SynthRng| -> Vec<Vec<f64>> {
            (0..n).map(|_| (0..dk).map(|_| 2.0 * rng.normal()).collect()).collect()
        };
        let (q, k, v) = (mat(rng), mat(rng), mat(rng));
        let mut mask: Vec<bool> = (0..n).map(|_| rng.chance(0.7)).collect();
        mask[0] = true;
        let Ok(out) = scaled_dot_attention(&q, &k, &v, &mask) else { return (f64::NAN, f64::NAN, f64::NAN) };
        for w in &out.weights {
            row = row.max((w.iter().sum::<f64>() - 1.0).abs());
            for (x, m) in w.iter().zip(&mask) {
                if !m {
                    masked = masked.max(*x);
                }
            }
        }
        let Some(model) = small_encoder(i as u64) else { return (f64::NAN, f64::NAN, f64::NAN) };
        let len = 1 + rng.below(6);
        let ids = random_ids(rng, len);
        let short = TokenSequence::from_ids(&ids, len + 1);
        let long = TokenSequence::from_ids(&ids, 12);
        match (short, long) {
            (Ok(s), Ok(l)) => match (encoder_forward(&model, &s), encoder_forward(&model, &l)) {
                (Ok(a), Ok(b)) => drift = drift.max((a.prediction - b.prediction).abs()),
                _ => drift = f64::NAN,
            },
            _ => drift = f64::NAN,
        }
    }
    (row, masked, drift)
}

fn layer_norm_moments(rng: &mut SynthRng) -> f64 {
    let x: Vec<f64> = (0..32 * 16).map(|_| 3.0 + 5.0 * rng.normal()).collect();
    let y = layer_norm_rows(&x, 32);
    let mut worst: f64 = 0.0;
    for r in y.chunks(32) {
        let m = r.iter().sum::<f64>() / 32.0;
        let v = r.iter().map(|a| (a - m).powi(2)).sum::<f64>() / 32.0;
        worst = worst.max(m.abs() * 1e4).max((v - 1.0).abs());
    }
    worst
}

/// Runs the suite with a fixed seed; every check reports its measured value.
pub fn run_checks() -> Vec<CheckResult> {
    let mut rng = SynthRng::new(2024);
    let (row, masked, drift) = attention_invariants(&mut rng, 100);
    vec![
        result("rmse_oracle", rmse_oracle(&mut rng), 1e-12),
        result("garch_filter_likelihood", garch_oracle(), 1e-10),
        result("lstm_gradient", lstm_gradients(&mut rng, 100), 1e-4),
        result("encoder_regression_gradient", encoder_gradients(&mut rng, 20, false), 1e-4),
        result("encoder_masked_gradient", encoder_gradients(&mut rng, 20, true), 1e-4),
        result("attention_row_sums", row, 1e-12),
        result("attention_masked_weight", masked, 1e-12),
        result("pad_extension_drift", drift, 1e-10),
        result("layer_norm_moments", layer_norm_moments(&mut rng), 1e-6),
    ]
}
