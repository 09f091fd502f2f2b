//! Pieces shared by the neural models: flat parameter access, the Adam
//! training loop and the per-epoch loss history.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{adam_step, AdamConfig, AdamState};
use crate::synth::SynthRng;

/// Visits every trainable tensor in a fixed order.
pub trait ParamSet {
    fn visit(&self, f: &mut dyn FnMut(&[f64]));
    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64]));

    fn num_params(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |t| n += t.len());
        n
    }

    fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        self.visit(&mut |t| out.extend_from_slice(t));
        out
    }

    fn load_flat(&mut self, src: &[f64]) -> Result<()> {
        let expected = self.num_params();
        if src.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: src.len(),
            });
        }
        let mut offset = 0;
        self.visit_mut(&mut |t| {
            t.copy_from_slice(&src[offset..offset + t.len()]);
            offset += t.len();
        });
        Ok(())
    }

    fn fill(&mut self, value: f64) {
        self.visit_mut(&mut |t| t.iter_mut().for_each(|v| *v = value));
    }

    fn all_finite(&self) -> bool {
        let mut ok = true;
        self.visit(&mut |t| ok &= t.iter().all(|v| v.is_finite()));
        ok
    }
}

/// Zero-filled copy with the same shapes, used as a gradient accumulator.
pub fn zeros_like<P: ParamSet + Clone>(p: &P) -> P {
    let mut z = p.clone();
    z.fill(0.0);
    z
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Zero means full batch.
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 32,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

/// Per-epoch train and validation MSE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub epochs: usize,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// Epoch at which a non-finite loss or gradient stopped training; the
    /// model keeps its last finite parameters.
    pub diverged_at: Option<usize>,
}

impl TrainingHistory {
    pub fn final_train_loss(&self) -> Option<f64> {
        self.train_loss.last().copied()
    }

    pub fn final_val_loss(&self) -> Option<f64> {
        self.val_loss.last().copied()
    }
}

/// Splits `0..n` into shuffled mini-batches.
pub(crate) fn batches(n: usize, batch_size: usize, rng: &mut SynthRng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let size = if batch_size == 0 { n } else { batch_size.min(n) };
    order.chunks(size).map(<[usize]>::to_vec).collect()
}

/// Mini-batch Adam. `grad` returns the batch loss and a model-shaped
/// gradient; `eval` scores the whole train (`false`) or validation (`true`)
/// set after each epoch.
pub(crate) fn train_adam<M, G, E>(
    model: &mut M,
    n_train: usize,
    cfg: &TrainConfig,
    mut grad: G,
    mut eval: E,
) -> Result<TrainingHistory>
where
    M: ParamSet + Clone,
    G: FnMut(&M, &[usize]) -> Result<(f64, M)>,
    E: FnMut(&M, bool) -> Result<f64>,
{
    if cfg.epochs < 1 {
        return Err(Error::invalid("epochs must be at least 1"));
    }
    if n_train == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let mut rng = SynthRng::new(cfg.seed);
    let mut state = AdamState::new(model.num_params(), cfg.adam);
    let mut flat = model.to_flat();
    let mut history = TrainingHistory {
        epochs: cfg.epochs,
        train_loss: Vec::with_capacity(cfg.epochs),
        val_loss: Vec::with_capacity(cfg.epochs),
        diverged_at: None,
    };
    'epochs: for epoch in 0..cfg.epochs {
        for batch in batches(n_train, cfg.batch_size, &mut rng) {
            let (loss, g) = match grad(model, &batch) {
                Ok(v) => v,
                Err(Error::NonFinite(_)) => {
                    history.diverged_at = Some(epoch);
                    break 'epochs;
                }
                Err(e) => return Err(e),
            };
            let g = g.to_flat();
            if !loss.is_finite() || g.iter().any(|v| !v.is_finite()) {
                history.diverged_at = Some(epoch);
                break 'epochs;
            }
            let before = flat.clone();
            adam_step(&mut flat, &g, &mut state)?;
            if flat.iter().any(|v| !v.is_finite()) {
                flat = before;
                history.diverged_at = Some(epoch);
                break 'epochs;
            }
            model.load_flat(&flat)?;
        }
        let train = eval(model, false)?;
        let val = eval(model, true)?;
        if !(train.is_finite() && val.is_finite()) {
            history.diverged_at = Some(epoch);
            break;
        }
        history.train_loss.push(train);
        history.val_loss.push(val);
    }
    model.load_flat(&flat)?;
    Ok(history)
}
