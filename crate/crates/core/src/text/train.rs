use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::AdamConfig;
use crate::series::{mean, sample_variance};
use crate::synth::SynthRng;
use crate::training::{train_adam, TrainConfig, TrainingHistory};

use super::encoder::{
    masked_loss, masked_loss_and_grad, regression_loss, regression_loss_and_grad, EncoderConfig, MaskedExample,
    TextEncoderModel, TextExample,
};
use super::vocab::{tokenize, Vocab, MASK, SPECIALS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PretrainConfig {
    pub epochs: usize,
    pub mask_prob: f64,
    pub batch_size: usize,
    pub adam: AdamConfig,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            epochs: 25,
            mask_prob: 0.15,
            batch_size: 16,
            adam: AdamConfig {
                lr: 2e-3,
                ..AdamConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TextModelConfig {
    pub d_model: usize,
    pub heads: usize,
    pub blocks: usize,
    pub d_ff: usize,
    pub max_len: usize,
    pub min_freq: usize,
    /// Upper bound on vocabulary size, special tokens included.
    pub max_vocab: usize,
    pub train: TrainConfig,
    pub pretrain: PretrainConfig,
}

impl Default for TextModelConfig {
    fn default() -> Self {
        Self {
            d_model: 32,
            heads: 2,
            blocks: 2,
            d_ff: 64,
            max_len: 64,
            min_freq: 1,
            max_vocab: 5000,
            // a few passes, as is usual for fine-tuning; longer runs overfit
            // the headline noise
            train: TrainConfig {
                epochs: 10,
                ..TrainConfig::default()
            },
            pretrain: PretrainConfig::default(),
        }
    }
}

impl TextModelConfig {
    pub fn encoder_config(&self, vocab_size: usize) -> EncoderConfig {
        EncoderConfig {
            vocab_size,
            d_model: self.d_model,
            heads: self.heads,
            blocks: self.blocks,
            d_ff: self.d_ff,
            max_len: self.max_len,
        }
    }
}

/// Replaces `max(1, round(mask_prob * m))` of the `m` ordinary tokens with
/// MASK. Sequences without ordinary tokens come back with no targets.
pub fn mask_tokens(ids: &[usize], mask_prob: f64, rng: &mut SynthRng) -> MaskedExample {
    let mut eligible: Vec<usize> = (0..ids.len()).filter(|&i| ids[i] >= SPECIALS.len()).collect();
    let mut out = MaskedExample {
        ids: ids.to_vec(),
        targets: Vec::new(),
    };
    if eligible.is_empty() {
        return out;
    }
    let k = ((mask_prob * eligible.len() as f64).round() as usize).clamp(1, eligible.len());
    rng.shuffle(&mut eligible);
    let mut chosen = eligible[..k].to_vec();
    chosen.sort_unstable();
    for pos in chosen {
        out.targets.push((pos, ids[pos]));
        out.ids[pos] = MASK;
    }
    out
}

/// Adam on mean squared error. The history scores the full train and
/// validation sets after every epoch.
pub fn train_text_regressor(
    model: &mut TextEncoderModel,
    train: &[TextExample],
    val: &[TextExample],
    config: &TrainConfig,
) -> Result<TrainingHistory> {
    if train.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    if val.is_empty() {
        return Err(Error::invalid("validation set is empty"));
    }
    train_adam(
        model,
        train.len(),
        config,
        |m, idx| {
            let batch: Vec<&TextExample> = idx.iter().map(|&i| &train[i]).collect();
            regression_loss_and_grad(m, &batch)
        },
        |m, is_val| regression_loss(m, if is_val { val } else { train }),
    )
}

// Cap on the sentences scored for the pretraining history.
const EVAL_SENTENCES: usize = 256;

/// Continued masked-token training on `corpus`. Masks are redrawn for every
/// batch; the history reports the loss under two fixed mask draws
/// (`train_loss` and `val_loss`) of up to 256 evenly spaced sentences.
pub fn pretrain_masked<S: AsRef<str>>(
    model: &mut TextEncoderModel,
    vocab: &Vocab,
    corpus: &[S],
    config: &PretrainConfig,
    seed: u64,
) -> Result<TrainingHistory> {
    if !(config.mask_prob > 0.0 && config.mask_prob < 1.0) {
        return Err(Error::invalid("mask_prob must lie strictly between 0 and 1"));
    }
    if vocab.token(MASK) != Some(SPECIALS[MASK]) {
        return Err(Error::invalid("vocabulary lacks the MASK token"));
    }
    if vocab.len() != model.config.vocab_size {
        return Err(Error::DimensionMismatch {
            expected: model.config.vocab_size,
            got: vocab.len(),
        });
    }
    let mut seqs = Vec::new();
    for text in corpus {
        let t = tokenize(text.as_ref(), vocab, model.config.max_len)?;
        if t.trimmed().iter().any(|id| *id >= SPECIALS.len()) {
            seqs.push(t.trimmed().to_vec());
        }
    }
    if seqs.is_empty() {
        return Err(Error::invalid("corpus has no in-vocabulary tokens"));
    }
    let stride = seqs.len().div_ceil(EVAL_SENTENCES);
    let fixed = |s: u64| {
        let mut rng = SynthRng::new(s);
        seqs.iter()
            .step_by(stride)
            .map(|ids| mask_tokens(ids, config.mask_prob, &mut rng))
            .collect::<Vec<_>>()
    };
    let eval_a = fixed(seed ^ 0x5eed_0001);
    let eval_b = fixed(seed ^ 0x5eed_0002);
    let mut mask_rng = SynthRng::new(seed ^ 0x5eed_0003);
    let cfg = TrainConfig {
        epochs: config.epochs,
        batch_size: config.batch_size,
        adam: config.adam,
        seed,
    };
    train_adam(
        model,
        seqs.len(),
        &cfg,
        |m, idx| {
            let batch: Vec<MaskedExample> = idx
                .iter()
                .map(|&i| mask_tokens(&seqs[i], config.mask_prob, &mut mask_rng))
                .collect();
            masked_loss_and_grad(m, &batch)
        },
        |m, second| masked_loss(m, if second { &eval_b } else { &eval_a }),
    )
}

/// An encoder with its vocabulary and the target standardization fitted on
/// the training targets.
#[derive(Debug, Clone)]
pub struct TextRegressor {
    pub vocab: Vocab,
    pub model: TextEncoderModel,
    pub target_mean: f64,
    pub target_std: f64,
    pub history: TrainingHistory,
}

impl TextRegressor {
    /// Fine-tunes `model` on `(text, target)` pairs.
    pub fn fit(
        vocab: Vocab,
        mut model: TextEncoderModel,
        train: &[(String, f64)],
        val: &[(String, f64)],
        config: &TrainConfig,
    ) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        let targets: Vec<f64> = train.iter().map(|(_, y)| *y).collect();
        let target_mean = mean(&targets);
        let sd = sample_variance(&targets).sqrt();
        let target_std = if sd > 0.0 { sd } else { 1.0 };
        let encode = |pairs: &[(String, f64)]| -> Result<Vec<TextExample>> {
            pairs
                .iter()
                .map(|(text, y)| {
                    Ok(TextExample {
                        ids: tokenize(text, &vocab, model.config.max_len)?.trimmed().to_vec(),
                        target: (y - target_mean) / target_std,
                    })
                })
                .collect()
        };
        let train_ex = encode(train)?;
        let val_ex = encode(val)?;
        let history = train_text_regressor(&mut model, &train_ex, &val_ex, config)?;
        Ok(Self {
            vocab,
            model,
            target_mean,
            target_std,
            history,
        })
    }

    /// Predicted return for one text, in return units.
    pub fn predict_text(&self, text: &str) -> Result<f64> {
        let seq = tokenize(text, &self.vocab, self.model.config.max_len)?;
        Ok(self.target_mean + self.target_std * self.model.predict(seq.trimmed())?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::vocab::build_vocab;
    use crate::text::CLS;
    use crate::training::ParamSet;

    #[test]
    fn mask_count_rule() {
        let mut rng = SynthRng::new(1);
        let ids: Vec<usize> = std::iter::once(CLS).chain(4..24).collect();
        let m = mask_tokens(&ids, 0.15, &mut rng);
        assert_eq!(m.targets.len(), 3);
        for (pos, orig) in &m.targets {
            assert_eq!(m.ids[*pos], MASK);
            assert_eq!(ids[*pos], *orig);
        }
        assert_eq!(mask_tokens(&[CLS, 5], 0.15, &mut rng).targets.len(), 1);
        assert!(mask_tokens(&[CLS], 0.15, &mut rng).targets.is_empty());
    }

    fn tiny() -> (Vocab, TextModelConfig) {
        let corpus = ["stocks surge on earnings", "bonds slide on rates"];
        let vocab = build_vocab(&corpus, 1, 100).unwrap();
        let cfg = TextModelConfig {
            d_model: 16,
            heads: 2,
            blocks: 1,
            d_ff: 16,
            max_len: 16,
            ..Default::default()
        };
        (vocab, cfg)
    }

    #[test]
    fn pretrain_rejects_bad_inputs() {
        let (vocab, cfg) = tiny();
        let mut m = TextEncoderModel::new(cfg.encoder_config(vocab.len()), 0).unwrap();
        for p in [0.0, 1.0, -0.1] {
            let pc = PretrainConfig { mask_prob: p, ..Default::default() };
            assert!(pretrain_masked(&mut m, &vocab, &["stocks surge"], &pc, 0).is_err());
        }
        let empty: [&str; 0] = [];
        assert!(pretrain_masked(&mut m, &vocab, &empty, &PretrainConfig::default(), 0).is_err());
        assert!(pretrain_masked(&mut m, &vocab, &["zzz qqq"], &PretrainConfig::default(), 0).is_err());
    }

    #[test]
    fn regressor_training_is_deterministic() {
        let (vocab, cfg) = tiny();
        let data: Vec<(String, f64)> = vec![
            ("stocks surge".into(), 0.01),
            ("bonds slide".into(), -0.01),
            ("stocks slide on rates".into(), -0.02),
        ];
        let run = || {
            let m = TextEncoderModel::new(cfg.encoder_config(vocab.len()), 4).unwrap();
            let tc = TrainConfig { epochs: 5, batch_size: 2, seed: 9, ..Default::default() };
            TextRegressor::fit(vocab.clone(), m, &data, &data, &tc).unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.history, b.history);
        assert_eq!(a.model.to_flat(), b.model.to_flat());
        assert_eq!(a.history.train_loss.len(), 5);
        let p = a.predict_text("stocks surge").unwrap();
        assert_eq!(p.to_bits(), b.predict_text("stocks surge").unwrap().to_bits());
    }
}
