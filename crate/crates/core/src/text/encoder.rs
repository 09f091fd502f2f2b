use std::borrow::Borrow;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synth::SynthRng;
use crate::training::{zeros_like, ParamSet};

use super::attention::{multi_head_backward, multi_head_forward};
use super::tensor::{gelu, gelu_grad, layer_norm, layer_norm_backward, linear, linear_backward, LnCache};
use super::vocab::{TokenSequence, MASK};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub vocab_size: usize,
    pub d_model: usize,
    pub heads: usize,
    pub blocks: usize,
    pub d_ff: usize,
    pub max_len: usize,
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.vocab_size <= MASK {
            return Err(Error::invalid("vocabulary must include the special tokens"));
        }
        if self.d_model == 0 || self.heads == 0 || self.d_model % self.heads != 0 {
            return Err(Error::invalid("d_model must be a positive multiple of heads"));
        }
        if self.d_ff == 0 || self.max_len < 2 {
            return Err(Error::invalid("d_ff must be positive and max_len at least 2"));
        }
        Ok(())
    }
}

/// One post-norm encoder block. Projection matrices are stored `in × out`.
/// Keys carry no bias: a shared shift of every key leaves the softmax unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockParams {
    pub wq: Vec<f64>,
    pub bq: Vec<f64>,
    pub wk: Vec<f64>,
    pub wv: Vec<f64>,
    pub bv: Vec<f64>,
    pub wo: Vec<f64>,
    pub bo: Vec<f64>,
    pub ln1_g: Vec<f64>,
    pub ln1_b: Vec<f64>,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    pub ln2_g: Vec<f64>,
    pub ln2_b: Vec<f64>,
}

impl BlockParams {
    fn init(d: usize, ff: usize, rng: &mut SynthRng) -> Self {
        let mut w = |n: usize| (0..n).map(|_| 0.02 * rng.normal()).collect::<Vec<f64>>();
        Self {
            wq: w(d * d),
            bq: vec![0.0; d],
            wk: w(d * d),
            wv: w(d * d),
            bv: vec![0.0; d],
            wo: w(d * d),
            bo: vec![0.0; d],
            ln1_g: vec![1.0; d],
            ln1_b: vec![0.0; d],
            w1: w(d * ff),
            b1: vec![0.0; ff],
            w2: w(ff * d),
            b2: vec![0.0; d],
            ln2_g: vec![1.0; d],
            ln2_b: vec![0.0; d],
        }
    }

    fn tensors(&self) -> [&Vec<f64>; 15] {
        [
            &self.wq, &self.bq, &self.wk, &self.wv, &self.bv, &self.wo, &self.bo, &self.ln1_g,
            &self.ln1_b, &self.w1, &self.b1, &self.w2, &self.b2, &self.ln2_g, &self.ln2_b,
        ]
    }

    fn tensors_mut(&mut self) -> [&mut Vec<f64>; 15] {
        [
            &mut self.wq,
            &mut self.bq,
            &mut self.wk,
            &mut self.wv,
            &mut self.bv,
            &mut self.wo,
            &mut self.bo,
            &mut self.ln1_g,
            &mut self.ln1_b,
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
            &mut self.b2,
            &mut self.ln2_g,
            &mut self.ln2_b,
        ]
    }
}

/// Token and learned position embeddings, a stack of encoder blocks, a
/// regression head on the CLS position and a masked-token head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextEncoderModel {
    pub config: EncoderConfig,
    pub tok_emb: Vec<f64>,
    pub pos_emb: Vec<f64>,
    pub emb_ln_g: Vec<f64>,
    pub emb_ln_b: Vec<f64>,
    pub blocks: Vec<BlockParams>,
    pub reg_w: Vec<f64>,
    pub reg_b: Vec<f64>,
    /// `d_model × vocab_size`.
    pub mlm_w: Vec<f64>,
    pub mlm_b: Vec<f64>,
    pub seed: u64,
}

impl ParamSet for TextEncoderModel {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        f(&self.tok_emb);
        f(&self.pos_emb);
        f(&self.emb_ln_g);
        f(&self.emb_ln_b);
        for b in &self.blocks {
            for t in b.tensors() {
                f(t);
            }
        }
        f(&self.reg_w);
        f(&self.reg_b);
        f(&self.mlm_w);
        f(&self.mlm_b);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        f(&mut self.tok_emb);
        f(&mut self.pos_emb);
        f(&mut self.emb_ln_g);
        f(&mut self.emb_ln_b);
        for b in &mut self.blocks {
            for t in b.tensors_mut() {
                f(t);
            }
        }
        f(&mut self.reg_w);
        f(&mut self.reg_b);
        f(&mut self.mlm_w);
        f(&mut self.mlm_b);
    }
}

struct BlockCache {
    x: Vec<f64>,
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    probs: Vec<Vec<f64>>,
    ctx: Vec<f64>,
    ln1: LnCache,
    x1: Vec<f64>,
    hpre: Vec<f64>,
    g: Vec<f64>,
    ln2: LnCache,
}

struct Forward {
    n: usize,
    ids: Vec<usize>,
    emb_ln: LnCache,
    blocks: Vec<BlockCache>,
    out: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderOutput {
    pub prediction: f64,
    /// Final hidden state at the CLS position.
    pub pooled: Vec<f64>,
}

/// A token sequence (CLS first, no padding) with a regression target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextExample {
    pub ids: Vec<usize>,
    pub target: f64,
}

/// A sequence with some tokens replaced by MASK; `targets` lists
/// `(position, original id)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskedExample {
    pub ids: Vec<usize>,
    pub targets: Vec<(usize, usize)>,
}

impl TextEncoderModel {
    pub fn new(config: EncoderConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let EncoderConfig {
            vocab_size: v,
            d_model: d,
            d_ff: ff,
            max_len: l,
            ..
        } = config;
        let mut rng = SynthRng::new(seed);
        let w = |n: usize, rng: &mut SynthRng| (0..n).map(|_| 0.02 * rng.normal()).collect::<Vec<f64>>();
        let tok_emb = w(v * d, &mut rng);
        let pos_emb = w(l * d, &mut rng);
        let blocks = (0..config.blocks).map(|_| BlockParams::init(d, ff, &mut rng)).collect();
        let reg_w = w(d, &mut rng);
        let mlm_w = w(d * v, &mut rng);
        Ok(Self {
            config,
            tok_emb,
            pos_emb,
            emb_ln_g: vec![1.0; d],
            emb_ln_b: vec![0.0; d],
            blocks,
            reg_w,
            reg_b: vec![0.0],
            mlm_w,
            mlm_b: vec![0.0; v],
            seed,
        })
    }

    fn check_ids(&self, ids: &[usize]) -> Result<()> {
        if ids.is_empty() || ids.len() > self.config.max_len {
            return Err(Error::invalid(format!(
                "sequence length {} outside 1..={}",
                ids.len(),
                self.config.max_len
            )));
        }
        if let Some(bad) = ids.iter().find(|i| **i >= self.config.vocab_size) {
            return Err(Error::invalid(format!(
                "token id {bad} outside vocabulary of size {}",
                self.config.vocab_size
            )));
        }
        Ok(())
    }

    fn forward(&self, ids: &[usize], valid: &[bool]) -> Result<Forward> {
        self.check_ids(ids)?;
        let d = self.config.d_model;
        let ff = self.config.d_ff;
        let n = ids.len();
        let mut e = Vec::with_capacity(n * d);
        for (i, id) in ids.iter().enumerate() {
            let t = &self.tok_emb[id * d..(id + 1) * d];
            let p = &self.pos_emb[i * d..(i + 1) * d];
            e.extend(t.iter().zip(p).map(|(a, b)| a + b));
        }
        let (mut x, emb_ln) = layer_norm(&e, d, &self.emb_ln_g, &self.emb_ln_b);
        let mut caches = Vec::with_capacity(self.blocks.len());
        let zero_bias = vec![0.0; d];
        for b in &self.blocks {
            let q = linear(&x, n, d, &b.wq, &b.bq, d);
            let k = linear(&x, n, d, &b.wk, &zero_bias, d);
            let v = linear(&x, n, d, &b.wv, &b.bv, d);
            let (ctx, probs) = multi_head_forward(&q, &k, &v, n, d, self.config.heads, valid);
            let a = linear(&ctx, n, d, &b.wo, &b.bo, d);
            let r1: Vec<f64> = x.iter().zip(&a).map(|(p, q)| p + q).collect();
            let (x1, ln1) = layer_norm(&r1, d, &b.ln1_g, &b.ln1_b);
            let hpre = linear(&x1, n, d, &b.w1, &b.b1, ff);
            let g: Vec<f64> = hpre.iter().map(|h| gelu(*h)).collect();
            let f = linear(&g, n, ff, &b.w2, &b.b2, d);
            let r2: Vec<f64> = x1.iter().zip(&f).map(|(p, q)| p + q).collect();
            let (x2, ln2) = layer_norm(&r2, d, &b.ln2_g, &b.ln2_b);
            caches.push(BlockCache {
                x: std::mem::replace(&mut x, x2),
                q,
                k,
                v,
                probs,
                ctx,
                ln1,
                x1,
                hpre,
                g,
                ln2,
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("encoder activations".into()));
        }
        Ok(Forward {
            n,
            ids: ids.to_vec(),
            emb_ln,
            blocks: caches,
            out: x,
        })
    }

    fn backward(&self, fwd: &Forward, dout: Vec<f64>, grad: &mut Self) {
        let d = self.config.d_model;
        let ff = self.config.d_ff;
        let n = fwd.n;
        let mut dx = dout;
        for (bi, (b, c)) in self.blocks.iter().zip(&fwd.blocks).enumerate().rev() {
            let gb = &mut grad.blocks[bi];
            let dr2 = layer_norm_backward(&c.ln2, d, &b.ln2_g, &dx, &mut gb.ln2_g, &mut gb.ln2_b);
            let dg = linear_backward(&c.g, n, ff, &b.w2, d, &dr2, &mut gb.w2, &mut gb.b2);
            let dh: Vec<f64> = dg.iter().zip(&c.hpre).map(|(g, h)| g * gelu_grad(*h)).collect();
            let mut dx1 = linear_backward(&c.x1, n, d, &b.w1, ff, &dh, &mut gb.w1, &mut gb.b1);
            dx1.iter_mut().zip(&dr2).for_each(|(a, b)| *a += b);
            let dr1 = layer_norm_backward(&c.ln1, d, &b.ln1_g, &dx1, &mut gb.ln1_g, &mut gb.ln1_b);
            let dctx = linear_backward(&c.ctx, n, d, &b.wo, d, &dr1, &mut gb.wo, &mut gb.bo);
            let (dq, dk, dv) = multi_head_backward(&c.q, &c.k, &c.v, n, d, self.config.heads, &c.probs, &dctx);
            let mut next = dr1;
            let mut dk_bias = vec![0.0; d];
            for (dp, w, gw, gbias) in [
                (&dq, &b.wq, &mut gb.wq, &mut gb.bq),
                (&dk, &b.wk, &mut gb.wk, &mut dk_bias),
                (&dv, &b.wv, &mut gb.wv, &mut gb.bv),
            ] {
                let part = linear_backward(&c.x, n, d, w, d, dp, gw, gbias);
                next.iter_mut().zip(&part).for_each(|(a, b)| *a += b);
            }
            dx = next;
        }
        let de = layer_norm_backward(&fwd.emb_ln, d, &self.emb_ln_g, &dx, &mut grad.emb_ln_g, &mut grad.emb_ln_b);
        for (i, id) in fwd.ids.iter().enumerate() {
            let dr = &de[i * d..(i + 1) * d];
            for (g, v) in grad.tok_emb[id * d..(id + 1) * d].iter_mut().zip(dr) {
                *g += v;
            }
            for (g, v) in grad.pos_emb[i * d..(i + 1) * d].iter_mut().zip(dr) {
                *g += v;
            }
        }
    }

    fn head(&self, pooled: &[f64]) -> f64 {
        self.reg_b[0] + self.reg_w.iter().zip(pooled).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Regression output for an unpadded sequence.
    pub fn predict(&self, ids: &[usize]) -> Result<f64> {
        let fwd = self.forward(ids, &vec![true; ids.len()])?;
        Ok(self.head(&fwd.out[..self.config.d_model]))
    }

    fn mlm_logits(&self, h: &[f64]) -> Vec<f64> {
        linear(h, 1, self.config.d_model, &self.mlm_w, &self.mlm_b, self.config.vocab_size)
    }
}

/// Runs the encoder over a padded sequence, honoring its attention mask.
pub fn encoder_forward(model: &TextEncoderModel, tokens: &TokenSequence) -> Result<EncoderOutput> {
    if tokens.mask.len() != tokens.ids.len() {
        return Err(Error::DimensionMismatch {
            expected: tokens.ids.len(),
            got: tokens.mask.len(),
        });
    }
    let valid: Vec<bool> = tokens.mask.iter().map(|m| *m != 0).collect();
    if !valid.first().copied().unwrap_or(false) {
        return Err(Error::invalid("position 0 must be unmasked"));
    }
    let fwd = model.forward(&tokens.ids, &valid)?;
    let pooled = fwd.out[..model.config.d_model].to_vec();
    Ok(EncoderOutput {
        prediction: model.head(&pooled),
        pooled,
    })
}

/// Mean squared error over the batch and its gradient.
pub fn regression_loss_and_grad<B: Borrow<TextExample>>(
    model: &TextEncoderModel,
    batch: &[B],
) -> Result<(f64, TextEncoderModel)> {
    if batch.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let d = model.config.d_model;
    let scale = 1.0 / batch.len() as f64;
    let mut grad = zeros_like(model);
    let mut loss = 0.0;
    for ex in batch {
        let ex = ex.borrow();
        let fwd = model.forward(&ex.ids, &vec![true; ex.ids.len()])?;
        let pooled = &fwd.out[..d];
        let err = model.head(pooled) - ex.target;
        loss += err * err * scale;
        let dpred = 2.0 * err * scale;
        grad.reg_b[0] += dpred;
        for (g, h) in grad.reg_w.iter_mut().zip(pooled) {
            *g += dpred * h;
        }
        let mut dout = vec![0.0; fwd.n * d];
        for (o, w) in dout[..d].iter_mut().zip(&model.reg_w) {
            *o = dpred * w;
        }
        model.backward(&fwd, dout, &mut grad);
    }
    Ok((loss, grad))
}

pub fn regression_loss<B: Borrow<TextExample>>(model: &TextEncoderModel, examples: &[B]) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let mut total = 0.0;
    for ex in examples {
        let ex = ex.borrow();
        let e = model.predict(&ex.ids)? - ex.target;
        total += e * e;
    }
    Ok(total / examples.len() as f64)
}

fn log_softmax_at(logits: &[f64], target: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let probs: Vec<f64> = exps.iter().map(|e| e / sum).collect();
    (logits[target] - max - sum.ln(), probs)
}

/// Mean cross-entropy over all masked positions in the batch and its
/// gradient.
pub fn masked_loss_and_grad<B: Borrow<MaskedExample>>(
    model: &TextEncoderModel,
    batch: &[B],
) -> Result<(f64, TextEncoderModel)> {
    let count: usize = batch.iter().map(|b| b.borrow().targets.len()).sum();
    if count == 0 {
        return Err(Error::invalid("batch has no masked positions"));
    }
    let d = model.config.d_model;
    let vsize = model.config.vocab_size;
    let scale = 1.0 / count as f64;
    let mut grad = zeros_like(model);
    let mut loss = 0.0;
    for ex in batch {
        let ex = ex.borrow();
        if ex.targets.is_empty() {
            continue;
        }
        let fwd = model.forward(&ex.ids, &vec![true; ex.ids.len()])?;
        let mut dout = vec![0.0; fwd.n * d];
        for &(pos, target) in &ex.targets {
            if pos >= fwd.n || target >= vsize {
                return Err(Error::invalid("masked target out of range"));
            }
            let h = &fwd.out[pos * d..(pos + 1) * d];
            let (lp, probs) = log_softmax_at(&model.mlm_logits(h), target);
            loss -= lp * scale;
            let mut dz = probs;
            dz[target] -= 1.0;
            dz.iter_mut().for_each(|v| *v *= scale);
            let dh = linear_backward(h, 1, d, &model.mlm_w, vsize, &dz, &mut grad.mlm_w, &mut grad.mlm_b);
            for (o, g) in dout[pos * d..(pos + 1) * d].iter_mut().zip(&dh) {
                *o += g;
            }
        }
        model.backward(&fwd, dout, &mut grad);
    }
    if !loss.is_finite() {
        return Err(Error::NonFinite("masked-token loss".into()));
    }
    Ok((loss, grad))
}

pub fn masked_loss<B: Borrow<MaskedExample>>(model: &TextEncoderModel, examples: &[B]) -> Result<f64> {
    let d = model.config.d_model;
    let mut total = 0.0;
    let mut count = 0usize;
    for ex in examples {
        let ex = ex.borrow();
        if ex.targets.is_empty() {
            continue;
        }
        let fwd = model.forward(&ex.ids, &vec![true; ex.ids.len()])?;
        for &(pos, target) in &ex.targets {
            let h = &fwd.out[pos * d..(pos + 1) * d];
            total -= log_softmax_at(&model.mlm_logits(h), target).0;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::invalid("no masked positions"));
    }
    Ok(total / count as f64)
}
