//! Two stacked LSTM layers with a linear output head, trained by
//! backpropagation through time on sliding windows of returns.
//!
//! Each layer uses the standard gate set:
//!
//! ```text
//! i = σ(W_i x + U_i h + b_i)      f = σ(W_f x + U_f h + b_f)
//! o = σ(W_o x + U_o h + b_o)      g = tanh(W_g x + U_g h + b_g)
//! c' = f ⊙ c + i ⊙ g              h' = o ⊙ tanh(c')
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synth::SynthRng;
use crate::training::{train_adam, zeros_like, ParamSet, TrainConfig, TrainingHistory};

pub const INPUT: usize = 0;
pub const FORGET: usize = 1;
pub const OUTPUT: usize = 2;
pub const CANDIDATE: usize = 3;

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Weights of one gate: `w` is hidden × input, `u` is hidden × hidden, both row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    pub w: Vec<f64>,
    pub u: Vec<f64>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmLayerParams {
    pub input_size: usize,
    pub hidden: usize,
    /// Indexed by [`INPUT`], [`FORGET`], [`OUTPUT`], [`CANDIDATE`].
    pub gates: [GateParams; 4],
}

impl LstmLayerParams {
    pub fn zeros(input_size: usize, hidden: usize) -> Self {
        let gate = || GateParams {
            w: vec![0.0; hidden * input_size],
            u: vec![0.0; hidden * hidden],
            b: vec![0.0; hidden],
        };
        Self {
            input_size,
            hidden,
            gates: [gate(), gate(), gate(), gate()],
        }
    }

    /// Uniform(-k, k) with `k = 1/sqrt(fan_in)`, forget-gate bias +1.
    pub fn init(input_size: usize, hidden: usize, rng: &mut SynthRng) -> Self {
        let mut layer = Self::zeros(input_size, hidden);
        let k = 1.0 / ((input_size + hidden) as f64).sqrt();
        layer.visit_mut(&mut |t| t.iter_mut().for_each(|v| *v = rng.uniform(-k, k)));
        layer.gates[FORGET].b.iter_mut().for_each(|b| *b = 1.0);
        layer
    }

    fn check(&self) -> Result<()> {
        for g in &self.gates {
            if g.w.len() != self.hidden * self.input_size
                || g.u.len() != self.hidden * self.hidden
                || g.b.len() != self.hidden
            {
                return Err(Error::invalid("inconsistent gate dimensions"));
            }
        }
        Ok(())
    }

    fn step(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> CellCache {
        let (n_in, n_h) = (self.input_size, self.hidden);
        let mut act = [vec![0.0; n_h], vec![0.0; n_h], vec![0.0; n_h], vec![0.0; n_h]];
        for (gi, gate) in self.gates.iter().enumerate() {
            for r in 0..n_h {
                let mut z = gate.b[r];
                let wr = &gate.w[r * n_in..(r + 1) * n_in];
                for (w, xv) in wr.iter().zip(x) {
                    z += w * xv;
                }
                let ur = &gate.u[r * n_h..(r + 1) * n_h];
                for (u, hv) in ur.iter().zip(h_prev) {
                    z += u * hv;
                }
                act[gi][r] = if gi == CANDIDATE { z.tanh() } else { sigmoid(z) };
            }
        }
        let mut c = vec![0.0; n_h];
        let mut tanh_c = vec![0.0; n_h];
        let mut h = vec![0.0; n_h];
        for r in 0..n_h {
            c[r] = act[FORGET][r] * c_prev[r] + act[INPUT][r] * act[CANDIDATE][r];
            tanh_c[r] = c[r].tanh();
            h[r] = act[OUTPUT][r] * tanh_c[r];
        }
        CellCache {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            c_prev: c_prev.to_vec(),
            act,
            tanh_c,
            h,
            c,
        }
    }

    /// Runs the layer over a sequence from zero state.
    fn run(&self, inputs: &[Vec<f64>]) -> Vec<CellCache> {
        let mut h = vec![0.0; self.hidden];
        let mut c = vec![0.0; self.hidden];
        let mut caches = Vec::with_capacity(inputs.len());
        for x in inputs {
            let cache = self.step(x, &h, &c);
            h.clone_from(&cache.h);
            c.clone_from(&cache.c);
            caches.push(cache);
        }
        caches
    }

    /// Backpropagation through time. `dh` holds the loss gradient w.r.t.
    /// each step's output; returns the gradient w.r.t. each step's input.
    fn backward(&self, caches: &[CellCache], dh: &[Vec<f64>], grad: &mut Self) -> Vec<Vec<f64>> {
        let (n_in, n_h) = (self.input_size, self.hidden);
        let mut dx_seq = vec![vec![0.0; n_in]; caches.len()];
        let mut dh_next = vec![0.0; n_h];
        let mut dc_next = vec![0.0; n_h];
        let mut da = [vec![0.0; n_h], vec![0.0; n_h], vec![0.0; n_h], vec![0.0; n_h]];
        for t in (0..caches.len()).rev() {
            let cache = &caches[t];
            let a = &cache.act;
            for r in 0..n_h {
                let dht = dh[t][r] + dh_next[r];
                let d_o = dht * cache.tanh_c[r];
                let dc = dc_next[r] + dht * a[OUTPUT][r] * (1.0 - cache.tanh_c[r] * cache.tanh_c[r]);
                let di = dc * a[CANDIDATE][r];
                let dg = dc * a[INPUT][r];
                let df = dc * cache.c_prev[r];
                dc_next[r] = dc * a[FORGET][r];
                da[INPUT][r] = di * a[INPUT][r] * (1.0 - a[INPUT][r]);
                da[FORGET][r] = df * a[FORGET][r] * (1.0 - a[FORGET][r]);
                da[OUTPUT][r] = d_o * a[OUTPUT][r] * (1.0 - a[OUTPUT][r]);
                da[CANDIDATE][r] = dg * (1.0 - a[CANDIDATE][r] * a[CANDIDATE][r]);
            }
            dh_next.iter_mut().for_each(|v| *v = 0.0);
            for gi in 0..4 {
                let gate = &self.gates[gi];
                let g = &mut grad.gates[gi];
                for r in 0..n_h {
                    let d = da[gi][r];
                    if d == 0.0 {
                        continue;
                    }
                    g.b[r] += d;
                    for j in 0..n_in {
                        g.w[r * n_in + j] += d * cache.x[j];
                        dx_seq[t][j] += d * gate.w[r * n_in + j];
                    }
                    for j in 0..n_h {
                        g.u[r * n_h + j] += d * cache.h_prev[j];
                        dh_next[j] += d * gate.u[r * n_h + j];
                    }
                }
            }
        }
        dx_seq
    }
}

impl ParamSet for LstmLayerParams {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        for g in &self.gates {
            f(&g.w);
            f(&g.u);
            f(&g.b);
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        for g in &mut self.gates {
            f(&mut g.w);
            f(&mut g.u);
            f(&mut g.b);
        }
    }
}

#[derive(Debug, Clone)]
struct CellCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    act: [Vec<f64>; 4],
    tanh_c: Vec<f64>,
    h: Vec<f64>,
    c: Vec<f64>,
}

/// Gate activations of one step, exposed for invariant checks.
#[derive(Debug, Clone, PartialEq)]
pub struct CellState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
    pub input_gate: Vec<f64>,
    pub forget_gate: Vec<f64>,
    pub output_gate: Vec<f64>,
    pub candidate: Vec<f64>,
}

pub fn lstm_cell_forward(
    params: &LstmLayerParams,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> Result<CellState> {
    params.check()?;
    for (len, expected) in [
        (x.len(), params.input_size),
        (h_prev.len(), params.hidden),
        (c_prev.len(), params.hidden),
    ] {
        if len != expected {
            return Err(Error::DimensionMismatch { expected, got: len });
        }
    }
    if x.iter().chain(h_prev).chain(c_prev).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("LSTM cell input".into()));
    }
    let s = params.step(x, h_prev, c_prev);
    let [i, f, o, g] = s.act;
    Ok(CellState {
        h: s.h,
        c: s.c,
        input_gate: i,
        forget_gate: f,
        output_gate: o,
        candidate: g,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LstmConfig {
    pub hidden1: usize,
    pub hidden2: usize,
    pub lookback: usize,
    pub train: TrainConfig,
}

impl Default for LstmConfig {
    fn default() -> Self {
        Self {
            hidden1: 32,
            hidden2: 16,
            lookback: 20,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmNetwork {
    pub layer1: LstmLayerParams,
    pub layer2: LstmLayerParams,
    /// Dense head weights, one per layer-2 hidden unit.
    pub head_w: Vec<f64>,
    /// Dense head bias, stored as a one-element vector.
    pub head_b: Vec<f64>,
    pub lookback: usize,
    pub seed: u64,
}

/// Gradients share the network's shapes.
pub type LstmGradients = LstmNetwork;

impl ParamSet for LstmNetwork {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        self.layer1.visit(f);
        self.layer2.visit(f);
        f(&self.head_w);
        f(&self.head_b);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.layer1.visit_mut(f);
        self.layer2.visit_mut(f);
        f(&mut self.head_w);
        f(&mut self.head_b);
    }
}

struct ForwardCache {
    layer1: Vec<CellCache>,
    layer2: Vec<CellCache>,
}

impl LstmNetwork {
    pub fn new(hidden1: usize, hidden2: usize, lookback: usize, seed: u64) -> Result<Self> {
        if hidden1 == 0 || hidden2 == 0 || lookback == 0 {
            return Err(Error::invalid("hidden sizes and lookback must be positive"));
        }
        let mut rng = SynthRng::new(seed);
        let layer1 = LstmLayerParams::init(1, hidden1, &mut rng);
        let layer2 = LstmLayerParams::init(hidden1, hidden2, &mut rng);
        let k = 1.0 / (hidden2 as f64).sqrt();
        let head_w = (0..hidden2).map(|_| rng.uniform(-k, k)).collect();
        let head_b = vec![rng.uniform(-k, k)];
        Ok(Self {
            layer1,
            layer2,
            head_w,
            head_b,
            lookback,
            seed,
        })
    }

    pub fn from_config(config: &LstmConfig, seed: u64) -> Result<Self> {
        Self::new(config.hidden1, config.hidden2, config.lookback, seed)
    }

    pub fn validate(&self) -> Result<()> {
        self.layer1.check()?;
        self.layer2.check()?;
        if self.layer1.input_size != 1
            || self.layer2.input_size != self.layer1.hidden
            || self.head_w.len() != self.layer2.hidden
            || self.head_b.len() != 1
        {
            return Err(Error::invalid("inconsistent LSTM network dimensions"));
        }
        Ok(())
    }

    fn forward_cached(&self, window: &[f64]) -> Result<(f64, ForwardCache)> {
        if window.len() != self.lookback {
            return Err(Error::DimensionMismatch {
                expected: self.lookback,
                got: window.len(),
            });
        }
        let inputs: Vec<Vec<f64>> = window.iter().map(|v| vec![*v]).collect();
        let layer1 = self.layer1.run(&inputs);
        let hidden1: Vec<Vec<f64>> = layer1.iter().map(|c| c.h.clone()).collect();
        let layer2 = self.layer2.run(&hidden1);
        let last = &layer2.last().expect("lookback >= 1").h;
        let pred = self.head_b[0] + self.head_w.iter().zip(last).map(|(w, h)| w * h).sum::<f64>();
        if !pred.is_finite() {
            return Err(Error::NonFinite("LSTM prediction".into()));
        }
        Ok((pred, ForwardCache { layer1, layer2 }))
    }

    /// One-step prediction (in the scaled units the network was trained on).
    pub fn forward(&self, window: &[f64]) -> Result<f64> {
        Ok(self.forward_cached(window)?.0)
    }

    fn accumulate(&self, window: &[f64], dpred: f64, cache: &ForwardCache, grad: &mut Self) {
        let h2_last = &cache.layer2.last().expect("non-empty").h;
        grad.head_b[0] += dpred;
        for (g, h) in grad.head_w.iter_mut().zip(h2_last) {
            *g += dpred * h;
        }
        let mut dh2 = vec![vec![0.0; self.layer2.hidden]; window.len()];
        for (d, w) in dh2.last_mut().expect("non-empty").iter_mut().zip(&self.head_w) {
            *d = dpred * w;
        }
        let dh1 = self.layer2.backward(&cache.layer2, &dh2, &mut grad.layer2);
        self.layer1.backward(&cache.layer1, &dh1, &mut grad.layer1);
    }
}

pub fn network_forward(net: &LstmNetwork, window: &[f64]) -> Result<f64> {
    net.forward(window)
}

/// A lookback window and the value that follows it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub input: Vec<f64>,
    pub target: f64,
}

pub fn make_windows(series: &[f64], lookback: usize) -> Result<Vec<Window>> {
    if lookback < 1 {
        return Err(Error::invalid("lookback must be at least 1"));
    }
    if series.len() <= lookback {
        return Err(Error::InsufficientData {
            needed: lookback + 1,
            got: series.len(),
        });
    }
    Ok((lookback..series.len())
        .map(|t| Window {
            input: series[t - lookback..t].to_vec(),
            target: series[t],
        })
        .collect())
}

/// Exact reverse-mode gradients of the batch mean squared error.
pub fn compute_gradients(net: &LstmNetwork, batch: &[Window]) -> Result<(f64, LstmGradients)> {
    let refs: Vec<&Window> = batch.iter().collect();
    gradients_of(net, &refs)
}

fn gradients_of(net: &LstmNetwork, batch: &[&Window]) -> Result<(f64, LstmGradients)> {
    if batch.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let mut grad = zeros_like(net);
    let scale = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    for w in batch {
        let (pred, cache) = net.forward_cached(&w.input)?;
        let err = pred - w.target;
        loss += err * err * scale;
        net.accumulate(&w.input, 2.0 * err * scale, &cache, &mut grad);
    }
    Ok((loss, grad))
}

pub fn mse(net: &LstmNetwork, windows: &[Window]) -> Result<f64> {
    if windows.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let mut total = 0.0;
    for w in windows {
        let e = net.forward(&w.input)? - w.target;
        total += e * e;
    }
    Ok(total / windows.len() as f64)
}

/// Adam on MSE; the history records full-set train and validation MSE after
/// every epoch.
pub fn train_lstm(
    net: &mut LstmNetwork,
    train: &[Window],
    val: &[Window],
    config: &TrainConfig,
) -> Result<TrainingHistory> {
    net.validate()?;
    if train.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    if val.is_empty() {
        return Err(Error::invalid("validation set is empty"));
    }
    train_adam(
        net,
        train.len(),
        config,
        |m, idx| {
            let batch: Vec<&Window> = idx.iter().map(|&i| &train[i]).collect();
            gradients_of(m, &batch)
        },
        |m, is_val| mse(m, if is_val { val } else { train }),
    )
}

/// Affine map onto [0, 1] from training extrema.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: f64,
    pub max: f64,
}

impl MinMaxScaler {
    pub fn fit(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self { min, max })
    }

    fn range(&self) -> f64 {
        let r = self.max - self.min;
        if r > 0.0 {
            r
        } else {
            1.0
        }
    }

    pub fn transform(&self, v: f64) -> f64 {
        (v - self.min) / self.range()
    }

    pub fn inverse(&self, v: f64) -> f64 {
        v * self.range() + self.min
    }

    pub fn transform_all(&self, values: &[f64]) -> Vec<f64> {
        values.iter().map(|v| self.transform(*v)).collect()
    }
}

/// Walk-forward one-step forecasts for the last `test_len` points of
/// `history` (raw returns), each from the realized preceding window.
pub fn forecast_lstm(
    net: &LstmNetwork,
    scaler: &MinMaxScaler,
    history: &[f64],
    test_len: usize,
) -> Result<Vec<f64>> {
    let n = history.len();
    if test_len > n || n - test_len < net.lookback {
        return Err(Error::InsufficientData {
            needed: net.lookback + test_len,
            got: n,
        });
    }
    let scaled = scaler.transform_all(history);
    (n - test_len..n)
        .map(|t| {
            net.forward(&scaled[t - net.lookback..t])
                .map(|p| scaler.inverse(p))
        })
        .collect()
}

/// A trained network with the scaler fitted on its training span.
#[derive(Debug, Clone)]
pub struct LstmForecaster {
    pub net: LstmNetwork,
    pub scaler: MinMaxScaler,
    pub history: TrainingHistory,
}

impl LstmForecaster {
    /// Fits the scaler on `series[..train_len]`, trains on windows whose
    /// targets lie in the training span and validates on the remaining ones.
    pub fn fit(series: &[f64], train_len: usize, config: &LstmConfig, seed: u64) -> Result<Self> {
        if train_len <= config.lookback || train_len >= series.len() {
            return Err(Error::InsufficientData {
                needed: config.lookback + 2,
                got: train_len.min(series.len()),
            });
        }
        let scaler = MinMaxScaler::fit(&series[..train_len])?;
        let scaled = scaler.transform_all(series);
        let windows = make_windows(&scaled, config.lookback)?;
        let split = train_len - config.lookback;
        let (train, val) = windows.split_at(split);
        let mut net = LstmNetwork::from_config(config, seed)?;
        let train_cfg = TrainConfig {
            seed: seed.wrapping_add(1),
            ..config.train
        };
        let history = train_lstm(&mut net, train, val, &train_cfg)?;
        Ok(Self {
            net,
            scaler,
            history,
        })
    }

    pub fn forecast(&self, history: &[f64], test_len: usize) -> Result<Vec<f64>> {
        forecast_lstm(&self.net, &self.scaler, history, test_len)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{check_gradient, finite_diff_gradient};

    #[test]
    fn windows_examples() {
        let w = make_windows(&[1.0, 2.0, 3.0, 4.0, 5.0], 2).unwrap();
        assert_eq!(w.len(), 3);
        assert_eq!(w[0], Window { input: vec![1.0, 2.0], target: 3.0 });
        assert_eq!(w[2], Window { input: vec![3.0, 4.0], target: 5.0 });
        assert!(make_windows(&[1.0, 2.0], 2).is_err());
        assert_eq!(make_windows(&vec![0.0; 100], 10).unwrap().len(), 90);
    }

    #[test]
    fn zero_cell_stays_zero() {
        let p = LstmLayerParams::zeros(3, 4);
        let s = lstm_cell_forward(&p, &[0.5, -1.0, 2.0], &[0.0; 4], &[0.0; 4]).unwrap();
        assert_eq!(s.h, vec![0.0; 4]);
        assert_eq!(s.c, vec![0.0; 4]);
    }

    #[test]
    fn zero_cell_with_unit_memory() {
        let p = LstmLayerParams::zeros(1, 1);
        let s = lstm_cell_forward(&p, &[0.0], &[0.0], &[1.0]).unwrap();
        assert!((s.c[0] - 0.5).abs() < 1e-15);
        assert!((s.h[0] - 0.5 * 0.5f64.tanh()).abs() < 1e-15);
        assert!((s.h[0] - 0.23106).abs() < 1e-5);
    }

    #[test]
    fn cell_matches_scalar_oracle() {
        let mut rng = SynthRng::new(5);
        let p = LstmLayerParams::init(2, 2, &mut rng);
        let x = [0.3, -0.7];
        let h = [0.1, 0.4];
        let c = [-0.2, 0.9];
        let s = lstm_cell_forward(&p, &x, &h, &c).unwrap();
        let pre = |g: usize, r: usize| {
            let gp = &p.gates[g];
            gp.b[r] + gp.w[r * 2] * x[0] + gp.w[r * 2 + 1] * x[1] + gp.u[r * 2] * h[0] + gp.u[r * 2 + 1] * h[1]
        };
        let sig = |z: f64| 1.0 / (1.0 + (-z).exp());
        for r in 0..2 {
            let i = sig(pre(INPUT, r));
            let f = sig(pre(FORGET, r));
            let o = sig(pre(OUTPUT, r));
            let g = pre(CANDIDATE, r).tanh();
            let cn = f * c[r] + i * g;
            assert!((s.c[r] - cn).abs() < 1e-12);
            assert!((s.h[r] - o * cn.tanh()).abs() < 1e-12);
        }
    }

    #[test]
    fn cell_rejects_bad_inputs() {
        let p = LstmLayerParams::zeros(2, 3);
        assert!(lstm_cell_forward(&p, &[0.0], &[0.0; 3], &[0.0; 3]).is_err());
        assert!(lstm_cell_forward(&p, &[0.0, 0.0], &[0.0; 2], &[0.0; 3]).is_err());
        assert!(lstm_cell_forward(&p, &[f64::NAN, 0.0], &[0.0; 3], &[0.0; 3]).is_err());
    }

    fn zero_net(h1: usize, h2: usize, lookback: usize) -> LstmNetwork {
        let mut n = LstmNetwork::new(h1, h2, lookback, 0).unwrap();
        n.fill(0.0);
        n
    }

    #[test]
    fn zero_network_predicts_head_bias() {
        let mut n = zero_net(4, 3, 5);
        n.head_b[0] = 0.37;
        assert_eq!(n.forward(&[1.0, -2.0, 0.5, 0.0, 3.0]).unwrap(), 0.37);
        // with zero hidden state, doubling the head weights changes nothing
        let mut doubled = n.clone();
        doubled.head_w.iter_mut().for_each(|w| *w = 2.0 * *w + 1.0);
        assert_eq!(doubled.forward(&[1.0, -2.0, 0.5, 0.0, 3.0]).unwrap(), 0.37);
        assert!(n.forward(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn forward_is_deterministic() {
        let a = LstmNetwork::new(6, 3, 4, 42).unwrap();
        let b = LstmNetwork::new(6, 3, 4, 42).unwrap();
        let w = [0.1, 0.5, -0.3, 0.8];
        assert_eq!(a.forward(&w).unwrap().to_bits(), b.forward(&w).unwrap().to_bits());
    }

    fn random_batch(rng: &mut SynthRng, n: usize, lookback: usize) -> Vec<Window> {
        (0..n)
            .map(|_| Window {
                input: (0..lookback).map(|_| rng.uniform(-1.0, 1.0)).collect(),
                target: rng.uniform(-1.0, 1.0),
            })
            .collect()
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = SynthRng::new(99);
        for draw in 0..5 {
            let net = LstmNetwork::new(4, 3, 4, draw).unwrap();
            let batch = random_batch(&mut rng, 3, 4);
            let (_, g) = compute_gradients(&net, &batch).unwrap();
            let x0 = net.to_flat();
            let mut probe = net.clone();
            let num = finite_diff_gradient(
                |x| {
                    probe.load_flat(x).unwrap();
                    mse(&probe, &batch).unwrap()
                },
                &x0,
                1e-5,
            )
            .unwrap();
            let err = check_gradient(&g.to_flat(), &num).unwrap();
            assert!(err < 1e-4, "draw {draw}: {err}");
        }
    }

    #[test]
    fn gradients_vanish_at_exact_fit() {
        let net = LstmNetwork::new(4, 3, 3, 1).unwrap();
        let mut batch = random_batch(&mut SynthRng::new(1), 4, 3);
        for w in &mut batch {
            w.target = net.forward(&w.input).unwrap();
        }
        let (loss, g) = compute_gradients(&net, &batch).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.to_flat().iter().all(|v| *v == 0.0));
        assert!(compute_gradients(&net, &[]).is_err());
    }

    #[test]
    fn duplicating_the_batch_keeps_gradients() {
        // Mean over a doubled batch equals the original mean, so the sum
        // form (2 × MSE) must double every component.
        let net = LstmNetwork::new(3, 2, 3, 4).unwrap();
        let batch = random_batch(&mut SynthRng::new(2), 3, 3);
        let (l1, g1) = compute_gradients(&net, &batch).unwrap();
        let mut twice = batch.clone();
        twice.extend(batch.iter().cloned());
        let (l2, g2) = compute_gradients(&net, &twice).unwrap();
        assert!((l1 - l2).abs() < 1e-15);
        for (a, b) in g1.to_flat().iter().zip(g2.to_flat()) {
            assert!((2.0 * a - 2.0 * b).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_learning_rate_leaves_parameters_untouched() {
        let mut net = LstmNetwork::new(4, 2, 3, 8).unwrap();
        let before = net.clone();
        let data = random_batch(&mut SynthRng::new(3), 10, 3);
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 4,
            adam: crate::numerics::AdamConfig { lr: 0.0, ..Default::default() },
            seed: 1,
        };
        let h = train_lstm(&mut net, &data, &data, &cfg).unwrap();
        assert_eq!(net, before);
        assert_eq!(h.train_loss.len(), 3);
    }

    #[test]
    fn history_length_and_determinism() {
        let data = random_batch(&mut SynthRng::new(4), 12, 3);
        let run = || {
            let mut net = LstmNetwork::new(4, 2, 3, 8).unwrap();
            let cfg = TrainConfig { epochs: 100, batch_size: 5, seed: 3, ..Default::default() };
            let h = train_lstm(&mut net, &data[..8], &data[8..], &cfg).unwrap();
            (net, h)
        };
        let (n1, h1) = run();
        let (n2, h2) = run();
        assert_eq!(h1.train_loss.len(), 100);
        assert_eq!(h1.val_loss.len(), 100);
        assert_eq!(h1.epochs, TrainConfig::default().epochs);
        assert!(h1.train_loss.iter().chain(&h1.val_loss).all(|v| *v >= 0.0));
        assert_eq!(h1, h2);
        assert_eq!(n1, n2);
    }

    #[test]
    fn training_rejects_empty_sets() {
        let mut net = LstmNetwork::new(2, 2, 2, 0).unwrap();
        let data = random_batch(&mut SynthRng::new(4), 3, 2);
        assert!(train_lstm(&mut net, &[], &data, &TrainConfig::default()).is_err());
        assert!(train_lstm(&mut net, &data, &[], &TrainConfig::default()).is_err());
        let cfg = TrainConfig { epochs: 0, ..Default::default() };
        assert!(train_lstm(&mut net, &data, &data, &cfg).is_err());
    }

    #[test]
    fn constant_history_gives_constant_forecasts() {
        let net = LstmNetwork::new(5, 3, 4, 2).unwrap();
        let scaler = MinMaxScaler::fit(&[0.01, 0.01]).unwrap();
        let f = forecast_lstm(&net, &scaler, &[0.01; 30], 10).unwrap();
        assert_eq!(f.len(), 10);
        assert!(f.iter().all(|v| *v == f[0]));
        assert!(forecast_lstm(&net, &scaler, &[0.01; 12], 10).is_err());
    }

    #[test]
    fn forecast_equals_inverse_of_scaled_prediction() {
        let net = LstmNetwork::new(5, 3, 4, 2).unwrap();
        let hist: Vec<f64> = (0..40).map(|i| 0.01 * (i as f64 * 0.7).sin()).collect();
        let scaler = MinMaxScaler::fit(&hist[..30]).unwrap();
        let f = forecast_lstm(&net, &scaler, &hist, 10).unwrap();
        for (k, t) in (30..40).enumerate() {
            let window: Vec<f64> = hist[t - 4..t].iter().map(|v| scaler.transform(*v)).collect();
            let scaled = net.forward(&window).unwrap();
            assert!((f[k] - scaler.inverse(scaled)).abs() < 1e-10);
            assert!((scaler.inverse(scaler.transform(hist[t])) - hist[t]).abs() < 1e-10);
        }
    }

    proptest::proptest! {
        #[test]
        fn gate_activations_are_bounded(seed in 0u64..500, x in -3.0f64..3.0) {
            let mut rng = SynthRng::new(seed);
            let p = LstmLayerParams::init(1, 4, &mut rng);
            let h: Vec<f64> = (0..4).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let c: Vec<f64> = (0..4).map(|_| rng.uniform(-2.0, 2.0)).collect();
            let s = lstm_cell_forward(&p, &[x], &h, &c).unwrap();
            for v in s.input_gate.iter().chain(&s.forget_gate).chain(&s.output_gate) {
                proptest::prop_assert!(*v > 0.0 && *v < 1.0);
            }
            for v in s.candidate.iter().chain(&s.h) {
                proptest::prop_assert!(*v > -1.0 && *v < 1.0);
            }
        }
    }
}
