//! Date-indexed price and return series, differencing, chronological
//! splitting and the RMSE metric every model is scored with.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Daily close prices with strictly ascending dates.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    dates: Vec<NaiveDate>,
    closes: Vec<f64>,
}

impl PriceSeries {
    pub fn new(dates: Vec<NaiveDate>, closes: Vec<f64>) -> Result<Self> {
        if dates.len() != closes.len() {
            return Err(Error::DimensionMismatch {
                expected: dates.len(),
                got: closes.len(),
            });
        }
        for w in dates.windows(2) {
            if w[1] == w[0] {
                return Err(Error::invalid(format!("duplicate date {}", w[0])));
            }
            if w[1] < w[0] {
                return Err(Error::invalid(format!(
                    "dates not ascending: {} follows {}",
                    w[1], w[0]
                )));
            }
        }
        if let Some((i, p)) = closes
            .iter()
            .enumerate()
            .find(|(_, p)| !(p.is_finite() && **p > 0.0))
        {
            return Err(Error::invalid(format!(
                "non-positive close {p} on {}",
                dates[i]
            )));
        }
        Ok(Self { dates, closes })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn closes(&self) -> &[f64] {
        &self.closes
    }

    pub fn len(&self) -> usize {
        self.closes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.closes.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ReturnKind {
    #[default]
    Simple,
    Log,
}

/// Returns dated by the later close of each consecutive pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    dates: Vec<NaiveDate>,
    values: Vec<f64>,
    kind: ReturnKind,
}

impl ReturnSeries {
    pub fn new(dates: Vec<NaiveDate>, values: Vec<f64>, kind: ReturnKind) -> Result<Self> {
        if dates.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: dates.len(),
                got: values.len(),
            });
        }
        if dates.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("return dates must be strictly increasing"));
        }
        Ok(Self {
            dates,
            values,
            kind,
        })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> ReturnKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            dates: self.dates[range.clone()].to_vec(),
            values: self.values[range].to_vec(),
            kind: self.kind,
        }
    }
}

pub fn compute_returns(prices: &PriceSeries, kind: ReturnKind) -> Result<ReturnSeries> {
    if prices.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: prices.len(),
        });
    }
    let closes = prices.closes();
    let mut values = Vec::with_capacity(closes.len() - 1);
    for w in closes.windows(2) {
        if w[0] <= 0.0 || w[1] <= 0.0 {
            return Err(Error::invalid("non-positive price encountered"));
        }
        let ratio = w[1] / w[0];
        values.push(match kind {
            ReturnKind::Simple => ratio - 1.0,
            ReturnKind::Log => ratio.ln(),
        });
    }
    Ok(ReturnSeries {
        dates: prices.dates()[1..].to_vec(),
        values,
        kind,
    })
}

/// Applies first differences `d` times.
pub fn difference(series: &[f64], d: usize) -> Result<Vec<f64>> {
    if series.len() <= d {
        return Err(Error::InsufficientData {
            needed: d + 1,
            got: series.len(),
        });
    }
    let mut out = series.to_vec();
    for _ in 0..d {
        out = out.windows(2).map(|w| w[1] - w[0]).collect();
    }
    Ok(out)
}

/// First element of each intermediate differencing level, outermost first.
/// Together with the fully differenced series these reconstruct the input.
pub fn difference_heads(series: &[f64], d: usize) -> Result<Vec<f64>> {
    let mut level = series.to_vec();
    let mut heads = Vec::with_capacity(d);
    for _ in 0..d {
        if level.len() < 2 {
            return Err(Error::InsufficientData {
                needed: d + 1,
                got: series.len(),
            });
        }
        heads.push(level[0]);
        level = level.windows(2).map(|w| w[1] - w[0]).collect();
    }
    Ok(heads)
}

/// Inverse of [`difference`]: cumulative sums seeded with `heads`.
pub fn undifference(diffed: &[f64], heads: &[f64]) -> Vec<f64> {
    let mut level = diffed.to_vec();
    for &head in heads.iter().rev() {
        let mut acc = head;
        let mut next = Vec::with_capacity(level.len() + 1);
        next.push(acc);
        for v in &level {
            acc += v;
            next.push(acc);
        }
        level = next;
    }
    level
}

/// Chronological train/test cut.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSeries {
    pub train: ReturnSeries,
    pub test: ReturnSeries,
    pub train_fraction: f64,
}

pub const DEFAULT_TRAIN_FRACTION: f64 = 0.75;

/// Number of leading observations that go to the training half.
pub fn train_len(n: usize, train_fraction: f64) -> Result<usize> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }
    let cut = (n as f64 * train_fraction).floor() as usize;
    if cut < 1 || cut >= n {
        return Err(Error::InsufficientData {
            needed: 2,
            got: n,
        });
    }
    Ok(cut)
}

pub fn train_test_split(series: &ReturnSeries, train_fraction: f64) -> Result<SplitSeries> {
    let cut = train_len(series.len(), train_fraction)?;
    Ok(SplitSeries {
        train: series.slice(0..cut),
        test: series.slice(cut..series.len()),
        train_fraction,
    })
}

pub fn rmse(predicted: &[f64], actual: &[f64]) -> Result<f64> {
    if predicted.len() != actual.len() {
        return Err(Error::DimensionMismatch {
            expected: actual.len(),
            got: predicted.len(),
        });
    }
    if actual.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let sse: f64 = predicted
        .iter()
        .zip(actual)
        .map(|(p, a)| (p - a) * (p - a))
        .sum();
    Ok((sse / actual.len() as f64).sqrt())
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample variance; zero for fewer than two values.
pub fn sample_variance(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64
}
