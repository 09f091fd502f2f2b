//! Seeded generators for the synthetic fixtures used by recovery tests and
//! end-to-end runs.
//!
//! Every stream comes from ChaCha8 seeded through `SeedableRng::seed_from_u64`,
//! whose output is specified and portable, so a seed pins a fixture exactly.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Datelike, Days, FixedOffset, NaiveDate, TimeZone, Utc, Weekday};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::arima::roots_outside_unit_circle;
use crate::error::{Error, Result};
use crate::garch::GarchParams;
use crate::series::PriceSeries;
use crate::text::NewsItem;

pub const RNG_ALGORITHM: &str = "chacha8";
pub const BURN_IN: usize = 200;

/// Seeded random stream shared by every generator and trainer.
#[derive(Debug, Clone)]
pub struct SynthRng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl SynthRng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn algorithm(&self) -> &'static str {
        RNG_ALGORITHM
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.inner.random_range(lo..hi)
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn chance(&mut self, p: f64) -> bool {
        self.inner.random_bool(p.clamp(0.0, 1.0))
    }

    /// Index drawn proportionally to `weights`.
    pub fn weighted(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        let mut u = self.uniform(0.0, total);
        for (i, w) in weights.iter().enumerate() {
            if u < *w {
                return i;
            }
            u -= w;
        }
        weights.len() - 1
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        use rand::seq::SliceRandom;
        items.shuffle(&mut self.inner);
    }
}

impl RngCore for SynthRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// ARMA generator parameters in the crate's sign convention
/// `y(t) = c + Σ φi y(t-i) - Σ θj ε(t-j) + ε(t)`, `ε ~ N(0, σ²)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmaParams {
    pub c: f64,
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
    pub sigma: f64,
}

impl ArmaParams {
    pub fn new(c: f64, phi: Vec<f64>, theta: Vec<f64>, sigma: f64) -> Self {
        Self {
            c,
            phi,
            theta,
            sigma,
        }
    }
}

pub fn gen_arma(params: &ArmaParams, n: usize, seed: u64) -> Result<Vec<f64>> {
    if n < 1 {
        return Err(Error::invalid("n must be at least 1"));
    }
    if !roots_outside_unit_circle(&params.phi) {
        return Err(Error::NonStationary("explosive AR parameters".into()));
    }
    if !roots_outside_unit_circle(&params.theta) {
        return Err(Error::invalid("non-invertible MA parameters"));
    }
    if !(params.sigma > 0.0) {
        return Err(Error::invalid("innovation sd must be positive"));
    }
    let mut rng = SynthRng::new(seed);
    let total = n + BURN_IN;
    let (p, q) = (params.phi.len(), params.theta.len());
    let mut y = vec![0.0; total];
    let mut e = vec![0.0; total];
    for t in 0..total {
        let eps = params.sigma * rng.normal();
        let mut v = params.c + eps;
        for i in 0..p.min(t) {
            v += params.phi[i] * y[t - 1 - i];
        }
        for j in 0..q.min(t) {
            v -= params.theta[j] * e[t - 1 - j];
        }
        y[t] = v;
        e[t] = eps;
    }
    Ok(y.split_off(BURN_IN))
}

/// GARCH(1,1) returns; the variance recursion starts at its long-run level.
pub fn gen_garch(params: &GarchParams, n: usize, seed: u64) -> Result<Vec<f64>> {
    Ok(gen_garch_with_variance(params, n, seed)?.0)
}

/// Like [`gen_garch`] but also returns the simulated σ² path.
pub fn gen_garch_with_variance(params: &GarchParams, n: usize, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    params.validate(true)?;
    if n < 1 {
        return Err(Error::invalid("n must be at least 1"));
    }
    let mut rng = SynthRng::new(seed);
    let mut s2 = params.unconditional_variance().expect("validated as stationary");
    let mut returns = Vec::with_capacity(n);
    let mut variances = Vec::with_capacity(n);
    let mut last_eps = 0.0;
    for t in 0..n + BURN_IN {
        if t > 0 {
            s2 = params.alpha0 + params.alpha1 * last_eps * last_eps + params.beta1 * s2;
        }
        let eps = s2.sqrt() * rng.normal();
        last_eps = eps;
        if t >= BURN_IN {
            returns.push(params.mu + eps);
            variances.push(s2);
        }
    }
    Ok((returns, variances))
}

const SUBJECTS: &[&str] = &[
    "stocks",
    "wall street",
    "the index",
    "equities",
    "the market",
    "blue chips",
    "tech shares",
    "the s&p 500",
];
const POSITIVE_VERBS: &[&str] = &[
    "surges", "soars", "rallies", "jumps", "climbs", "rebounds", "gains", "advances", "spikes",
    "skyrockets",
];
const NEGATIVE_VERBS: &[&str] = &[
    "plunges", "tumbles", "slides", "sinks", "drops", "slumps", "falls", "retreats", "crashes",
    "plummets",
];
const NEUTRAL_VERBS: &[&str] = &[
    "holds", "steadies", "drifts", "pauses", "hovers", "churns", "idles", "waits",
];
const POSITIVE_CONTEXT: &[&str] = &[
    "as investors cheer strong earnings",
    "on upbeat jobs data",
    "amid broad buying",
    "as optimism builds",
    "after stimulus hopes grow",
];
const NEGATIVE_CONTEXT: &[&str] = &[
    "as investors fear recession",
    "on weak jobs data",
    "amid heavy selling",
    "as panic spreads",
    "after virus cases climb",
];
const NEUTRAL_CONTEXT: &[&str] = &[
    "ahead of fed meeting",
    "in quiet trading",
    "as traders await data",
    "before earnings season",
    "in a mixed session",
];
const SOURCES: &[&str] = &["CNBC", "Bloomberg", "Yahoo Finance"];

const DRIFT: f64 = 0.0004;
const PLANTED_EFFECT: f64 = 0.01;
const NOISE_SD: f64 = 0.009;
// Headline wording drifts: the second half of every verb family phases in
// over the calendar. The corpus uses all verbs throughout.
const LATE_LEXICON_START: f64 = 0.75;
const LATE_LEXICON_FULL: f64 = 0.9;

/// Summary of how a text fixture was generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureManifest {
    pub seed: u64,
    pub rng: String,
    pub n_days: usize,
    pub n_news: usize,
    pub n_corpus: usize,
    pub drift: f64,
    pub planted_effect: f64,
    pub noise_sd: f64,
    /// Calendar fractions where late-lexicon verbs start to appear and
    /// where they have fully replaced the early ones.
    pub late_lexicon_start: f64,
    pub late_lexicon_full: f64,
    /// Sample correlation between a day's planted sentiment and the next
    /// trading day's simple return.
    pub planted_correlation: f64,
}

#[derive(Debug, Clone)]
pub struct TextFixture {
    pub prices: PriceSeries,
    pub news: Vec<NewsItem>,
    /// Unlabeled domain sentences for masked-token pretraining.
    pub corpus: Vec<String>,
    /// Planted sentiment per trading day: +1, 0 or -1.
    pub sentiment: Vec<i8>,
    pub manifest: FixtureManifest,
}

fn trading_days(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d + Days::new(1);
    }
    out
}

// Zipf-like preference inside a word family: a few words dominate.
fn zipf_weights(n: usize) -> Vec<f64> {
    (0..n).map(|k| 1.0 / (k as f64 + 1.0)).collect()
}

/// Share of headlines drawing from the second half of each verb family at
/// calendar fraction `u`: none before `LATE_LEXICON_START`, all after
/// `LATE_LEXICON_FULL`, linear in between.
fn late_lexicon_prob(u: f64) -> f64 {
    ((u - LATE_LEXICON_START) / (LATE_LEXICON_FULL - LATE_LEXICON_START)).clamp(0.0, 1.0)
}

fn pick_verb(rng: &mut SynthRng, verbs: &[&'static str], late: bool) -> &'static str {
    let half = verbs.len() / 2;
    let pool = if late { &verbs[half..] } else { &verbs[..half] };
    pool[rng.weighted(&zipf_weights(pool.len()))]
}

fn headline(rng: &mut SynthRng, sentiment: i8, family_context_prob: f64, late_prob: f64) -> String {
    let subject = SUBJECTS[rng.below(SUBJECTS.len())];
    let (verbs, contexts) = match sentiment {
        1 => (POSITIVE_VERBS, POSITIVE_CONTEXT),
        -1 => (NEGATIVE_VERBS, NEGATIVE_CONTEXT),
        _ => (NEUTRAL_VERBS, NEUTRAL_CONTEXT),
    };
    let late = rng.chance(late_prob);
    let verb = pick_verb(rng, verbs, late);
    let context = if rng.chance(family_context_prob) {
        contexts[rng.below(contexts.len())]
    } else {
        NEUTRAL_CONTEXT[rng.below(NEUTRAL_CONTEXT.len())]
    };
    format!("{subject} {verb} {context}")
}

fn timestamp(date: NaiveDate, hour: u32, minute: u32) -> DateTime<FixedOffset> {
    let naive = date.and_hms_opt(hour, minute, 0).expect("valid time");
    Utc.from_utc_datetime(&naive).fixed_offset()
}

/// Random-walk prices with templated headlines whose sentiment family drives
/// the next trading day's return.
pub fn gen_text_fixture(n_days: usize, seed: u64) -> Result<TextFixture> {
    if n_days < 10 {
        return Err(Error::InsufficientData {
            needed: 10,
            got: n_days,
        });
    }
    let mut rng = SynthRng::new(seed);
    let start = NaiveDate::from_ymd_opt(2019, 1, 2).expect("valid date");
    let dates = trading_days(start, n_days);

    let sentiment: Vec<i8> = (0..n_days)
        .map(|_| match rng.weighted(&[0.3, 0.4, 0.3]) {
            0 => 1,
            1 => 0,
            _ => -1,
        })
        .collect();

    let mut closes = Vec::with_capacity(n_days);
    let mut price = 2500.0;
    closes.push(price);
    let mut realized = Vec::with_capacity(n_days - 1);
    for t in 1..n_days {
        let r = DRIFT + PLANTED_EFFECT * f64::from(sentiment[t - 1]) + NOISE_SD * rng.normal();
        price *= 1.0 + r;
        // two-decimal closes as a real quote feed would report
        price = (price * 100.0).round() / 100.0;
        closes.push(price);
        realized.push(closes[t] / closes[t - 1] - 1.0);
    }

    let mut news = Vec::new();
    for (t, date) in dates.iter().enumerate() {
        let items = 1 + rng.below(3);
        for _ in 0..items {
            // a fifth of items on a sentiment day are off-topic filler
            let s = if sentiment[t] != 0 && rng.chance(0.2) {
                0
            } else {
                sentiment[t]
            };
            let late = late_lexicon_prob(t as f64 / n_days as f64);
            let text = headline(&mut rng, s, 0.35, late);
            // Monday items are sometimes published over the weekend.
            let published = if date.weekday() == Weekday::Mon && rng.chance(0.3) {
                *date - Days::new(1 + rng.below(2) as u64)
            } else {
                *date
            };
            let hour = 8 + rng.below(12) as u32;
            let minute = rng.below(60) as u32;
            news.push(NewsItem::new(
                timestamp(published, hour, minute),
                SOURCES[rng.below(SOURCES.len())],
                text,
            )?);
        }
    }

    let n_corpus = (2 * n_days).max(100);
    let corpus: Vec<String> = (0..n_corpus)
        .map(|_| {
            let family = match rng.below(3) {
                0 => 1,
                1 => -1,
                _ => 0,
            };
            let subject = SUBJECTS[rng.below(SUBJECTS.len())];
            let (verbs, contexts) = match family {
                1 => (POSITIVE_VERBS, POSITIVE_CONTEXT),
                -1 => (NEGATIVE_VERBS, NEGATIVE_CONTEXT),
                _ => (NEUTRAL_VERBS, NEUTRAL_CONTEXT),
            };
            // two verbs of one family, so each is the other's best cue
            let v1 = verbs[rng.below(verbs.len())];
            let v2 = verbs[rng.below(verbs.len())];
            let context = if rng.chance(0.35) {
                contexts[rng.below(contexts.len())]
            } else {
                NEUTRAL_CONTEXT[rng.below(NEUTRAL_CONTEXT.len())]
            };
            format!("{subject} {v1} and {v2} {context}")
        })
        .collect();

    let signal: Vec<f64> = sentiment[..n_days - 1].iter().map(|s| f64::from(*s)).collect();
    let planted_correlation = correlation(&signal, &realized);

    let manifest = FixtureManifest {
        seed,
        rng: RNG_ALGORITHM.to_string(),
        n_days,
        n_news: news.len(),
        n_corpus: corpus.len(),
        drift: DRIFT,
        planted_effect: PLANTED_EFFECT,
        noise_sd: NOISE_SD,
        late_lexicon_start: LATE_LEXICON_START,
        late_lexicon_full: LATE_LEXICON_FULL,
        planted_correlation,
    };
    Ok(TextFixture {
        prices: PriceSeries::new(dates, closes)?,
        news,
        corpus,
        sentiment,
        manifest,
    })
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb) * (y - mb)).sum();
    cov / (va * vb).sqrt()
}

/// Paths written by [`write_fixture`].
#[derive(Debug, Clone, PartialEq)]
pub struct FixtureFiles {
    pub prices: PathBuf,
    pub news: PathBuf,
    pub corpus: PathBuf,
    pub manifest: PathBuf,
}

/// Formats a close the way quote sites export it: `3,756.07`.
pub fn format_price(value: f64) -> String {
    let cents = (value * 100.0).round() as i64;
    let (whole, frac) = (cents / 100, cents % 100);
    let digits = whole.to_string();
    let mut grouped = String::new();
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            grouped.push(',');
        }
        grouped.push(ch);
    }
    format!("{grouped}.{frac:02}")
}

/// Writes `prices.csv` (quote-site layout, newest first), `news.jsonl`,
/// `corpus.txt` and `manifest.json` into `dir`.
pub fn write_fixture(fixture: &TextFixture, dir: &Path) -> Result<FixtureFiles> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = FixtureFiles {
        prices: dir.join("prices.csv"),
        news: dir.join("news.jsonl"),
        corpus: dir.join("corpus.txt"),
        manifest: dir.join("manifest.json"),
    };

    let mut csv = String::from("\"Date\",\"Price\"\n");
    let prices = &fixture.prices;
    for (date, close) in prices.dates().iter().zip(prices.closes()).rev() {
        csv.push_str(&format!(
            "\"{}\",\"{}\"\n",
            date.format("%b %d, %Y"),
            format_price(*close)
        ));
    }
    write_file(&files.prices, csv.as_bytes())?;

    let mut jsonl = Vec::new();
    for item in &fixture.news {
        serde_json::to_writer(&mut jsonl, item)?;
        jsonl.push(b'\n');
    }
    write_file(&files.news, &jsonl)?;

    let mut corpus = fixture.corpus.join("\n");
    corpus.push('\n');
    write_file(&files.corpus, corpus.as_bytes())?;

    let mut manifest = serde_json::to_vec_pretty(&fixture.manifest)?;
    manifest.push(b'\n');
    write_file(&files.manifest, &manifest)?;
    Ok(files)
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn white_noise_mean_within_clt_bound() {
        let p = ArmaParams::new(0.0, vec![], vec![], 1.0);
        for n in [100, 1000, 10_000] {
            let y = gen_arma(&p, n, 1).unwrap();
            let m = y.iter().sum::<f64>() / n as f64;
            assert!(m.abs() < 3.0 / (n as f64).sqrt());
        }
    }

    #[test]
    fn ar1_lag_one_autocorrelation() {
        let y = gen_arma(&ArmaParams::new(0.0, vec![0.6], vec![], 1.0), 2000, 4).unwrap();
        let n = y.len() as f64;
        let m = y.iter().sum::<f64>() / n;
        let c0: f64 = y.iter().map(|v| (v - m).powi(2)).sum();
        let c1: f64 = y.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
        assert!((c1 / c0 - 0.6).abs() < 0.05);
    }

    #[test]
    fn generators_are_reproducible() {
        let p = ArmaParams::new(0.1, vec![0.3], vec![0.2], 1.0);
        assert_eq!(gen_arma(&p, 50, 9).unwrap(), gen_arma(&p, 50, 9).unwrap());
        assert_ne!(gen_arma(&p, 50, 9).unwrap(), gen_arma(&p, 50, 10).unwrap());
        let g = GarchParams::new(0.0, 0.05, 0.1, 0.85);
        assert_eq!(gen_garch(&g, 50, 9).unwrap(), gen_garch(&g, 50, 9).unwrap());
    }

    #[test]
    fn explosive_or_non_invertible_rejected() {
        assert!(gen_arma(&ArmaParams::new(0.0, vec![1.01], vec![], 1.0), 10, 0).is_err());
        assert!(gen_arma(&ArmaParams::new(0.0, vec![], vec![1.5], 1.0), 10, 0).is_err());
        assert!(gen_garch(&GarchParams::new(0.0, 0.1, 0.5, 0.6), 10, 0).is_err());
    }

    #[test]
    fn iid_garch_variance_matches_alpha0() {
        let r = gen_garch(&GarchParams::new(0.2, 0.5, 0.0, 0.0), 5000, 12).unwrap();
        let m = r.iter().sum::<f64>() / 5000.0;
        let v = r.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 4999.0;
        assert!((v - 0.5).abs() < 0.05);
    }

    #[test]
    fn garch_variance_matches_long_run_level() {
        let (r, s2) = gen_garch_with_variance(&GarchParams::new(0.0, 0.05, 0.1, 0.85), 5000, 13).unwrap();
        let v = r.iter().map(|x| x * x).sum::<f64>() / 5000.0;
        assert!((v - 1.0).abs() < 0.15, "{v}");
        assert!(s2.iter().all(|s| *s > 0.0));
    }

    #[test]
    fn fixture_separates_sentiment() {
        let fx = gen_text_fixture(500, 3).unwrap();
        let closes = fx.prices.closes();
        let (mut pos, mut neg) = (Vec::new(), Vec::new());
        for t in 0..closes.len() - 1 {
            let r = closes[t + 1] / closes[t] - 1.0;
            match fx.sentiment[t] {
                1 => pos.push(r),
                -1 => neg.push(r),
                _ => {}
            }
        }
        let avg = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(avg(&pos) > avg(&neg));
        assert!(fx.manifest.planted_correlation > 0.2);
        assert!(fx.prices.len() == 500);
        assert!(gen_text_fixture(9, 3).is_err());
    }

    #[test]
    fn fixture_files_are_byte_identical_for_a_seed() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let fa = write_fixture(&gen_text_fixture(40, 5).unwrap(), a.path()).unwrap();
        let fb = write_fixture(&gen_text_fixture(40, 5).unwrap(), b.path()).unwrap();
        for (x, y) in [(fa.prices, fb.prices), (fa.news, fb.news), (fa.corpus, fb.corpus), (fa.manifest, fb.manifest)] {
            assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap());
        }
    }

    #[test]
    fn price_formatting() {
        assert_eq!(format_price(3756.07), "3,756.07");
        assert_eq!(format_price(999.5), "999.50");
        assert_eq!(format_price(1234567.891), "1,234,567.89");
    }
}
