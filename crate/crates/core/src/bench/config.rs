use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::arima::{ArimaOptions, Criterion, OrderGrid};
use crate::error::{Error, Result};
use crate::lstm::LstmConfig;
use crate::series::{ReturnKind, DEFAULT_TRAIN_FRACTION};
use crate::text::TextModelConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Arima,
    Garch,
    Lstm,
    Encoder,
    AdaptedEncoder,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Arima,
        ModelKind::Garch,
        ModelKind::Lstm,
        ModelKind::Encoder,
        ModelKind::AdaptedEncoder,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Arima => "arima",
            ModelKind::Garch => "garch",
            ModelKind::Lstm => "lstm",
            ModelKind::Encoder => "encoder",
            ModelKind::AdaptedEncoder => "adapted_encoder",
        }
    }

    pub fn needs_news(self) -> bool {
        matches!(self, ModelKind::Encoder | ModelKind::AdaptedEncoder)
    }

    pub fn needs_seed(self) -> bool {
        matches!(self, ModelKind::Lstm | ModelKind::Encoder | ModelKind::AdaptedEncoder)
    }

    /// FNV-1a of the model name; stable across builds and platforms.
    pub fn tag(self) -> u64 {
        self.name().bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
            (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
        })
    }

    /// The model's own stream: global seed XOR its tag.
    pub fn seed(self, global: u64) -> u64 {
        global ^ self.tag()
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        ModelKind::ALL
            .into_iter()
            .find(|m| m.name() == key)
            .ok_or_else(|| Error::invalid(format!("unknown model {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArimaBenchConfig {
    pub grid: OrderGrid,
    pub criterion: Criterion,
    pub options: ArimaOptions,
}

impl Default for ArimaBenchConfig {
    fn default() -> Self {
        Self {
            grid: OrderGrid::default(),
            criterion: Criterion::Aic,
            options: ArimaOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub prices: PathBuf,
    pub news: Option<PathBuf>,
    /// Extra unlabeled sentences for masked-token pretraining.
    pub corpus: Option<PathBuf>,
    pub return_kind: ReturnKind,
    pub train_fraction: f64,
    pub models: Vec<ModelKind>,
    pub arima: ArimaBenchConfig,
    pub lstm: LstmConfig,
    pub text: TextModelConfig,
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
    /// Record wall-clock times. Off makes every output file reproducible
    /// byte for byte.
    pub timing: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            prices: PathBuf::new(),
            news: None,
            corpus: None,
            return_kind: ReturnKind::Simple,
            train_fraction: DEFAULT_TRAIN_FRACTION,
            models: ModelKind::ALL.to_vec(),
            arima: ArimaBenchConfig::default(),
            lstm: LstmConfig::default(),
            text: TextModelConfig::default(),
            seed: None,
            out_dir: PathBuf::from("out"),
            timing: true,
        }
    }
}

impl BenchConfig {
    /// Reads a JSON config; relative input paths resolve against the
    /// config file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: BenchConfig = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if !p.as_os_str().is_empty() && p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.prices);
        if let Some(p) = cfg.news.as_mut() {
            resolve(p);
        }
        if let Some(p) = cfg.corpus.as_mut() {
            resolve(p);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::invalid("train_fraction must lie in (0, 1)"));
        }
        if self.models.is_empty() {
            return Err(Error::invalid("no models enabled"));
        }
        if self.prices.as_os_str().is_empty() {
            return Err(Error::invalid("no price file given"));
        }
        if self.seed.is_none() && self.models.iter().any(|m| m.needs_seed()) {
            return Err(Error::invalid("a seed is required to train the lstm or text models"));
        }
        Ok(())
    }

    /// Enabled models in canonical order, duplicates removed.
    pub fn enabled(&self) -> Vec<ModelKind> {
        ModelKind::ALL
            .into_iter()
            .filter(|m| self.models.contains(m))
            .collect()
    }

    /// SHA-256 of the JSON form with the output directory blanked.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out_dir = PathBuf::new();
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_names_round_trip() {
        for m in ModelKind::ALL {
            assert_eq!(m.name().parse::<ModelKind>().unwrap(), m);
        }
        assert_eq!("Adapted-Encoder".parse::<ModelKind>().unwrap(), ModelKind::AdaptedEncoder);
        assert!("bert".parse::<ModelKind>().is_err());
    }

    #[test]
    fn tags_are_distinct() {
        let mut tags: Vec<u64> = ModelKind::ALL.iter().map(|m| m.tag()).collect();
        tags.sort_unstable();
        tags.dedup();
        assert_eq!(tags.len(), 5);
        assert_eq!(ModelKind::Lstm.seed(0), ModelKind::Lstm.tag());
    }

    #[test]
    fn hash_ignores_output_directory() {
        let a = BenchConfig { seed: Some(1), ..Default::default() };
        let b = BenchConfig { out_dir: "elsewhere".into(), ..a.clone() };
        let c = BenchConfig { seed: Some(2), ..a.clone() };
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn validation() {
        let ok = BenchConfig { prices: "p.csv".into(), seed: Some(1), ..Default::default() };
        assert!(ok.validate().is_ok());
        assert!(BenchConfig { seed: None, ..ok.clone() }.validate().is_err());
        let stats_only = BenchConfig { seed: None, models: vec![ModelKind::Arima], ..ok.clone() };
        assert!(stats_only.validate().is_ok());
        assert!(BenchConfig { train_fraction: 1.0, ..ok.clone() }.validate().is_err());
        assert!(BenchConfig { models: vec![], ..ok.clone() }.validate().is_err());
    }

    #[test]
    fn json_defaults_and_unknown_fields() {
        let cfg: BenchConfig = serde_json::from_str(r#"{"prices":"a.csv","seed":7,"lstm":{"hidden1":8}}"#).unwrap();
        assert_eq!(cfg.lstm.hidden1, 8);
        assert_eq!(cfg.lstm.hidden2, 16);
        assert_eq!(cfg.train_fraction, 0.75);
        assert!(serde_json::from_str::<BenchConfig>(r#"{"prices":"a.csv","sede":7}"#).is_err());
    }
}
