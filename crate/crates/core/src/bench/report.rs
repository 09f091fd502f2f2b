use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::ReturnKind;
use crate::synth::write_file;

/// Sizes and date ranges of the chronological split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    pub n_prices: usize,
    pub n_returns: usize,
    pub return_kind: ReturnKind,
    pub train_fraction: f64,
    pub train_len: usize,
    pub test_len: usize,
    pub train_start: NaiveDate,
    pub train_end: NaiveDate,
    pub test_start: NaiveDate,
    pub test_end: NaiveDate,
    /// RMSE of predicting the training mean for every test day.
    pub baseline_rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSummary {
    Arima {
        order: [usize; 3],
        criterion: String,
        score: f64,
        c: f64,
        phi: Vec<f64>,
        theta: Vec<f64>,
        sigma2: f64,
        loglik: f64,
        aic: f64,
        bic: f64,
        cells_fitted: usize,
        cells_failed: usize,
    },
    Garch {
        mu: f64,
        alpha0: f64,
        alpha1: f64,
        beta1: f64,
        persistence: f64,
        loglik: f64,
        start_loglik: f64,
        converged: bool,
    },
    Lstm {
        hidden1: usize,
        hidden2: usize,
        lookback: usize,
        epochs: usize,
        final_train_loss: Option<f64>,
        final_val_loss: Option<f64>,
        diverged_at: Option<usize>,
    },
    Encoder {
        vocab_size: usize,
        d_model: usize,
        heads: usize,
        blocks: usize,
        epochs: usize,
        train_items: usize,
        final_train_loss: Option<f64>,
        final_val_loss: Option<f64>,
        diverged_at: Option<usize>,
        pretrain_epochs: Option<usize>,
        pretrain_sentences: Option<usize>,
        initial_masked_loss: Option<f64>,
        final_masked_loss: Option<f64>,
        carried_days: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub name: String,
    /// Test-span RMSE of the one-step return forecasts.
    pub rmse: f64,
    /// Labeled supplementary scores, e.g. the GARCH volatility fit.
    pub scores: BTreeMap<String, f64>,
    pub wall_time_s: Option<f64>,
    pub warnings: Vec<String>,
    pub summary: ModelSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub version: String,
    pub seed: Option<u64>,
    pub config_hash: String,
    pub protocol: Protocol,
    pub models: Vec<ModelEntry>,
    pub notices: Vec<String>,
}

impl BenchmarkReport {
    pub fn entry(&self, name: &str) -> Option<&ModelEntry> {
        self.models.iter().find(|m| m.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// `model,rmse,wall_time_s` rows, lowest RMSE first.
pub fn summary_csv(report: &BenchmarkReport) -> String {
    let mut rows: Vec<&ModelEntry> = report.models.iter().collect();
    rows.sort_by(|a, b| a.rmse.total_cmp(&b.rmse).then_with(|| a.name.cmp(&b.name)));
    let mut out = String::from("model,rmse,wall_time_s\n");
    for m in rows {
        let wall = m.wall_time_s.map(|w| w.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{}\n", m.name, m.rmse, wall));
    }
    out
}

/// Writes `report.json` and `summary.csv` into `dir`.
pub fn emit_report(report: &BenchmarkReport, dir: &Path) -> Result<Vec<PathBuf>> {
    if let Some(bad) = report.models.iter().find(|m| !(m.rmse.is_finite() && m.rmse >= 0.0)) {
        return Err(Error::NonFinite(format!("RMSE of {}", bad.name)));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json = dir.join("report.json");
    write_file(&json, report.to_json()?.as_bytes())?;
    let csv = dir.join("summary.csv");
    write_file(&csv, summary_csv(report).as_bytes())?;
    Ok(vec![json, csv])
}
