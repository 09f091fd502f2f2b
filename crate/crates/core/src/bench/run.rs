use std::collections::BTreeMap;
use std::time::Instant;

use chrono::NaiveDate;

use crate::arima::select_order;
use crate::error::{Error, Result};
use crate::garch::{fit_garch, qlike, walk_forward};
use crate::lstm::LstmForecaster;
use crate::series::{compute_returns, mean, rmse, train_len, ReturnSeries};
use crate::text::{
    align_news_to_days, build_vocab, predict_daily_with, pretrain_masked, NewsItem, TextEncoderModel,
    TextModelConfig, TextRegressor,
};
use crate::training::{TrainConfig, TrainingHistory};

use super::config::{BenchConfig, ModelKind};
use super::load::{load_corpus, load_news, load_prices};
use super::plots::emit_plots;
use super::report::{emit_report, BenchmarkReport, ModelEntry, ModelSummary, Protocol};

/// A finished run: the report plus what the plot files are drawn from.
#[derive(Debug, Clone)]
pub struct BenchmarkRun {
    pub report: BenchmarkReport,
    pub returns: ReturnSeries,
    pub histories: Vec<(String, TrainingHistory)>,
    /// Test-span forecasts per model.
    pub predictions: BTreeMap<String, Vec<f64>>,
}

/// Everything the text models see. `returns[t]` is the return from trading
/// day `t` to `t + 1`, so news aligned to day `t` predicts it.
#[derive(Debug, Clone, Copy)]
pub struct TextInputs<'a> {
    pub calendar: &'a [NaiveDate],
    pub returns: &'a [f64],
    pub train_len: usize,
    pub news: &'a [NewsItem],
    pub corpus: &'a [String],
}

#[derive(Debug, Clone)]
pub struct TextModelRun {
    pub predictions: Vec<f64>,
    pub history: TrainingHistory,
    pub pretrain_history: Option<TrainingHistory>,
    pub vocab_size: usize,
    pub train_items: usize,
    pub pretrain_sentences: usize,
    pub carried_days: usize,
    pub warnings: Vec<String>,
}

/// Fits one text encoder, masked-token pretraining it first when
/// `adapted`, and returns its test-span daily forecasts.
pub fn run_text_model(
    inputs: &TextInputs<'_>,
    config: &TextModelConfig,
    adapted: bool,
    seed: u64,
) -> Result<TextModelRun> {
    let m = inputs.returns.len();
    if inputs.calendar.len() != m + 1 {
        return Err(Error::DimensionMismatch {
            expected: m + 1,
            got: inputs.calendar.len(),
        });
    }
    if inputs.train_len == 0 || inputs.train_len >= m {
        return Err(Error::invalid("train length must split the returns"));
    }
    let records = align_news_to_days(inputs.news, inputs.calendar)?;
    let pairs = |range: std::ops::Range<usize>| -> Vec<(String, f64)> {
        range
            .flat_map(|t| records[t].items.iter().map(move |i| (i.text.clone(), inputs.returns[t])))
            .collect()
    };
    let train = pairs(0..inputs.train_len);
    if train.is_empty() {
        return Err(Error::invalid("no news falls inside the training span"));
    }
    let mut warnings = Vec::new();
    let mut val = pairs(inputs.train_len..m);
    if val.is_empty() {
        warnings.push("no news in the test span; validation curve uses the training items".into());
        val = train.clone();
    }

    // Both variants share the vocabulary; only the adapted one trains on the
    // corpus.
    let mut texts: Vec<&str> = train.iter().map(|(t, _)| t.as_str()).collect();
    texts.extend(inputs.corpus.iter().map(String::as_str));
    let vocab = build_vocab(&texts, config.min_freq, config.max_vocab)?;
    let mut model = TextEncoderModel::new(config.encoder_config(vocab.len()), seed)?;
    let pretrain_history = if adapted {
        if inputs.corpus.is_empty() {
            return Err(Error::invalid("domain adaptation needs a non-empty corpus"));
        }
        let h = pretrain_masked(&mut model, &vocab, inputs.corpus, &config.pretrain, seed.wrapping_add(2))?;
        if let Some(e) = h.diverged_at {
            warnings.push(format!("masked pretraining diverged at epoch {e}"));
        }
        Some(h)
    } else {
        None
    };
    let train_cfg = TrainConfig {
        seed: seed.wrapping_add(1),
        ..config.train
    };
    let vocab_size = vocab.len();
    let reg = TextRegressor::fit(vocab, model, &train, &val, &train_cfg)?;
    if let Some(e) = reg.history.diverged_at {
        warnings.push(format!("training diverged at epoch {e}"));
    }
    if records[0].is_empty() {
        warnings.push("first trading day has no news; carry-forward starts from the training mean".into());
    }
    let daily = predict_daily_with(&records[..m], Some(reg.target_mean), |item| reg.predict_text(&item.text))?;
    let test = &daily[inputs.train_len..];
    Ok(TextModelRun {
        predictions: test.iter().map(|d| d.value).collect(),
        carried_days: test.iter().filter(|d| d.carried).count(),
        history: reg.history,
        pretrain_history,
        vocab_size,
        train_items: train.len(),
        pretrain_sentences: if adapted { inputs.corpus.len() } else { 0 },
        warnings,
    })
}

struct Outcome {
    predictions: Vec<f64>,
    scores: BTreeMap<String, f64>,
    warnings: Vec<String>,
    summary: ModelSummary,
    history: Option<TrainingHistory>,
}

fn run_arima(config: &BenchConfig, returns: &[f64], n_train: usize) -> Result<Outcome> {
    let a = &config.arima;
    let selection = select_order(&returns[..n_train], &a.grid, a.criterion, &a.options)?;
    let fit = selection.best_fit();
    let predictions = fit.forecast_one_step(returns, returns.len() - n_train)?;
    let mut warnings = Vec::new();
    if !fit.converged {
        warnings.push("optimizer stopped before meeting its tolerance".into());
    }
    if !fit.stationary {
        warnings.push("selected model is not stationary".into());
    }
    let failed = selection.cells.iter().filter(|c| c.fit.is_err()).count();
    let o = fit.order();
    Ok(Outcome {
        predictions,
        scores: BTreeMap::new(),
        warnings,
        summary: ModelSummary::Arima {
            order: [o.p, o.d, o.q],
            criterion: format!("{:?}", selection.criterion).to_lowercase(),
            score: selection.best_score(),
            c: fit.model.c,
            phi: fit.model.phi.clone(),
            theta: fit.model.theta.clone(),
            sigma2: fit.sigma2,
            loglik: fit.loglik,
            aic: fit.aic,
            bic: fit.bic,
            cells_fitted: selection.cells.len() - failed,
            cells_failed: failed,
        },
        history: None,
    })
}

fn run_garch(returns: &[f64], n_train: usize) -> Result<Outcome> {
    let fit = fit_garch(&returns[..n_train])?;
    let test_len = returns.len() - n_train;
    let fc = walk_forward(&fit, returns, test_len)?;
    let test = &returns[n_train..];
    let sigma: Vec<f64> = fc.variance.iter().map(|v| v.sqrt()).collect();
    let abs_dev: Vec<f64> = test.iter().map(|r| (r - fit.params.mu).abs()).collect();
    let mut scores = BTreeMap::new();
    scores.insert("volatility_rmse".to_string(), rmse(&sigma, &abs_dev)?);
    scores.insert("qlike".to_string(), qlike(&fc.variance, test, fit.params.mu)?);
    let mut warnings = Vec::new();
    if !fit.converged {
        warnings.push("optimizer stopped before meeting its tolerance".into());
    }
    let p = fit.params;
    Ok(Outcome {
        predictions: fc.mean,
        scores,
        warnings,
        summary: ModelSummary::Garch {
            mu: p.mu,
            alpha0: p.alpha0,
            alpha1: p.alpha1,
            beta1: p.beta1,
            persistence: p.persistence(),
            loglik: fit.loglik,
            start_loglik: fit.start_loglik,
            converged: fit.converged,
        },
        history: None,
    })
}

fn run_lstm(config: &BenchConfig, returns: &[f64], n_train: usize, seed: u64) -> Result<Outcome> {
    let f = LstmForecaster::fit(returns, n_train, &config.lstm, seed)?;
    let predictions = f.forecast(returns, returns.len() - n_train)?;
    let mut warnings = Vec::new();
    if let Some(e) = f.history.diverged_at {
        warnings.push(format!("training diverged at epoch {e}"));
    }
    Ok(Outcome {
        predictions,
        scores: BTreeMap::new(),
        warnings,
        summary: ModelSummary::Lstm {
            hidden1: config.lstm.hidden1,
            hidden2: config.lstm.hidden2,
            lookback: config.lstm.lookback,
            epochs: f.history.train_loss.len(),
            final_train_loss: f.history.final_train_loss(),
            final_val_loss: f.history.final_val_loss(),
            diverged_at: f.history.diverged_at,
        },
        history: Some(f.history),
    })
}

fn text_outcome(run: TextModelRun, config: &TextModelConfig) -> Outcome {
    let pre = run.pretrain_history.as_ref();
    Outcome {
        predictions: run.predictions,
        scores: BTreeMap::new(),
        warnings: run.warnings,
        summary: ModelSummary::Encoder {
            vocab_size: run.vocab_size,
            d_model: config.d_model,
            heads: config.heads,
            blocks: config.blocks,
            epochs: run.history.train_loss.len(),
            train_items: run.train_items,
            final_train_loss: run.history.final_train_loss(),
            final_val_loss: run.history.final_val_loss(),
            diverged_at: run.history.diverged_at,
            pretrain_epochs: pre.map(|h| h.train_loss.len()),
            pretrain_sentences: pre.map(|_| run.pretrain_sentences),
            initial_masked_loss: pre.and_then(|h| h.train_loss.first().copied()),
            final_masked_loss: pre.and_then(|h| h.final_train_loss()),
            carried_days: run.carried_days,
        },
        history: Some(run.history),
    }
}

/// Loads the inputs named in `config`, runs every enabled model on the same
/// split and assembles the report. Nothing is written to disk.
pub fn run_benchmark(config: &BenchConfig) -> Result<BenchmarkRun> {
    config.validate()?;
    let prices = load_prices(&config.prices)?;
    let returns = compute_returns(&prices, config.return_kind)?;
    let values = returns.values();
    let n_train = train_len(values.len(), config.train_fraction)?;
    let dates = returns.dates();
    let protocol = Protocol {
        n_prices: prices.len(),
        n_returns: values.len(),
        return_kind: config.return_kind,
        train_fraction: config.train_fraction,
        train_len: n_train,
        test_len: values.len() - n_train,
        train_start: dates[0],
        train_end: dates[n_train - 1],
        test_start: dates[n_train],
        test_end: dates[values.len() - 1],
        baseline_rmse: rmse(&vec![mean(&values[..n_train]); values.len() - n_train], &values[n_train..])?,
    };

    let news = config.news.as_deref().map(load_news).transpose()?;
    let corpus = match &config.corpus {
        Some(p) => load_corpus(p)?,
        None => Vec::new(),
    };
    let global_seed = config.seed.unwrap_or(0);

    let mut models = Vec::new();
    let mut notices = Vec::new();
    let mut histories = Vec::new();
    let mut predictions = BTreeMap::new();
    for kind in config.enabled() {
        if kind.needs_news() && news.is_none() {
            notices.push(format!("{kind}: skipped: no news"));
            continue;
        }
        if kind == ModelKind::AdaptedEncoder && corpus.is_empty() {
            notices.push(format!("{kind}: skipped: no corpus"));
            continue;
        }
        let seed = kind.seed(global_seed);
        let started = Instant::now();
        let outcome = match kind {
            ModelKind::Arima => run_arima(config, values, n_train),
            ModelKind::Garch => run_garch(values, n_train),
            ModelKind::Lstm => run_lstm(config, values, n_train, seed),
            ModelKind::Encoder | ModelKind::AdaptedEncoder => {
                let inputs = TextInputs {
                    calendar: prices.dates(),
                    returns: values,
                    train_len: n_train,
                    news: news.as_deref().unwrap_or_default(),
                    corpus: &corpus,
                };
                run_text_model(&inputs, &config.text, kind == ModelKind::AdaptedEncoder, seed)
                    .map(|r| text_outcome(r, &config.text))
            }
        }
        .map_err(|e| match e {
            Error::InvalidInput(m) => Error::InvalidInput(format!("{kind}: {m}")),
            Error::Optimizer(m) => Error::Optimizer(format!("{kind}: {m}")),
            other => other,
        })?;
        let wall = started.elapsed().as_secs_f64();
        let score = rmse(&outcome.predictions, &values[n_train..])?;
        if !score.is_finite() {
            return Err(Error::NonFinite(format!("{kind} test RMSE")));
        }
        if let Some(h) = outcome.history {
            histories.push((kind.name().to_string(), h));
        }
        predictions.insert(kind.name().to_string(), outcome.predictions);
        models.push(ModelEntry {
            name: kind.name().to_string(),
            rmse: score,
            scores: outcome.scores,
            wall_time_s: config.timing.then_some(wall),
            warnings: outcome.warnings,
            summary: outcome.summary,
        });
    }
    if models.is_empty() {
        return Err(Error::invalid("every enabled model was skipped"));
    }
    let report = BenchmarkReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: config.seed,
        config_hash: config.hash(),
        protocol,
        models,
        notices,
    };
    Ok(BenchmarkRun {
        report,
        returns,
        histories,
        predictions,
    })
}

/// [`run_benchmark`] followed by writing the report and plot files into
/// `config.out_dir`.
pub fn execute(config: &BenchConfig) -> Result<BenchmarkRun> {
    let run = run_benchmark(config)?;
    emit_report(&run.report, &config.out_dir)?;
    emit_plots(&run.returns, &run.histories, &config.out_dir)?;
    Ok(run)
}
