use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use serde_json::json;

use ftsbench::bench::{execute, selfcheck, BenchConfig, ModelKind};
use ftsbench::synth::{gen_text_fixture, write_fixture};
use ftsbench::Error;

#[derive(Parser)]
#[command(name = "ftsbench", version, about = "Return-forecasting benchmark: ARIMA, GARCH, LSTM and news-text encoders")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the benchmark and write the report and plot files.
    Run {
        /// JSON config; flags below override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        prices: Option<PathBuf>,
        #[arg(long)]
        news: Option<PathBuf>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated model names, e.g. arima,garch,lstm.
        #[arg(long, value_delimiter = ',')]
        models: Option<Vec<ModelKind>>,
        /// Leave wall times out so every output file is reproducible.
        #[arg(long)]
        no_timing: bool,
    },
    /// Write a synthetic price/news/corpus fixture.
    GenFixture {
        #[arg(long, default_value_t = 500)]
        days: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the gradient and invariant self-checks.
    Check {
        /// Print results as JSON.
        #[arg(long)]
        json: bool,
    },
}

fn fail(kind: &str, message: &str) -> ExitCode {
    eprintln!("{}", json!({ "error": { "kind": kind, "message": message } }));
    ExitCode::FAILURE
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Run {
            config,
            prices,
            news,
            corpus,
            out,
            seed,
            models,
            no_timing,
        } => {
            let mut cfg = match config {
                Some(p) => BenchConfig::from_file(&p)?,
                None => BenchConfig::default(),
            };
            if let Some(p) = prices {
                cfg.prices = p;
            }
            if news.is_some() {
                cfg.news = news;
            }
            if corpus.is_some() {
                cfg.corpus = corpus;
            }
            if let Some(o) = out {
                cfg.out_dir = o;
            }
            if seed.is_some() {
                cfg.seed = seed;
            }
            if let Some(m) = models {
                cfg.models = m;
            }
            if no_timing {
                cfg.timing = false;
            }
            cfg.validate()?;
            let run = execute(&cfg)?;
            for notice in &run.report.notices {
                eprintln!("note: {notice}");
            }
            for m in &run.report.models {
                println!("{:<16} rmse {:.6}", m.name, m.rmse);
                for w in &m.warnings {
                    eprintln!("warning: {}: {w}", m.name);
                }
            }
            println!("baseline         rmse {:.6}", run.report.protocol.baseline_rmse);
            println!("wrote {}", cfg.out_dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::GenFixture { days, seed, out } => {
            let fixture = gen_text_fixture(days, seed)?;
            let files = write_fixture(&fixture, &out)?;
            for p in [&files.prices, &files.news, &files.corpus, &files.manifest] {
                println!("{}", p.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Check { json } => {
            let results = selfcheck::run_checks();
            if json {
                println!("{}", serde_json::to_string_pretty(&results)?);
            } else {
                for r in &results {
                    let status = if r.passed { "PASS" } else { "FAIL" };
                    println!("{status} {:<28} {:.3e} (< {:.0e})", r.name, r.value, r.threshold);
                }
            }
            Ok(if results.iter().all(|r| r.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            let msg = e.to_string();
            return fail("usage", msg.trim());
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => fail(e.kind(), &e.to_string()),
    }
}
