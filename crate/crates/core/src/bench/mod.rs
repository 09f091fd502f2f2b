//! The benchmark harness: loads prices and news, runs every enabled model
//! under one chronological split and writes the report and plot files.

mod config;
mod load;
mod plots;
mod report;
mod run;
pub mod selfcheck;

pub use config::{ArimaBenchConfig, BenchConfig, ModelKind};
pub use load::{load_corpus, load_news, load_prices, parse_date};
pub use plots::{emit_plots, loss_csv, loss_svg, returns_csv, returns_svg};
pub use report::{emit_report, summary_csv, BenchmarkReport, ModelEntry, ModelSummary, Protocol};
pub use run::{execute, run_benchmark, run_text_model, BenchmarkRun, TextInputs, TextModelRun};
