//! Forecasting benchmark for daily index returns: ARIMA, GARCH(1,1), a
//! stacked LSTM and two news-text encoders scored by walk-forward RMSE.

pub mod arima;
pub mod bench;
pub mod error;
pub mod garch;
pub mod lstm;
pub mod numerics;
pub mod series;
pub mod synth;
pub mod text;
pub mod training;

pub use error::{Error, Result};
