//! Time-series forecasting with multi-offset token embedding, RBF-KAN
//! layers and multi-offset attention interaction, on a small tape-based
//! autodiff core.

pub mod autograd;
pub mod checkpoint;
pub mod data;
pub mod error;
pub mod metrics;
pub mod model;
pub mod mote;
pub mod nn;
pub mod param;
pub mod revin;
pub mod tensor;
pub mod train;

pub use autograd::{Graph, Var};
pub use error::{Error, Result};
pub use model::{Forecaster, LinearForecaster, ModelConfig, TimeTk, Variant};
pub use param::{ParamId, ParamStore, Parameter};
pub use tensor::Tensor;
