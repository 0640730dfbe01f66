//! Critique-driven prompt optimization with multi-metric suffix tuning.

pub mod ast;
pub mod critique;
pub mod engine;
pub mod gateway;
pub mod metaprompt;
pub mod metrics;
pub mod optimizer;
pub mod rng;
pub mod scalar;
pub mod selection;
pub mod store;
pub mod templates;

pub use scalar::Scalar;

pub type Prf = metrics::PrecisionRecallF<f64>;
pub type Matrix = metrics::ScoreMatrix<f64>;
