//! Event-driven source traffic prediction for machine-type communications.
//!
//! The crate covers the whole pipeline behind fast-uplink-grant scheduling
//! experiments:
//!
//! * [`traffic`] generates binary transmission traces from a causal device
//!   specification;
//! * [`dataset`] cuts records into sliding windows with next-step labels;
//! * [`lstm`] is a from-scratch stacked LSTM with BPTT, MSE/log-cosh losses
//!   and Adam/RMSprop;
//! * [`tuner`] runs Gaussian-process Bayesian optimization over the
//!   hyper-parameter space;
//! * [`di`] is the directed-information causal baseline;
//! * [`eval`] computes confusion counts, sensitivity, FDR, accuracy and MCC;
//! * [`grant`] replays a record slot by slot against a predictor and counts
//!   used and wasted grants and residual random-access requests;
//! * [`experiment`] wires everything into the `mtcpred` command-line tool.
//!
//! See the runnable programs under `examples/` for one walk-through per
//! capability.

pub mod dataset;
pub mod di;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod grant;
pub mod lstm;
pub mod seed;
pub mod traffic;
pub mod tuner;

pub use error::{Error, Result};
