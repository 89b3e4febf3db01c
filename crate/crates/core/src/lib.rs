//! Generative classification by per-class density estimation.
//!
//! Each class gets its own likelihood model, either a Gaussian mixture fit by
//! expectation-maximization or a masked autoregressive flow, and prediction
//! picks the class maximizing likelihood × prior.

pub mod classifier;
pub mod data;
pub mod error;
pub mod flow;
pub mod gmm;
pub mod harness;
pub mod numkit;
pub mod plot;
pub mod report;

pub use error::{Error, Result};
