//! Visual sentiment prediction: CNN feature taps, low-level image
//! descriptors, logistic regression and AUC evaluation.

pub mod container;
pub mod data;
pub mod error;
pub mod eval;
pub mod features;
pub mod io;
pub mod model;
pub mod net;
pub mod tensor;

pub use error::{Error, Result};
