//! Convolutional networks for saliency-map regression, built from scratch:
//! layers with exact gradients, SGD with Nesterov momentum, the shallow and
//! deep architectures with parameter and memory accounting, the data
//! pipeline, and the usual saliency scores.

pub mod data;
pub mod error;
pub mod gradcheck;
pub mod imageops;
pub mod layers;
pub mod metrics;
pub mod models;
pub mod optim;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{Real, Tensor};
