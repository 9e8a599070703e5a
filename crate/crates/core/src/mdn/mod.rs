//! Five-head skewed-t mixture density network.
//!
//! A ReLU MLP maps the robust-scaled conditioning vector to the logits,
//! locations, scales, shapes and degrees of freedom of a K-component
//! skewed-t mixture. Training minimizes the weighted negative
//! log-likelihood with hand-written reverse-mode gradients and Adam.

mod component;
mod config;
mod model;
mod persist;
mod train;

pub use component::{component_ln_pdf_grad, ComponentGrad};
pub use config::{MdnConfig, TrainingSet};
pub use model::{gradient, predict_density, weighted_nll, MdnModel};
pub use persist::MODEL_FORMAT_VERSION;
pub use train::{train, EpochRecord, TrainingLog};
