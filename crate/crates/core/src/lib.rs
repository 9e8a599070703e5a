pub mod baselines;
pub mod density;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod marma;
pub mod mdn;
pub mod mixture;
pub mod quadrature;
pub mod recal;
pub mod rng;
pub mod skewt;
pub mod special;
pub mod stable;
pub mod stats;
pub mod tail;

pub use error::{Error, Result};
