//! Benchmark conditional densities: a kernel smoother and the closed-form
//! Cauchy MAR(0,1) predictive law.

mod cauchy;
mod nw;

pub use cauchy::{cauchy_predictive, oracle_moment, CauchyMar1Oracle, CauchyPredictive};
pub use nw::{nw_density, silverman_bandwidth, NwDensity, NwEstimator, FALLBACK_NEIGHBOURS};
