//! Scoring rules, region bookkeeping and forecast comparison.

mod mcs;
mod regions;
mod scores;
mod table;

pub use mcs::{model_confidence_set, BootstrapConfig, McsResult};
pub use regions::{moment_rmse, Region, RegionPartition, RegionScores};
pub use scores::{
    cde_loss, cde_term, crps, ise, ise_with, kl_and_ise, kl_divergence, kl_divergence_with, log_score, mspe, mspe_ratio, quantile_score, Interval,
    DEFAULT_PANELS, DEFAULT_TRUNC, LOG_FLOOR,
};
pub use table::{ScoreRow, ScoreTable, TableMeta};
