//! Experiment configuration: a JSON file whose every field has a default.

use std::path::{Path, PathBuf};

use bubblecast::experiment::Method;
use bubblecast::marma::{check_spec, MarmaSpec, Preset};
use bubblecast::mdn::MdnConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const OUTPUT_ENV: &str = "BUBBLECAST_OUTPUT_DIR";

/// The data-generating process: a preset at a tail index or an explicit spec.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Dgp {
    Preset { preset: String, alpha: f64 },
    Spec { spec: MarmaSpec },
}

impl Dgp {
    pub fn spec(&self) -> CliResult<MarmaSpec> {
        let cfg = |e: bubblecast::Error| CliError::Config(e.to_string());
        let spec = match self {
            Dgp::Preset { preset, alpha } => Preset::parse(preset).map_err(cfg)?.spec(*alpha).map_err(cfg)?,
            Dgp::Spec { spec } => spec.clone(),
        };
        let report = check_spec(&spec);
        if !report.valid() {
            return Err(CliError::Config(format!("invalid MARMA specification: {}", report.issues.join("; "))));
        }
        Ok(spec)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dgp: Dgp,
    pub n_train: usize,
    pub n_cal: usize,
    pub n_test: usize,
    pub burn_in: usize,
    pub horizons: Vec<usize>,
    pub grid_size: usize,
    pub methods: Vec<Method>,
    /// Tail detection rate for the sample weights; `null` trains unweighted.
    pub delta: Option<f64>,
    pub seeds: Vec<u64>,
    pub output_dir: Option<PathBuf>,
    pub mdn: MdnConfig,
    /// MCS significance level.
    pub mcs_alpha: f64,
    pub mcs_replicates: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dgp: Dgp::Preset { preset: "MAR01".into(), alpha: 1.4 },
            n_train: 5000,
            n_cal: 5000,
            n_test: 500,
            burn_in: bubblecast::marma::DEFAULT_BURN_IN,
            horizons: vec![1, 2, 5],
            grid_size: 5000,
            methods: vec![Method::Mdn, Method::MdnRecal, Method::Nw],
            delta: Some(bubblecast::tail::DEFAULT_DELTA),
            seeds: vec![0],
            output_dir: None,
            mdn: MdnConfig::default(),
            mcs_alpha: 0.10,
            mcs_replicates: 1000,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        self.dgp.spec()?;
        if self.n_train < 100 {
            return bad(format!("n_train must be at least 100, got {}", self.n_train));
        }
        if self.n_cal != 0 && self.n_cal < bubblecast::recal::MIN_CALIBRATION + 20 {
            return bad(format!("n_cal must be 0 or at least {}", bubblecast::recal::MIN_CALIBRATION + 20));
        }
        if self.n_test == 0 {
            return bad("n_test must be positive".into());
        }
        if self.burn_in < 500 {
            return bad("burn_in must be at least 500".into());
        }
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return bad("horizons must be nonempty and positive".into());
        }
        if self.grid_size < 2 {
            return bad("grid_size must be at least 2".into());
        }
        if self.methods.is_empty() {
            return bad("at least one method is required".into());
        }
        if let Some(d) = self.delta {
            if !(d > 0.0 && d < 0.5) {
                return bad(format!("delta must lie in (0, 0.5), got {d}"));
            }
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if !(self.mcs_alpha > 0.0 && self.mcs_alpha < 1.0) || self.mcs_replicates == 0 {
            return bad("mcs_alpha must lie in (0, 1) with positive replicates".into());
        }
        self.mdn.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }

    /// Output root: the config field, then the environment, then a default.
    pub fn output_root(&self) -> PathBuf {
        self.output_dir.clone().or_else(|| std::env::var_os(OUTPUT_ENV).map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("bubblecast-out"))
    }

    pub fn run_dir(&self, seed: u64) -> PathBuf {
        self.output_root().join(format!("seed_{seed}"))
    }

    /// SHA-256 of the canonical JSON form, output location excluded.
    pub fn hash(&self) -> String {
        digest(&Self { output_dir: None, ..self.clone() })
    }

    /// Hash of the fields that determine the simulated series.
    pub fn data_hash(&self) -> String {
        digest(&(&self.dgp, self.n_train, self.n_cal, self.n_test, self.burn_in))
    }

    /// Hash of the fields that determine the trained models.
    pub fn model_hash(&self) -> String {
        digest(&(self.data_hash(), self.delta, &self.mdn))
    }
}

fn digest<T: Serialize>(value: &T) -> String {
    let text = serde_json::to_string(value).expect("config serializes");
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn hashes_track_their_fields() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig { methods: vec![Method::Nw], output_dir: Some("x".into()), ..a.clone() };
        assert_eq!(a.data_hash(), b.data_hash());
        assert_eq!(a.model_hash(), b.model_hash());
        assert_eq!(a.hash(), ExperimentConfig { output_dir: Some("y".into()), ..a.clone() }.hash());
        assert_ne!(a.hash(), b.hash());
        let c = ExperimentConfig { n_test: 400, ..a.clone() };
        assert_ne!(a.data_hash(), c.data_hash());
        let mut d = a.clone();
        d.mdn.epochs = 3;
        assert_eq!(a.data_hash(), d.data_hash());
        assert_ne!(a.model_hash(), d.model_hash());
    }

    #[test]
    fn partial_files_fill_defaults() {
        let c: ExperimentConfig = serde_json::from_str(r#"{"dgp": {"preset": "GAS", "alpha": 1.779}, "horizons": [1, 3]}"#).unwrap();
        assert_eq!(c.horizons, vec![1, 3]);
        assert_eq!(c.n_train, 5000);
        assert!((c.dgp.spec().unwrap().psi[0] - 0.957).abs() < 1e-12);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn invalid_values() {
        let c = ExperimentConfig { horizons: vec![0], ..Default::default() };
        assert!(matches!(c.validate(), Err(CliError::Config(_))));
        let c = ExperimentConfig { dgp: Dgp::Preset { preset: "MAR02".into(), alpha: 1.4 }, ..Default::default() };
        assert!(matches!(c.validate(), Err(CliError::Config(_))));
        let c = ExperimentConfig { dgp: Dgp::Preset { preset: "XYZ".into(), alpha: 1.4 }, ..Default::default() };
        assert!(c.validate().is_err());
    }
}
