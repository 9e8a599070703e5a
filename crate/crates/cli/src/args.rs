use std::path::PathBuf;

use bubblecast::experiment::Method;
use clap::{Args, Parser, Subcommand};

use crate::commands::{self, Conditioning};
use crate::config::{Dgp, ExperimentConfig};
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "bubblecast", version, about = "Tail-aware density forecasts for noncausal time series")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON experiment config; flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Run a single seed instead of the config's list.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker thread cap.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output root; defaults to $BUBBLECAST_OUTPUT_DIR.
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// Preset process: MAR01, MAR02, MAR11, MARMA1111 or GAS.
    #[arg(long, global = true)]
    pub preset: Option<String>,
    /// Stable tail index for the preset.
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Comma-separated forecast horizons.
    #[arg(long, global = true, value_delimiter = ',')]
    pub horizons: Option<Vec<usize>>,
    /// Comma-separated subset of mdn, mdn_recal, nw, oracle.
    #[arg(long, global = true, value_delimiter = ',', value_parser = parse_method)]
    pub methods: Option<Vec<Method>>,
    /// Number of equispaced conditioning values.
    #[arg(long, global = true)]
    pub grid_size: Option<usize>,
    #[arg(long, global = true)]
    pub n_train: Option<usize>,
    #[arg(long, global = true)]
    pub n_cal: Option<usize>,
    #[arg(long, global = true)]
    pub n_test: Option<usize>,
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    /// Tail detection rate; 0 trains unweighted.
    #[arg(long, global = true)]
    pub delta: Option<f64>,
}

fn parse_method(s: &str) -> Result<Method, String> {
    Method::parse(s).map_err(|e| e.to_string())
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate train, calibration and test series.
    Simulate,
    /// Fit one network per horizon and its recalibration map.
    Train,
    /// Predictive summaries over the conditioning grid or a series.
    Forecast {
        /// Forecast every window of this headerless CSV series instead.
        #[arg(long)]
        series: Option<PathBuf>,
    },
    /// Score tables, MCS results and MSPE ratios.
    Evaluate,
    /// Every step in order.
    All,
    /// Print the effective config as JSON.
    ShowConfig,
}

impl Common {
    pub fn resolve(&self) -> CliResult<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if self.preset.is_some() || self.alpha.is_some() {
            let (preset, alpha) = match &cfg.dgp {
                Dgp::Preset { preset, alpha } => (preset.clone(), *alpha),
                Dgp::Spec { spec } => ("MAR01".to_string(), spec.noise.alpha),
            };
            cfg.dgp = Dgp::Preset { preset: self.preset.clone().unwrap_or(preset), alpha: self.alpha.unwrap_or(alpha) };
        }
        if let Some(s) = self.seed {
            cfg.seeds = vec![s];
        }
        if let Some(p) = &self.output_dir {
            cfg.output_dir = Some(p.clone());
        }
        if let Some(h) = &self.horizons {
            cfg.horizons = h.clone();
        }
        if let Some(m) = &self.methods {
            cfg.methods = m.clone();
        }
        if let Some(n) = self.grid_size {
            cfg.grid_size = n;
        }
        if let Some(n) = self.n_train {
            cfg.n_train = n;
        }
        if let Some(n) = self.n_cal {
            cfg.n_cal = n;
        }
        if let Some(n) = self.n_test {
            cfg.n_test = n;
        }
        if let Some(e) = self.epochs {
            cfg.mdn.epochs = e;
        }
        if let Some(d) = self.delta {
            cfg.delta = if d == 0.0 { None } else { Some(d) };
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Runs a parsed command line.
pub fn run(cli: &Cli) -> CliResult<()> {
    let cfg = cli.common.resolve()?;
    if let Command::ShowConfig = cli.command {
        println!("{}", serde_json::to_string_pretty(&cfg)?);
        return Ok(());
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.common.threads {
        if t == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(t);
    }
    let pool = pool.build().map_err(|e| CliError::Config(e.to_string()))?;
    pool.install(|| {
        for &seed in &cfg.seeds {
            let m = match &cli.command {
                Command::Simulate => commands::cmd_simulate(&cfg, seed)?,
                Command::Train => commands::cmd_train(&cfg, seed)?,
                Command::Forecast { series } => {
                    let cond = series.clone().map(Conditioning::Series).unwrap_or(Conditioning::Grid);
                    commands::cmd_forecast(&cfg, seed, &cond)?
                }
                Command::Evaluate => commands::cmd_evaluate(&cfg, seed)?,
                Command::All => commands::cmd_all(&cfg, seed)?,
                Command::ShowConfig => unreachable!(),
            };
            eprintln!("seed {seed}: {} files in {}", m.files.len(), cfg.run_dir(seed).display());
        }
        Ok(())
    })
}
