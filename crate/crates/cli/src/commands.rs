//! The pipeline steps. Each writes into the per-seed run directory and
//! records its outputs in the manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use bubblecast::baselines::{CauchyMar1Oracle, NwEstimator};
use bubblecast::eval::{self, model_confidence_set, moment_rmse, BootstrapConfig, McsResult, Region, RegionPartition, RegionScores, ScoreTable, TableMeta};
use bubblecast::experiment::{
    density_grid, divergence_at, point_forecast, test_pairs, Forecasters, Method, ObservationScores, PointForecast, FORECAST_QUANTILES, SCORE_NAMES,
};
use bubblecast::marma::{build_conditioning_grid, read_series_csv, simulate_marma, write_series_csv, MarmaSpec};
use bubblecast::mdn::{train, MdnModel, TrainingSet};
use bubblecast::recal::{compute_pit, default_tau_grid, fit_local_pit, RecalibrationModel};
use bubblecast::{rng, stats};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::manifest::Manifest;

pub const TRAIN_FILE: &str = "train.csv";
pub const CAL_FILE: &str = "cal.csv";
pub const TEST_FILE: &str = "test.csv";
pub const DENSITY_POINTS: usize = 1024;
pub const TIMING_FILE: &str = "eval/timing.json";

/// Outputs holding wall-clock times, the only ones that differ between
/// identical runs.
pub fn holds_timings(rel: &str) -> bool {
    rel == TIMING_FILE || (rel.starts_with("models/train_log_h") && rel.ends_with(".csv"))
}
const RECAL_SKIPPED: &str = "recalibration_skipped";

/// Where forecasts are conditioned.
#[derive(Clone, Debug)]
pub enum Conditioning {
    /// Equispaced grid over the training path's 1%–99% range.
    Grid,
    /// Every window of a supplied series.
    Series(std::path::PathBuf),
}

fn model_file(h: usize) -> String {
    format!("models/model_h{h}.json")
}

fn log_file(h: usize) -> String {
    format!("models/train_log_h{h}.csv")
}

fn recal_file(h: usize) -> String {
    format!("models/recal_h{h}.json")
}

fn summary_file(m: Method, h: usize) -> String {
    format!("forecasts/{}_h{h}_summary.csv", m.name())
}

fn density_file(m: Method, h: usize) -> String {
    format!("forecasts/{}_h{h}_density.csv", m.name())
}

fn series_file(m: Method) -> String {
    format!("forecasts/{}_series.csv", m.name())
}

fn ensure_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Seeds derived from a run seed; the labels go into the manifest.
pub fn derived_seeds(cfg: &ExperimentConfig, seed: u64) -> BTreeMap<String, u64> {
    let mut s = BTreeMap::new();
    s.insert("run".to_string(), seed);
    s.insert("simulate".to_string(), rng::child_seed(seed, 0));
    s.insert("mcs".to_string(), rng::child_seed(seed, 1));
    for h in &cfg.horizons {
        s.insert(format!("mdn_h{h}"), rng::child_seed(seed, 100 + *h as u64));
    }
    s
}

fn seed_of(manifest: &Manifest, key: &str) -> CliResult<u64> {
    manifest.seeds.get(key).copied().ok_or_else(|| CliError::Data(format!("manifest lacks seed {key}")))
}

/// Loads the manifest and checks that its series match this config.
fn open_run(cfg: &ExperimentConfig, dir: &Path) -> CliResult<Manifest> {
    let mut m = Manifest::load(dir)?;
    if m.data_hash != cfg.data_hash() {
        return Err(CliError::Config(format!("the series in {} were simulated under a different configuration; rerun `bubblecast simulate`", dir.display())));
    }
    m.config_hash = cfg.hash();
    m.config = cfg.clone();
    Ok(m)
}

fn read_verified(m: &Manifest, dir: &Path, rel: &str) -> CliResult<Vec<f64>> {
    Ok(read_series_csv(&m.verified(dir, rel)?)?)
}

pub fn cmd_simulate(cfg: &ExperimentConfig, seed: u64) -> CliResult<Manifest> {
    let dir = cfg.run_dir(seed);
    ensure_dir(&dir)?;
    let spec = cfg.dgp.spec()?;
    let mut m = Manifest::new(cfg);
    m.seeds = derived_seeds(cfg, seed);
    let n = cfg.n_train + cfg.n_cal + cfg.n_test;
    let path = simulate_marma(&spec, n, cfg.burn_in, seed_of(&m, "simulate")?)?;
    let v = &path.values;
    let (train, rest) = v.split_at(cfg.n_train);
    let (cal, test) = rest.split_at(cfg.n_cal);
    write_series_csv(&dir.join(TRAIN_FILE), train)?;
    m.record(&dir, TRAIN_FILE)?;
    if cfg.n_cal > 0 {
        write_series_csv(&dir.join(CAL_FILE), cal)?;
        m.record(&dir, CAL_FILE)?;
    }
    write_series_csv(&dir.join(TEST_FILE), test)?;
    m.record(&dir, TEST_FILE)?;
    m.save(&dir)?;
    Ok(m)
}

struct Trained {
    horizon: usize,
    model: MdnModel,
    log: bubblecast::mdn::TrainingLog,
    recal: Option<RecalibrationModel>,
}

pub fn cmd_train(cfg: &ExperimentConfig, seed: u64) -> CliResult<Manifest> {
    let dir = cfg.run_dir(seed);
    let mut m = open_run(cfg, &dir)?;
    let train_series = read_verified(&m, &dir, TRAIN_FILE)?;
    let cal_series = if m.has(CAL_FILE) && dir.join(CAL_FILE).exists() {
        Some(read_verified(&m, &dir, CAL_FILE)?)
    } else {
        m.warn(format!("calibration series {} missing; recalibration skipped", dir.join(CAL_FILE).display()));
        None
    };
    m.flag(RECAL_SKIPPED, cal_series.is_none());
    ensure_dir(&dir.join("models"))?;

    let jobs: Vec<(usize, u64)> = cfg.horizons.iter().map(|h| Ok((*h, seed_of(&m, &format!("mdn_h{h}"))?))).collect::<CliResult<_>>()?;
    let trained: Vec<Trained> = jobs
        .par_iter()
        .map(|(h, mdn_seed)| -> CliResult<Trained> {
            let mut mc = cfg.mdn.clone();
            mc.horizon = *h;
            mc.seed = *mdn_seed;
            let data = TrainingSet::from_series(&train_series, mc.input_dim, *h, cfg.delta)?;
            let cal = cal_series.as_deref().map(|c| TrainingSet::from_series(c, mc.input_dim, *h, None)).transpose()?;
            let (model, log) = train(&data, cal.as_ref(), &mc)?;
            let recal = match &cal {
                Some(c) => Some(fit_local_pit(&compute_pit(&model, c)?, &default_tau_grid())?),
                None => None,
            };
            Ok(Trained { horizon: *h, model, log, recal })
        })
        .collect::<CliResult<_>>()?;

    for t in trained {
        let h = t.horizon;
        t.model.save(&dir.join(model_file(h)))?;
        m.record(&dir, &model_file(h))?;
        t.log.write_csv(&dir.join(log_file(h)))?;
        m.record(&dir, &log_file(h))?;
        if let Some(r) = t.recal {
            r.save(dir.join(recal_file(h)))?;
            m.record(&dir, &recal_file(h))?;
        } else {
            m.files.remove(&recal_file(h));
        }
    }
    m.model_hash = Some(cfg.model_hash());
    m.save(&dir)?;
    Ok(m)
}

/// The Cauchy oracle when the process admits one.
pub fn oracle_for(spec: &MarmaSpec, horizon: usize) -> Option<CauchyMar1Oracle> {
    CauchyMar1Oracle::from_spec(spec, horizon).ok()
}

/// Loads or fits the forecasters of `methods` at one horizon. Missing
/// requested pieces are errors; `mdn_recal` without a recalibration model
/// is skipped with a warning.
fn load_forecasters(cfg: &ExperimentConfig, m: &mut Manifest, dir: &Path, h: usize, train_series: &[f64]) -> CliResult<(Forecasters, Vec<Method>)> {
    let spec = cfg.dgp.spec()?;
    let mut f = Forecasters::default();
    let mut methods = Vec::new();
    for &method in &cfg.methods {
        match method {
            Method::Mdn | Method::MdnRecal => {
                if f.mdn.is_none() {
                    let rel = model_file(h);
                    if !m.has(&rel) || !dir.join(&rel).exists() {
                        return Err(CliError::Data(format!("no trained model for horizon {h} in {}; run `bubblecast train` first", dir.display())));
                    }
                    if m.model_hash.as_deref() != Some(cfg.model_hash().as_str()) {
                        return Err(CliError::Config(format!(
                            "models in {} were trained under a different configuration; rerun `bubblecast train`",
                            dir.display()
                        )));
                    }
                    f.mdn = Some(MdnModel::load(&m.verified(dir, &rel)?)?);
                }
                if method == Method::MdnRecal {
                    let rel = recal_file(h);
                    if m.has(&rel) {
                        f.recal = Some(RecalibrationModel::load(m.verified(dir, &rel)?)?);
                    } else {
                        m.warn(format!("no recalibration model for horizon {h}; mdn_recal skipped"));
                        continue;
                    }
                }
            }
            Method::Nw => f.nw = Some(NwEstimator::from_series(train_series, h)?),
            Method::Oracle => {
                f.oracle = Some(oracle_for(&spec, h).ok_or_else(|| {
                    CliError::Config("unsupported configuration: the oracle exists only for a Cauchy MAR(0,1) process; drop `oracle` from methods".into())
                })?);
            }
        }
        methods.push(method);
    }
    Ok((f, methods))
}

/// Conditioning vector ending at each grid value: the value repeated.
fn grid_input(x: f64, input_dim: usize) -> Vec<f64> {
    vec![x; input_dim]
}

fn summary_header() -> String {
    let mut s = String::from("x");
    for p in FORECAST_QUANTILES {
        write!(s, ",q{p}").unwrap();
    }
    s.push_str(",m1,m2,m3,m4,n_modes,mass\n");
    s
}

fn summary_row(out: &mut String, f: &PointForecast) {
    write!(out, "{:?}", f.x).unwrap();
    for v in f.quantiles.iter().chain(&f.moments) {
        write!(out, ",{v:?}").unwrap();
    }
    writeln!(out, ",{},{:?}", f.n_modes, f.mass).unwrap();
}

/// Parses a summary CSV into `(x, [m1..m4])` rows.
fn read_moments(path: &Path) -> CliResult<Vec<(f64, [f64; 4])>> {
    let text = std::fs::read_to_string(path)?;
    let nq = FORECAST_QUANTILES.len();
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let bad = || CliError::Data(format!("{}:{}: malformed summary row", path.display(), i + 1));
        if cols.len() != nq + 7 {
            return Err(bad());
        }
        let num = |j: usize| cols[j].parse::<f64>().map_err(|_| bad());
        rows.push((num(0)?, [num(nq + 1)?, num(nq + 2)?, num(nq + 3)?, num(nq + 4)?]));
    }
    Ok(rows)
}

fn write_recorded(m: &mut Manifest, dir: &Path, rel: &str, text: &str) -> CliResult<()> {
    std::fs::write(dir.join(rel), text)?;
    m.record(dir, rel)
}

pub fn cmd_forecast(cfg: &ExperimentConfig, seed: u64, conditioning: &Conditioning) -> CliResult<Manifest> {
    let dir = cfg.run_dir(seed);
    let mut m = open_run(cfg, &dir)?;
    let train_series = read_verified(&m, &dir, TRAIN_FILE)?;
    ensure_dir(&dir.join("forecasts"))?;
    let center = stats::median(&train_series)?;
    let scale = stats::robust_scale(&train_series)?;
    let d = cfg.mdn.input_dim;

    match conditioning {
        Conditioning::Grid => {
            let grid = build_conditioning_grid(&train_series, cfg.grid_size)?;
            for &h in &cfg.horizons {
                let (f, methods) = load_forecasters(cfg, &mut m, &dir, h, &train_series)?;
                for method in methods {
                    let forecasts: Vec<PointForecast> = grid
                        .par_iter()
                        .map(|x| -> CliResult<PointForecast> {
                            let dens = f.density(method, &grid_input(*x, d))?;
                            Ok(point_forecast(dens.as_ref(), *x, density_grid(*x, center, scale, DENSITY_POINTS))?)
                        })
                        .collect::<CliResult<_>>()?;
                    let mut summary = summary_header();
                    let mut density = String::from("x,y,pdf\n");
                    for pf in &forecasts {
                        summary_row(&mut summary, pf);
                        for (y, p) in pf.y_grid.iter().zip(&pf.pdf) {
                            writeln!(density, "{:?},{y:?},{p:?}", pf.x).unwrap();
                        }
                        if (pf.mass - 1.0).abs() > 1e-3 {
                            m.warn(format!("{} h={h} x={}: density mass {}", method.name(), pf.x, pf.mass));
                        }
                    }
                    write_recorded(&mut m, &dir, &summary_file(method, h), &summary)?;
                    write_recorded(&mut m, &dir, &density_file(method, h), &density)?;
                }
            }
        }
        Conditioning::Series(path) => {
            let series = read_series_csv(path)?;
            if series.len() < d {
                return Err(CliError::Data(format!("{}: series shorter than input_dim {d}", path.display())));
            }
            let mut per_method: BTreeMap<Method, String> = BTreeMap::new();
            for &h in &cfg.horizons {
                let (f, methods) = load_forecasters(cfg, &mut m, &dir, h, &train_series)?;
                for method in methods {
                    let medians: Vec<f64> = (d - 1..series.len())
                        .into_par_iter()
                        .map(|t| -> CliResult<f64> { Ok(f.density(method, &series[t + 1 - d..=t])?.quantile(0.5)?) })
                        .collect::<CliResult<_>>()?;
                    let out = per_method.entry(method).or_insert_with(|| String::from("t,horizon,x,median\n"));
                    for (i, med) in medians.iter().enumerate() {
                        let t = i + d - 1;
                        writeln!(out, "{t},{h},{:?},{med:?}", series[t]).unwrap();
                    }
                }
            }
            for (method, text) in per_method {
                write_recorded(&mut m, &dir, &series_file(method), &text)?;
            }
        }
    }
    m.save(&dir)?;
    Ok(m)
}

/// MCS outcome for one metric and horizon.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct McsEntry {
    pub horizon: usize,
    pub metric: String,
    pub methods: Vec<String>,
    pub result: McsResult,
}

/// Whether larger values of a metric are better.
fn higher_is_better(metric: &str) -> bool {
    metric == "log_score"
}

/// Ranks methods within each region, metric and horizon; 1 is best.
pub fn rank_rows(table: &ScoreTable) -> Vec<(usize, &eval::ScoreRow)> {
    let mut out = Vec::with_capacity(table.rows.len());
    for row in &table.rows {
        let better = table
            .rows
            .iter()
            .filter(|o| o.region == row.region && o.metric == row.metric && o.horizon == row.horizon && o.method != row.method)
            .filter(|o| if higher_is_better(&row.metric) { o.value > row.value } else { o.value < row.value })
            .count();
        out.push((better + 1, row));
    }
    out
}

fn push_regions(table: &mut ScoreTable, method: &str, metric: &str, h: usize, s: &RegionScores) {
    for r in Region::ALL {
        if let Some(v) = s.get(r) {
            table.push(method, r.name(), metric, h, v);
        }
    }
}

pub fn cmd_evaluate(cfg: &ExperimentConfig, seed: u64) -> CliResult<Manifest> {
    let start = Instant::now();
    let dir = cfg.run_dir(seed);
    let mut m = open_run(cfg, &dir)?;
    let train_series = read_verified(&m, &dir, TRAIN_FILE)?;
    let test = read_verified(&m, &dir, TEST_FILE)?;
    let history = if m.has(CAL_FILE) && dir.join(CAL_FILE).exists() { read_verified(&m, &dir, CAL_FILE)? } else { train_series.clone() };
    let spec = cfg.dgp.spec()?;
    let partition = RegionPartition::from_series(&train_series)?;
    let grid = build_conditioning_grid(&train_series, cfg.grid_size)?;
    let d = cfg.mdn.input_dim;
    ensure_dir(&dir.join("eval"))?;

    let meta = TableMeta { seeds: vec![seed], n: cfg.n_test, runtime_s: 0.0, regions: Some(partition), truncation: Some(eval::DEFAULT_TRUNC) };
    let mut table = ScoreTable::new(meta);
    let mut mcs = Vec::new();

    for &h in &cfg.horizons {
        let (f, methods) = load_forecasters(cfg, &mut m, &dir, h, &train_series)?;
        let oracle = oracle_for(&spec, h);

        // Case 1: divergence from the oracle over the conditioning grid.
        match &oracle {
            Some(o) => {
                for &method in methods.iter().filter(|x| **x != Method::Oracle) {
                    let pairs: Vec<(f64, f64)> = grid
                        .par_iter()
                        .map(|x| -> CliResult<(f64, f64)> {
                            let dens = f.density(method, &grid_input(*x, d))?;
                            Ok(divergence_at(o, dens.as_ref(), *x)?)
                        })
                        .collect::<CliResult<_>>()?;
                    let (kl, is): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
                    push_regions(&mut table, method.name(), "kl", h, &RegionScores::mean_by_region(&grid, &kl, &partition)?);
                    push_regions(&mut table, method.name(), "ise", h, &RegionScores::mean_by_region(&grid, &is, &partition)?);
                }
            }
            None => m.flag(&format!("case1_skipped_h{h}"), true),
        }

        // Case 2: moment curves from the forecast summaries against the oracle's.
        let oracle_summary = summary_file(Method::Oracle, h);
        if oracle.is_some() && m.has(&oracle_summary) {
            let reference = read_moments(&m.verified(&dir, &oracle_summary)?)?;
            for &method in methods.iter().filter(|x| **x != Method::Oracle) {
                let rel = summary_file(method, h);
                if !m.has(&rel) {
                    m.flag(&format!("case2_skipped_{}_h{h}", method.name()), true);
                    continue;
                }
                let est = read_moments(&m.verified(&dir, &rel)?)?;
                if est.len() != reference.len() || est.iter().zip(&reference).any(|(a, b)| a.0 != b.0) {
                    return Err(CliError::Data(format!("{rel} and {oracle_summary} use different conditioning grids; rerun `bubblecast forecast`")));
                }
                let xs: Vec<f64> = est.iter().map(|r| r.0).collect();
                for k in 0..4 {
                    let a: Vec<f64> = est.iter().map(|r| r.1[k]).collect();
                    let b: Vec<f64> = reference.iter().map(|r| r.1[k]).collect();
                    push_regions(&mut table, method.name(), &format!("moment{}_rmse", k + 1), h, &moment_rmse(&a, &b, &xs, &partition)?);
                }
            }
        } else {
            m.flag(&format!("case2_skipped_h{h}"), true);
        }

        // Case 3: proper scores on the held-out realizations.
        let (inputs, targets) = test_pairs(&history, &test, d, h)?;
        let conds: Vec<f64> = inputs.iter().map(|x| x[d - 1]).collect();
        let mut losses: Vec<(Method, Vec<ObservationScores>, Vec<f64>)> = Vec::new();
        for &method in &methods {
            let rows: Vec<(ObservationScores, f64)> = inputs
                .par_iter()
                .zip(&targets)
                .map(|(x, y)| -> CliResult<(ObservationScores, f64)> {
                    let dens = f.density(method, x)?;
                    Ok((ObservationScores::compute(dens.as_ref(), *y)?, dens.quantile(0.5)?))
                })
                .collect::<CliResult<_>>()?;
            let (scores, medians): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
            for name in SCORE_NAMES {
                let v: Vec<f64> = scores.iter().map(|s| s.get(name)).collect();
                push_regions(&mut table, method.name(), name, h, &RegionScores::mean_by_region(&conds, &v, &partition)?);
            }
            losses.push((method, scores, medians));
        }

        // Median forecasts against the no-change benchmark.
        let no_change: Vec<f64> = conds.clone();
        for (method, _, medians) in &losses {
            table.push(method.name(), Region::Total.name(), "mspe_ratio", h, eval::mspe_ratio(medians, &no_change, &targets)?);
        }
        table.push("no_change", Region::Total.name(), "mspe_ratio", h, eval::mspe_ratio(&no_change, &no_change, &targets)?);

        if losses.len() >= 2 {
            let boot = BootstrapConfig { replicates: cfg.mcs_replicates, block_length: None, seed: rng::child_seed(seed_of(&m, "mcs")?, h as u64) };
            for name in SCORE_NAMES {
                let series: Vec<Vec<f64>> =
                    losses.iter().map(|(_, s, _)| s.iter().map(|o| if higher_is_better(name) { -o.get(name) } else { o.get(name) }).collect()).collect();
                let result = model_confidence_set(&series, cfg.mcs_alpha, &boot)?;
                mcs.push(McsEntry { horizon: h, metric: name.to_string(), methods: losses.iter().map(|l| l.0.name().to_string()).collect(), result });
            }
        }
    }

    table.write_csv(dir.join("eval/scores.csv"))?;
    m.record(&dir, "eval/scores.csv")?;
    table.write_json(dir.join("eval/scores.json"))?;
    m.record(&dir, "eval/scores.json")?;
    write_recorded(&mut m, &dir, "eval/mcs.json", &serde_json::to_string_pretty(&mcs)?)?;
    let mut summary = String::from("method,region,metric,horizon,value,rank\n");
    for (rank, r) in rank_rows(&table) {
        writeln!(summary, "{},{},{},{},{:?},{rank}", r.method, r.region, r.metric, r.horizon, r.value).unwrap();
    }
    write_recorded(&mut m, &dir, "eval/summary.csv", &summary)?;
    let timing = serde_json::json!({ "evaluate_s": start.elapsed().as_secs_f64() });
    write_recorded(&mut m, &dir, TIMING_FILE, &serde_json::to_string_pretty(&timing)?)?;
    m.save(&dir)?;
    Ok(m)
}

pub fn cmd_all(cfg: &ExperimentConfig, seed: u64) -> CliResult<Manifest> {
    cmd_simulate(cfg, seed)?;
    cmd_train(cfg, seed)?;
    cmd_forecast(cfg, seed, &Conditioning::Grid)?;
    cmd_evaluate(cfg, seed)
}
