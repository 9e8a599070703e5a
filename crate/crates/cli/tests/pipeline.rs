use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bubblecast::eval::ScoreTable;
use bubblecast_cli::commands::{holds_timings, McsEntry};
use bubblecast_cli::manifest::Manifest;
use serde_json::json;

fn write_config(dir: &Path, alpha: f64, n_cal: usize, methods: &[&str]) -> PathBuf {
    let cfg = json!({
        "dgp": {"preset": "MAR01", "alpha": alpha},
        "n_train": 400,
        "n_cal": n_cal,
        "n_test": 30,
        "burn_in": 500,
        "horizons": [1],
        "grid_size": 8,
        "methods": methods,
        "seeds": [11],
        "mcs_replicates": 50,
        "mdn": {"hidden": [8], "n_mixtures": 3, "epochs": 2, "batch_size": 64}
    });
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

fn run(config: &Path, out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bubblecast")).args(args).arg("--config").arg(config).env("BUBBLECAST_OUTPUT_DIR", out).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn lines(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().count()
}

fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().display().to_string(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn simulate_writes_three_series_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), 1.4, 520, &["mdn", "nw"]);
    let out = tmp.path().join("out");
    let o = run(&cfg, &out, &["simulate"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let run_dir = out.join("seed_11");
    assert_eq!(lines(&run_dir.join("train.csv")), 400);
    assert_eq!(lines(&run_dir.join("cal.csv")), 520);
    assert_eq!(lines(&run_dir.join("test.csv")), 30);
    let m = Manifest::load(&run_dir).unwrap();
    assert_eq!(m.files.len(), 3);
    assert_eq!(m.seeds["run"], 11);
}

#[test]
fn seed_flag_and_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), 1.4, 0, &["mdn"]);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let o = run(&cfg, out, &["simulate", "--seed", "5"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let (ta, tb) = (tree(&a.join("seed_5")), tree(&b.join("seed_5")));
    for name in ["train.csv", "test.csv"] {
        assert_eq!(ta[name], tb[name]);
    }
    let o = run(&cfg, &a, &["simulate", "--seed", "6"]);
    assert!(o.status.success());
    assert_ne!(tree(&a.join("seed_6"))["train.csv"], ta["train.csv"]);
}

#[test]
fn checksum_mismatch_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), 1.4, 0, &["mdn"]);
    let out = tmp.path().join("out");
    assert!(run(&cfg, &out, &["simulate"]).status.success());
    let train = out.join("seed_11/train.csv");
    let mut text = std::fs::read_to_string(&train).unwrap();
    text.push_str("1.0\n");
    std::fs::write(&train, text).unwrap();
    let o = run(&cfg, &out, &["train"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("checksum mismatch"), "{}", stderr(&o));
}

#[test]
fn missing_calibration_skips_recalibration() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), 1.4, 520, &["mdn", "mdn_recal"]);
    let out = tmp.path().join("out");
    assert!(run(&cfg, &out, &["simulate"]).status.success());
    std::fs::remove_file(out.join("seed_11/cal.csv")).unwrap();
    let o = run(&cfg, &out, &["train"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("recalibration skipped"));
    let m = Manifest::load(&out.join("seed_11")).unwrap();
    assert!(m.flags["recalibration_skipped"]);
    assert!(m.files.contains_key("models/model_h1.json"));
    assert!(!m.files.contains_key("models/recal_h1.json"));
}

#[test]
fn forecast_before_train_names_the_train_command() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), 1.4, 0, &["mdn"]);
    let out = tmp.path().join("out");
    assert!(run(&cfg, &out, &["simulate"]).status.success());
    let o = run(&cfg, &out, &["forecast"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("bubblecast train"), "{}", stderr(&o));
}

#[test]
fn oracle_needs_a_cauchy_process() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), 1.4, 0, &["nw", "oracle"]);
    let out = tmp.path().join("out");
    assert!(run(&cfg, &out, &["simulate"]).status.success());
    let o = run(&cfg, &out, &["forecast"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unsupported configuration"), "{}", stderr(&o));
}

#[test]
fn bad_configs_exit_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), 1.4, 0, &["mdn"]);
    let out = tmp.path().join("out");
    assert_eq!(run(&cfg, &out, &["simulate", "--horizons", "0"]).status.code(), Some(2));
    assert_eq!(run(&cfg, &out, &["simulate", "--preset", "MAR02"]).status.code(), Some(2));
    assert_eq!(run(&cfg, &out, &["simulate", "--alpha", "2.5"]).status.code(), Some(2));
    std::fs::write(tmp.path().join("bad.json"), "{\"n_train\": \"many\"}").unwrap();
    assert_eq!(run(&tmp.path().join("bad.json"), &out, &["simulate"]).status.code(), Some(2));
}

#[test]
fn full_pipeline_is_reproducible_and_complete() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), 1.0, 0, &["mdn", "nw", "oracle"]);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let o = run(&cfg, out, &["all", "--threads", "2"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let (ta, tb) = (tree(&a.join("seed_11")), tree(&b.join("seed_11")));
    assert_eq!(ta.keys().collect::<Vec<_>>(), tb.keys().collect::<Vec<_>>());
    for (name, bytes) in &ta {
        if !holds_timings(name) && name != "manifest.json" {
            assert!(bytes == &tb[name], "{name} differs between runs");
        }
    }
    let (ma, mb) = (Manifest::load(&a.join("seed_11")).unwrap(), Manifest::load(&b.join("seed_11")).unwrap());
    assert_eq!(ma.config_hash, mb.config_hash);
    for (rel, digest) in &ma.files {
        if !holds_timings(rel) {
            assert_eq!(digest, &mb.files[rel]);
        }
    }

    let dir = a.join("seed_11");
    let m = Manifest::load(&dir).unwrap();
    for rel in m.files.keys() {
        assert!(m.verified(&dir, rel).is_ok(), "{rel}");
    }
    for method in ["mdn", "nw", "oracle"] {
        assert_eq!(lines(&dir.join(format!("forecasts/{method}_h1_summary.csv"))), 9);
        assert_eq!(lines(&dir.join(format!("forecasts/{method}_h1_density.csv"))), 1 + 8 * 1024);
    }
    let oracle_mass: Vec<f64> = std::fs::read_to_string(dir.join("forecasts/oracle_h1_summary.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert!(oracle_mass.iter().all(|v| (v - 1.0).abs() < 1e-3), "{oracle_mass:?}");

    let table = ScoreTable::from_csv(&std::fs::read_to_string(dir.join("eval/scores.csv")).unwrap()).unwrap();
    assert_eq!(table.get("no_change", "total", "mspe_ratio", 1), Some(1.0));
    for method in ["mdn", "nw"] {
        assert!(table.get(method, "total", "kl", 1).unwrap() >= 0.0);
        assert!(table.get(method, "total", "moment1_rmse", 1).is_some());
    }
    for metric in ["crps", "log_score", "cde_loss", "qs10", "mspe_ratio"] {
        assert!(table.get("oracle", "total", metric, 1).unwrap().is_finite(), "{metric}");
    }
    let mcs: Vec<McsEntry> = serde_json::from_str(&std::fs::read_to_string(dir.join("eval/mcs.json")).unwrap()).unwrap();
    assert_eq!(mcs.len(), 4);
    for e in &mcs {
        assert!(!e.result.survivors.is_empty());
        assert!(e.result.p_values.iter().all(|p| (0.0..=1.0).contains(p)));
    }
    let summary = std::fs::read_to_string(dir.join("eval/summary.csv")).unwrap();
    assert!(summary.starts_with("method,region,metric,horizon,value,rank\n"));
}

#[test]
fn series_forecasts_give_medians_per_horizon() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = json!({
        "dgp": {"preset": "GAS", "alpha": 1.779},
        "n_train": 400, "n_cal": 0, "n_test": 30, "burn_in": 500,
        "horizons": [1, 3, 6, 9, 12],
        "methods": ["mdn", "nw"],
        "seeds": [2],
        "mdn": {"hidden": [8], "n_mixtures": 3, "epochs": 2, "batch_size": 64}
    });
    let cfg_path = tmp.path().join("gas.json");
    std::fs::write(&cfg_path, cfg.to_string()).unwrap();
    let out = tmp.path().join("out");
    assert!(run(&cfg_path, &out, &["simulate"]).status.success());
    assert!(run(&cfg_path, &out, &["train"]).status.success());
    let series = tmp.path().join("prices.csv");
    std::fs::write(&series, "0.1\n0.3\n-0.2\n0.5\n0.4\n").unwrap();
    let o = run(&cfg_path, &out, &["forecast", "--series", series.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    for method in ["mdn", "nw"] {
        let text = std::fs::read_to_string(out.join(format!("seed_2/forecasts/{method}_series.csv"))).unwrap();
        let rows: Vec<&str> = text.lines().skip(1).collect();
        assert_eq!(rows.len(), 5 * 5);
        for r in rows {
            let median: f64 = r.split(',').nth(3).unwrap().parse().unwrap();
            assert!(median.is_finite());
        }
    }
}
