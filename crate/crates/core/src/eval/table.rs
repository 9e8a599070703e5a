//! Long-format score tables.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::regions::RegionPartition;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub method: String,
    pub region: String,
    pub metric: String,
    pub horizon: usize,
    pub value: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TableMeta {
    pub seeds: Vec<u64>,
    pub n: usize,
    pub runtime_s: f64,
    pub regions: Option<RegionPartition>,
    /// Probability levels bounding CRPS and CDE integrals.
    pub truncation: Option<(f64, f64)>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub rows: Vec<ScoreRow>,
    pub meta: TableMeta,
}

impl ScoreTable {
    pub fn new(meta: TableMeta) -> Self {
        Self { rows: Vec::new(), meta }
    }

    pub fn push(&mut self, method: &str, region: &str, metric: &str, horizon: usize, value: f64) {
        self.rows.push(ScoreRow { method: method.into(), region: region.into(), metric: metric.into(), horizon, value });
    }

    pub fn get(&self, method: &str, region: &str, metric: &str, horizon: usize) -> Option<f64> {
        self.rows.iter().find(|r| r.method == method && r.region == region && r.metric == metric && r.horizon == horizon).map(|r| r.value)
    }

    /// Fails on the first requested cell that has no row.
    pub fn check_complete(&self, methods: &[&str], regions: &[&str], metrics: &[&str], horizons: &[usize]) -> Result<()> {
        for m in methods {
            for r in regions {
                for k in metrics {
                    for h in horizons {
                        if self.get(m, r, k, *h).is_none() {
                            return Err(Error::input(format!("missing score for {m}/{r}/{k}/h={h}")));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("method,region,metric,horizon,value\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{},{},{}\n", r.method, r.region, r.metric, r.horizon, r.value));
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("method,region,metric,horizon,value") {
            return Err(Error::input("unexpected score table header"));
        }
        let mut table = Self::default();
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split(',').collect();
            let bad = || Error::input(format!("malformed score row {}", i + 2));
            if f.len() != 5 {
                return Err(bad());
            }
            let horizon = f[3].parse().map_err(|_| bad())?;
            let value = f[4].parse().map_err(|_| bad())?;
            table.push(f[0], f[1], f[2], horizon, value);
        }
        Ok(table)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}
