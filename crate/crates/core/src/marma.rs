//! Mixed causal–noncausal MARMA(p, q, r, s) simulation
//!
//! ```text
//! ψ(F) φ(B) X_t = θ(F) H(B) ε_t
//! ```
//!
//! with `F` the forward and `B` the backward shift. Every polynomial is
//! stored by its coefficients `c` in the form `1 - c₁z - … - c_k z^k`, so a
//! factor written `(1 + 0.3B)` is the coefficient list `[-0.3]`.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::stable::StableParams;
use crate::stats;

const ROOT_MARGIN: f64 = 1e-8;
const COMMON_ROOT_TOL: f64 = 1e-6;

/// Coefficients of the four lag polynomials plus the innovation law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarmaSpec {
    /// Forward (noncausal) AR coefficients ψ.
    #[serde(default)]
    pub psi: Vec<f64>,
    /// Backward (causal) AR coefficients φ.
    #[serde(default)]
    pub phi: Vec<f64>,
    /// Forward MA coefficients θ.
    #[serde(default)]
    pub theta: Vec<f64>,
    /// Backward MA coefficients H.
    #[serde(default)]
    pub eta: Vec<f64>,
    pub noise: StableParams,
}

/// Roots of one lag polynomial.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PolynomialReport {
    pub name: String,
    pub coefficients: Vec<f64>,
    /// Roots as `(re, im)` pairs.
    pub roots: Vec<(f64, f64)>,
    pub moduli: Vec<f64>,
    pub outside_unit_circle: bool,
}

/// Outcome of [`check_spec`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpecReport {
    pub polynomials: Vec<PolynomialReport>,
    /// Every root of every polynomial lies strictly outside the unit circle.
    pub stationary: bool,
    /// No AR/MA common factor on either side.
    pub identified: bool,
    pub noise_valid: bool,
    pub issues: Vec<String>,
}

impl SpecReport {
    /// Whether the specification can be simulated.
    pub fn valid(&self) -> bool {
        self.stationary && self.noise_valid
    }
}

/// A simulated path with the inputs that produced it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimulatedPath {
    pub values: Vec<f64>,
    pub spec: MarmaSpec,
    pub seed: u64,
    pub burn_in: usize,
}

/// Roots of `1 - c₁z - … - c_k z^k` as `(re, im)`.
pub fn polynomial_roots(coefficients: &[f64]) -> Vec<(f64, f64)> {
    let k = coefficients.iter().rposition(|c| *c != 0.0).map_or(0, |i| i + 1);
    if k == 0 {
        return Vec::new();
    }
    // Companion matrix of the reciprocal polynomial w^k - c₁w^{k-1} - … - c_k;
    // its eigenvalues are the reciprocals of the roots.
    let mut m = DMatrix::<f64>::zeros(k, k);
    for j in 0..k {
        m[(0, j)] = coefficients[j];
    }
    for i in 1..k {
        m[(i, i - 1)] = 1.0;
    }
    m.complex_eigenvalues()
        .iter()
        .map(|w| {
            let z = w.inv();
            (z.re, z.im)
        })
        .collect()
}

fn report(name: &str, coefficients: &[f64]) -> PolynomialReport {
    let roots = polynomial_roots(coefficients);
    let moduli: Vec<f64> = roots.iter().map(|(re, im)| re.hypot(*im)).collect();
    let outside = moduli.iter().all(|m| *m > 1.0 + ROOT_MARGIN);
    PolynomialReport { name: name.to_string(), coefficients: coefficients.to_vec(), roots, moduli, outside_unit_circle: outside }
}

fn shares_root(a: &PolynomialReport, b: &PolynomialReport) -> bool {
    a.roots.iter().any(|(ar, ai)| b.roots.iter().any(|(br, bi)| (ar - br).hypot(ai - bi) < COMMON_ROOT_TOL))
}

/// Root moduli, stationarity and identification of a specification.
pub fn check_spec(spec: &MarmaSpec) -> SpecReport {
    let polys = vec![report("psi", &spec.psi), report("phi", &spec.phi), report("theta", &spec.theta), report("eta", &spec.eta)];
    let mut issues = Vec::new();
    for p in &polys {
        if !p.outside_unit_circle {
            let min = p.moduli.iter().cloned().fold(f64::INFINITY, f64::min);
            issues.push(format!("{} polynomial has a root of modulus {min:.6} on or inside the unit circle", p.name));
        }
    }
    let mut identified = true;
    for (a, b) in [(0, 2), (1, 3)] {
        if shares_root(&polys[a], &polys[b]) {
            identified = false;
            issues.push(format!("{} and {} polynomials share a root", polys[a].name, polys[b].name));
        }
    }
    let noise_valid = match spec.noise.validate() {
        Ok(()) => true,
        Err(e) => {
            issues.push(e.to_string());
            false
        }
    };
    let stationary = polys.iter().all(|p| p.outside_unit_circle);
    SpecReport { polynomials: polys, stationary, identified, noise_valid, issues }
}

/// Simulates `n` values after discarding `burn_in` values at both ends.
///
/// Three passes: `η = H(B)ε` forward, `ψ(F)Z = θ(F)η` as a causal ARMA
/// recursion run backwards in time, then `φ(B)X = Z` forward.
pub fn simulate_marma(spec: &MarmaSpec, n: usize, burn_in: usize, seed: u64) -> Result<SimulatedPath> {
    let report = check_spec(spec);
    if !report.valid() {
        return Err(Error::Specification(report.issues.join("; ")));
    }
    if n == 0 {
        return Err(Error::input("path length must be at least 1"));
    }
    if burn_in < 500 {
        return Err(Error::input(format!("burn_in must be at least 500, got {burn_in}")));
    }
    let s = spec.eta.len();
    let total =
        burn_in.checked_mul(2).and_then(|b| b.checked_add(n)).filter(|t| t.checked_add(s).is_some()).ok_or_else(|| Error::input("path length overflows"))?;

    let mut rng = rng::from_seed(seed);
    let eps: Vec<f64> = (0..total + s).map(|_| spec.noise.draw(&mut rng)).collect();

    let eta: Vec<f64> = (0..total)
        .map(|t| {
            let t = t + s;
            eps[t] - spec.eta.iter().enumerate().map(|(j, c)| c * eps[t - j - 1]).sum::<f64>()
        })
        .collect();

    let mut z = vec![0.0; total];
    for t in (0..total).rev() {
        let mut v = eta[t];
        for (j, c) in spec.theta.iter().enumerate() {
            if let Some(e) = eta.get(t + j + 1) {
                v -= c * e;
            }
        }
        for (i, c) in spec.psi.iter().enumerate() {
            if let Some(zf) = z.get(t + i + 1) {
                v += c * zf;
            }
        }
        z[t] = v;
    }

    let mut x = vec![0.0; total];
    for t in 0..total {
        let mut v = z[t];
        for (i, c) in spec.phi.iter().enumerate() {
            if t > i {
                v += c * x[t - i - 1];
            }
        }
        x[t] = v;
    }

    let values = x[burn_in..burn_in + n].to_vec();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::numeric(Some(i), "non-finite simulated value"));
    }
    Ok(SimulatedPath { values, spec: spec.clone(), seed, burn_in })
}

/// Default burn-in per side.
pub const DEFAULT_BURN_IN: usize = 2000;

/// Type-7 empirical quantiles at each level of `probs`.
pub fn empirical_quantiles(path: &[f64], probs: &[f64]) -> Result<Vec<f64>> {
    if let Some(p) = probs.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
        return Err(Error::input(format!("quantile level must lie in (0, 1), got {p}")));
    }
    let sorted = stats::sorted(path)?;
    Ok(probs.iter().map(|p| stats::quantile_sorted(&sorted, *p)).collect())
}

/// `n_grid` equispaced conditioning values spanning `[q₀.₀₁, q₀.₉₉]`.
pub fn build_conditioning_grid(path: &[f64], n_grid: usize) -> Result<Vec<f64>> {
    if n_grid < 2 {
        return Err(Error::input(format!("grid needs at least 2 points, got {n_grid}")));
    }
    let q = empirical_quantiles(path, &[0.01, 0.99])?;
    if !(q[1] > q[0]) {
        return Err(Error::input("degenerate series: q(0.01) equals q(0.99)"));
    }
    Ok(crate::density::linspace(q[0], q[1], n_grid))
}

/// Built-in data-generating processes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Preset {
    #[serde(rename = "MAR01")]
    Mar01,
    #[serde(rename = "MAR02")]
    Mar02,
    #[serde(rename = "MAR11")]
    Mar11,
    #[serde(rename = "MARMA1111")]
    Marma1111,
    /// Noncausal AR(1) with the fitted natural-gas parameters.
    #[serde(rename = "GAS")]
    Gas,
}

/// Tail indices of the Monte Carlo grid; 1.6 is optional.
pub const ALPHA_GRID: [f64; 4] = [1.0, 1.2, 1.4, 1.8];
pub const OPTIONAL_ALPHA: f64 = 1.6;

impl Preset {
    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_uppercase().replace(['(', ')', ',', '_', '-'], "").as_str() {
            "MAR01" => Ok(Preset::Mar01),
            "MAR02" => Ok(Preset::Mar02),
            "MAR11" => Ok(Preset::Mar11),
            "MARMA1111" => Ok(Preset::Marma1111),
            "GAS" => Ok(Preset::Gas),
            _ => Err(Error::input(format!("unknown preset {name}"))),
        }
    }

    /// The specification with innovations `S(alpha, 0, 0.5, 0)`. The gas
    /// preset ignores `alpha` and uses its own fitted law.
    pub fn spec(self, alpha: f64) -> Result<MarmaSpec> {
        let noise = StableParams::new(alpha, 0.0, 0.5, 0.0);
        let spec =
            |psi: Vec<f64>, phi: Vec<f64>, theta: Vec<f64>, eta: Vec<f64>| -> Result<MarmaSpec> { Ok(MarmaSpec { psi, phi, theta, eta, noise: noise? }) };
        match self {
            Preset::Mar01 => spec(vec![0.9], vec![], vec![], vec![]),
            Preset::Mar02 => spec(vec![0.9, 0.7], vec![], vec![], vec![]),
            Preset::Mar11 => spec(vec![0.9], vec![0.1], vec![], vec![]),
            Preset::Marma1111 => spec(vec![0.9], vec![-0.3], vec![0.4], vec![-0.3]),
            Preset::Gas => Ok(MarmaSpec { psi: vec![0.957], phi: vec![], theta: vec![], eta: vec![], noise: StableParams::new(1.779, 0.415, 0.070, 0.0)? }),
        }
    }
}

/// Writes one value per line, no header.
pub fn write_series_csv(path: &Path, values: &[f64]) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    for v in values {
        writeln!(w, "{v:?}")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a headerless single-column series.
pub fn read_series_csv(path: &Path) -> Result<Vec<f64>> {
    let r = BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let v: f64 = t.parse().map_err(|_| Error::input(format!("{}: line {} is not a number: {t:?}", path.display(), i + 1)))?;
        if !v.is_finite() {
            return Err(Error::input(format!("{}: line {} is not finite", path.display(), i + 1)));
        }
        out.push(v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mar01(alpha: f64) -> MarmaSpec {
        Preset::Mar01.spec(alpha).unwrap()
    }

    #[test]
    fn root_checks() {
        let r = check_spec(&mar01(1.4));
        assert!(r.valid() && r.identified);
        assert!((r.polynomials[0].moduli[0] - 1.0 / 0.9).abs() < 1e-12);

        let mut bad = mar01(1.4);
        bad.psi = vec![1.2];
        assert!(!check_spec(&bad).valid());

        // 1 - 0.9z - 0.7z² has roots (-0.9 ± 1.9) / 1.4.
        let r = check_spec(&Preset::Mar02.spec(1.4).unwrap());
        let mut m = r.polynomials[0].moduli.clone();
        m.sort_by(f64::total_cmp);
        assert!((m[0] - 1.0 / 1.4).abs() < 1e-12 && (m[1] - 2.0).abs() < 1e-12);
        assert!(!r.stationary);

        let r = check_spec(&Preset::Marma1111.spec(1.4).unwrap());
        assert!(r.valid());
        assert!(!r.identified);
    }

    #[test]
    fn complex_roots() {
        // 1 - z + 0.5z² has roots 1 ± i.
        let roots = polynomial_roots(&[1.0, -0.5]);
        assert_eq!(roots.len(), 2);
        for (re, im) in roots {
            assert!((re - 1.0).abs() < 1e-12 && (im.abs() - 1.0).abs() < 1e-12);
        }
        assert!(polynomial_roots(&[0.0, 0.0]).is_empty());
    }

    #[test]
    fn identity_filter() {
        let spec = MarmaSpec { psi: vec![], phi: vec![], theta: vec![], eta: vec![], noise: StableParams::new(1.4, 0.0, 0.5, 0.0).unwrap() };
        let path = simulate_marma(&spec, 100, 500, 4).unwrap();
        let mut rng = rng::from_seed(4);
        let eps: Vec<f64> = (0..1100).map(|_| spec.noise.draw(&mut rng)).collect();
        assert_eq!(path.values, eps[500..600].to_vec());
    }

    #[test]
    fn noncausal_ar1_matches_direct_sum() {
        let spec = mar01(1.5);
        let path = simulate_marma(&spec, 50, 600, 8).unwrap();
        let mut rng = rng::from_seed(8);
        let eps: Vec<f64> = (0..1250).map(|_| spec.noise.draw(&mut rng)).collect();
        // X_t = Σ_j 0.9^j ε_{t+j}, truncated where the tail is negligible.
        for t in 0..50 {
            let direct: f64 = (0..500).map(|j| 0.9_f64.powi(j as i32) * eps[600 + t + j]).sum();
            assert!((path.values[t] - direct).abs() < 1e-9 * (1.0 + direct.abs()));
        }
    }

    #[test]
    fn marma_filter_satisfies_equation() {
        let spec = Preset::Marma1111.spec(1.8).unwrap();
        let path = simulate_marma(&spec, 300, 600, 2).unwrap();
        let mut rng = rng::from_seed(2);
        let eps: Vec<f64> = (0..1501).map(|_| spec.noise.draw(&mut rng)).collect();
        let x = &path.values;
        // (1 - 0.9F)(1 + 0.3B) X_t = (1 - 0.4F)(1 + 0.3B) ε_t
        for t in 1..298 {
            let lhs = x[t] + 0.3 * x[t - 1] - 0.9 * (x[t + 1] + 0.3 * x[t]);
            let e = |k: usize| eps[600 + 1 + k];
            let rhs = e(t) + 0.3 * e(t - 1) - 0.4 * (e(t + 1) + 0.3 * e(t));
            assert!((lhs - rhs).abs() < 1e-9 * (1.0 + rhs.abs()), "t={t}");
        }
    }

    #[test]
    fn ar1_acf_and_reversal() {
        let mut fwd = 0.0;
        let mut rev = 0.0;
        for seed in 0..20 {
            let v = simulate_marma(&mar01(1.4), 5000, DEFAULT_BURN_IN, seed).unwrap().values;
            fwd += stats::acf(&v, 1);
            let r: Vec<f64> = v.iter().rev().cloned().collect();
            rev += stats::acf(&r, 1);
        }
        let (fwd, rev) = (fwd / 20.0, rev / 20.0);
        assert!((0.85..=0.95).contains(&fwd), "{fwd}");
        assert!((rev - fwd).abs() < 1e-12);
    }

    #[test]
    fn preconditions() {
        assert!(simulate_marma(&mar01(1.4), 10, 499, 1).is_err());
        assert!(matches!(simulate_marma(&Preset::Mar02.spec(1.4).unwrap(), 10, 500, 1), Err(Error::Specification(_))));
        assert!(simulate_marma(&mar01(1.4), usize::MAX - 10, 500, 1).is_err());
        assert!(empirical_quantiles(&[], &[0.5]).is_err());
        assert!(empirical_quantiles(&[1.0], &[1.0]).is_err());
        assert!(build_conditioning_grid(&[2.0; 50], 10).is_err());
    }

    #[test]
    fn quantiles_and_grid() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(empirical_quantiles(&v, &[0.5]).unwrap(), vec![50.5]);
        let path = simulate_marma(&mar01(1.4), 5000, 500, 3).unwrap().values;
        let q = empirical_quantiles(&path, &[0.01, 0.1, 0.9, 0.99]).unwrap();
        assert!(q.windows(2).all(|w| w[1] >= w[0]));
        let g = build_conditioning_grid(&path, 5000).unwrap();
        assert_eq!(g.len(), 5000);
        assert_eq!(g[0], q[0]);
        assert_eq!(g[4999], q[3]);
        let step = g[1] - g[0];
        assert!(g.windows(2).all(|w| ((w[1] - w[0]) - step).abs() <= 1e-12 * step.abs().max(g[0].abs())));
        assert_eq!(build_conditioning_grid(&path, 2).unwrap(), vec![q[0], q[3]]);
    }

    #[test]
    fn csv_round_trip() {
        let dir = std::env::temp_dir().join(format!("bubblecast-marma-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let f = dir.join("s.csv");
        let v = vec![1.5, -2.25e-300, 3.0e12, 0.1];
        write_series_csv(&f, &v).unwrap();
        assert_eq!(read_series_csv(&f).unwrap(), v);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn spec_json_round_trip() {
        let s = Preset::Marma1111.spec(1.2).unwrap();
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<MarmaSpec>(&j).unwrap(), s);
        assert_eq!(Preset::parse("MAR(0,1)").unwrap(), Preset::Mar01);
    }
}
