//! Divergences and proper scoring rules evaluated by quadrature.

use crate::density::PredictiveDensity;
use crate::error::{Error, Result};
use crate::quadrature::{self, gl8, Hint};

/// `[lo, hi]` in data units; either end may be infinite.
pub type Interval = (f64, f64);

/// Floor applied to densities inside logarithms.
pub const DENSITY_FLOOR: f64 = 1e-300;
pub const LOG_FLOOR: f64 = -690.775_527_898_213_7;
/// Uniform panels merged into each finite interval (8 nodes per panel).
pub const DEFAULT_PANELS: usize = 256;
/// Probability levels bounding the CRPS and CDE integrals.
pub const DEFAULT_TRUNC: (f64, f64) = (0.001, 0.999);
const CDF_RESYNC: usize = 16;

fn breaks_for(hints: &[Hint], (lo, hi): Interval, panels: usize) -> Vec<f64> {
    if lo.is_finite() && hi.is_finite() {
        quadrature::partition_with_uniform(hints, lo, hi, panels)
    } else {
        quadrature::refine(&quadrature::partition(hints, lo, hi), (panels / DEFAULT_PANELS).max(1))
    }
}

/// Gauss–Legendre sum of a fallible integrand over `breaks`.
fn try_integrate<F: FnMut(f64) -> Result<f64>>(mut f: F, breaks: &[f64]) -> Result<f64> {
    let (x, w) = gl8();
    let mut total = 0.0;
    for ab in breaks.windows(2) {
        let (a, b) = (ab[0], ab[1]);
        if !(b > a) {
            continue;
        }
        let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
        let mut s = 0.0;
        for k in 0..8 {
            s += w[k] * f(m + r * x[k])?;
        }
        total += r * s;
    }
    Ok(total)
}

fn checked(v: f64, who: &str, y: f64) -> Result<f64> {
    if v < 0.0 || v.is_nan() {
        return Err(Error::DensityContract(format!("{who} density is {v} at {y}")));
    }
    Ok(v)
}

fn pair_integral<P, Q, F>(p: &P, q: &Q, domain: &[Interval], panels: usize, f: F) -> Result<f64>
where
    P: PredictiveDensity + ?Sized,
    Q: PredictiveDensity + ?Sized,
    F: Fn(f64, f64) -> f64,
{
    Ok(pair_integrals(p, q, domain, panels, |a, b| [f(a, b), 0.0])?[0])
}

fn pair_integrals<P, Q, F>(p: &P, q: &Q, domain: &[Interval], panels: usize, f: F) -> Result<[f64; 2]>
where
    P: PredictiveDensity + ?Sized,
    Q: PredictiveDensity + ?Sized,
    F: Fn(f64, f64) -> [f64; 2],
{
    let mut hints = p.hints();
    hints.extend(q.hints());
    let (x, w) = gl8();
    let mut total = [0.0; 2];
    for iv in domain {
        if !(iv.1 > iv.0) {
            return Err(Error::input(format!("empty interval [{}, {}]", iv.0, iv.1)));
        }
        for ab in breaks_for(&hints, *iv, panels).windows(2) {
            let (a, b) = (ab[0], ab[1]);
            if !(b > a) {
                continue;
            }
            let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
            for k in 0..8 {
                let y = m + r * x[k];
                let v = f(checked(p.pdf(y), "reference", y)?, checked(q.pdf(y), "candidate", y)?);
                total[0] += r * w[k] * v[0];
                total[1] += r * w[k] * v[1];
            }
        }
    }
    Ok(total)
}

fn kl_term(a: f64, b: f64) -> f64 {
    if a > 0.0 {
        a * (a.ln() - b.max(DENSITY_FLOOR).ln())
    } else {
        0.0
    }
}

/// KL divergence and integrated squared error from one pass of density
/// evaluations.
pub fn kl_and_ise<P, Q>(p: &P, q: &Q, domain: &[Interval]) -> Result<(f64, f64)>
where
    P: PredictiveDensity + ?Sized,
    Q: PredictiveDensity + ?Sized,
{
    let [kl, is] = pair_integrals(p, q, domain, DEFAULT_PANELS, |a, b| [kl_term(a, b), (a - b) * (a - b)])?;
    Ok((kl, is))
}

/// `∫ p log(p / q)` over `domain`, `q` floored at 1e-300.
pub fn kl_divergence<P, Q>(p: &P, q: &Q, domain: &[Interval]) -> Result<f64>
where
    P: PredictiveDensity + ?Sized,
    Q: PredictiveDensity + ?Sized,
{
    kl_divergence_with(p, q, domain, DEFAULT_PANELS)
}

pub fn kl_divergence_with<P, Q>(p: &P, q: &Q, domain: &[Interval], panels: usize) -> Result<f64>
where
    P: PredictiveDensity + ?Sized,
    Q: PredictiveDensity + ?Sized,
{
    pair_integral(p, q, domain, panels, kl_term)
}

/// `∫ (p - q)²` over `domain`.
pub fn ise<P, Q>(p: &P, q: &Q, domain: &[Interval]) -> Result<f64>
where
    P: PredictiveDensity + ?Sized,
    Q: PredictiveDensity + ?Sized,
{
    ise_with(p, q, domain, DEFAULT_PANELS)
}

pub fn ise_with<P, Q>(p: &P, q: &Q, domain: &[Interval], panels: usize) -> Result<f64>
where
    P: PredictiveDensity + ?Sized,
    Q: PredictiveDensity + ?Sized,
{
    pair_integral(p, q, domain, panels, |a, b| (a - b) * (a - b))
}

fn truncation<D: PredictiveDensity + ?Sized>(d: &D, trunc: (f64, f64)) -> Result<(f64, f64)> {
    if !(trunc.0 > 0.0 && trunc.0 < trunc.1 && trunc.1 < 1.0) {
        return Err(Error::input(format!("truncation levels must satisfy 0 < lo < hi < 1, got {trunc:?}")));
    }
    Ok((d.quantile(trunc.0)?, d.quantile(trunc.1)?))
}

/// `∫ (F(z) - 1{z ≥ y})² dz` over `[q(lo), q(hi)]` widened to contain `y`.
pub fn crps<D: PredictiveDensity + ?Sized>(density: &D, y: f64, trunc: (f64, f64)) -> Result<f64> {
    if !y.is_finite() {
        return Err(Error::input("realized value must be finite"));
    }
    let (a, b) = truncation(density, trunc)?;
    let (lo, hi) = (a.min(y), b.max(y));
    let mut hints = density.hints();
    hints.push(Hint::new(y, ((b - a) / 64.0).max(f64::MIN_POSITIVE)));
    let mut breaks = breaks_for(&hints, (lo, hi), DEFAULT_PANELS);
    if y > lo && y < hi {
        breaks.push(y);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
    }
    let (x, w) = gl8();
    let cum = quadrature::gl8_cumulative();
    let mut last = 0.0;
    let mut total = 0.0;
    let mut f0 = 0.0;
    for (i, ab) in breaks.windows(2).enumerate() {
        let (a, b) = (ab[0], ab[1]);
        if !(b > a) {
            continue;
        }
        // F is read off the distribution function every few panels and
        // carried across nodes by the panel's interpolated density.
        if i % CDF_RESYNC == 0 {
            f0 = density.cdf(a);
            if !(0.0..=1.0).contains(&f0) {
                return Err(Error::DensityContract(format!("distribution function is {f0} at {a}")));
            }
            if f0 < last - 1e-9 {
                return Err(Error::DensityContract(format!("distribution function decreases near {a}")));
            }
            last = f0;
        }
        let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
        let mut p = [0.0; 8];
        for k in 0..8 {
            let z = m + r * x[k];
            p[k] = checked(density.pdf(z), "predictive", z)?;
        }
        let mut s = 0.0;
        for k in 0..8 {
            let f = f0 + r * (0..8).map(|j| cum[k][j] * p[j]).sum::<f64>();
            let ind = if m + r * x[k] >= y { 1.0 } else { 0.0 };
            s += w[k] * (f - ind) * (f - ind);
        }
        f0 += r * (0..8).map(|j| w[j] * p[j]).sum::<f64>();
        total += r * s;
    }
    Ok(total)
}

/// `log p(y)` floored at `log 1e-300`.
pub fn log_score<D: PredictiveDensity + ?Sized>(density: &D, y: f64) -> Result<f64> {
    if !y.is_finite() {
        return Err(Error::input("realized value must be finite"));
    }
    let p = checked(density.pdf(y), "predictive", y)?;
    Ok(p.max(DENSITY_FLOOR).ln())
}

/// One observation's CDE-loss term `∫ p² - 2 p(y)` over the truncated support.
pub fn cde_term<D: PredictiveDensity + ?Sized>(density: &D, y: f64, trunc: (f64, f64)) -> Result<f64> {
    if !y.is_finite() {
        return Err(Error::input("realized value must be finite"));
    }
    let (a, b) = truncation(density, trunc)?;
    let breaks = breaks_for(&density.hints(), (a, b), DEFAULT_PANELS);
    let sq = try_integrate(
        |z| {
            let p = checked(density.pdf(z), "predictive", z)?;
            Ok(p * p)
        },
        &breaks,
    )?;
    Ok(sq - 2.0 * checked(density.pdf(y), "predictive", y)?)
}

/// Mean CDE loss over aligned densities and outcomes.
pub fn cde_loss<D: PredictiveDensity>(densities: &[D], ys: &[f64], trunc: (f64, f64)) -> Result<f64> {
    if densities.len() != ys.len() || ys.is_empty() {
        return Err(Error::input("densities and outcomes must be aligned and nonempty"));
    }
    let mut s = 0.0;
    for (i, (d, y)) in densities.iter().zip(ys).enumerate() {
        s += cde_term(d, *y, trunc).map_err(|e| match e {
            Error::DensityContract(m) => Error::DensityContract(format!("observation {i}: {m}")),
            other => Error::numeric(Some(i), other.to_string()),
        })?;
    }
    Ok(s / ys.len() as f64)
}

/// Pinball loss `ρ_τ(y - q_τ)`.
pub fn quantile_score<D: PredictiveDensity + ?Sized>(density: &D, y: f64, tau: f64) -> Result<f64> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::input(format!("quantile level must lie in (0, 1), got {tau}")));
    }
    let u = y - density.quantile(tau)?;
    Ok(u * (tau - if u < 0.0 { 1.0 } else { 0.0 }))
}

/// Mean squared prediction error.
pub fn mspe(forecasts: &[f64], actuals: &[f64]) -> Result<f64> {
    if forecasts.len() != actuals.len() || forecasts.is_empty() {
        return Err(Error::input("forecasts and outcomes must be aligned and nonempty"));
    }
    Ok(forecasts.iter().zip(actuals).map(|(f, a)| (f - a) * (f - a)).sum::<f64>() / forecasts.len() as f64)
}

/// `MSPE(model) / MSPE(benchmark)`.
pub fn mspe_ratio(model: &[f64], benchmark: &[f64], actuals: &[f64]) -> Result<f64> {
    let b = mspe(benchmark, actuals)?;
    if !(b > 0.0) {
        return Err(Error::input("benchmark has zero prediction error"));
    }
    Ok(mspe(model, actuals)? / b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::open_unit;
    use crate::rng;
    use crate::skewt::{SkewT, SkewedTParams};
    use std::f64::consts::PI;

    #[derive(Clone)]
    struct Cauchy(f64, f64);

    impl PredictiveDensity for Cauchy {
        fn pdf(&self, y: f64) -> f64 {
            let d = (y - self.0) / self.1;
            1.0 / (PI * self.1 * (1.0 + d * d))
        }
        fn cdf(&self, y: f64) -> f64 {
            0.5 + ((y - self.0) / self.1).atan() / PI
        }
        fn quantile(&self, p: f64) -> Result<f64> {
            Ok(self.0 + self.1 * (PI * (p - 0.5)).tan())
        }
        fn hints(&self) -> Vec<Hint> {
            vec![Hint::new(self.0, self.1)]
        }
    }

    struct Uniform;

    impl PredictiveDensity for Uniform {
        fn pdf(&self, y: f64) -> f64 {
            if (0.0..=1.0).contains(&y) {
                1.0
            } else {
                0.0
            }
        }
        fn cdf(&self, y: f64) -> f64 {
            y.clamp(0.0, 1.0)
        }
        fn quantile(&self, p: f64) -> Result<f64> {
            Ok(p)
        }
        fn hints(&self) -> Vec<Hint> {
            vec![Hint::new(0.0, 0.1), Hint::new(1.0, 0.1)]
        }
    }

    struct Broken;

    impl PredictiveDensity for Broken {
        fn pdf(&self, y: f64) -> f64 {
            if y > 0.0 {
                -1.0
            } else {
                1.0
            }
        }
        fn cdf(&self, y: f64) -> f64 {
            if y > 0.5 {
                0.2
            } else {
                0.6
            }
        }
        fn quantile(&self, p: f64) -> Result<f64> {
            Ok(p)
        }
        fn hints(&self) -> Vec<Hint> {
            vec![Hint::new(0.0, 1.0)]
        }
    }

    fn point_mass(m: f64) -> SkewT {
        SkewT::new(SkewedTParams::new(m, 1e-4, 0.0, 50.0).unwrap()).unwrap()
    }

    /// Midpoint sum on an equispaced grid.
    fn brute(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
        let h = (hi - lo) / n as f64;
        (0..n).map(|i| f(lo + (i as f64 + 0.5) * h)).sum::<f64>() * h
    }

    #[test]
    fn kl_of_itself_vanishes() {
        let p = SkewT::new(SkewedTParams::new(1.0, 2.0, -1.5, 3.0).unwrap()).unwrap();
        let whole = [(f64::NEG_INFINITY, f64::INFINITY)];
        assert!(kl_divergence(&p, &p, &whole).unwrap().abs() < 1e-8);
        assert!(kl_divergence(&p, &p, &[(-5.0, 2.0), (3.0, 9.0)]).unwrap().abs() < 1e-8);
        assert_eq!(ise(&p, &p, &whole).unwrap(), 0.0);
    }

    #[test]
    fn kl_matches_fine_grid() {
        let (p, q) = (Cauchy(0.0, 1.0), Cauchy(0.0, 2.0));
        let (lo, hi) = (p.quantile(0.01).unwrap(), p.quantile(0.99).unwrap());
        let got = kl_divergence(&p, &q, &[(lo, hi)]).unwrap();
        let want = brute(|y| p.pdf(y) * (p.pdf(y) / q.pdf(y)).ln(), lo, hi, 1_000_000);
        assert!((got - want).abs() < 1e-4, "{got} vs {want}");
        let whole = kl_divergence(&p, &q, &[(f64::NEG_INFINITY, f64::INFINITY)]).unwrap();
        // Closed form for Cauchy pairs with equal location: ln((s1+s2)²/(4 s1 s2)).
        assert!((whole - (9.0_f64 / 8.0).ln()).abs() < 1e-6, "{whole}");
        let iv = ise(&p, &q, &[(lo, hi)]).unwrap();
        let want = brute(|y| (p.pdf(y) - q.pdf(y)).powi(2), lo, hi, 1_000_000);
        assert!((iv - want).abs() < 1e-4);
    }

    #[test]
    fn resolution_doubling_is_stable() {
        let p = SkewT::new(SkewedTParams::new(0.0, 1.0, 2.0, 1.5).unwrap()).unwrap();
        let q = Cauchy(0.5, 1.5);
        let d = [(-20.0, 20.0), (f64::NEG_INFINITY, f64::INFINITY)];
        for iv in d {
            let a = kl_divergence_with(&p, &q, &[iv], 256).unwrap();
            let b = kl_divergence_with(&p, &q, &[iv], 512).unwrap();
            assert!((a - b).abs() < 1e-3 * a.abs());
        }
    }

    #[test]
    fn disjoint_masses() {
        let (p, q) = (point_mass(0.0), point_mass(10.0));
        let whole = [(f64::NEG_INFINITY, f64::INFINITY)];
        let self_sq = |d: &SkewT| quadrature::integrate(|y| d.pdf(y).powi(2), &d.hints(), f64::NEG_INFINITY, f64::INFINITY);
        let v = ise(&p, &q, &whole).unwrap();
        assert!((v / (self_sq(&p) + self_sq(&q)) - 1.0).abs() < 1e-6);
        assert!(kl_divergence(&p, &q, &whole).unwrap() > 0.0);
    }

    #[test]
    fn joint_pass_matches_separate() {
        let (p, q) = (Cauchy(0.0, 1.0), Cauchy(1.5, 0.7));
        let whole = [(f64::NEG_INFINITY, f64::INFINITY)];
        let (kl, is) = kl_and_ise(&p, &q, &whole).unwrap();
        assert_eq!(kl, kl_divergence(&p, &q, &whole).unwrap());
        assert_eq!(is, ise(&p, &q, &whole).unwrap());
    }

    #[test]
    fn contract_violations() {
        let whole = [(f64::NEG_INFINITY, f64::INFINITY)];
        assert!(matches!(kl_divergence(&Broken, &Cauchy(0.0, 1.0), &whole), Err(Error::DensityContract(_))));
        assert!(matches!(crps(&Broken, 0.3, (0.1, 0.9)), Err(Error::DensityContract(_))));
        assert!(kl_divergence(&Cauchy(0.0, 1.0), &Cauchy(0.0, 1.0), &[(1.0, 1.0)]).is_err());
    }

    #[test]
    fn degenerate_crps_is_absolute_error() {
        let d = point_mass(2.0);
        for y in [-3.0, 1.0, 2.5, 10.0] {
            assert!((crps(&d, y, DEFAULT_TRUNC).unwrap() - (y - 2.0_f64).abs()).abs() < 1e-3);
        }
    }

    #[test]
    fn uniform_crps() {
        assert!((crps(&Uniform, 0.5, DEFAULT_TRUNC).unwrap() - 1.0 / 12.0).abs() < 1e-4);
    }

    #[test]
    fn crps_mirror_symmetry() {
        let d = SkewT::new(SkewedTParams::new(0.3, 1.0, 1.2, 2.5).unwrap()).unwrap();
        let m = SkewT::new(SkewedTParams::new(-0.3, 1.0, -1.2, 2.5).unwrap()).unwrap();
        for y in [-2.0, 0.1, 4.0] {
            let (a, b) = (crps(&d, y, DEFAULT_TRUNC).unwrap(), crps(&m, -y, DEFAULT_TRUNC).unwrap());
            assert!((a - b).abs() < 1e-8 * a.max(1.0), "{a} {b}");
        }
    }

    #[test]
    fn log_score_values() {
        assert!((log_score(&Cauchy(0.0, 1.0), 0.0).unwrap() - (1.0 / PI).ln()).abs() < 1e-15);
        assert_eq!(log_score(&point_mass(0.0), 1e6).unwrap(), DENSITY_FLOOR.ln());
        assert!((LOG_FLOOR - 1e-300_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn cde_properties() {
        let ds: Vec<SkewT> = [0.0, 1.0, -2.0].iter().map(|m| SkewT::new(SkewedTParams::new(*m, 1.0, 0.5, 4.0).unwrap()).unwrap()).collect();
        let ys = [0.3, 0.1, -1.0];
        let base = cde_loss(&ds, &ys, DEFAULT_TRUNC).unwrap();
        let c = 17.0;
        let shifted: Vec<SkewT> = [0.0, 1.0, -2.0].iter().map(|m| SkewT::new(SkewedTParams::new(m + c, 1.0, 0.5, 4.0).unwrap()).unwrap()).collect();
        let ys2: Vec<f64> = ys.iter().map(|y| y + c).collect();
        assert!((cde_loss(&shifted, &ys2, DEFAULT_TRUNC).unwrap() - base).abs() < 1e-9);
        assert!(cde_term(&point_mass(1.0), 1.0, DEFAULT_TRUNC).unwrap() < -1000.0);
        assert!(cde_loss(&ds, &ys[..2], DEFAULT_TRUNC).is_err());
    }

    #[test]
    fn pinball_arithmetic() {
        let d = Cauchy(0.0, 1.0);
        let q = d.quantile(0.1).unwrap();
        assert_eq!(quantile_score(&d, q, 0.1).unwrap(), 0.0);
        assert!((quantile_score(&d, q + 1.0, 0.1).unwrap() - 0.1).abs() < 1e-12);
        assert!((quantile_score(&d, q - 1.0, 0.1).unwrap() - 0.9).abs() < 1e-12);
        assert!(quantile_score(&d, 0.0, 1.0).is_err());
    }

    #[test]
    fn true_quantile_minimizes_pinball() {
        let truth = Cauchy(0.0, 1.0);
        let shifted = Cauchy(2.0, 1.0);
        let mut r = rng::from_seed(9);
        let ys: Vec<f64> = (0..10_000).map(|_| truth.quantile(open_unit(&mut r)).unwrap()).collect();
        let diffs: Vec<f64> = ys.iter().map(|y| quantile_score(&shifted, *y, 0.1).unwrap() - quantile_score(&truth, *y, 0.1).unwrap()).collect();
        let m = crate::stats::mean(&diffs);
        let se = (crate::stats::variance(&diffs) / diffs.len() as f64).sqrt();
        assert!(m / se > 2.326, "t = {}", m / se);
    }

    #[test]
    fn mspe_values() {
        assert_eq!(mspe(&[1.0, 2.0], &[0.0, 0.0]).unwrap(), 2.5);
        assert_eq!(mspe_ratio(&[1.0], &[2.0], &[0.0]).unwrap(), 0.25);
        assert!(mspe_ratio(&[1.0], &[0.0], &[0.0]).is_err());
        assert!(mspe(&[], &[]).is_err());
    }
}
