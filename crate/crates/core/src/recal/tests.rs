use super::*;
use crate::density::open_unit;
use crate::mdn::MdnConfig;
use crate::quadrature;
use crate::rng;
use crate::skewt::{SkewT, SkewedTParams};
use proptest::prelude::*;
use rand::Rng as _;

fn law(x: &[f64], sigma: f64) -> SkewT {
    SkewT::new(SkewedTParams::new(0.6 * x[0], sigma, 0.3, 5.0).unwrap()).unwrap()
}

/// Features and targets drawn from the unit-scale law.
fn draw(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut r = rng::from_seed(seed);
    let xs: Vec<Vec<f64>> = (0..n).map(|_| vec![2.0 * r.random::<f64>() - 1.0]).collect();
    let ys = xs.iter().map(|x| law(x, 1.0).quantile(open_unit(&mut r)).unwrap()).collect();
    (xs, ys)
}

fn uniform_pits(n: usize, seed: u64, map: impl Fn(f64) -> f64) -> Vec<PitSample> {
    let mut r = rng::from_seed(seed);
    (0..n).map(|_| PitSample { features: vec![r.random::<f64>(), r.random::<f64>()], pit: map(r.random::<f64>()) }).collect()
}

fn sup_on(beta: &BetaHat, target: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    (0..=900).map(|i| lo + (hi - lo) * i as f64 / 900.0).map(|t| (beta.eval(t) - target(t)).abs()).fold(0.0, f64::max)
}

#[test]
fn identity_outputs_give_identity() {
    let grid = default_tau_grid();
    let b = fit_beta(&grid, &grid, &ISplineBasis::cubic(8));
    assert!(!b.is_fallback());
    assert!(sup_on(&b, |t| t, 0.0, 1.0) < 1e-3);
}

#[test]
fn square_root_target() {
    let grid = default_tau_grid();
    let out: Vec<f64> = grid.iter().map(|t| t.sqrt()).collect();
    let b = fit_beta(&grid, &out, &ISplineBasis::cubic(8));
    assert!(sup_on(&b, f64::sqrt, 0.05, 0.95) < 0.02);
    assert_eq!(b.eval(0.0), 0.0);
    assert!((b.eval(1.0) - 1.0).abs() < 1e-12);
}

proptest! {
    #[test]
    fn beta_is_monotone_and_pinned(raw in proptest::collection::vec(0.0..1.0f64, 19)) {
        let grid = default_tau_grid();
        let b = fit_beta(&grid, &raw, &ISplineBasis::cubic(8));
        prop_assert!(b.eval(0.0).abs() < 1e-12);
        prop_assert!((b.eval(1.0) - 1.0).abs() < 1e-12);
        let mut prev = 0.0;
        for i in 0..=400 {
            let t = i as f64 / 400.0;
            prop_assert!(b.deriv(t) >= -1e-12);
            let v = b.eval(t);
            prop_assert!(v >= prev - 1e-12);
            prev = v;
        }
    }
}

#[test]
fn isotonic_fallback_is_pinned() {
    let b = BetaHat::Isotonic { knots: vec![0.0, 0.5, 1.0], values: vec![0.0, 0.8, 1.0] };
    assert_eq!(b.eval(0.25), 0.4);
    assert!((b.total_mass() - 1.0).abs() < 1e-14);
    assert!((b.inverse(0.4) - 0.25).abs() < 1e-12);
}

#[test]
fn uninformative_features() {
    let pits = uniform_pits(5000, 3, |u| u);
    let model = fit_local_pit(&pits, &default_tau_grid()).unwrap();
    assert!(model.degenerate_levels.is_empty());
    let mut r = rng::from_seed(4);
    for _ in 0..20 {
        let x = [r.random::<f64>(), r.random::<f64>()];
        let b = beta_hat(&model, &x).unwrap();
        for t in default_tau_grid() {
            assert!((b.eval(t) - t).abs() < 0.05, "x={x:?} tau={t} beta={}", b.eval(t));
        }
    }
}

#[test]
fn squared_pits_give_square_root() {
    let pits = uniform_pits(5000, 5, |u| u * u);
    let model = fit_local_pit(&pits, &default_tau_grid()).unwrap();
    let mut r = rng::from_seed(6);
    for _ in 0..20 {
        let x = [r.random::<f64>(), r.random::<f64>()];
        let b = beta_hat(&model, &x).unwrap();
        for t in default_tau_grid() {
            assert!((b.eval(t) - t.sqrt()).abs() < 0.05, "tau={t}");
        }
    }
}

#[test]
fn preconditions() {
    let pits = uniform_pits(600, 7, |u| u);
    assert!(fit_local_pit(&pits, &[0.5]).is_err());
    assert!(fit_local_pit(&pits, &[0.0, 0.5]).is_err());
    assert!(fit_local_pit(&pits, &[0.6, 0.5]).is_err());
    assert!(fit_local_pit(&pits[..499], &default_tau_grid()).is_err());
    let m = fit_local_pit(&pits, &default_tau_grid()).unwrap();
    assert!(beta_hat(&m, &[0.1]).is_err());
}

#[test]
fn degenerate_levels_are_flagged() {
    let pits = uniform_pits(600, 8, |u| 0.3 + 0.7 * u);
    let model = fit_local_pit(&pits, &default_tau_grid()).unwrap();
    assert_eq!(model.degenerate_levels, vec![0, 1, 2, 3, 4, 5]);
    assert!(matches!(model.classifiers[0], Classifier::Constant { rate } if rate == 0.0));
    let b = beta_hat(&model, &[0.5, 0.5]).unwrap();
    assert!(b.eval(0.2) < 0.05);
}

#[test]
fn pits_are_clipped() {
    let xs = vec![vec![0.0]; 3];
    let pits = compute_pit_with(&xs, &[-1e300, 0.0, 1e300], |x| Ok(law(x, 1.0))).unwrap();
    assert_eq!(pits[0].pit, PIT_CLIP);
    assert_eq!(pits[2].pit, 1.0 - PIT_CLIP);
    assert!(pits.iter().all(|p| (0.0..=1.0).contains(&p.pit)));
    assert!(compute_pit_with(&xs, &[0.0], |x| Ok(law(x, 1.0))).is_err());
}

#[test]
fn network_pits_are_uniform_on_its_own_draws() {
    let cfg = MdnConfig { hidden: vec![16], n_mixtures: 3, seed: 11, ..MdnConfig::default() };
    let model = MdnModel::init(cfg, vec![0.0], vec![1.0], 0.0, 1.0).unwrap();
    let mut r = rng::from_seed(12);
    let n = 5000;
    let inputs: Vec<Vec<f64>> = (0..n).map(|_| vec![4.0 * r.random::<f64>() - 2.0]).collect();
    let targets: Vec<f64> = inputs.iter().enumerate().map(|(i, x)| predict_density(&model, x).unwrap().sample(1, 100 + i as u64).unwrap()[0]).collect();
    let cal = TrainingSet::new(inputs, targets, crate::tail::SampleWeights::uniform(n)).unwrap();
    let pits = compute_pit(&model, &cal).unwrap();
    let u: Vec<f64> = pits.iter().map(|p| p.pit).collect();
    assert!(crate::stats::ks_uniform(&u).unwrap() < 0.02);
}

#[test]
fn identity_map_leaves_density_unchanged() {
    let base = law(&[0.4], 1.3);
    let Recalibrated::Applied(r) = apply_beta(base.clone(), BetaHat::identity()) else { panic!("rejected") };
    for y in [-30.0, -2.0, 0.0, 0.7, 5.0, 80.0] {
        assert!((r.pdf(y) / base.pdf(y) - 1.0).abs() < 1e-8, "{y}");
        assert!((r.cdf(y) - base.cdf(y)).abs() < 1e-8);
    }
}

#[test]
fn vanishing_correction_is_rejected() {
    let zero = BetaHat::Spline { basis: ISplineBasis::cubic(8), coefficients: vec![0.0; 11] };
    let out = apply_beta(law(&[0.0], 1.0), zero);
    assert!(!out.is_applied());
    assert!((out.density().cdf(0.6) - law(&[0.0], 1.0).cdf(0.6)).abs() < 1e-15);
}

fn ks_of<D: PredictiveDensity>(ds: &[D], ys: &[f64]) -> f64 {
    let u: Vec<f64> = ds.iter().zip(ys).map(|(d, y)| d.cdf(*y)).collect();
    crate::stats::ks_uniform(&u).unwrap()
}

#[test]
fn overdispersion_is_corrected() {
    let (cx, cy) = draw(2000, 21);
    let pits = compute_pit_with(&cx, &cy, |x| Ok(law(x, 2.0))).unwrap();
    let model = fit_local_pit(&pits, &default_tau_grid()).unwrap();
    let (hx, hy) = draw(2000, 22);
    let before: Vec<SkewT> = hx.iter().map(|x| law(x, 2.0)).collect();
    let after: Vec<_> = hx.iter().map(|x| recalibrate_density(law(x, 2.0), &model, x).unwrap()).collect();
    let u: Vec<f64> = after.iter().zip(&hy).map(|(d, y)| d.density().cdf(*y)).collect();
    let ks_after = crate::stats::ks_uniform(&u).unwrap();
    let ks_before = ks_of(&before, &hy);
    assert!(ks_after < ks_before, "{ks_after} vs {ks_before}");
    assert!(ks_after < 0.05);
}

#[test]
fn calibrated_model_is_nearly_unchanged() {
    let (cx, cy) = draw(2000, 31);
    let pits = compute_pit_with(&cx, &cy, |x| Ok(law(x, 1.0))).unwrap();
    let model = fit_local_pit(&pits, &default_tau_grid()).unwrap();
    let (hx, hy) = draw(200, 32);
    for (x, y) in hx.iter().zip(&hy) {
        let base = law(x, 1.0);
        let r = recalibrate_density(base.clone(), &model, x).unwrap();
        assert!((r.density().cdf(*y) - base.cdf(*y)).abs() < 0.03);
    }
}

#[test]
fn recalibrated_law_is_normalized_and_consistent() {
    let (cx, cy) = draw(1000, 41);
    let pits = compute_pit_with(&cx, &cy, |x| Ok(law(x, 2.0))).unwrap();
    let model = fit_local_pit(&pits, &default_tau_grid()).unwrap();
    let (hx, hy) = draw(20, 42);
    for (x, y) in hx.iter().zip(&hy) {
        let base = law(x, 2.0);
        let hints = base.hints();
        let Recalibrated::Applied(r) = recalibrate_density(base.clone(), &model, x).unwrap() else { panic!() };
        let total = quadrature::integrate(|v| r.pdf(v), &hints, f64::NEG_INFINITY, f64::INFINITY);
        assert!((total - 1.0).abs() < 1e-3, "{total}");
        // Independently integrated distribution function against β̂(F̂(y)).
        let integrated = quadrature::integrate(|v| r.pdf(v), &hints, f64::NEG_INFINITY, *y);
        assert!((integrated - r.beta().eval(base.cdf(*y))).abs() < 1e-3);
        for p in [0.01, 0.3, 0.5, 0.9] {
            assert!((r.cdf(r.quantile(p).unwrap()) - p).abs() < 1e-9);
        }
    }
}

#[test]
fn json_round_trip() {
    let pits = uniform_pits(600, 51, |u| u.powf(1.5));
    let model = fit_local_pit(&pits, &[0.25, 0.5, 0.75]).unwrap();
    let back = RecalibrationModel::from_json(&model.to_json().unwrap()).unwrap();
    assert_eq!(back, model);
    let x = [0.3, 0.6];
    assert_eq!(beta_hat(&back, &x).unwrap(), beta_hat(&model, &x).unwrap());
    assert!(RecalibrationModel::from_json(&model.to_json().unwrap().replace("bubblecast-recal", "other")).is_err());
}
