//! Quadrature oracles for the closed-form transport drift, plus a sampling
//! smoke test against direct mixture draws.

use distillkit::control::{follmer_drift, simulate_sde, GaussianMixture, SdeOptions};
use distillkit::rng::{derive_rng, rng_from_seed};
use rand::Rng;

/// Heat semigroup applied to the density ratio, evaluated by Simpson
/// quadrature in the substituted variable: Q_{1-t}(f)(z) = E[f(z + s*xi)]
/// with xi standard normal and s = sqrt(1 - t).
fn semigroup_quadrature_1d(z: f64, t: f64, mix: &GaussianMixture) -> f64 {
    let s = (1.0 - t).sqrt();
    let n = 4000usize; // Simpson needs even interval count
    let (lo, hi) = (-12.0f64, 12.0f64);
    let h = (hi - lo) / n as f64;
    let f = |xi: f64| {
        let y = z + s * xi;
        let ratio: f64 = mix
            .weights
            .iter()
            .zip(&mix.means)
            .map(|(w, m)| w * (m[0] * y - 0.5 * m[0] * m[0]).exp())
            .sum();
        let phi = (-0.5 * xi * xi).exp() / (2.0 * std::f64::consts::PI).sqrt();
        ratio * phi
    };
    let mut acc = f(lo) + f(hi);
    for k in 1..n {
        let x = lo + k as f64 * h;
        acc += if k % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    acc * h / 3.0
}

fn drift_fd_oracle_1d(z: f64, t: f64, mix: &GaussianMixture) -> f64 {
    let h = 1e-4;
    let lp = semigroup_quadrature_1d(z + h, t, mix).ln();
    let lm = semigroup_quadrature_1d(z - h, t, mix).ln();
    (lp - lm) / (2.0 * h)
}

#[test]
fn drift_matches_quadrature_finite_differences() {
    let mix = GaussianMixture::new(vec![0.5, 0.5], vec![vec![-2.0], vec![2.0]]).unwrap();
    let mut rng = rng_from_seed(51);
    for _ in 0..100 {
        let z = rng.gen_range(-4.0..4.0);
        let t = rng.gen_range(0.0..0.99);
        let got = follmer_drift(&[z], t, &mix).unwrap()[0];
        let oracle = drift_fd_oracle_1d(z, t, &mix);
        assert!(
            (got - oracle).abs() < 1e-5,
            "z={z} t={t}: {got} vs {oracle}"
        );
    }
}

#[test]
fn single_component_drift_verified_by_quadrature() {
    // For a 2D single component the ratio factorizes per coordinate, so
    // each drift coordinate reduces to an independent 1D oracle.
    let m = [1.3, -0.7];
    let mix2 = GaussianMixture::new(vec![1.0], vec![vec![m[0], m[1]]]).unwrap();
    let per_coord = [
        GaussianMixture::new(vec![1.0], vec![vec![m[0]]]).unwrap(),
        GaussianMixture::new(vec![1.0], vec![vec![m[1]]]).unwrap(),
    ];
    let mut rng = rng_from_seed(52);
    for _ in 0..10 {
        let z = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
        let t = rng.gen_range(0.0..0.95);
        let got = follmer_drift(&z, t, &mix2).unwrap();
        for i in 0..2 {
            let oracle = drift_fd_oracle_1d(z[i], t, &per_coord[i]);
            assert!((got[i] - oracle).abs() < 1e-5);
            assert!((got[i] - m[i]).abs() < 1e-9, "constant drift violated");
        }
    }
}

fn wasserstein_1d(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    assert_eq!(a.len(), b.len());
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

#[test]
fn transport_sampling_reaches_the_mixture() {
    // Smoke-scale version of the sampling check: 2000 particles, 200 steps.
    let mix = GaussianMixture::new(vec![0.5, 0.5], vec![vec![-2.0], vec![2.0]]).unwrap();
    let n = 2000;
    let bundle = simulate_sde(
        |z, t| follmer_drift(z, t, &mix),
        &[0.0],
        200,
        n,
        7,
        SdeOptions::default(),
    )
    .unwrap();
    let simulated: Vec<f64> = (0..n).map(|p| bundle.terminal(p)[0]).collect();
    let mut rng = derive_rng(7, 999);
    let direct: Vec<f64> = (0..n).map(|_| mix.sample(&mut rng)[0]).collect();
    let w1 = wasserstein_1d(simulated, direct);
    assert!(w1 <= 0.1, "W1 distance {w1}");
}
