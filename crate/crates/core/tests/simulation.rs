//! Distributional checks of the path generators against independent oracles.

use sctest_core::dist::{chi_square_test, ks_pvalue, ks_two_sample, mean_stderr};
use sctest_core::limit::{Ensemble, McConfig};
use sctest_core::sim::{
    count_self_correcting, simulate_ou, simulate_poisson, simulate_self_correcting, simulate_wiener,
};
use sctest_core::statistics::{path_stats, TestConfig};
use sctest_core::{PsiSpec, RngStream};

fn sample_var(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

fn poisson_pmf(lambda: f64, k: u64) -> f64 {
    let mut ln = -lambda + k as f64 * lambda.ln();
    for i in 2..=k {
        ln -= (i as f64).ln();
    }
    ln.exp()
}

#[test]
fn wiener_endpoint_variance_and_covariance() {
    let m = 100_000;
    let n = 10_000;
    let mut ends = Vec::with_capacity(m);
    let mut cov = 0.0;
    for i in 0..m {
        let w = simulate_wiener(n, &RngStream::new(101, i as u64)).unwrap();
        let (half, one) = (w.at(0.5), w.endpoint());
        cov += half * one;
        ends.push(one);
    }
    let var = sample_var(&ends);
    let cov = cov / m as f64;
    assert!((var - 1.0).abs() < 0.02, "Var W(1) = {var}");
    assert!((cov - 0.5).abs() < 0.02, "Cov(W(.5), W(1)) = {cov}");
}

#[test]
fn ou_without_drift_matches_wiener_endpoint_law() {
    let m = 100_000;
    let ou: Vec<f64> = (0..m)
        .map(|i| simulate_ou(0.0, 50, &RngStream::new(102, i)).unwrap().endpoint())
        .collect();
    let w: Vec<f64> = (0..m)
        .map(|i| simulate_wiener(50, &RngStream::new(103, i)).unwrap().endpoint())
        .collect();
    let d = ks_two_sample(&ou, &w);
    let p = ks_pvalue(d, (m as f64) / 2.0);
    assert!(p > 0.001, "KS {d}, p {p}");
}

#[test]
fn ou_endpoint_variance_examples() {
    // The transition is exact, so two grid steps already give the endpoint law.
    for (u, tol) in [(1.0f64, 0.002), (10.0, 0.001)] {
        let ends: Vec<f64> = (0..1_000_000)
            .map(|i| simulate_ou(u, 2, &RngStream::new(104, i)).unwrap().endpoint())
            .collect();
        let want = -(-2.0 * u).exp_m1() / (2.0 * u);
        let var = sample_var(&ends);
        assert!((var - want).abs() < tol, "u={u}: {var} vs {want}");
    }
}

#[test]
fn ou_endpoint_mean_and_variance_within_three_stderr() {
    let m = 200_000;
    for u in [0.5f64, 1.0, 5.0, 10.0] {
        let ends: Vec<f64> = (0..m)
            .map(|i| simulate_ou(u, 4, &RngStream::new(105, i)).unwrap().endpoint())
            .collect();
        let (mean, se_mean) = mean_stderr(&ends);
        assert!(mean.abs() < 3.0 * se_mean, "u={u}: mean {mean}");
        let squares: Vec<f64> = ends.iter().map(|y| y * y).collect();
        let (second, se_second) = mean_stderr(&squares);
        let want = -(-2.0 * u).exp_m1() / (2.0 * u);
        assert!((second - want).abs() < 3.0 * se_second, "u={u}: {second} vs {want}");
    }
}

#[test]
fn wiener_quadratic_functional_mean() {
    let ens = Ensemble::wiener(&McConfig::new(100_000, 1000, 106)).unwrap();
    let (mean_j, se) = mean_stderr(ens.js());
    // the trapezoid on a grid of 1000 adds about 1/(6·1000²)
    assert!((mean_j - 0.5).abs() < 3.0 * se, "E J = {mean_j} ± {se}");
    let (mean_delta, se) = mean_stderr(ens.deltas());
    assert!(mean_delta.abs() < 3.0 * se, "E Δ = {mean_delta} ± {se}");
}

#[test]
fn poisson_count_moments() {
    let counts: Vec<f64> = (0..100_000)
        .map(|i| simulate_poisson(1.0, 100.0, &RngStream::new(107, i)).unwrap().count() as f64)
        .collect();
    let mean = counts.iter().sum::<f64>() / counts.len() as f64;
    assert!((mean - 100.0).abs() < 0.3, "mean {mean}");
    let var = sample_var(&counts);
    assert!((var - 100.0).abs() < 2.0, "var {var}");
}

/// Chi-square of integer counts against Poisson(λ), pooling sparse tails.
fn poisson_chi_square(counts: &[u64], lambda: f64) -> f64 {
    let m = counts.len() as f64;
    let lo = (lambda - 4.0 * lambda.sqrt()).floor() as u64;
    let hi = (lambda + 4.0 * lambda.sqrt()).ceil() as u64;
    let mut observed = vec![0.0; (hi - lo + 3) as usize];
    for &c in counts {
        let bin = if c < lo {
            0
        } else if c > hi {
            observed.len() - 1
        } else {
            (c - lo + 1) as usize
        };
        observed[bin] += 1.0;
    }
    let mut expected: Vec<f64> = (lo..=hi).map(|k| m * poisson_pmf(lambda, k)).collect();
    let inner: f64 = expected.iter().sum();
    let below: f64 = (0..lo).map(|k| m * poisson_pmf(lambda, k)).sum();
    expected.insert(0, below);
    expected.push(m - inner - below);
    let dof = observed.len() - 1;
    chi_square_test(&observed, &expected, dof).1
}

#[test]
fn poisson_counts_follow_the_poisson_law() {
    let counts: Vec<u64> = (0..100_000)
        .map(|i| simulate_poisson(2.0, 50.0, &RngStream::new(108, i)).unwrap().count() as u64)
        .collect();
    let p = poisson_chi_square(&counts, 100.0);
    assert!(p > 0.001, "chi-square p = {p}");
}

#[test]
fn poisson_rejects_bad_arguments() {
    let s = RngStream::new(1, 1);
    assert!(simulate_poisson(1.0, 0.0, &s).is_err());
    assert!(simulate_poisson(-1.0, 1.0, &s).is_err());
}

#[test]
fn null_shape_reduces_to_poisson() {
    let psi = PsiSpec::exp();
    let counts: Vec<u64> = (0..100_000)
        .map(|i| count_self_correcting(&psi, 0.0, 1.0, 100.0, &RngStream::new(109, i)).unwrap())
        .collect();
    assert!(poisson_chi_square(&counts, 100.0) > 0.001);
    let a: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let b: Vec<f64> = (0..100_000)
        .map(|i| simulate_poisson(1.0, 100.0, &RngStream::new(110, i)).unwrap().count() as f64)
        .collect();
    let d = ks_two_sample(&a, &b);
    assert!(ks_pvalue(d, 50_000.0) > 0.001, "KS {d}");
}

#[test]
fn self_correction_shrinks_deviations() {
    let psi = PsiSpec::exp();
    let t = 100.0;
    let theta = 20.0 / t;
    let m = 10_000;
    let dispersion = |theta: f64, seed: u64| {
        (0..m)
            .map(|i| {
                let x = count_self_correcting(&psi, theta, 1.0, t, &RngStream::new(seed, i)).unwrap() as f64;
                (x - t).powi(2) / t
            })
            .sum::<f64>()
            / m as f64
    };
    let corrected = dispersion(theta, 111);
    let poisson = dispersion(0.0, 112);
    assert!(corrected < 1.0 && corrected < poisson, "{corrected} vs {poisson}");
    // mean of (X−T)²/T is ≈ 1 under the null with stderr ≈ 0.014
    assert!(corrected < 0.5, "{corrected}");
}

#[test]
fn thinning_and_inversion_agree_in_law() {
    let exact = PsiSpec::exp();
    let thinned = PsiSpec::exp().with_thinning();
    let theta = 5.0 / 100.0;
    let m = 100_000;
    let a: Vec<f64> = (0..m)
        .map(|i| count_self_correcting(&exact, theta, 1.0, 100.0, &RngStream::new(113, i)).unwrap() as f64)
        .collect();
    let b: Vec<f64> = (0..m)
        .map(|i| simulate_self_correcting(&thinned, theta, 1.0, 100.0, &RngStream::new(114, i)).unwrap().count() as f64)
        .collect();
    let d = ks_two_sample(&a, &b);
    assert!(ks_pvalue(d, m as f64 / 2.0) > 0.001, "KS {d}");
}

#[test]
fn paths_are_bit_identical_for_equal_streams() {
    let psi = PsiSpec::logistic(0.8).unwrap();
    let s = RngStream::new(115, 42);
    let a = simulate_self_correcting(&psi, 0.03, 1.5, 200.0, &s).unwrap();
    let b = simulate_self_correcting(&psi, 0.03, 1.5, 200.0, &s).unwrap();
    assert_eq!(a, b);
    let c = simulate_self_correcting(&psi, 0.03, 1.5, 200.0, &RngStream::new(115, 43)).unwrap();
    assert_ne!(a, c);
}

/// The finite-T pair (Δ_T, J_T) against the Wiener functionals.
///
/// `Δ_T` is a function of the integer count, and the counts `T` and `T + 1`
/// both map to the value 1/2, so its law has an atom of mass
/// `P(X_T ∈ {T, T+1})` where the limit law is continuous. No sample size can
/// push the KS distance below that atom; it is added to the tolerance.
#[test]
fn finite_horizon_pair_matches_the_limit() {
    let t = 1000.0;
    let m = 100_000;
    let cfg = TestConfig::new(1.0, t, PsiSpec::exp(), 0.05).unwrap();
    let mut deltas = Vec::with_capacity(m);
    let mut js = Vec::with_capacity(m);
    for i in 0..m {
        let p = simulate_poisson(1.0, t, &RngStream::new(116, i as u64)).unwrap();
        let s = path_stats(&p, &cfg).unwrap();
        deltas.push(s.delta);
        js.push(s.j);
    }
    let ens = Ensemble::wiener(&McConfig::new(m, 1000, 117)).unwrap();
    let atom = poisson_pmf(t, 1000) + poisson_pmf(t, 1001);
    let ks_delta = ks_two_sample(&deltas, ens.deltas());
    let ks_j = ks_two_sample(&js, ens.js());
    assert!(ks_j < 0.01, "KS(J) = {ks_j}");
    assert!(ks_delta < 0.01 + atom, "KS(Δ) = {ks_delta}, atom {atom}");
}

#[test]
fn path_dumps_have_the_documented_columns() {
    let p = simulate_poisson(1.0, 5.0, &RngStream::new(118, 0)).unwrap();
    let mut buf = Vec::new();
    p.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("index,time\n"));
    assert_eq!(text.lines().count(), p.count() + 1);
    let w = simulate_wiener(4, &RngStream::new(118, 1)).unwrap();
    let mut buf = Vec::new();
    w.write_csv(&mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 6);
}
