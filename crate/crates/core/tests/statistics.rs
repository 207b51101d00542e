//! Finite-horizon statistics: hand examples, independent oracles and
//! property tests over random paths.

use proptest::prelude::*;

use sctest_core::quadrature::GaussLegendre;
use sctest_core::sim::simulate_poisson;
use sctest_core::statistics::{
    delta_t, delta_t_event_sum, evaluate_path, j_t, log_likelihood, lr_test, mle_u, path_stats, score_test,
    wald_test, TestConfig,
};
use sctest_core::{PointProcessPath, PsiSpec, RngStream};

fn config(rate: f64, horizon: f64) -> TestConfig {
    TestConfig::new(rate, horizon, PsiSpec::exp(), 0.05).unwrap()
}

fn path(rate: f64, horizon: f64, events: &[f64]) -> PointProcessPath {
    PointProcessPath::new(rate, horizon, events.to_vec()).unwrap()
}

/// Log-likelihood by order-32 Gauss-Legendre on every inter-event interval,
/// written from the definition without the closed-form compensator.
fn quadrature_oracle(u: f64, p: &PointProcessPath, cfg: &TestConfig) -> f64 {
    let s = p.rate();
    let theta = cfg.theta(u);
    let rule = GaussLegendre::order32();
    let mut jumps = 0.0;
    let mut compensator = 0.0;
    let mut start = 0.0;
    let mut level = 0.0;
    let add = |a: f64, b: f64, level: f64| rule.integrate(a, b, |t| cfg.psi.value(theta * (s * t - level)) - 1.0);
    for &t in p.events() {
        compensator += add(start, t, level);
        jumps += cfg.psi.ln_value(theta * (s * t - level));
        level += 1.0;
        start = t;
    }
    compensator += add(start, p.horizon(), level);
    jumps - s * compensator
}

#[test]
fn delta_hand_examples() {
    let evenly: Vec<f64> = (1..=10).map(|k| k as f64 - 0.5).collect();
    assert!((delta_t(&path(1.0, 10.0, &evenly), &config(1.0, 10.0)).unwrap() - 0.5).abs() < 1e-15);
    assert!((delta_t(&path(1.0, 3.0, &[1.0, 2.0]), &config(1.0, 3.0)).unwrap() - 1.0 / 6.0).abs() < 1e-15);
    assert_eq!(delta_t(&path(1.0, 4.0, &[]), &config(1.0, 4.0)).unwrap(), -2.0);
    assert!(delta_t(&path(2.0, 4.0, &[]), &config(1.0, 4.0)).is_err());
}

#[test]
fn j_hand_examples_and_riemann_oracle() {
    assert!((j_t(&path(1.0, 1.0, &[]), &config(1.0, 1.0)).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    let one = path(1.0, 2.0, &[1.0]);
    assert!((j_t(&one, &config(1.0, 2.0)).unwrap() - 1.0 / 6.0).abs() < 1e-15);

    let p = simulate_poisson(1.3, 20.0, &RngStream::new(201, 0)).unwrap();
    let cfg = config(1.3, 20.0);
    let n = 2_000_000;
    let h = 20.0 / n as f64;
    let riemann: f64 = (0..n)
        .map(|k| {
            let t = (k as f64 + 0.5) * h;
            let x = 1.3 * t - p.count_at(t) as f64;
            x * x * h
        })
        .sum::<f64>()
        / (1.3 * 20.0 * 20.0);
    assert!((j_t(&p, &cfg).unwrap() - riemann).abs() < 1e-6);
}

#[test]
fn log_likelihood_examples() {
    let cfg = config(1.0, 1.0).with_alt_upper(5.0).unwrap();
    let empty = path(1.0, 1.0, &[]);
    assert_eq!(log_likelihood(0.0, &empty, &cfg).unwrap(), 0.0);
    // γT = 1, so ϑ = u
    let l = log_likelihood(1.0, &empty, &cfg).unwrap();
    assert!((l + (std::f64::consts::E - 2.0)).abs() < 1e-14, "{l}");

    let cfg = config(1.0, 200.0);
    for seed in 0..5 {
        let p = simulate_poisson(1.0, 200.0, &RngStream::new(202, seed)).unwrap();
        let closed = log_likelihood(3.0, &p, &cfg).unwrap();
        let oracle = quadrature_oracle(3.0, &p, &cfg);
        assert!((closed - oracle).abs() <= 1e-8 * oracle.abs().max(1e-3), "{closed} vs {oracle}");
    }
}

#[test]
fn general_shapes_use_quadrature_consistently() {
    let psi = PsiSpec::logistic(0.7).unwrap();
    let cfg = TestConfig::new(1.0, 150.0, psi, 0.05).unwrap();
    let p = simulate_poisson(1.0, 150.0, &RngStream::new(203, 0)).unwrap();
    for u in [0.5, 2.0, 4.0] {
        let got = log_likelihood(u, &p, &cfg).unwrap();
        let oracle = quadrature_oracle(u, &p, &cfg);
        assert!((got - oracle).abs() < 1e-8 * oracle.abs().max(1.0), "u={u}: {got} vs {oracle}");
    }
}

#[test]
fn mle_matches_dense_grid() {
    let cfg = config(1.0, 500.0).with_alt_upper(12.0).unwrap();
    for seed in 0..4 {
        let p = simulate_poisson(1.0, 500.0, &RngStream::new(204, seed)).unwrap();
        let mle = mle_u(&p, &cfg).unwrap();
        let upper = cfg.alt_upper().unwrap();
        let n = 100_000;
        let (mut best_u, mut best_l) = (0.0, f64::NEG_INFINITY);
        for k in 0..=n {
            let u = upper * k as f64 / n as f64;
            let l = log_likelihood(u, &p, &cfg).unwrap();
            if l > best_l {
                (best_u, best_l) = (u, l);
            }
        }
        assert!((mle.u - best_u).abs() < 1e-4, "seed {seed}: {} vs {best_u}", mle.u);
        assert!(mle.log_likelihood >= best_l - 1e-9);
    }
}

#[test]
fn mle_with_logistic_shape_matches_dense_grid() {
    let cfg = TestConfig::new(1.0, 300.0, PsiSpec::logistic(1.0).unwrap(), 0.05)
        .unwrap()
        .with_alt_upper(10.0)
        .unwrap();
    let p = simulate_poisson(1.0, 300.0, &RngStream::new(205, 3)).unwrap();
    let mle = mle_u(&p, &cfg).unwrap();
    let n = 20_000;
    let (mut best_u, mut best_l) = (0.0, f64::NEG_INFINITY);
    for k in 0..=n {
        let u = 10.0 * k as f64 / n as f64;
        let l = log_likelihood(u, &p, &cfg).unwrap();
        if l > best_l {
            (best_u, best_l) = (u, l);
        }
    }
    assert!((mle.u - best_u).abs() < 1e-3, "{} vs {best_u}", mle.u);
}

#[test]
fn score_thresholds_from_the_closed_form() {
    let cfg = config(1.0, 10.0);
    // X_T = T gives Δ_T = 1/2 > a_0.05
    let evenly: Vec<f64> = (1..=10).map(|k| k as f64 - 0.5).collect();
    let v = score_test(&path(1.0, 10.0, &evenly), &cfg).unwrap();
    assert!(v.reject);
    assert_eq!(format!("{:.3}", v.threshold), "0.498");
    let strict = TestConfig::new(1.0, 10.0, PsiSpec::exp(), 0.01).unwrap();
    assert_eq!(format!("{:.5}", score_test(&path(1.0, 10.0, &evenly), &strict).unwrap().threshold), "0.49992");
    assert!(TestConfig::new(1.0, 10.0, PsiSpec::exp(), 1.0).is_err());
}

#[test]
fn null_favouring_paths_accept() {
    let cfg = config(1.0, 100.0);
    // far too many events: Δ_T < 0 and l_T decreases from u = 0
    let crowded: Vec<f64> = (1..=160).map(|k| k as f64 * 0.6).collect();
    let p = path(1.0, 100.0, &crowded);
    assert!(delta_t(&p, &cfg).unwrap() < 0.0);
    let mle = mle_u(&p, &cfg).unwrap();
    assert_eq!(mle.u, 0.0);
    assert!(!wald_test(&p, &cfg, 8.042).unwrap().reject);
    let lr = lr_test(&p, &cfg, 1.373).unwrap();
    assert!(!lr.reject);
    assert_eq!(lr.statistic_value, 0.0);
}

#[test]
fn quadratic_surrogate_for_small_u() {
    let t = 1000.0;
    let cfg = config(1.0, t).with_alt_upper(10.0).unwrap();
    let paths: Vec<PointProcessPath> = (0..10_000)
        .map(|i| simulate_poisson(1.0, t, &RngStream::new(206, i)).unwrap())
        .collect();
    for u in [0.5, 1.0] {
        let mut errs: Vec<f64> = paths
            .iter()
            .map(|p| {
                let s = path_stats(p, &cfg).unwrap();
                (log_likelihood(u, p, &cfg).unwrap() - (u * s.delta - u * u * s.j / 2.0)).abs()
            })
            .collect();
        errs.sort_by(f64::total_cmp);
        let p95 = errs[9_499];
        assert!(p95 < 0.05, "u={u}: 95th percentile {p95}");
    }
}

/// The surrogate error at fixed u is a cubic remainder of order T^{-1/2}.
#[test]
fn quadratic_surrogate_error_shrinks_with_horizon() {
    let u = 5.0;
    let p95 = |t: f64, seed: u64| {
        let cfg = config(1.0, t).with_alt_upper(10.0).unwrap();
        let mut errs: Vec<f64> = (0..2000)
            .map(|i| {
                let p = simulate_poisson(1.0, t, &RngStream::new(seed, i)).unwrap();
                let s = path_stats(&p, &cfg).unwrap();
                (log_likelihood(u, &p, &cfg).unwrap() - (u * s.delta - u * u * s.j / 2.0)).abs()
            })
            .collect();
        errs.sort_by(f64::total_cmp);
        errs[1899]
    };
    let coarse = p95(1000.0, 207);
    let fine = p95(16_000.0, 208);
    let ratio = coarse / fine;
    assert!((2.8..5.5).contains(&ratio), "{coarse} / {fine} = {ratio}");
}

/// Empirical size of the three tests at T = 1000, M = 10^5. The Wald and
/// LR tests use a widened alternative set: with the default upper end
/// √T/ln T ≈ 4.58 < c_0.05 the Wald test cannot reject at all.
#[test]
fn sizes_at_long_horizon() {
    let t = 1000.0;
    let m = 100_000;
    let eps = 0.05;
    let cfg = config(1.0, t).with_alt_upper(40.0).unwrap();
    let (mut score, mut lr, mut wald) = (0u32, 0u32, 0u32);
    for i in 0..m {
        let p = simulate_poisson(1.0, t, &RngStream::new(209, i)).unwrap();
        let r = evaluate_path(&p, &cfg, 1.373, 8.042).unwrap();
        score += u32::from(r.score.reject);
        lr += u32::from(r.lr.reject);
        wald += u32::from(r.wald.reject);
    }
    let se = (eps * (1.0 - eps) / m as f64).sqrt();
    for (name, hits) in [("score", score), ("lr", lr), ("wald", wald)] {
        let size = hits as f64 / m as f64;
        assert!((size - eps).abs() < 3.0 * se, "{name}: size {size}");
    }

    let literal = config(1.0, t);
    let blocked = (0..2000)
        .filter(|&i| {
            let p = simulate_poisson(1.0, t, &RngStream::new(209, i)).unwrap();
            wald_test(&p, &literal, 8.042).unwrap().reject
        })
        .count();
    assert_eq!(blocked, 0);
}

#[test]
fn score_size_distortion_at_short_horizon() {
    let t = 100.0;
    let m = 100_000;
    let cfg = config(1.0, t);
    let rejects = (0..m)
        .filter(|&i| {
            let p = simulate_poisson(1.0, t, &RngStream::new(210, i)).unwrap();
            score_test(&p, &cfg).unwrap().reject
        })
        .count();
    let size = rejects as f64 / m as f64;
    assert!((size - 0.079).abs() < 0.005, "size {size}");
}

fn arb_path() -> impl Strategy<Value = (f64, f64, Vec<f64>)> {
    (0.2f64..5.0, 1.0f64..60.0, prop::collection::vec(0.0f64..1.0, 0..200)).prop_map(|(rate, horizon, fracs)| {
        let mut events: Vec<f64> = fracs.into_iter().map(|f| f * horizon).filter(|&t| t > 0.0).collect();
        events.sort_by(f64::total_cmp);
        events.dedup();
        (rate, horizon, events)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn delta_representations_agree((rate, horizon, events) in arb_path()) {
        let p = PointProcessPath::new(rate, horizon, events).unwrap();
        let cfg = config(rate, horizon);
        let closed = delta_t(&p, &cfg).unwrap();
        let summed = delta_t_event_sum(&p, &cfg).unwrap();
        prop_assert!((closed - summed).abs() <= 1e-9 * closed.abs().max(1.0), "{} vs {}", closed, summed);
    }

    #[test]
    fn likelihood_vanishes_at_zero((rate, horizon, events) in arb_path()) {
        let p = PointProcessPath::new(rate, horizon, events).unwrap();
        let cfg = config(rate, horizon);
        prop_assert_eq!(log_likelihood(0.0, &p, &cfg).unwrap(), 0.0);
        let logistic = TestConfig::new(rate, horizon, PsiSpec::logistic(0.5).unwrap(), 0.05).unwrap();
        prop_assert_eq!(log_likelihood(0.0, &p, &logistic).unwrap(), 0.0);
    }

    #[test]
    fn information_is_nonnegative((rate, horizon, events) in arb_path()) {
        let p = PointProcessPath::new(rate, horizon, events).unwrap();
        prop_assert!(j_t(&p, &config(rate, horizon)).unwrap() >= 0.0);
    }

    #[test]
    fn constrained_sup_is_never_negative((rate, horizon, events) in arb_path()) {
        let p = PointProcessPath::new(rate, horizon, events).unwrap();
        let cfg = config(rate, horizon).with_alt_upper(6.0).unwrap();
        let lr = lr_test(&p, &cfg, 1.373).unwrap();
        prop_assert!(lr.statistic_value >= 0.0);
        let mle = mle_u(&p, &cfg).unwrap();
        prop_assert!(mle.u >= 0.0 && mle.u <= 6.0);
    }
}
