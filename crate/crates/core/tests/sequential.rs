use sctest_core::dist::{ks_one_sample, ks_pvalue, normal_cdf};
use sctest_core::sequential::sequential_score_test;
use sctest_core::{PsiSpec, RngStream};

fn run_many(theta: f64, d: f64, m: u64, seed: u64) -> Vec<f64> {
    let psi = PsiSpec::exp();
    (0..m)
        .map(|i| {
            sequential_score_test(&psi, theta, 1.0, d, 0.05, &RngStream::new(seed, i))
                .unwrap()
                .statistic
        })
        .collect()
}

#[test]
fn stopped_statistic_is_standard_normal_under_the_null() {
    let stats = run_many(0.0, 50.0, 10_000, 401);
    let d = ks_one_sample(&stats, normal_cdf);
    let p = ks_pvalue(d, stats.len() as f64);
    assert!(p > 0.001, "KS {d}, p {p}");
    let size = stats.iter().filter(|&&s| s > 1.6448536).count() as f64 / stats.len() as f64;
    assert!((size - 0.05).abs() < 0.01, "size {size}");
}

#[test]
fn stopped_statistic_gains_power_under_self_correction() {
    let null = run_many(0.0, 20.0, 2000, 402);
    let alt = run_many(0.1, 20.0, 2000, 403);
    let rate = |xs: &[f64]| xs.iter().filter(|&&s| s > 1.6448536).count() as f64 / xs.len() as f64;
    assert!(rate(&alt) > rate(&null) + 0.2, "{} vs {}", rate(&alt), rate(&null));
}

#[test]
fn stopping_time_grows_with_the_information_bound() {
    let psi = PsiSpec::exp();
    let mean_tau = |d: f64| {
        (0..500)
            .map(|i| sequential_score_test(&psi, 0.0, 1.0, d, 0.05, &RngStream::new(404, i)).unwrap().stopping_time)
            .sum::<f64>()
            / 500.0
    };
    let (small, large) = (mean_tau(5.0), mean_tau(20.0));
    assert!(large > 2.0 * small, "{small} vs {large}");
}
