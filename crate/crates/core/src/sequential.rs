//! Score test observed until a fixed amount of information has accumulated.
//!
//! The stopping time is `τ_D = inf{τ : S·∫₀^τ (S·t − X_t)² dt ≥ D²}` and the
//! statistic `(1/D)·∫₀^{τ_D} (S·t − X_{t−}) [dX_t − S dt]` is a martingale
//! evaluated at the time its predictable variation reaches `D²`, so it is
//! asymptotically standard normal under the null.
//!
//! Between events `X` is constant, which makes both integrals cubic and
//! quadratic polynomials in `t`; `τ_D` is located exactly with a cube root.

use crate::dist::upper_normal_quantile;
use crate::error::{invalid, Error, Result};
use crate::psi::PsiSpec;
use crate::rng::RngStream;
use crate::sim::SelfCorrectingSampler;
use crate::statistics::{check_epsilon, TestVerdict};

/// Outcome of one sequential test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequentialOutcome {
    pub verdict: TestVerdict,
    /// Realized stopping time `τ_D`.
    pub stopping_time: f64,
    pub statistic: f64,
    /// Events observed up to `τ_D`.
    pub events: u64,
}

/// Default hard cap on the observation time, `10³·max(D², 1)/rate`.
///
/// For small `D` the stopping time behaves like `(3D²)^{1/3}/rate`, which
/// exceeds `10³·D²/rate` once `D` drops below about 0.03, hence the floor.
pub fn default_time_cap(d_bound: f64, rate: f64) -> f64 {
    1e3 * (d_bound * d_bound).max(1.0) / rate
}

/// Runs the sequential score test on a process simulated with shape `psi`
/// and parameter `theta` (`theta = 0` is the Poisson null).
pub fn sequential_score_test(
    psi: &PsiSpec,
    theta: f64,
    rate: f64,
    d_bound: f64,
    epsilon: f64,
    stream: &RngStream,
) -> Result<SequentialOutcome> {
    sequential_score_test_capped(psi, theta, rate, d_bound, epsilon, stream, None)
}

/// As [`sequential_score_test`] with an explicit time cap.
pub fn sequential_score_test_capped(
    psi: &PsiSpec,
    theta: f64,
    rate: f64,
    d_bound: f64,
    epsilon: f64,
    stream: &RngStream,
    time_cap: Option<f64>,
) -> Result<SequentialOutcome> {
    if !(d_bound > 0.0 && d_bound.is_finite()) {
        return Err(invalid(format!("information bound D must be positive, got {d_bound}")));
    }
    check_epsilon(epsilon)?;
    let cap = time_cap.unwrap_or_else(|| default_time_cap(d_bound, rate));
    if !(cap > 0.0) {
        return Err(invalid(format!("time cap must be positive, got {cap}")));
    }
    let mut sampler = SelfCorrectingSampler::new(psi, theta, rate)?;
    let mut rng = stream.rng();
    let target = d_bound * d_bound;

    let mut info = 0.0;
    let mut jumps = 0.0; // Σ (S·t_k − (k − 1))
    let mut drift = 0.0; // S·∫ (S·t − X_t) dt
    let mut start = 0.0;
    loop {
        let level = sampler.count() as f64;
        let next = sampler.next_event(&mut rng, cap)?;
        let end = next.unwrap_or(cap);
        let gap_start = rate * start - level;
        let gap_end = rate * end - level;
        let piece = (gap_end.powi(3) - gap_start.powi(3)) / 3.0;
        if info + piece >= target {
            let gap_stop = (3.0 * (target - info) + gap_start.powi(3)).cbrt();
            let stopping_time = ((level + gap_stop) / rate).clamp(start, end);
            drift += (gap_stop * gap_stop - gap_start * gap_start) / 2.0;
            let statistic = (jumps - drift) / d_bound;
            let threshold = upper_normal_quantile(epsilon);
            return Ok(SequentialOutcome {
                verdict: TestVerdict {
                    reject: statistic > threshold,
                    statistic_value: statistic,
                    threshold,
                },
                stopping_time,
                statistic,
                events: level as u64,
            });
        }
        info += piece;
        drift += (gap_end * gap_end - gap_start * gap_start) / 2.0;
        match next {
            Some(t) => {
                jumps += gap_end;
                start = t;
            }
            None => return Err(Error::Timeout { cap }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_arguments() {
        let s = RngStream::new(1, 0);
        let psi = PsiSpec::exp();
        assert!(sequential_score_test(&psi, 0.0, 1.0, 0.0, 0.05, &s).is_err());
        assert!(sequential_score_test(&psi, 0.0, 1.0, 5.0, 1.5, &s).is_err());
        assert!(sequential_score_test(&psi, 0.0, -1.0, 5.0, 0.05, &s).is_err());
    }

    #[test]
    fn tiny_bound_accepts() {
        let psi = PsiSpec::exp();
        for k in 0..50 {
            let out = sequential_score_test(&psi, 0.0, 1.0, 1e-9, 0.05, &RngStream::new(2, k)).unwrap();
            assert!(out.stopping_time < 1e-3);
            assert!(out.statistic.abs() < 1e-2);
            assert!(!out.verdict.reject);
        }
    }

    #[test]
    fn silent_start_has_closed_form_stop() {
        // With no event before τ, S·∫(S t)² dt = S³τ³/3 = D².
        let psi = PsiSpec::exp();
        let rate = 2.0;
        let d: f64 = 0.05;
        let tau = (3.0 * d * d).cbrt() / rate;
        let mut checked = 0;
        for k in 0..20 {
            let out = sequential_score_test(&psi, 0.0, rate, d, 0.05, &RngStream::new(3, k)).unwrap();
            if out.events > 0 {
                continue;
            }
            checked += 1;
            assert!((out.stopping_time - tau).abs() < 1e-12);
            let stat = -(rate * tau).powi(2) / 2.0 / d;
            assert!((out.statistic - stat).abs() < 1e-12);
        }
        assert!(checked > 0);
    }

    #[test]
    fn timeout_is_reported() {
        let psi = PsiSpec::exp();
        let r = sequential_score_test_capped(&psi, 0.0, 1.0, 50.0, 0.05, &RngStream::new(4, 0), Some(1.0));
        assert!(matches!(r, Err(Error::Timeout { .. })));
    }

    #[test]
    fn threshold_is_one_sided_quantile() {
        let out = sequential_score_test(&PsiSpec::exp(), 0.0, 1.0, 5.0, 0.05, &RngStream::new(5, 0)).unwrap();
        assert!((out.verdict.threshold - 1.6448536).abs() < 1e-6);
    }
}
