//! Statistics and decision rules computed from an observed point-process
//! path: the score `Δ_T`, the information `J_T`, the log-likelihood ratio
//! `l_T(u)` in the local parametrization `ϑ = u/(γT)`, its maximizer over the
//! alternative set `U_T = [0, K_T)`, and the score, likelihood-ratio and Wald
//! tests built on them.

use crate::error::{invalid, Error, Result};
use crate::limit::a_epsilon;
use crate::path::PointProcessPath;
use crate::psi::PsiSpec;
use crate::quadrature::GaussLegendre;

/// Points of the coarse grid in the generic maximum-likelihood search.
pub const MLE_GRID_POINTS: usize = 512;
const MLE_TOLERANCE: f64 = 1e-7;

/// `K_T = √(S*T)/ln T`, the upper end of the alternative set. Undefined for
/// `T <= 1`.
pub fn default_alt_upper(rate: f64, horizon: f64) -> Option<f64> {
    (horizon > 1.0).then(|| (rate * horizon).sqrt() / horizon.ln())
}

#[derive(Debug, Clone)]
pub struct TestConfig {
    pub rate: f64,
    pub horizon: f64,
    pub psi: PsiSpec,
    pub epsilon: f64,
    alt_upper: Option<f64>,
}

impl TestConfig {
    pub fn new(rate: f64, horizon: f64, psi: PsiSpec, epsilon: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(invalid(format!("rate must be positive, got {rate}")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(invalid(format!("horizon must be positive, got {horizon}")));
        }
        check_epsilon(epsilon)?;
        Ok(Self {
            rate,
            horizon,
            psi,
            epsilon,
            alt_upper: default_alt_upper(rate, horizon),
        })
    }

    /// Replaces `K_T` by an explicit upper end of the alternative set.
    pub fn with_alt_upper(mut self, upper: f64) -> Result<Self> {
        if !(upper > 0.0 && upper.is_finite()) {
            return Err(invalid(format!("alternative upper end must be positive, got {upper}")));
        }
        self.alt_upper = Some(upper);
        Ok(self)
    }

    pub fn alt_upper(&self) -> Option<f64> {
        self.alt_upper
    }

    /// `γ = S*·ψ'(0)`.
    pub fn gamma(&self) -> f64 {
        self.rate * self.psi.deriv_at_zero()
    }

    /// `ϑ = u/(γT)`.
    pub fn theta(&self, u: f64) -> f64 {
        u / (self.gamma() * self.horizon)
    }

    fn check_path(&self, path: &PointProcessPath) -> Result<()> {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
        if !close(path.rate(), self.rate) || !close(path.horizon(), self.horizon) {
            return Err(invalid(format!(
                "path (rate {}, horizon {}) does not match config (rate {}, horizon {})",
                path.rate(),
                path.horizon(),
                self.rate,
                self.horizon
            )));
        }
        Ok(())
    }
}

pub(crate) fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(invalid(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathStats {
    pub delta: f64,
    pub j: f64,
    pub count: usize,
}

pub fn path_stats(path: &PointProcessPath, config: &TestConfig) -> Result<PathStats> {
    Ok(PathStats {
        delta: delta_t(path, config)?,
        j: j_t(path, config)?,
        count: path.count(),
    })
}

/// `Δ_T = (X_T − (X_T − S*T)²) / (2S*T)`.
pub fn delta_t(path: &PointProcessPath, config: &TestConfig) -> Result<f64> {
    config.check_path(path)?;
    Ok(delta_from_count(path.count() as u64, config.rate, config.horizon))
}

/// `Δ_T` depends on the path only through the terminal count.
pub fn delta_from_count(count: u64, rate: f64, horizon: f64) -> f64 {
    let st = rate * horizon;
    let x = count as f64;
    (x - (x - st) * (x - st)) / (2.0 * st)
}

/// `Δ_T` as the stochastic integral `(1/S*T)∫(S*t − X_{t−})[dX_t − S* dt]`,
/// evaluated event by event.
pub fn delta_t_event_sum(path: &PointProcessPath, config: &TestConfig) -> Result<f64> {
    config.check_path(path)?;
    let (s, t_end) = (config.rate, config.horizon);
    let mut jumps = 0.0;
    let mut tail = 0.0;
    for (k, &t) in path.events().iter().enumerate() {
        jumps += s * t - k as f64;
        tail += t_end - t;
    }
    // ∫₀ᵀ (S t − X_t) dt
    let drift = s * t_end * t_end / 2.0 - tail;
    Ok((jumps - s * drift) / (s * t_end))
}

/// `J_T = (1/(S*T²))∫₀ᵀ(S*t − X_t)² dt`, integrated exactly over each
/// inter-event interval.
pub fn j_t(path: &PointProcessPath, config: &TestConfig) -> Result<f64> {
    config.check_path(path)?;
    let (s, t_end) = (config.rate, config.horizon);
    let mut start = 0.0;
    let mut total = 0.0;
    let mut cube = |a: f64, b: f64, level: f64| {
        let (ya, yb) = (s * a - level, s * b - level);
        total += (yb * yb * yb - ya * ya * ya) / (3.0 * s);
    };
    for (i, &t) in path.events().iter().enumerate() {
        cube(start, t, i as f64);
        start = t;
    }
    cube(start, t_end, path.count() as f64);
    Ok(total / (s * t_end * t_end))
}

/// Log-likelihood ratio `l_T(u) = ln L(u/(γT), X^T)`:
///
/// `Σᵢ ln ψ(ϑ(S*tᵢ − X_{tᵢ−})) − S*∫₀ᵀ (ψ(ϑ(S*t − X_t)) − 1) dt`.
///
/// Exponential ψ uses the closed-form compensator; other shapes use an
/// order-8 Gauss-Legendre rule on every inter-event interval.
pub fn log_likelihood(u: f64, path: &PointProcessPath, config: &TestConfig) -> Result<f64> {
    config.check_path(path)?;
    if !(u >= 0.0 && u.is_finite()) {
        return Err(invalid(format!("u must be nonnegative, got {u}")));
    }
    if u == 0.0 {
        return Ok(0.0);
    }
    match config.psi.exp_slope() {
        Some(slope) => Ok(exp_log_likelihood(slope * config.theta(u), path, config.rate)),
        None => quadrature_log_likelihood(u, path, config, GaussLegendre::order8()),
    }
}

/// Closed form for `ψ(x) = e^{κx}` with `a = κϑ`. The compensator telescopes
/// to `(e^a − 1)/a·Σ_k e^{a(S t_k − k)} + (e^{a(S T − n)} − 1)/a − S T`,
/// written with `expm1` to keep the O(1) result free of cancellation.
fn exp_log_likelihood(a: f64, path: &PointProcessPath, s: f64) -> f64 {
    let n = path.count() as f64;
    let st = s * path.horizon();
    let mut jumps = 0.0;
    let mut excess = 0.0;
    for (k, &t) in path.events().iter().enumerate() {
        let lead = s * t - k as f64;
        jumps += lead;
        excess += (a * (lead - 1.0)).exp_m1();
    }
    let ratio = a.exp_m1() / a;
    let compensator =
        n * (ratio - 1.0) + (n - st) + ratio * excess + (a * (st - n)).exp_m1() / a;
    a * jumps - compensator
}

pub(crate) fn quadrature_log_likelihood(
    u: f64,
    path: &PointProcessPath,
    config: &TestConfig,
    rule: &GaussLegendre,
) -> Result<f64> {
    let theta = config.theta(u);
    let s = config.rate;
    let psi = &config.psi;
    let mut jumps = 0.0;
    for (k, &t) in path.events().iter().enumerate() {
        let x = theta * (s * t - k as f64);
        let v = psi.value(x);
        if !(v > 0.0) {
            return Err(Error::Domain(format!("psi({x}) = {v} at event {}", k + 1)));
        }
        jumps += psi.ln_value(x);
    }
    let mut bad = None;
    let mut compensator = 0.0;
    let mut start = 0.0;
    let mut level = 0.0;
    let ends = path.events().iter().copied().chain(std::iter::once(path.horizon()));
    for end in ends {
        compensator += rule.integrate(start, end, |t| {
            let v = psi.value(theta * (s * t - level));
            if !(v > 0.0) {
                bad = Some(t);
            }
            v - 1.0
        });
        start = end;
        level += 1.0;
    }
    if let Some(t) = bad {
        return Err(Error::Domain(format!("psi is not positive along the path at t = {t}")));
    }
    Ok(jumps - s * compensator)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleResult {
    /// `û = γT·ϑ̂`.
    pub u: f64,
    pub log_likelihood: f64,
    pub at_boundary: bool,
}

fn golden_max(f: &mut impl FnMut(f64) -> Result<f64>, mut lo: f64, mut hi: f64) -> Result<(f64, f64)> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while hi - lo > MLE_TOLERANCE {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 >= f2 { (x1, f1) } else { (x2, f2) })
}

/// Maximizer of `l_T` over `[0, K_T]`.
///
/// For exponential ψ the log-likelihood is concave in `u` and a golden-section
/// search over the whole set is used. Other shapes get a 512-point grid first
/// and a golden-section refinement between the neighbours of the best grid
/// point. Ties go to the smaller `u`; a maximum at either end is reported as
/// that end.
pub fn mle_u(path: &PointProcessPath, config: &TestConfig) -> Result<MleResult> {
    let upper = config.alt_upper().ok_or_else(|| {
        invalid(format!(
            "alternative set is undefined for horizon {} <= 1; set an explicit upper end",
            config.horizon
        ))
    })?;
    let mut f = |u: f64| log_likelihood(u, path, config);
    let mut best = (0.0, 0.0);
    let consider = |u: f64, l: f64, best: &mut (f64, f64)| {
        if l > best.1 || (l == best.1 && u < best.0) {
            *best = (u, l);
        }
    };
    if config.psi.concave_log_likelihood() {
        let (u, l) = golden_max(&mut f, 0.0, upper)?;
        consider(u, l, &mut best);
    } else {
        let step = upper / (MLE_GRID_POINTS - 1) as f64;
        let mut grid_best = (0usize, 0.0);
        for k in 1..MLE_GRID_POINTS {
            let l = f(k as f64 * step)?;
            if l > grid_best.1 {
                grid_best = (k, l);
            }
        }
        consider(grid_best.0 as f64 * step, grid_best.1, &mut best);
        let lo = grid_best.0.saturating_sub(1) as f64 * step;
        let hi = ((grid_best.0 + 1).min(MLE_GRID_POINTS - 1)) as f64 * step;
        let (u, l) = golden_max(&mut f, lo, hi)?;
        consider(u, l, &mut best);
    }
    let l_upper = f(upper)?;
    consider(upper, l_upper, &mut best);
    let (u, log_likelihood) = best;
    Ok(MleResult {
        u,
        log_likelihood,
        at_boundary: u == 0.0 || u == upper,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestVerdict {
    pub reject: bool,
    pub statistic_value: f64,
    pub threshold: f64,
}

/// Rejects when `Δ_T > a_ε`.
pub fn score_test(path: &PointProcessPath, config: &TestConfig) -> Result<TestVerdict> {
    let threshold = a_epsilon(config.epsilon)?;
    let delta = delta_t(path, config)?;
    Ok(TestVerdict {
        reject: delta > threshold,
        statistic_value: delta,
        threshold,
    })
}

pub(crate) fn check_threshold(name: &str, value: f64) -> Result<()> {
    if !(value > 0.0 && value.is_finite()) {
        return Err(invalid(format!("{name} must be positive, got {value}")));
    }
    Ok(())
}

pub(crate) fn lr_verdict(mle: &MleResult, b_eps: f64) -> TestVerdict {
    let sup = mle.log_likelihood.max(0.0);
    let threshold = b_eps * b_eps;
    TestVerdict {
        reject: sup > threshold,
        statistic_value: sup,
        threshold,
    }
}

pub(crate) fn wald_verdict(mle: &MleResult, c_eps: f64) -> TestVerdict {
    TestVerdict {
        reject: mle.u >= c_eps,
        statistic_value: mle.u,
        threshold: c_eps,
    }
}

/// Rejects when `sup_{u ∈ U_T} l_T(u) > b_ε²`.
pub fn lr_test(path: &PointProcessPath, config: &TestConfig, b_eps: f64) -> Result<TestVerdict> {
    check_threshold("b_eps", b_eps)?;
    Ok(lr_verdict(&mle_u(path, config)?, b_eps))
}

/// Rejects when `û = γT·ϑ̂_T >= c_ε`.
pub fn wald_test(path: &PointProcessPath, config: &TestConfig, c_eps: f64) -> Result<TestVerdict> {
    check_threshold("c_eps", c_eps)?;
    Ok(wald_verdict(&mle_u(path, config)?, c_eps))
}

/// Everything the statistic dump reports for one path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathReport {
    pub stats: PathStats,
    pub mle: MleResult,
    pub score: TestVerdict,
    pub lr: TestVerdict,
    pub wald: TestVerdict,
}

/// All three tests on one path, sharing a single likelihood maximization.
pub fn evaluate_path(
    path: &PointProcessPath,
    config: &TestConfig,
    b_eps: f64,
    c_eps: f64,
) -> Result<PathReport> {
    check_threshold("b_eps", b_eps)?;
    check_threshold("c_eps", c_eps)?;
    let stats = path_stats(path, config)?;
    let mle = mle_u(path, config)?;
    Ok(PathReport {
        stats,
        mle,
        score: score_test(path, config)?,
        lr: lr_verdict(&mle, b_eps),
        wald: wald_verdict(&mle, c_eps),
    })
}
