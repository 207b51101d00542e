//! The limit experiment.
//!
//! Under the null the pair `(Δ_T, J_T)` converges to `(Δ(W), J(W))` with
//! `Δ(W) = (1 − W(1)²)/2` and `J(W) = ∫₀¹ W(s)² ds`, and the likelihood ratio
//! to `Z(u) = exp(uΔ(W) − u²J(W)/2)`. Everything here is computed from
//! ensembles of discretized Wiener (or Ornstein-Uhlenbeck) paths:
//!
//! * thresholds are empirical quantiles of `Λ = Δ/√(2J)`, `Γ = Δ/J` and `J`;
//! * powers under the alternative `u` are `E₀[Z(u)·1{statistic > threshold}]`
//!   (third-lemma reweighting), cross-checked by simulating the OU limit
//!   `dY = −uY ds + dW` directly;
//! * the Neyman-Pearson envelope uses the per-`u` quantile `d_ε(u)` of
//!   `ln Z(u)` on the same ensemble.
//!
//! `Δ` only needs the endpoint, so no stochastic integral is ever discretized;
//! `J` uses the trapezoidal rule on the simulation grid.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::dist::{normal_cdf, upper_normal_quantile};
use crate::error::{invalid, Error, Result};
use crate::parallel::map_indexed;
use crate::path::{OuPath, WienerPath};
use crate::rng::{derive_seed, RngStream};
use crate::sim::ou_step_coefficients;
use crate::statistics::check_epsilon;

/// Per-path functionals of a Wiener (or OU) path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatSummary {
    pub delta: f64,
    pub j: f64,
    /// `Λ = Δ/√(2J)`
    pub lambda: f64,
    /// `Γ = Δ/J`
    pub gamma: f64,
}

impl StatSummary {
    pub fn new(delta: f64, j: f64) -> Result<Self> {
        if !(j > 0.0) {
            return Err(Error::DegeneratePath(format!("J = {j} leaves Λ and Γ undefined")));
        }
        Ok(Self {
            delta,
            j,
            lambda: delta / (2.0 * j).sqrt(),
            gamma: delta / j,
        })
    }

    pub fn ln_z(&self, u: f64) -> f64 {
        u * self.delta - u * u * self.j / 2.0
    }
}

/// `(Δ, J)` of a grid path on `[0, 1]` starting at 0.
fn grid_functionals(values: &[f64]) -> (f64, f64) {
    let n = values.len() - 1;
    let h = 1.0 / n as f64;
    let mut acc = 0.0;
    for v in &values[1..n] {
        acc += v * v;
    }
    let end = values[n];
    acc += 0.5 * end * end;
    ((1.0 - end * end) / 2.0, acc * h)
}

pub fn wiener_functionals(w: &WienerPath) -> Result<StatSummary> {
    let (delta, j) = grid_functionals(w.values());
    StatSummary::new(delta, j)
}

/// Same functional forms applied to an OU path (the vanishing finite-T
/// correction of `Δ` is not part of the limit).
pub fn ou_functionals(y: &OuPath) -> Result<StatSummary> {
    let (delta, j) = grid_functionals(y.values());
    StatSummary::new(delta, j)
}

/// Streams one OU path (`u = 0` is the Wiener path) and returns `(Δ, J)`
/// without storing it. Performs the same floating-point operations as
/// simulating the path and calling [`grid_functionals`].
fn streamed_functionals<R: Rng>(rng: &mut R, u: f64, n_steps: usize) -> (f64, f64) {
    let h = 1.0 / n_steps as f64;
    let (phi, sd) = ou_step_coefficients(u, h);
    let mut y = 0.0;
    let mut acc = 0.0;
    for _ in 1..n_steps {
        let z: f64 = rng.sample(StandardNormal);
        y = phi * y + sd * z;
        acc += y * y;
    }
    let z: f64 = rng.sample(StandardNormal);
    y = phi * y + sd * z;
    acc += 0.5 * y * y;
    ((1.0 - y * y) / 2.0, acc * h)
}

/// `a_ε = (1 − z²_{(1−ε)/2})/2`.
pub fn a_epsilon(epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    let z = upper_normal_quantile((1.0 - epsilon) / 2.0);
    Ok((1.0 - z * z) / 2.0)
}

/// `h(u) = √(2u/(1 − e^{−2u}))`, with `h(0) = 1`.
pub fn h_of_u(u: f64) -> Result<f64> {
    if !(u >= 0.0) || u.is_nan() {
        return Err(invalid(format!("u must be nonnegative, got {u}")));
    }
    if u == 0.0 {
        return Ok(1.0);
    }
    Ok((2.0 * u / -(-2.0 * u).exp_m1()).sqrt())
}

/// Limit power of the score test, `2Φ(h(u)·z_{(1−ε)/2}) − 1`.
pub fn limit_power_score(u: f64, epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    let z = upper_normal_quantile((1.0 - epsilon) / 2.0);
    Ok(2.0 * normal_cdf(h_of_u(u)? * z) - 1.0)
}

/// Limiting likelihood ratio `Z(u) = exp(uΔ − u²J/2)`; underflows to 0.
pub fn z_of_u(u: f64, summary: &StatSummary) -> f64 {
    summary.ln_z(u).exp()
}

/// Monte Carlo size parameters shared by the simulation drivers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub trials: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub workers: Option<usize>,
}

impl McConfig {
    pub fn new(trials: usize, n_steps: usize, seed: u64) -> Self {
        Self {
            trials,
            n_steps,
            seed,
            workers: None,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = Some(workers);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.trials < 2 {
            return Err(invalid(format!("need at least 2 trials, got {}", self.trials)));
        }
        if self.n_steps < 2 {
            return Err(invalid(format!("n_steps must be at least 2, got {}", self.n_steps)));
        }
        Ok(())
    }
}

/// Calibrated functionals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Functional {
    /// `Λ(W)`, giving `b_ε`.
    Lambda,
    /// `Γ(W)`, giving `c_ε`.
    Gamma,
    /// `J(W)`, giving `e_ε` (a lower quantile).
    J,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LimitTest {
    Score,
    Lr,
    Wald,
}

/// The four power curves compared in the limit experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CurveTest {
    Score,
    Lr,
    Wald,
    Np,
}

impl CurveTest {
    pub const ALL: [CurveTest; 4] = [CurveTest::Score, CurveTest::Lr, CurveTest::Wald, CurveTest::Np];

    pub fn name(self) -> &'static str {
        match self {
            CurveTest::Score => "score",
            CurveTest::Lr => "lr",
            CurveTest::Wald => "wald",
            CurveTest::Np => "np",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.name() == s)
    }
}

impl From<LimitTest> for CurveTest {
    fn from(t: LimitTest) -> Self {
        match t {
            LimitTest::Score => CurveTest::Score,
            LimitTest::Lr => CurveTest::Lr,
            LimitTest::Wald => CurveTest::Wald,
        }
    }
}

/// Thresholds of the three tests at one level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub epsilon: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Thresholds {
    pub fn new(epsilon: f64, b: f64, c: f64) -> Result<Self> {
        Ok(Self {
            epsilon,
            a: a_epsilon(epsilon)?,
            b,
            c,
        })
    }
}

/// A Monte Carlo estimate with its standard error and the effective sample
/// size of the weights that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub ess: f64,
}

/// An empirical quantile with a distribution-free 95% interval from the
/// binomial law of the order statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub threshold: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// 0-based index of the `⌈p·m⌉`-th smallest of `m` values. Products that are
/// integers up to rounding are not bumped to the next order statistic.
pub fn order_index(p: f64, m: usize) -> usize {
    let x = p * m as f64;
    let k = if (x - x.round()).abs() < 1e-9 { x.round() } else { x.ceil() };
    (k.max(1.0) as usize).min(m) - 1
}

fn quantile_with_ci(sorted: &[f64], p: f64) -> Calibration {
    let m = sorted.len();
    let k = order_index(p, m);
    let half = 1.959964 * (m as f64 * p * (1.0 - p)).sqrt();
    let lo = (k as f64 - half).floor().max(0.0) as usize;
    let hi = ((k as f64 + half).ceil() as usize).min(m - 1);
    Calibration {
        threshold: sorted[k],
        ci_lo: sorted[lo],
        ci_hi: sorted[hi],
    }
}

fn mean_and_stderr(sum: f64, sum_sq: f64, m: usize) -> (f64, f64) {
    let n = m as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    (mean, (var / n).sqrt())
}

/// `(Δ_j, J_j)` for `M` independent paths on a common grid.
#[derive(Debug, Clone)]
pub struct Ensemble {
    delta: Vec<f64>,
    j: Vec<f64>,
    drift: f64,
    n_steps: usize,
    seed: u64,
    resampled: u64,
}

impl Ensemble {
    /// Standard Wiener paths; path `i` uses substream `i` of `seed`.
    pub fn wiener(config: &McConfig) -> Result<Self> {
        Self::simulate(0.0, config.seed, config)
    }

    /// OU paths with drift `u`, drawn from a keystream separate from the
    /// Wiener ensemble of the same seed.
    pub fn ou(u: f64, config: &McConfig) -> Result<Self> {
        if !(u >= 0.0 && u.is_finite()) {
            return Err(invalid(format!("OU drift must be nonnegative, got {u}")));
        }
        Self::simulate(u, derive_seed(config.seed, &format!("ou:{u}")), config)
    }

    fn simulate(u: f64, seed: u64, config: &McConfig) -> Result<Self> {
        config.validate()?;
        let n_steps = config.n_steps;
        let draws = map_indexed(config.trials, config.workers, |i| {
            let mut rng = RngStream::new(seed, i as u64).rng();
            let mut resampled = 0u64;
            loop {
                let (delta, j) = streamed_functionals(&mut rng, u, n_steps);
                if j > 0.0 {
                    return Ok((delta, j, resampled));
                }
                resampled += 1;
            }
        })?;
        let mut delta = Vec::with_capacity(draws.len());
        let mut j = Vec::with_capacity(draws.len());
        let mut resampled = 0;
        for (d, jj, r) in draws {
            delta.push(d);
            j.push(jj);
            resampled += r;
        }
        Ok(Self {
            delta,
            j,
            drift: u,
            n_steps,
            seed: config.seed,
            resampled,
        })
    }

    /// Builds an ensemble from precomputed `(Δ, J)` pairs.
    pub fn from_pairs(pairs: &[(f64, f64)], n_steps: usize, seed: u64) -> Result<Self> {
        if pairs.len() < 2 {
            return Err(invalid("an ensemble needs at least 2 paths"));
        }
        if let Some((_, j)) = pairs.iter().find(|(_, j)| !(*j > 0.0)) {
            return Err(Error::DegeneratePath(format!("J = {j}")));
        }
        Ok(Self {
            delta: pairs.iter().map(|p| p.0).collect(),
            j: pairs.iter().map(|p| p.1).collect(),
            drift: 0.0,
            n_steps,
            seed,
            resampled: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.delta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delta.is_empty()
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Paths redrawn because `J` came out as exactly zero.
    pub fn resampled(&self) -> u64 {
        self.resampled
    }

    pub fn deltas(&self) -> &[f64] {
        &self.delta
    }

    pub fn js(&self) -> &[f64] {
        &self.j
    }

    pub fn summary(&self, i: usize) -> StatSummary {
        StatSummary::new(self.delta[i], self.j[i]).expect("ensemble paths are non-degenerate")
    }

    pub fn functional_values(&self, functional: Functional) -> Vec<f64> {
        let pairs = self.delta.iter().zip(&self.j);
        match functional {
            Functional::Lambda => pairs.map(|(d, j)| d / (2.0 * j).sqrt()).collect(),
            Functional::Gamma => pairs.map(|(d, j)| d / j).collect(),
            Functional::J => self.j.clone(),
        }
    }

    /// Thresholds for every `ε` in `epsilons`, sorting the functional once.
    /// `Λ` and `Γ` use the `(1−ε)` quantile, `J` the `ε` quantile.
    pub fn calibrate_many(&self, functional: Functional, epsilons: &[f64]) -> Result<Vec<Calibration>> {
        for &e in epsilons {
            check_epsilon(e)?;
        }
        let mut values = self.functional_values(functional);
        values.sort_unstable_by(f64::total_cmp);
        Ok(epsilons
            .iter()
            .map(|&e| {
                let p = if functional == Functional::J { e } else { 1.0 - e };
                quantile_with_ci(&values, p)
            })
            .collect())
    }

    pub fn calibrate(&self, functional: Functional, epsilon: f64) -> Result<Calibration> {
        Ok(self.calibrate_many(functional, &[epsilon])?[0])
    }

    pub fn thresholds(&self, epsilon: f64) -> Result<Thresholds> {
        Thresholds::new(
            epsilon,
            self.calibrate(Functional::Lambda, epsilon)?.threshold,
            self.calibrate(Functional::Gamma, epsilon)?.threshold,
        )
    }

    fn rejects(&self, test: LimitTest, th: &Thresholds, i: usize) -> bool {
        let (d, j) = (self.delta[i], self.j[i]);
        match test {
            LimitTest::Score => d > th.a,
            LimitTest::Lr => d / (2.0 * j).sqrt() > th.b,
            LimitTest::Wald => d / j > th.c,
        }
    }

    fn weight(&self, u: f64, i: usize) -> f64 {
        (u * self.delta[i] - u * u * self.j[i] / 2.0).exp()
    }

    /// Kish effective sample size `(ΣZ)²/ΣZ²` of the weights at `u`.
    pub fn effective_sample_size(&self, u: f64) -> f64 {
        let (mut s, mut s2) = (0.0, 0.0);
        for i in 0..self.len() {
            let w = self.weight(u, i);
            s += w;
            s2 += w * w;
        }
        if s2 > 0.0 {
            s * s / s2
        } else {
            0.0
        }
    }

    fn weighted_mean(&self, u: f64, mut summand: impl FnMut(usize) -> f64) -> Estimate {
        let (mut s, mut s2) = (0.0, 0.0);
        for i in 0..self.len() {
            let x = self.weight(u, i) * summand(i);
            s += x;
            s2 += x * x;
        }
        let (value, stderr) = mean_and_stderr(s, s2, self.len());
        Estimate {
            value,
            stderr,
            ess: self.effective_sample_size(u),
        }
    }

    /// Empirical mean of `Z(u)`; equals 1 in expectation.
    pub fn z_mean(&self, u: f64) -> Estimate {
        self.weighted_mean(u, |_| 1.0)
    }

    /// `(1/M)·Σ Z_j(u)·1{statistic_j > threshold}`.
    pub fn reweighted_power(&self, test: LimitTest, u: f64, th: &Thresholds) -> Estimate {
        self.weighted_mean(u, |i| f64::from(u8::from(self.rejects(test, th, i))))
    }

    /// `d_ε(u)`: the `(1−ε)` quantile of `ln Z_j(u)` across the ensemble.
    pub fn np_threshold(&self, u: f64, epsilon: f64) -> Result<f64> {
        check_epsilon(epsilon)?;
        let mut ln_z: Vec<f64> = (0..self.len())
            .map(|i| u * self.delta[i] - u * u * self.j[i] / 2.0)
            .collect();
        let k = order_index(1.0 - epsilon, ln_z.len());
        let (_, v, _) = ln_z.select_nth_unstable_by(k, f64::total_cmp);
        Ok(*v)
    }

    /// `d_ε(u)` for several levels at once, with order-statistic intervals.
    pub fn np_calibrate_many(&self, u: f64, epsilons: &[f64]) -> Result<Vec<Calibration>> {
        for &e in epsilons {
            check_epsilon(e)?;
        }
        let mut ln_z: Vec<f64> = (0..self.len())
            .map(|i| u * self.delta[i] - u * u * self.j[i] / 2.0)
            .collect();
        ln_z.sort_unstable_by(f64::total_cmp);
        Ok(epsilons.iter().map(|&e| quantile_with_ci(&ln_z, 1.0 - e)).collect())
    }

    /// Neyman-Pearson envelope `β°(u)` and the threshold `d_ε(u)`. At `u = 0`
    /// the statistic is identically zero and the envelope is `ε` itself.
    pub fn np_envelope(&self, u: f64, epsilon: f64) -> Result<(Estimate, f64)> {
        check_epsilon(epsilon)?;
        if u == 0.0 {
            let est = Estimate {
                value: epsilon,
                stderr: 0.0,
                ess: self.len() as f64,
            };
            return Ok((est, 0.0));
        }
        let d = self.np_threshold(u, epsilon)?;
        let est = self.weighted_mean(u, |i| {
            let ln_z = u * self.delta[i] - u * u * self.j[i] / 2.0;
            f64::from(u8::from(ln_z > d))
        });
        Ok((est, d))
    }

    /// `E₀[Z(u)·(1{upper rejects} − 1{lower rejects})]` on common paths,
    /// so the standard error reflects the paired difference.
    pub fn reweighted_gap(
        &self,
        upper: CurveTest,
        lower: CurveTest,
        u: f64,
        th: &Thresholds,
    ) -> Result<Estimate> {
        let d = if (upper == CurveTest::Np || lower == CurveTest::Np) && u > 0.0 {
            self.np_threshold(u, th.epsilon)?
        } else {
            0.0
        };
        let hit = |t: CurveTest, i: usize| -> f64 {
            let r = match t {
                CurveTest::Score => self.rejects(LimitTest::Score, th, i),
                CurveTest::Lr => self.rejects(LimitTest::Lr, th, i),
                CurveTest::Wald => self.rejects(LimitTest::Wald, th, i),
                // at u = 0 the envelope is the randomized test of level ε
                CurveTest::Np if u == 0.0 => return th.epsilon,
                CurveTest::Np => u * self.delta[i] - u * u * self.j[i] / 2.0 > d,
            };
            f64::from(u8::from(r))
        };
        Ok(self.weighted_mean(u, |i| hit(upper, i) - hit(lower, i)))
    }

    /// Plain rejection frequency (no reweighting); used on OU ensembles.
    pub fn direct_power(&self, test: LimitTest, th: &Thresholds) -> Estimate {
        let hits = (0..self.len()).filter(|&i| self.rejects(test, th, i)).count();
        let m = self.len() as f64;
        let p = hits as f64 / m;
        Estimate {
            value: p,
            stderr: (p * (1.0 - p) / m).sqrt(),
            ess: m,
        }
    }

    /// Limit power curves of all four procedures on a common set of paths.
    pub fn power_curves(&self, th: &Thresholds, grid: &[f64]) -> Result<Vec<PowerCurve>> {
        let mut curves: Vec<PowerCurve> = CurveTest::ALL
            .iter()
            .map(|&test| PowerCurve {
                test,
                epsilon: th.epsilon,
                points: Vec::with_capacity(grid.len()),
            })
            .collect();
        for &u in grid {
            if !(u >= 0.0 && u.is_finite()) {
                return Err(invalid(format!("u grid values must be nonnegative, got {u}")));
            }
            let score = Estimate {
                value: limit_power_score(u, th.epsilon)?,
                stderr: 0.0,
                ess: f64::INFINITY,
            };
            let lr = self.reweighted_power(LimitTest::Lr, u, th);
            let wald = self.reweighted_power(LimitTest::Wald, u, th);
            let (np, _) = self.np_envelope(u, th.epsilon)?;
            for (curve, est) in curves.iter_mut().zip([score, lr, wald, np]) {
                curve.points.push(PowerPoint {
                    u,
                    power: est.value,
                    stderr: est.stderr,
                });
            }
        }
        Ok(curves)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerPoint {
    pub u: f64,
    pub power: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerCurve {
    pub test: CurveTest,
    pub epsilon: f64,
    pub points: Vec<PowerPoint>,
}

/// Calibrates one threshold from a fresh Wiener ensemble.
pub fn calibrate_threshold(functional: Functional, epsilon: f64, mc: &McConfig) -> Result<Calibration> {
    check_epsilon(epsilon)?;
    Ensemble::wiener(mc)?.calibrate(functional, epsilon)
}

pub fn limit_power_reweighted(test: LimitTest, u: f64, th: &Thresholds, mc: &McConfig) -> Result<Estimate> {
    if !(u >= 0.0) {
        return Err(invalid(format!("u must be nonnegative, got {u}")));
    }
    Ok(Ensemble::wiener(mc)?.reweighted_power(test, u, th))
}

pub fn np_envelope(u: f64, epsilon: f64, mc: &McConfig) -> Result<(Estimate, f64)> {
    if !(u >= 0.0) {
        return Err(invalid(format!("u must be nonnegative, got {u}")));
    }
    Ensemble::wiener(mc)?.np_envelope(u, epsilon)
}

/// Direct (non-reweighted) power from simulated OU paths with drift `u`.
pub fn ou_cross_check(test: LimitTest, u: f64, th: &Thresholds, mc: &McConfig) -> Result<Estimate> {
    Ok(Ensemble::ou(u, mc)?.direct_power(test, th))
}
