//! Exact samplers for the Wiener, Ornstein-Uhlenbeck, Poisson and
//! self-correcting processes.
//!
//! Self-correcting paths with intensity `λ(t) = S·ψ(ϑ(S·t − X_t))` are drawn
//! by inverting the integrated intensity when ψ is exponential (the
//! compensator between events is `y·(e^{a·S·s} − 1)/a` with `a = κϑ`), and by
//! Ogata thinning against `PsiSpec::local_bound` otherwise.

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::path::{OuPath, PointProcessPath, WienerPath};
use crate::psi::PsiSpec;
use crate::rng::RngStream;

pub const DEFAULT_WIENER_STEPS: usize = 10_000;

/// Thinning windows are shrunk until the envelope is within this factor of
/// the current intensity.
const THINNING_ENVELOPE_FACTOR: f64 = 4.0;

fn check_steps(n_steps: usize) -> Result<()> {
    if n_steps < 2 {
        return Err(invalid(format!("n_steps must be at least 2, got {n_steps}")));
    }
    Ok(())
}

pub fn simulate_wiener(n_steps: usize, stream: &RngStream) -> Result<WienerPath> {
    let mut rng = stream.rng();
    simulate_wiener_from(n_steps, || rng.sample(StandardNormal))
}

/// Wiener path driven by an arbitrary source of standard normal draws.
pub fn simulate_wiener_from(n_steps: usize, mut normal: impl FnMut() -> f64) -> Result<WienerPath> {
    check_steps(n_steps)?;
    let sd = (1.0 / n_steps as f64).sqrt();
    let mut values = Vec::with_capacity(n_steps + 1);
    let mut w = 0.0;
    values.push(w);
    for _ in 0..n_steps {
        w += sd * normal();
        values.push(w);
    }
    WienerPath::new(values)
}

/// One-step coefficients of the exact OU transition over a step `h`:
/// `Y(s+h) = φ·Y(s) + σ·ξ`.
pub(crate) fn ou_step_coefficients(u: f64, h: f64) -> (f64, f64) {
    if u == 0.0 {
        (1.0, h.sqrt())
    } else {
        let phi = (-u * h).exp();
        let var = -(-2.0 * u * h).exp_m1() / (2.0 * u);
        (phi, var.sqrt())
    }
}

pub fn simulate_ou(u: f64, n_steps: usize, stream: &RngStream) -> Result<OuPath> {
    let mut rng = stream.rng();
    simulate_ou_from(u, n_steps, || rng.sample(StandardNormal))
}

pub fn simulate_ou_from(u: f64, n_steps: usize, mut normal: impl FnMut() -> f64) -> Result<OuPath> {
    if !(u >= 0.0 && u.is_finite()) {
        return Err(invalid(format!("OU drift must be nonnegative, got {u}")));
    }
    check_steps(n_steps)?;
    let (phi, sd) = ou_step_coefficients(u, 1.0 / n_steps as f64);
    let mut values = Vec::with_capacity(n_steps + 1);
    let mut y = 0.0;
    values.push(y);
    for _ in 0..n_steps {
        y = phi * y + sd * normal();
        values.push(y);
    }
    Ok(OuPath::from_values(u, values))
}

fn check_rate_horizon(rate: f64, horizon: f64) -> Result<()> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(invalid(format!("rate must be positive, got {rate}")));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(invalid(format!("horizon must be positive, got {horizon}")));
    }
    Ok(())
}

pub fn simulate_poisson(rate: f64, horizon: f64, stream: &RngStream) -> Result<PointProcessPath> {
    check_rate_horizon(rate, horizon)?;
    let mut rng = stream.rng();
    let mut events = Vec::with_capacity((rate * horizon * 1.1) as usize + 16);
    let mut t = 0.0;
    loop {
        let e: f64 = rng.sample(Exp1);
        t += e / rate;
        if t > horizon {
            break;
        }
        events.push(t);
    }
    Ok(PointProcessPath::from_sorted(rate, horizon, events))
}

#[derive(Debug, Clone, Copy)]
enum Method {
    Constant,
    /// `y = exp(a·(S·t − X_t))` is the current value of ψ.
    Inversion { a: f64, y: f64 },
    Thinning,
}

/// Event-by-event sampler of the self-correcting process. The sampler keeps
/// its position so that callers with data-dependent stopping rules can keep
/// drawing events.
#[derive(Debug)]
pub struct SelfCorrectingSampler<'a> {
    psi: &'a PsiSpec,
    theta: f64,
    rate: f64,
    time: f64,
    count: u64,
    method: Method,
}

impl<'a> SelfCorrectingSampler<'a> {
    pub fn new(psi: &'a PsiSpec, theta: f64, rate: f64) -> Result<Self> {
        if !(theta >= 0.0 && theta.is_finite()) {
            return Err(invalid(format!("theta must be nonnegative, got {theta}")));
        }
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(invalid(format!("rate must be positive, got {rate}")));
        }
        let method = if theta == 0.0 {
            Method::Constant
        } else if let Some(slope) = psi.exp_slope() {
            Method::Inversion {
                a: slope * theta,
                y: 1.0,
            }
        } else {
            Method::Thinning
        };
        Ok(Self {
            psi,
            theta,
            rate,
            time: 0.0,
            count: 0,
            method,
        })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    fn argument(&self, t: f64) -> f64 {
        self.theta * (self.rate * t - self.count as f64)
    }

    /// Next event time in `(time, limit]`, or `None` (with the clock moved to
    /// `limit`) when the process is silent up to `limit`.
    pub fn next_event<R: Rng + ?Sized>(&mut self, rng: &mut R, limit: f64) -> Result<Option<f64>> {
        match self.method {
            Method::Constant => {
                let e: f64 = rng.sample(Exp1);
                let cand = self.time + e / self.rate;
                Ok(self.settle(cand, limit))
            }
            Method::Inversion { a, y } => {
                let e: f64 = rng.sample(Exp1);
                let cand = self.time + (a * e / y).ln_1p() / (a * self.rate);
                let out = self.settle(cand, limit);
                self.method = Method::Inversion {
                    a,
                    y: (a * (self.rate * self.time - self.count as f64)).exp(),
                };
                Ok(out)
            }
            Method::Thinning => self.next_by_thinning(rng, limit),
        }
    }

    fn settle(&mut self, cand: f64, limit: f64) -> Option<f64> {
        if cand > limit {
            self.time = limit;
            None
        } else {
            self.time = cand;
            self.count += 1;
            Some(cand)
        }
    }

    fn next_by_thinning<R: Rng + ?Sized>(&mut self, rng: &mut R, limit: f64) -> Result<Option<f64>> {
        loop {
            if self.time >= limit {
                self.time = limit;
                return Ok(None);
            }
            let x0 = self.argument(self.time);
            let current = self.psi.value(x0);
            if !(current > 0.0 && current.is_finite()) {
                return Err(Error::Domain(format!("psi({x0}) = {current} is not a positive intensity")));
            }
            let mut window = (THINNING_ENVELOPE_FACTOR / (self.rate * current)).min(limit - self.time);
            let mut bound = self.psi.local_bound(x0, self.argument(self.time + window));
            let mut halvings = 0;
            while !(bound <= THINNING_ENVELOPE_FACTOR * current) && halvings < 64 {
                window *= 0.5;
                bound = self.psi.local_bound(x0, self.argument(self.time + window));
                halvings += 1;
            }
            if !(bound > 0.0 && bound.is_finite()) {
                return Err(Error::Domain(format!("psi envelope {bound} unusable at x = {x0}")));
            }
            let e: f64 = rng.sample(Exp1);
            let step = e / (self.rate * bound);
            if step >= window {
                self.time += window;
                continue;
            }
            let cand = self.time + step;
            let x = self.argument(cand);
            let value = self.psi.value(x);
            if value > bound {
                return Err(Error::BoundViolation { x, value, bound });
            }
            self.time = cand;
            let accept: f64 = rng.random();
            if accept * bound < value {
                self.count += 1;
                return Ok(Some(cand));
            }
        }
    }
}

pub fn simulate_self_correcting(
    psi: &PsiSpec,
    theta: f64,
    rate: f64,
    horizon: f64,
    stream: &RngStream,
) -> Result<PointProcessPath> {
    check_rate_horizon(rate, horizon)?;
    let mut sampler = SelfCorrectingSampler::new(psi, theta, rate)?;
    let mut rng = stream.rng();
    let mut events = Vec::with_capacity((rate * horizon * 1.1) as usize + 16);
    while let Some(t) = sampler.next_event(&mut rng, horizon)? {
        events.push(t);
    }
    Ok(PointProcessPath::from_sorted(rate, horizon, events))
}

/// `X_T` of a self-correcting path, without materializing event times.
///
/// For exponential ψ the event condition is evaluated in the scale-free
/// variable `w = ψ(x)/ψ(a(S·T − X))`, which is invariant across jumps, so each
/// event costs one exponential draw and no transcendental calls.
pub fn count_self_correcting(
    psi: &PsiSpec,
    theta: f64,
    rate: f64,
    horizon: f64,
    stream: &RngStream,
) -> Result<u64> {
    check_rate_horizon(rate, horizon)?;
    let mut sampler = SelfCorrectingSampler::new(psi, theta, rate)?;
    let mut rng = stream.rng();
    if let Method::Inversion { a, .. } = sampler.method {
        let total = a * rate * horizon;
        if total < 700.0 {
            let growth = a.exp();
            let mut q = (-total).exp();
            let mut w = q;
            let mut n = 0u64;
            loop {
                let e: f64 = rng.sample(Exp1);
                w += a * e * q;
                if w > 1.0 {
                    return Ok(n);
                }
                n += 1;
                q *= growth;
            }
        }
    }
    while sampler.next_event(&mut rng, horizon)?.is_some() {}
    Ok(sampler.count())
}
