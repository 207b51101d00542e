//! Shape functions ψ of the self-correcting alternative.
//!
//! The alternative intensity is `S*·ψ(ϑ(S*t − X_t))` with `ψ(0) = 1` and
//! `ψ'(0) > 0`. The derivative at zero is always supplied by the shape, never
//! differentiated numerically, since it fixes the local scale `γ = S*·ψ'(0)`.

use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};

/// User-provided shape. Implementations must satisfy `value(0) = 1`,
/// `deriv_at_zero() > 0` and `local_bound(lo, hi) >= sup_{[lo, hi]} value`.
pub trait PsiFunction: Send + Sync + fmt::Debug {
    fn value(&self, x: f64) -> f64;
    fn deriv_at_zero(&self) -> f64;
    fn local_bound(&self, lo: f64, hi: f64) -> f64;
    fn name(&self) -> String {
        "custom".to_string()
    }
}

#[derive(Clone, Debug)]
pub enum PsiShape {
    /// `ψ(x) = exp(slope·x)`.
    Exponential { slope: f64 },
    /// `ψ(x) = 2 / (1 + exp(−2·slope·x))`, bounded in (0, 2).
    Logistic { slope: f64 },
    Custom(Arc<dyn PsiFunction>),
}

#[derive(Clone, Debug)]
pub struct PsiSpec {
    shape: PsiShape,
    force_thinning: bool,
}

impl PsiSpec {
    pub fn exponential(slope: f64) -> Result<Self> {
        if !(slope > 0.0 && slope.is_finite()) {
            return Err(invalid(format!("exponential slope must be positive, got {slope}")));
        }
        Ok(Self {
            shape: PsiShape::Exponential { slope },
            force_thinning: false,
        })
    }

    /// The reference shape `ψ(x) = eˣ`.
    pub fn exp() -> Self {
        Self::exponential(1.0).expect("unit slope is valid")
    }

    pub fn logistic(slope: f64) -> Result<Self> {
        if !(slope > 0.0 && slope.is_finite()) {
            return Err(invalid(format!("logistic slope must be positive, got {slope}")));
        }
        Ok(Self {
            shape: PsiShape::Logistic { slope },
            force_thinning: false,
        })
    }

    pub fn custom(f: Arc<dyn PsiFunction>) -> Result<Self> {
        let at_zero = f.value(0.0);
        if (at_zero - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("psi(0) must equal 1, got {at_zero}")));
        }
        let d = f.deriv_at_zero();
        if !(d > 0.0 && d.is_finite()) {
            return Err(invalid(format!("psi'(0) must be positive, got {d}")));
        }
        Ok(Self {
            shape: PsiShape::Custom(f),
            force_thinning: false,
        })
    }

    /// Same shape, but closed-form integration is disabled: simulation falls
    /// back to thinning and the likelihood to quadrature.
    pub fn with_thinning(mut self) -> Self {
        self.force_thinning = true;
        self
    }

    pub fn shape(&self) -> &PsiShape {
        &self.shape
    }

    pub fn value(&self, x: f64) -> f64 {
        match &self.shape {
            PsiShape::Exponential { slope } => (slope * x).exp(),
            PsiShape::Logistic { slope } => 2.0 / (1.0 + (-2.0 * slope * x).exp()),
            PsiShape::Custom(f) => f.value(x),
        }
    }

    /// `ln ψ(x)`; exact (no round trip through `exp`) for the exponential shape.
    pub fn ln_value(&self, x: f64) -> f64 {
        match &self.shape {
            PsiShape::Exponential { slope } => slope * x,
            PsiShape::Logistic { slope } => std::f64::consts::LN_2 - (-2.0 * slope * x).exp().ln_1p(),
            PsiShape::Custom(f) => f.value(x).ln(),
        }
    }

    pub fn deriv_at_zero(&self) -> f64 {
        match &self.shape {
            PsiShape::Exponential { slope } | PsiShape::Logistic { slope } => *slope,
            PsiShape::Custom(f) => f.deriv_at_zero(),
        }
    }

    /// Upper bound of ψ on `[lo, hi]` (arguments in either order).
    pub fn local_bound(&self, lo: f64, hi: f64) -> f64 {
        let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        match &self.shape {
            // both built-in shapes are increasing
            PsiShape::Exponential { .. } | PsiShape::Logistic { .. } => self.value(hi),
            PsiShape::Custom(f) => f.local_bound(lo, hi),
        }
    }

    pub fn exact_integrable(&self) -> bool {
        !self.force_thinning && matches!(self.shape, PsiShape::Exponential { .. })
    }

    /// Slope κ when the closed-form exponential routines apply.
    pub(crate) fn exp_slope(&self) -> Option<f64> {
        match self.shape {
            PsiShape::Exponential { slope } if !self.force_thinning => Some(slope),
            _ => None,
        }
    }

    /// The log-likelihood in `u` is concave for the exponential shape: the
    /// compensator is a sum of convex exponentials and `ln ψ` is linear.
    pub(crate) fn concave_log_likelihood(&self) -> bool {
        matches!(self.shape, PsiShape::Exponential { .. })
    }

    /// Parses a shape description in flat `key = value` form:
    ///
    /// ```text
    /// kind = logistic
    /// slope = 0.5
    /// thinning = true
    /// ```
    pub fn from_spec_text(text: &str) -> Result<Self> {
        let mut kind = None;
        let mut slope = 1.0;
        let mut thinning = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                invalid(format!("psi spec line {}: expected key = value", lineno + 1))
            })?;
            let value = value.trim();
            match key.trim() {
                "kind" => kind = Some(value.to_string()),
                "slope" => {
                    slope = value
                        .parse()
                        .map_err(|_| invalid(format!("psi spec: bad slope {value:?}")))?
                }
                "thinning" => {
                    thinning = value
                        .parse()
                        .map_err(|_| invalid(format!("psi spec: bad thinning flag {value:?}")))?
                }
                other => return Err(invalid(format!("psi spec: unknown key {other:?}"))),
            }
        }
        let spec = match kind.as_deref() {
            Some("exp") | Some("exponential") => Self::exponential(slope)?,
            Some("logistic") => Self::logistic(slope)?,
            Some(other) => return Err(invalid(format!("psi spec: unknown kind {other:?}"))),
            None => return Err(invalid("psi spec: missing `kind`")),
        };
        Ok(if thinning { spec.with_thinning() } else { spec })
    }

    /// Selector used on the command line: `exp` or a path to a spec file.
    pub fn from_selector(selector: &str) -> Result<Self> {
        match selector {
            "exp" => Ok(Self::exp()),
            path => {
                let text = std::fs::read_to_string(path).map_err(Error::Io)?;
                Self::from_spec_text(&text)
            }
        }
    }

    pub fn describe(&self) -> String {
        let base = match &self.shape {
            PsiShape::Exponential { slope } => format!("exp(slope={slope})"),
            PsiShape::Logistic { slope } => format!("logistic(slope={slope})"),
            PsiShape::Custom(f) => f.name(),
        };
        if self.force_thinning {
            format!("{base}+thinning")
        } else {
            base
        }
    }
}
