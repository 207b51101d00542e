//! Python bindings for `sctest_core`.
//!
//! Paths, shapes, test configurations and null ensembles are exposed as
//! classes; simulation, the closed-form limit quantities, the sequential test
//! and the experiment commands as functions. Errors surface as `ValueError`,
//! or `OSError` for file-system problems.

use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

use sctest_core::experiment::{self, Command, Settings};
use sctest_core::limit::{self, CurveTest, Functional, LimitTest, McConfig, Thresholds};
use sctest_core::{sim, statistics, Error, RngStream};

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Io(e) => PyOSError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for sctest_core::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

fn parse_limit_test(name: &str) -> PyResult<LimitTest> {
    match CurveTest::parse(name) {
        Some(CurveTest::Score) => Ok(LimitTest::Score),
        Some(CurveTest::Lr) => Ok(LimitTest::Lr),
        Some(CurveTest::Wald) => Ok(LimitTest::Wald),
        _ => Err(PyValueError::new_err(format!("unknown test {name:?}; expected score, lr or wald"))),
    }
}

fn parse_functional(name: &str) -> PyResult<Functional> {
    match name {
        "lambda" | "b" => Ok(Functional::Lambda),
        "gamma" | "c" => Ok(Functional::Gamma),
        "j" | "e" => Ok(Functional::J),
        _ => Err(PyValueError::new_err(format!("unknown functional {name:?}; expected lambda, gamma or j"))),
    }
}

/// Shape function ψ of the self-correcting intensity `S*·ψ(ϑ(S*t − X_t))`.
#[pyclass(module = "sctest", name = "Psi", frozen, from_py_object)]
#[derive(Clone)]
struct PyPsi(sctest_core::PsiSpec);

#[pymethods]
impl PyPsi {
    #[staticmethod]
    #[pyo3(signature = (slope=1.0))]
    fn exponential(slope: f64) -> PyResult<Self> {
        Ok(Self(sctest_core::PsiSpec::exponential(slope).py()?))
    }

    #[staticmethod]
    fn logistic(slope: f64) -> PyResult<Self> {
        Ok(Self(sctest_core::PsiSpec::logistic(slope).py()?))
    }

    /// `"exp"` or the path of a shape spec file.
    #[staticmethod]
    fn from_selector(selector: &str) -> PyResult<Self> {
        Ok(Self(sctest_core::PsiSpec::from_selector(selector).py()?))
    }

    fn with_thinning(&self) -> Self {
        Self(self.0.clone().with_thinning())
    }

    fn value(&self, x: f64) -> f64 {
        self.0.value(x)
    }

    fn deriv_at_zero(&self) -> f64 {
        self.0.deriv_at_zero()
    }

    fn __repr__(&self) -> String {
        format!("Psi({})", self.0.describe())
    }
}

/// Event times of a point process on `[0, horizon]`.
#[pyclass(module = "sctest", name = "PointProcessPath", frozen)]
struct PyPath(sctest_core::PointProcessPath);

#[pymethods]
impl PyPath {
    #[new]
    fn new(rate: f64, horizon: f64, events: Vec<f64>) -> PyResult<Self> {
        Ok(Self(sctest_core::PointProcessPath::new(rate, horizon, events).py()?))
    }

    #[getter]
    fn rate(&self) -> f64 {
        self.0.rate()
    }

    #[getter]
    fn horizon(&self) -> f64 {
        self.0.horizon()
    }

    #[getter]
    fn events(&self) -> Vec<f64> {
        self.0.events().to_vec()
    }

    fn count(&self) -> usize {
        self.0.count()
    }

    fn count_at(&self, t: f64) -> usize {
        self.0.count_at(t)
    }

    fn __len__(&self) -> usize {
        self.0.count()
    }

    fn __repr__(&self) -> String {
        format!(
            "PointProcessPath(rate={}, horizon={}, events={})",
            self.0.rate(),
            self.0.horizon(),
            self.0.count()
        )
    }
}

#[pyfunction]
#[pyo3(signature = (rate, horizon, seed, index=0))]
fn simulate_poisson(rate: f64, horizon: f64, seed: u64, index: u64) -> PyResult<PyPath> {
    Ok(PyPath(sim::simulate_poisson(rate, horizon, &RngStream::new(seed, index)).py()?))
}

#[pyfunction]
#[pyo3(signature = (psi, theta, rate, horizon, seed, index=0))]
fn simulate_self_correcting(psi: &PyPsi, theta: f64, rate: f64, horizon: f64, seed: u64, index: u64) -> PyResult<PyPath> {
    let stream = RngStream::new(seed, index);
    Ok(PyPath(sim::simulate_self_correcting(&psi.0, theta, rate, horizon, &stream).py()?))
}

/// Wiener path values on the grid `k/n_steps`, `k = 0..=n_steps`.
#[pyfunction]
#[pyo3(signature = (n_steps, seed, index=0))]
fn simulate_wiener(n_steps: usize, seed: u64, index: u64) -> PyResult<Vec<f64>> {
    Ok(sim::simulate_wiener(n_steps, &RngStream::new(seed, index)).py()?.values().to_vec())
}

/// Ornstein-Uhlenbeck path `dY = −u·Y dt + dW` from the exact transition.
#[pyfunction]
#[pyo3(signature = (u, n_steps, seed, index=0))]
fn simulate_ou(u: f64, n_steps: usize, seed: u64, index: u64) -> PyResult<Vec<f64>> {
    Ok(sim::simulate_ou(u, n_steps, &RngStream::new(seed, index)).py()?.values().to_vec())
}

#[pyclass(module = "sctest", name = "Verdict", frozen, get_all, skip_from_py_object)]
#[derive(Clone)]
struct PyVerdict {
    reject: bool,
    statistic: f64,
    threshold: f64,
}

impl From<statistics::TestVerdict> for PyVerdict {
    fn from(v: statistics::TestVerdict) -> Self {
        Self {
            reject: v.reject,
            statistic: v.statistic_value,
            threshold: v.threshold,
        }
    }
}

#[pymethods]
impl PyVerdict {
    fn __repr__(&self) -> String {
        format!(
            "Verdict(reject={}, statistic={}, threshold={})",
            if self.reject { "True" } else { "False" },
            self.statistic,
            self.threshold
        )
    }
}

/// Per-path statistics and the three verdicts.
#[pyclass(module = "sctest", name = "PathReport", frozen, get_all)]
struct PyPathReport {
    count: usize,
    delta: f64,
    j: f64,
    mle_u: f64,
    max_log_likelihood: f64,
    mle_at_boundary: bool,
    score: PyVerdict,
    lr: PyVerdict,
    wald: PyVerdict,
}

/// Null rate, horizon, shape and level shared by the finite-horizon tests.
#[pyclass(module = "sctest", name = "TestConfig", frozen)]
struct PyTestConfig(statistics::TestConfig);

#[pymethods]
impl PyTestConfig {
    #[new]
    #[pyo3(signature = (rate, horizon, psi=None, epsilon=0.05, alt_upper=None))]
    fn new(rate: f64, horizon: f64, psi: Option<PyPsi>, epsilon: f64, alt_upper: Option<f64>) -> PyResult<Self> {
        let psi = psi.map_or_else(sctest_core::PsiSpec::exp, |p| p.0);
        let mut cfg = statistics::TestConfig::new(rate, horizon, psi, epsilon).py()?;
        if let Some(upper) = alt_upper {
            cfg = cfg.with_alt_upper(upper).py()?;
        }
        Ok(Self(cfg))
    }

    #[getter]
    fn alt_upper(&self) -> Option<f64> {
        self.0.alt_upper()
    }

    /// Local parameter `u` mapped to `ϑ`.
    fn theta(&self, u: f64) -> f64 {
        self.0.theta(u)
    }

    fn delta(&self, path: &PyPath) -> PyResult<f64> {
        statistics::delta_t(&path.0, &self.0).py()
    }

    fn j(&self, path: &PyPath) -> PyResult<f64> {
        statistics::j_t(&path.0, &self.0).py()
    }

    fn log_likelihood(&self, u: f64, path: &PyPath) -> PyResult<f64> {
        statistics::log_likelihood(u, &path.0, &self.0).py()
    }

    /// `(u_hat, log_likelihood, at_boundary)`.
    fn mle(&self, path: &PyPath) -> PyResult<(f64, f64, bool)> {
        let m = statistics::mle_u(&path.0, &self.0).py()?;
        Ok((m.u, m.log_likelihood, m.at_boundary))
    }

    fn score_test(&self, path: &PyPath) -> PyResult<PyVerdict> {
        Ok(statistics::score_test(&path.0, &self.0).py()?.into())
    }

    fn evaluate(&self, path: &PyPath, b_eps: f64, c_eps: f64) -> PyResult<PyPathReport> {
        let r = statistics::evaluate_path(&path.0, &self.0, b_eps, c_eps).py()?;
        Ok(PyPathReport {
            count: r.stats.count,
            delta: r.stats.delta,
            j: r.stats.j,
            mle_u: r.mle.u,
            max_log_likelihood: r.mle.log_likelihood,
            mle_at_boundary: r.mle.at_boundary,
            score: r.score.into(),
            lr: r.lr.into(),
            wald: r.wald.into(),
        })
    }
}

#[pyfunction]
fn a_epsilon(epsilon: f64) -> PyResult<f64> {
    limit::a_epsilon(epsilon).py()
}

#[pyfunction]
fn h_of_u(u: f64) -> PyResult<f64> {
    limit::h_of_u(u).py()
}

/// Closed-form limiting power of the score test.
#[pyfunction]
fn limit_power_score(u: f64, epsilon: f64) -> PyResult<f64> {
    limit::limit_power_score(u, epsilon).py()
}

/// `(Δ, J)` pairs of `M` simulated paths, under the null or an OU drift.
#[pyclass(module = "sctest", name = "Ensemble", frozen)]
struct PyEnsemble(limit::Ensemble);

#[pymethods]
impl PyEnsemble {
    #[staticmethod]
    #[pyo3(signature = (trials, n_steps, seed, workers=None))]
    fn wiener(trials: usize, n_steps: usize, seed: u64, workers: Option<usize>) -> PyResult<Self> {
        let mut mc = McConfig::new(trials, n_steps, seed);
        if let Some(w) = workers {
            mc = mc.with_workers(w);
        }
        Ok(Self(limit::Ensemble::wiener(&mc).py()?))
    }

    #[staticmethod]
    #[pyo3(signature = (u, trials, n_steps, seed, workers=None))]
    fn ou(u: f64, trials: usize, n_steps: usize, seed: u64, workers: Option<usize>) -> PyResult<Self> {
        let mut mc = McConfig::new(trials, n_steps, seed);
        if let Some(w) = workers {
            mc = mc.with_workers(w);
        }
        Ok(Self(limit::Ensemble::ou(u, &mc).py()?))
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn deltas(&self) -> Vec<f64> {
        self.0.deltas().to_vec()
    }

    fn js(&self) -> Vec<f64> {
        self.0.js().to_vec()
    }

    /// `(threshold, ci_lo, ci_hi)` for `lambda`, `gamma` or `j`.
    fn calibrate(&self, functional: &str, epsilon: f64) -> PyResult<(f64, f64, f64)> {
        let c = self.0.calibrate(parse_functional(functional)?, epsilon).py()?;
        Ok((c.threshold, c.ci_lo, c.ci_hi))
    }

    /// `(a, b, c)` at level `epsilon`.
    fn thresholds(&self, epsilon: f64) -> PyResult<(f64, f64, f64)> {
        let t = self.0.thresholds(epsilon).py()?;
        Ok((t.a, t.b, t.c))
    }

    fn z_mean(&self, u: f64) -> (f64, f64) {
        let z = self.0.z_mean(u);
        (z.value, z.stderr)
    }

    fn effective_sample_size(&self, u: f64) -> f64 {
        self.0.effective_sample_size(u)
    }

    /// `(power, stderr)` of `test` at drift `u`, reweighting this null
    /// ensemble with thresholds `b`, `c` at level `epsilon`.
    fn reweighted_power(&self, test: &str, u: f64, epsilon: f64, b: f64, c: f64) -> PyResult<(f64, f64)> {
        let th = Thresholds::new(epsilon, b, c).py()?;
        let e = self.0.reweighted_power(parse_limit_test(test)?, u, &th);
        Ok((e.value, e.stderr))
    }

    /// `(power, stderr, d_threshold)` of the Neyman-Pearson envelope.
    fn np_envelope(&self, u: f64, epsilon: f64) -> PyResult<(f64, f64, f64)> {
        let (e, d) = self.0.np_envelope(u, epsilon).py()?;
        Ok((e.value, e.stderr, d))
    }
}

#[pyclass(module = "sctest", name = "SequentialOutcome", frozen, get_all)]
struct PySequentialOutcome {
    reject: bool,
    statistic: f64,
    threshold: f64,
    stopping_time: f64,
    events: u64,
}

/// Score test stopped when the accumulated information reaches `d_bound²`.
#[pyfunction]
#[pyo3(signature = (psi, theta, rate, d_bound, epsilon, seed, index=0))]
fn sequential_score_test(
    psi: &PyPsi,
    theta: f64,
    rate: f64,
    d_bound: f64,
    epsilon: f64,
    seed: u64,
    index: u64,
) -> PyResult<PySequentialOutcome> {
    let stream = RngStream::new(seed, index);
    let o = sctest_core::sequential_score_test(&psi.0, theta, rate, d_bound, epsilon, &stream).py()?;
    Ok(PySequentialOutcome {
        reject: o.verdict.reject,
        statistic: o.statistic,
        threshold: o.verdict.threshold,
        stopping_time: o.stopping_time,
        events: o.events,
    })
}

/// Runs an experiment command with `key=value` settings, as the `sctest`
/// binary does. Returns `(report, written_files, warnings)`.
#[pyfunction]
#[pyo3(signature = (command, settings=Vec::new()))]
fn run_command(command: &str, settings: Vec<(String, String)>) -> PyResult<(String, Vec<PathBuf>, Vec<String>)> {
    let command = Command::parse(command).py()?;
    let mut s = Settings::new();
    for (key, value) in settings {
        s.set(&key, value).py()?;
    }
    let mut out = experiment::run(command, &s).py()?;
    out.files.extend(out.manifest.take());
    Ok((out.report, out.files, out.warnings))
}

#[pymodule]
fn sctest(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPsi>()?;
    m.add_class::<PyPath>()?;
    m.add_class::<PyTestConfig>()?;
    m.add_class::<PyVerdict>()?;
    m.add_class::<PyPathReport>()?;
    m.add_class::<PyEnsemble>()?;
    m.add_class::<PySequentialOutcome>()?;
    m.add_function(wrap_pyfunction!(simulate_poisson, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_self_correcting, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_wiener, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_ou, m)?)?;
    m.add_function(wrap_pyfunction!(a_epsilon, m)?)?;
    m.add_function(wrap_pyfunction!(h_of_u, m)?)?;
    m.add_function(wrap_pyfunction!(limit_power_score, m)?)?;
    m.add_function(wrap_pyfunction!(sequential_score_test, m)?)?;
    m.add_function(wrap_pyfunction!(run_command, m)?)?;
    Ok(())
}
