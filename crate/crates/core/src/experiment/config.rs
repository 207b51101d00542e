//! Run configuration: flat `key = value` settings resolved per command.
//!
//! Settings come from an optional file (a previous run manifest works too)
//! overlaid by command-line flags. Keys mirror the long flag names.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{invalid, Error, Result};
use crate::limit::LimitTest;

/// Default master seed.
pub const DEFAULT_SEED: u64 = 20_240_601;
/// Trial count used by `--quick`.
pub const QUICK_TRIALS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Calibrate,
    PowerFinite,
    PowerLimit,
    Compare,
    Tables,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Calibrate => "calibrate",
            Command::PowerFinite => "power-finite",
            Command::PowerLimit => "power-limit",
            Command::Compare => "compare",
            Command::Tables => "tables",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        [
            Command::Calibrate,
            Command::PowerFinite,
            Command::PowerLimit,
            Command::Compare,
            Command::Tables,
        ]
        .into_iter()
        .find(|c| c.name() == s)
        .ok_or_else(|| invalid(format!("unknown command {s:?}")))
    }
}

/// Keys a manifest carries that are not run parameters.
const META_KEYS: &[&str] = &["command", "code_version", "wall_clock_seconds", "resampled_paths"];
const META_PREFIXES: &[&str] = &["checksum.", "ess."];

const CONFIG_KEYS: &[&str] = &[
    "rate",
    "horizon",
    "psi",
    "eps",
    "u-grid",
    "trials",
    "steps",
    "seed",
    "workers",
    "out",
    "quick",
    "thresholds",
    "input",
    "tests",
    "alt-upper",
    "clamp-u",
    "plot",
    "dump-paths",
];

/// Raw settings plus any checksums inherited from a manifest.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
    expected_checksums: BTreeMap<String, String>,
}

impl Settings {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses `key = value` lines; `#` starts a comment. Manifest metadata is
    /// skipped, and recorded checksums are kept for verification.
    pub fn from_text(text: &str, source: &str) -> Result<Self> {
        let mut out = Self::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Schema {
                source_name: source.to_string(),
                message: format!("line {}: expected key = value", lineno + 1),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if let Some(file) = key.strip_prefix("checksum.") {
                out.expected_checksums.insert(file.to_string(), value.to_string());
                continue;
            }
            if META_KEYS.contains(&key) || META_PREFIXES.iter().any(|p| key.starts_with(p)) {
                continue;
            }
            if !CONFIG_KEYS.contains(&key) {
                return Err(Error::Schema {
                    source_name: source.to_string(),
                    message: format!("line {}: unknown key {key:?}", lineno + 1),
                });
            }
            out.values.insert(key.to_string(), value.to_string());
        }
        Ok(out)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text, &path.display().to_string())
    }

    /// Sets (or overrides) one key.
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        if !CONFIG_KEYS.contains(&key) {
            return Err(invalid(format!("unknown setting {key:?}")));
        }
        self.values.insert(key.to_string(), value.into());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn expected_checksums(&self) -> &BTreeMap<String, String> {
        &self.expected_checksums
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| invalid(format!("setting {key}: cannot parse {v:?}")))
            })
            .transpose()
    }
}

/// Parses `lo:hi:step` (inclusive of `hi` up to rounding) or a comma list.
pub fn parse_u_grid(text: &str) -> Result<Vec<f64>> {
    let text = text.trim();
    let grid: Vec<f64> = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(invalid(format!("u grid {text:?}: expected lo:hi:step")));
        }
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| invalid(format!("u grid {text:?}: bad number {s:?}")))
        };
        let (lo, hi, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(step > 0.0) || !(hi >= lo) {
            return Err(invalid(format!("u grid {text:?}: need hi >= lo and step > 0")));
        }
        let count = ((hi - lo) / step + 1e-9).floor() as usize;
        // values are rebuilt from the index so they print cleanly
        (0..=count)
            .map(|k| {
                let v = lo + k as f64 * step;
                (v * 1e9).round() / 1e9
            })
            .collect()
    } else {
        text.split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| invalid(format!("u grid: bad number {s:?}")))
            })
            .collect::<Result<_>>()?
    };
    if grid.is_empty() {
        return Err(invalid("u grid is empty"));
    }
    if let Some(bad) = grid.iter().find(|u| !(**u >= 0.0 && u.is_finite())) {
        return Err(invalid(format!("u grid values must be nonnegative, got {bad}")));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("u grid must be strictly increasing"));
    }
    Ok(grid)
}

pub fn parse_eps_list(text: &str) -> Result<Vec<f64>> {
    let list: Vec<f64> = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| invalid(format!("epsilon list: bad number {s:?}")))
        })
        .collect::<Result<_>>()?;
    if list.is_empty() {
        return Err(invalid("epsilon list is empty"));
    }
    if let Some(bad) = list.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
        return Err(invalid(format!("epsilon must lie in (0, 1), got {bad}")));
    }
    Ok(list)
}

fn parse_tests(text: &str) -> Result<Vec<LimitTest>> {
    let mut tests = Vec::new();
    for name in text.split(',').map(str::trim) {
        let t = match name {
            "score" => LimitTest::Score,
            "lr" => LimitTest::Lr,
            "wald" => LimitTest::Wald,
            other => return Err(invalid(format!("unknown test {other:?} (score, lr, wald)"))),
        };
        if !tests.contains(&t) {
            tests.push(t);
        }
    }
    Ok(tests)
}

pub fn test_name(t: LimitTest) -> &'static str {
    match t {
        LimitTest::Score => "score",
        LimitTest::Lr => "lr",
        LimitTest::Wald => "wald",
    }
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    let mut s = String::new();
    for (i, x) in items.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        let _ = write!(s, "{x}");
    }
    s
}

/// Fully resolved parameters of one command.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub command: Command,
    pub rate: f64,
    pub horizon: f64,
    pub psi: String,
    pub eps: Vec<f64>,
    pub u_grid: Vec<f64>,
    pub trials: usize,
    pub steps: usize,
    pub seed: u64,
    pub workers: Option<usize>,
    pub out: PathBuf,
    pub quick: bool,
    pub thresholds: PathBuf,
    pub input: PathBuf,
    pub tests: Vec<LimitTest>,
    pub alt_upper: Option<f64>,
    pub clamp_u: bool,
    pub plot: bool,
    pub dump_paths: usize,
}

impl ExperimentConfig {
    pub fn resolve(command: Command, settings: &Settings) -> Result<Self> {
        let quick = settings.parsed::<bool>("quick")?.unwrap_or(false);
        let (default_eps, default_grid, default_trials) = match command {
            Command::Calibrate | Command::Tables => ("0.01,0.02,0.03,0.04,0.05,0.1,0.5", "0:15:0.5", 10_000_000),
            Command::PowerFinite => ("0.05", "0:20:0.5", 1_000_000),
            Command::PowerLimit | Command::Compare => ("0.05,0.5", "0:15:0.5", 10_000_000),
        };
        let out = PathBuf::from(settings.get("out").unwrap_or("results"));
        let trials = match settings.parsed::<usize>("trials")? {
            Some(m) => m,
            None if quick => QUICK_TRIALS,
            None => default_trials,
        };
        let workers = settings.parsed::<usize>("workers")?;
        if workers == Some(0) {
            return Err(invalid("workers must be at least 1"));
        }
        let cfg = Self {
            command,
            rate: settings.parsed("rate")?.unwrap_or(1.0),
            horizon: settings.parsed("horizon")?.unwrap_or(100.0),
            psi: settings.get("psi").unwrap_or("exp").to_string(),
            eps: parse_eps_list(settings.get("eps").unwrap_or(default_eps))?,
            u_grid: parse_u_grid(settings.get("u-grid").unwrap_or(default_grid))?,
            trials,
            steps: settings.parsed("steps")?.unwrap_or(crate::sim::DEFAULT_WIENER_STEPS),
            seed: settings.parsed("seed")?.unwrap_or(DEFAULT_SEED),
            workers,
            thresholds: settings
                .get("thresholds")
                .map(PathBuf::from)
                .unwrap_or_else(|| out.join("thresholds.csv")),
            input: settings
                .get("input")
                .map(PathBuf::from)
                .unwrap_or_else(|| out.join("power_limit.csv")),
            out,
            quick,
            tests: parse_tests(settings.get("tests").unwrap_or("score"))?,
            alt_upper: settings.parsed("alt-upper")?,
            clamp_u: settings.parsed::<bool>("clamp-u")?.unwrap_or(false),
            plot: settings.parsed::<bool>("plot")?.unwrap_or(true),
            dump_paths: settings.parsed("dump-paths")?.unwrap_or(0),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return Err(invalid(format!("rate must be positive, got {}", self.rate)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(invalid(format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.trials < 2 {
            return Err(invalid(format!("trials must be at least 2, got {}", self.trials)));
        }
        if self.steps < 2 {
            return Err(invalid(format!("steps must be at least 2, got {}", self.steps)));
        }
        if let Some(k) = self.alt_upper {
            if !(k > 0.0 && k.is_finite()) {
                return Err(invalid(format!("alt-upper must be positive, got {k}")));
            }
        }
        Ok(())
    }

    /// Every resolved setting as `key = value` pairs, in a form that
    /// [`Settings::from_text`] reads back to the same configuration.
    pub fn echo(&self) -> Vec<(String, String)> {
        let mut pairs = vec![
            ("rate", self.rate.to_string()),
            ("horizon", self.horizon.to_string()),
            ("psi", self.psi.clone()),
            ("eps", join(&self.eps)),
            ("u-grid", join(&self.u_grid)),
            ("trials", self.trials.to_string()),
            ("steps", self.steps.to_string()),
            ("seed", self.seed.to_string()),
            ("out", self.out.display().to_string()),
            ("quick", self.quick.to_string()),
            ("thresholds", self.thresholds.display().to_string()),
            ("input", self.input.display().to_string()),
            (
                "tests",
                self.tests.iter().map(|t| test_name(*t)).collect::<Vec<_>>().join(","),
            ),
            ("clamp-u", self.clamp_u.to_string()),
            ("plot", self.plot.to_string()),
            ("dump-paths", self.dump_paths.to_string()),
        ];
        if let Some(w) = self.workers {
            pairs.push(("workers", w.to_string()));
        }
        if let Some(k) = self.alt_upper {
            pairs.push(("alt-upper", k.to_string()));
        }
        pairs.sort();
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        let g = parse_u_grid("0:20:0.5").unwrap();
        assert_eq!(g.len(), 41);
        assert_eq!(g[3], 1.5);
        assert_eq!(*g.last().unwrap(), 20.0);
        assert_eq!(parse_u_grid("0:1:0.1").unwrap()[3], 0.3);
        assert_eq!(parse_u_grid("1, 5,10").unwrap(), vec![1.0, 5.0, 10.0]);
        assert!(parse_u_grid("3,1").is_err());
        assert!(parse_u_grid("-1,1").is_err());
        assert!(parse_u_grid("0:1").is_err());
        assert!(parse_u_grid("0:1:0").is_err());
    }

    #[test]
    fn eps_lists() {
        assert_eq!(parse_eps_list("0.01, 0.05").unwrap(), vec![0.01, 0.05]);
        assert!(parse_eps_list("0.05,1").is_err());
        assert!(parse_eps_list("x").is_err());
    }

    #[test]
    fn file_then_flag_precedence() {
        let mut s = Settings::from_text("trials = 500\nseed = 3\n# note\nchecksum.a.csv = ff\ncommand = calibrate\n", "cfg")
            .unwrap();
        s.set("seed", "9").unwrap();
        let cfg = ExperimentConfig::resolve(Command::Calibrate, &s).unwrap();
        assert_eq!(cfg.trials, 500);
        assert_eq!(cfg.seed, 9);
        assert_eq!(s.expected_checksums()["a.csv"], "ff");
        assert!(Settings::from_text("bogus = 1", "cfg").is_err());
        assert!(Settings::from_text("no equals sign", "cfg").is_err());
    }

    #[test]
    fn quick_mode_and_defaults() {
        let mut s = Settings::new();
        s.set("quick", "true").unwrap();
        let cfg = ExperimentConfig::resolve(Command::PowerLimit, &s).unwrap();
        assert_eq!(cfg.trials, QUICK_TRIALS);
        assert_eq!(cfg.eps, vec![0.05, 0.5]);
        assert_eq!(cfg.u_grid.len(), 31);
        let cfg = ExperimentConfig::resolve(Command::PowerFinite, &Settings::new()).unwrap();
        assert_eq!(cfg.trials, 1_000_000);
        assert_eq!(cfg.tests, vec![LimitTest::Score]);
    }

    #[test]
    fn echo_round_trips() {
        let mut s = Settings::new();
        s.set("u-grid", "0:2:0.5").unwrap();
        s.set("workers", "2").unwrap();
        s.set("tests", "score,wald").unwrap();
        let cfg = ExperimentConfig::resolve(Command::PowerFinite, &s).unwrap();
        let text: String = cfg.echo().iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        let again = ExperimentConfig::resolve(Command::PowerFinite, &Settings::from_text(&text, "echo").unwrap()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn rejects_bad_values() {
        let mut s = Settings::new();
        s.set("workers", "0").unwrap();
        assert!(ExperimentConfig::resolve(Command::Calibrate, &s).is_err());
        let mut s = Settings::new();
        s.set("tests", "score,foo").unwrap();
        assert!(ExperimentConfig::resolve(Command::PowerFinite, &s).is_err());
        assert!(Settings::new().set("nonsense", "1").is_err());
    }
}
