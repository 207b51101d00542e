//! The five subcommands.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::error::{invalid, Error, Result};
use crate::limit::{a_epsilon, limit_power_score, CurveTest, Ensemble, Functional, LimitTest, McConfig, Thresholds};
use crate::parallel::map_indexed;
use crate::psi::PsiSpec;
use crate::rng::{derive_seed, RngStream};
use crate::sim::{count_self_correcting, simulate_self_correcting};
use crate::statistics::{
    delta_from_count, evaluate_path, lr_verdict, mle_u, wald_verdict, MleResult, TestConfig,
};

use super::config::{test_name, Command, ExperimentConfig, Settings};
use super::csvio::{
    write_header, write_row, CsvTable, COMPARE_COLUMNS, FINITE_POWER_COLUMNS, POWER_COLUMNS, STATISTIC_COLUMNS,
    THRESHOLD_COLUMNS,
};
use super::manifest::RunManifest;
use super::svg::{line_chart, Series};

/// Reference values used by `tables` for side-by-side comparison.
pub const REFERENCE_B: &[(f64, f64)] = &[
    (0.01, 1.814),
    (0.02, 1.636),
    (0.03, 1.524),
    (0.04, 1.440),
    (0.05, 1.373),
    (0.1, 1.144),
];
pub const REFERENCE_C: &[(f64, f64)] = &[
    (0.01, 13.692),
    (0.02, 11.224),
    (0.03, 9.803),
    (0.04, 8.806),
    (0.05, 8.042),
    (0.1, 5.719),
];
pub const REFERENCE_E: &[(f64, f64)] = &[(0.05, 0.056)];

/// What a command produced.
#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub files: Vec<PathBuf>,
    pub manifest: Option<PathBuf>,
    /// Number of files whose checksum matched a manifest given as config.
    pub verified: Option<usize>,
    pub warnings: Vec<String>,
    /// Human-readable summary for the terminal.
    pub report: String,
}

pub fn run(command: Command, settings: &Settings) -> Result<RunOutput> {
    let cfg = ExperimentConfig::resolve(command, settings)?;
    if command == Command::Tables {
        return tables(&cfg);
    }
    std::fs::create_dir_all(&cfg.out).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("cannot create output directory {}: {e}", cfg.out.display()),
        ))
    })?;
    let started = Instant::now();
    let mut manifest = RunManifest::new(cfg.clone());
    let mut out = match command {
        Command::Calibrate => calibrate(&cfg, &mut manifest)?,
        Command::PowerFinite => power_finite(&cfg, &mut manifest)?,
        Command::PowerLimit => power_limit(&cfg, &mut manifest)?,
        Command::Compare => compare(&cfg, &mut manifest)?,
        Command::Tables => unreachable!(),
    };
    for f in &out.files {
        manifest.add_output(f)?;
    }
    manifest.wall_clock_seconds = started.elapsed().as_secs_f64();
    out.manifest = Some(manifest.write()?);
    if !settings.expected_checksums().is_empty() {
        out.verified = Some(manifest.verify(settings.expected_checksums())?);
    }
    Ok(out)
}

fn mc_config(cfg: &ExperimentConfig, seed: u64) -> McConfig {
    McConfig {
        trials: cfg.trials,
        n_steps: cfg.steps,
        seed,
        workers: cfg.workers,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("cannot write {}: {e}", path.display())))
    })
}

fn calibrate(cfg: &ExperimentConfig, manifest: &mut RunManifest) -> Result<RunOutput> {
    let ens = Ensemble::wiener(&mc_config(cfg, cfg.seed))?;
    manifest.resampled_paths = ens.resampled();
    let path = cfg.out.join("thresholds.csv");
    let mut w = create(&path)?;
    write_header(&mut w, THRESHOLD_COLUMNS)?;
    let (m, n, seed) = (cfg.trials, cfg.steps, cfg.seed);
    let mut report = String::from("kind  epsilon  threshold  [95% CI]\n");
    for &eps in &cfg.eps {
        let a = a_epsilon(eps)?;
        write_row(&mut w, &[&"a", &eps, &"", &a, &"", &"", &"", &a, &a])?;
        report.push_str(&format!("a     {eps:<7}  {a:.6}  (closed form)\n"));
    }
    for (kind, functional) in [("b", Functional::Lambda), ("c", Functional::Gamma), ("e", Functional::J)] {
        for (eps, cal) in cfg.eps.iter().zip(ens.calibrate_many(functional, &cfg.eps)?) {
            write_row(
                &mut w,
                &[&kind, eps, &"", &cal.threshold, &m, &n, &seed, &cal.ci_lo, &cal.ci_hi],
            )?;
            report.push_str(&format!(
                "{kind}     {eps:<7}  {:.6}  [{:.6}, {:.6}]\n",
                cal.threshold, cal.ci_lo, cal.ci_hi
            ));
        }
    }
    for &u in &cfg.u_grid {
        for (eps, cal) in cfg.eps.iter().zip(ens.np_calibrate_many(u, &cfg.eps)?) {
            write_row(&mut w, &[&"d", eps, &u, &cal.threshold, &m, &n, &seed, &cal.ci_lo, &cal.ci_hi])?;
        }
    }
    w.flush()?;
    Ok(RunOutput {
        files: vec![path],
        report,
        ..Default::default()
    })
}

/// Reads `b_ε` and `c_ε` for one level from a threshold CSV.
pub fn load_thresholds(path: &Path, epsilon: f64) -> Result<Thresholds> {
    let missing = |why: String| {
        Error::MissingThresholds(format!(
            "{why}; run `sctest calibrate --eps {epsilon} --out <dir>` and pass --thresholds <dir>/thresholds.csv"
        ))
    };
    if !path.exists() {
        return Err(missing(format!("{} does not exist", path.display())));
    }
    let table = CsvTable::read(path, &["kind", "epsilon", "threshold"])?;
    let mut found = BTreeMap::new();
    for row in 0..table.len() {
        let kind = table.text(row, "kind")?;
        if (kind == "b" || kind == "c") && (table.number(row, "epsilon")? - epsilon).abs() < 1e-12 {
            found.insert(kind.to_string(), table.number(row, "threshold")?);
        }
    }
    match (found.get("b"), found.get("c")) {
        (Some(&b), Some(&c)) => Thresholds::new(epsilon, b, c),
        _ => Err(missing(format!(
            "{} has no b and c thresholds for epsilon {epsilon}",
            path.display()
        ))),
    }
}

fn power_limit(cfg: &ExperimentConfig, manifest: &mut RunManifest) -> Result<RunOutput> {
    let thresholds: Vec<Thresholds> = cfg
        .eps
        .iter()
        .map(|&e| load_thresholds(&cfg.thresholds, e))
        .collect::<Result<_>>()?;
    // a keystream separate from calibration, so thresholds are out of sample
    let ens = Ensemble::wiener(&mc_config(cfg, derive_seed(cfg.seed, "power-limit")))?;
    manifest.resampled_paths = ens.resampled();
    for &u in &cfg.u_grid {
        manifest.ess.insert(format!("u={u}"), ens.effective_sample_size(u));
    }
    let path = cfg.out.join("power_limit.csv");
    let mut w = create(&path)?;
    write_header(&mut w, POWER_COLUMNS)?;
    let mut files = vec![];
    let mut report = String::new();
    for th in &thresholds {
        let curves = ens.power_curves(th, &cfg.u_grid)?;
        for curve in &curves {
            for p in &curve.points {
                write_row(&mut w, &[&curve.test.name(), &th.epsilon, &p.u, &p.power, &p.stderr, &cfg.trials])?;
            }
        }
        report.push_str(&format!(
            "epsilon {}: a={:.6} b={:.6} c={:.6}\n  {:>6} {:>9} {:>9} {:>9} {:>9}\n",
            th.epsilon, th.a, th.b, th.c, "u", "score", "lr", "wald", "np"
        ));
        for (k, &u) in cfg.u_grid.iter().enumerate() {
            report.push_str(&format!(
                "  {u:>6} {:>9.5} {:>9.5} {:>9.5} {:>9.5}\n",
                curves[0].points[k].power, curves[1].points[k].power, curves[2].points[k].power, curves[3].points[k].power
            ));
        }
        if cfg.plot {
            let series = curves
                .iter()
                .map(|c| Series {
                    label: c.test.name().to_string(),
                    points: c.points.iter().map(|p| (p.u, p.power)).collect(),
                    dashed: c.test == CurveTest::Score,
                })
                .collect::<Vec<_>>();
            let svg_path = cfg.out.join(format!("power_limit_eps{}.svg", th.epsilon));
            std::fs::write(
                &svg_path,
                line_chart(&format!("Limit power, epsilon = {}", th.epsilon), "u", "power", &series),
            )?;
            files.push(svg_path);
        }
    }
    w.flush()?;
    files.insert(0, path);
    Ok(RunOutput {
        files,
        report,
        ..Default::default()
    })
}

/// Per-path quantities that do not depend on the level.
#[derive(Debug, Clone, Copy)]
struct FiniteDraw {
    count: u64,
    mle: Option<MleResult>,
}

fn power_finite(cfg: &ExperimentConfig, _manifest: &mut RunManifest) -> Result<RunOutput> {
    let psi = PsiSpec::from_selector(&cfg.psi)?;
    let needs_mle = cfg.tests.iter().any(|t| *t != LimitTest::Score);
    let mut base = TestConfig::new(cfg.rate, cfg.horizon, psi.clone(), cfg.eps[0])?;
    if let Some(k) = cfg.alt_upper {
        base = base.with_alt_upper(k)?;
    }
    let mut warnings = Vec::new();
    let mut grid: Vec<f64> = Vec::new();
    for &u in &cfg.u_grid {
        let mut u = u;
        if let Some(k) = base.alt_upper() {
            if u > k {
                if cfg.clamp_u {
                    warnings.push(format!("u = {u} exceeds K_T = {k:.4}; clamped"));
                    u = k;
                } else {
                    warnings.push(format!("u = {u} exceeds K_T = {k:.4}; kept (pass --clamp-u to clamp)"));
                }
            }
        }
        if grid.last().is_none_or(|&last| u > last) {
            grid.push(u);
        }
    }
    if grid[0] != 0.0 {
        grid.insert(0, 0.0);
    }
    if needs_mle && base.alt_upper().is_none() {
        return Err(invalid("the alternative set is undefined for horizon <= 1; pass --alt-upper"));
    }
    let thresholds: Vec<Option<Thresholds>> = cfg
        .eps
        .iter()
        .map(|&e| {
            if needs_mle || cfg.dump_paths > 0 {
                load_thresholds(&cfg.thresholds, e).map(Some)
            } else {
                Ok(None)
            }
        })
        .collect::<Result<_>>()?;

    let stream_seed = derive_seed(cfg.seed, "power-finite");
    // rejections[(eps index, test)][u index]
    let mut rejections: BTreeMap<(usize, &'static str), Vec<u64>> = BTreeMap::new();
    for u in &grid {
        let theta = base.theta(*u);
        let draws = map_indexed(cfg.trials, cfg.workers, |i| {
            let stream = RngStream::new(stream_seed, i as u64);
            if needs_mle {
                let path = simulate_self_correcting(&psi, theta, cfg.rate, cfg.horizon, &stream)?;
                Ok(FiniteDraw {
                    count: path.count() as u64,
                    mle: Some(mle_u(&path, &base)?),
                })
            } else {
                Ok(FiniteDraw {
                    count: count_self_correcting(&psi, theta, cfg.rate, cfg.horizon, &stream)?,
                    mle: None,
                })
            }
        })?;
        for (ei, &eps) in cfg.eps.iter().enumerate() {
            let a = a_epsilon(eps)?;
            for &test in &cfg.tests {
                let hits = draws
                    .iter()
                    .filter(|d| match test {
                        LimitTest::Score => delta_from_count(d.count, cfg.rate, cfg.horizon) > a,
                        LimitTest::Lr => {
                            let th = thresholds[ei].expect("loaded when lr is requested");
                            lr_verdict(&d.mle.expect("simulated with mle"), th.b).reject
                        }
                        LimitTest::Wald => {
                            let th = thresholds[ei].expect("loaded when wald is requested");
                            wald_verdict(&d.mle.expect("simulated with mle"), th.c).reject
                        }
                    })
                    .count() as u64;
                rejections.entry((ei, test_name(test))).or_default().push(hits);
            }
        }
        if cfg.dump_paths > 0 {
            let th = thresholds[0].expect("loaded for dumps");
            let dump = cfg.out.join(format!("statistics_u{u}.csv"));
            let mut w = create(&dump)?;
            write_header(&mut w, STATISTIC_COLUMNS)?;
            for i in 0..cfg.dump_paths.min(cfg.trials) {
                let path = simulate_self_correcting(&psi, theta, cfg.rate, cfg.horizon, &RngStream::new(stream_seed, i as u64))?;
                let r = evaluate_path(&path, &base, th.b, th.c)?;
                write_row(
                    &mut w,
                    &[
                        &i,
                        &r.stats.count,
                        &r.stats.delta,
                        &r.stats.j,
                        &r.mle.u,
                        &r.mle.log_likelihood,
                        &u8::from(r.score.reject),
                        &u8::from(r.lr.reject),
                        &u8::from(r.wald.reject),
                    ],
                )?;
            }
            w.flush()?;
        }
    }

    let path = cfg.out.join("power_finite.csv");
    let mut w = create(&path)?;
    write_header(&mut w, FINITE_POWER_COLUMNS)?;
    let m = cfg.trials as f64;
    let mut report = format!(
        "T = {}, rate = {}, psi = {}, K_T = {}\n",
        cfg.horizon,
        cfg.rate,
        psi.describe(),
        base.alt_upper().map_or("undefined".into(), |k| format!("{k:.4}"))
    );
    let mut series = Vec::new();
    for (ei, &eps) in cfg.eps.iter().enumerate() {
        for &test in &cfg.tests {
            let hits = &rejections[&(ei, test_name(test))];
            let size = hits[0] as f64 / m;
            let mut pts = Vec::new();
            for (k, &u) in grid.iter().enumerate() {
                let p = hits[k] as f64 / m;
                let se = (p * (1.0 - p) / m).sqrt();
                write_row(&mut w, &[&test_name(test), &eps, &u, &p, &se, &cfg.trials, &size])?;
                pts.push((u, p));
            }
            report.push_str(&format!("{} eps={eps}: size {size:.5}\n", test_name(test)));
            if ei == 0 {
                series.push(Series {
                    label: test_name(test).to_string(),
                    points: pts,
                    dashed: false,
                });
            }
        }
    }
    w.flush()?;
    let mut files = vec![path];
    if cfg.dump_paths > 0 {
        for u in &grid {
            files.push(cfg.out.join(format!("statistics_u{u}.csv")));
        }
    }
    if cfg.plot {
        let limit = grid
            .iter()
            .map(|&u| Ok((u, limit_power_score(u, cfg.eps[0])?)))
            .collect::<Result<Vec<_>>>()?;
        series.push(Series {
            label: "score limit".into(),
            points: limit,
            dashed: true,
        });
        let svg_path = cfg.out.join("power_finite.svg");
        std::fs::write(
            &svg_path,
            line_chart(
                &format!("Finite-horizon power, T = {}, epsilon = {}", cfg.horizon, cfg.eps[0]),
                "u",
                "power",
                &series,
            ),
        )?;
        files.push(svg_path);
    }
    Ok(RunOutput {
        files,
        warnings,
        report,
        ..Default::default()
    })
}

/// One power curve read back from CSV.
type Curve = Vec<(f64, f64, f64)>;

fn read_power_curves(path: &Path) -> Result<BTreeMap<String, BTreeMap<CurveTest, Curve>>> {
    let table = CsvTable::read(path, POWER_COLUMNS)?;
    let mut by_eps: BTreeMap<String, BTreeMap<CurveTest, Curve>> = BTreeMap::new();
    for row in 0..table.len() {
        let name = table.text(row, "test")?;
        let test = CurveTest::parse(name).ok_or_else(|| Error::Schema {
            source_name: path.display().to_string(),
            message: format!("column \"test\", row {}: unknown test {name:?}", row + 1),
        })?;
        let eps = table.text(row, "epsilon")?.to_string();
        table.number(row, "epsilon")?;
        let point = (
            table.number(row, "u")?,
            table.number(row, "power")?,
            table.number(row, "stderr")?,
        );
        by_eps.entry(eps).or_default().entry(test).or_default().push(point);
    }
    Ok(by_eps)
}

/// Ordered pairs checked by `compare`: each upper curve should dominate.
const ORDER: [(CurveTest, CurveTest); 3] = [
    (CurveTest::Lr, CurveTest::Score),
    (CurveTest::Wald, CurveTest::Lr),
    (CurveTest::Np, CurveTest::Wald),
];

fn compare(cfg: &ExperimentConfig, _manifest: &mut RunManifest) -> Result<RunOutput> {
    let curves = read_power_curves(&cfg.input)?;
    if curves.is_empty() {
        return Err(Error::Schema {
            source_name: cfg.input.display().to_string(),
            message: "no rows".into(),
        });
    }
    let path = cfg.out.join("compare.csv");
    let mut w = create(&path)?;
    write_header(&mut w, COMPARE_COLUMNS)?;
    let mut report = String::new();
    for (eps, tests) in &curves {
        let grids: Vec<Vec<f64>> = tests.values().map(|c| c.iter().map(|p| p.0).collect()).collect();
        if grids.windows(2).any(|g| g[0] != g[1]) {
            return Err(invalid(format!(
                "epsilon {eps}: curves in {} are on different u grids",
                cfg.input.display()
            )));
        }
        let mut violations = Vec::new();
        for (upper, lower) in ORDER {
            let (Some(hi), Some(lo)) = (tests.get(&upper), tests.get(&lower)) else {
                continue;
            };
            for (p, q) in hi.iter().zip(lo) {
                let gap = p.1 - q.1;
                let se = (p.2 * p.2 + q.2 * q.2).sqrt();
                let z = if se > 0.0 { gap / se } else { 0.0 };
                let violation = if se > 0.0 { gap < -3.0 * se } else { gap < -1e-12 };
                if violation {
                    violations.push(format!("u={} {}<{} (gap {gap:.5}, {z:.1} sigma)", p.0, upper.name(), lower.name()));
                }
                write_row(
                    &mut w,
                    &[eps, &p.0, &upper.name(), &lower.name(), &gap, &se, &z, &u8::from(violation)],
                )?;
            }
        }
        report.push_str(&format!("epsilon {eps}: {} ordering violations at 3 sigma\n", violations.len()));
        for v in &violations {
            report.push_str(&format!("  {v}\n"));
        }
    }
    w.flush()?;
    Ok(RunOutput {
        files: vec![path],
        report,
        ..Default::default()
    })
}

fn tables(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mut report = String::from("closed-form score thresholds a_eps = (1 - z^2)/2\n");
    for &eps in &cfg.eps {
        report.push_str(&format!("  eps {eps:<6} a = {:.7}\n", a_epsilon(eps)?));
    }
    if cfg.thresholds.exists() {
        let table = CsvTable::read(&cfg.thresholds, &["kind", "epsilon", "threshold"])?;
        report.push_str(&format!("calibrated vs reference ({})\n", cfg.thresholds.display()));
        for (kind, refs) in [("b", REFERENCE_B), ("c", REFERENCE_C), ("e", REFERENCE_E)] {
            for &(eps, want) in refs {
                let got = (0..table.len()).find_map(|r| {
                    let k = table.text(r, "kind").ok()?;
                    let e = table.number(r, "epsilon").ok()?;
                    (k == kind && (e - eps).abs() < 1e-12).then(|| table.number(r, "threshold").ok())?
                });
                match got {
                    Some(g) => report.push_str(&format!(
                        "  {kind} eps {eps:<5} calibrated {g:.4} reference {want:.3} rel. diff {:+.2}%\n",
                        100.0 * (g - want) / want
                    )),
                    None => report.push_str(&format!("  {kind} eps {eps:<5} not calibrated, reference {want:.3}\n")),
                }
            }
        }
    } else {
        report.push_str(&format!(
            "no calibrated thresholds at {}; run `sctest calibrate` to compare b, c and e\n",
            cfg.thresholds.display()
        ));
    }
    Ok(RunOutput {
        report,
        ..Default::default()
    })
}
