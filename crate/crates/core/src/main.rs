use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::warn;

use sctest_core::experiment::{run, Command, Settings};

#[derive(Parser)]
#[command(
    name = "sctest",
    version,
    about = "Poisson vs. self-correcting point process tests: thresholds, power curves, reports"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Closed-form a table and Monte Carlo b, c, e (and d(u)) thresholds
    Calibrate(Flags),
    /// Rejection frequencies of simulated self-correcting paths at finite T
    PowerFinite(Flags),
    /// Limit power curves (score, LR, Wald, Neyman-Pearson envelope)
    PowerLimit(Flags),
    /// Per-u gaps between limit power curves with 3-sigma ordering checks
    Compare(Flags),
    /// Print the closed-form a table and compare calibrated thresholds with reference values
    Tables(Flags),
}

#[derive(Args, Debug, Default)]
struct Flags {
    /// Flat key = value settings file (a run manifest also works); flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Null intensity S*
    #[arg(long)]
    rate: Option<f64>,
    /// Observation horizon T
    #[arg(long)]
    horizon: Option<f64>,
    /// `exp` or a path to a shape spec file
    #[arg(long)]
    psi: Option<String>,
    /// Comma-separated levels
    #[arg(long)]
    eps: Option<String>,
    /// `lo:hi:step` or a comma-separated list
    #[arg(long = "u-grid")]
    u_grid: Option<String>,
    /// Monte Carlo sample size M
    #[arg(long)]
    trials: Option<usize>,
    /// Grid steps per Wiener path
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (output does not depend on this)
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Small Monte Carlo sizes for smoke runs
    #[arg(long)]
    quick: bool,
    /// Threshold CSV written by `calibrate`
    #[arg(long)]
    thresholds: Option<PathBuf>,
    /// Power CSV read by `compare`
    #[arg(long)]
    input: Option<PathBuf>,
    /// Tests for power-finite: any of score,lr,wald
    #[arg(long)]
    tests: Option<String>,
    /// Upper end of the alternative set (default sqrt(S*T)/ln T)
    #[arg(long = "alt-upper")]
    alt_upper: Option<f64>,
    /// Clamp u to the alternative set in power-finite
    #[arg(long = "clamp-u")]
    clamp_u: bool,
    /// Skip SVG output
    #[arg(long = "no-plot")]
    no_plot: bool,
    /// Write per-path statistics for the first N paths at each u
    #[arg(long = "dump-paths")]
    dump_paths: Option<usize>,
}

impl Flags {
    fn settings(&self) -> sctest_core::Result<Settings> {
        let mut s = match &self.config {
            Some(path) => Settings::from_file(path)?,
            None => Settings::new(),
        };
        let pairs: [(&str, Option<String>); 16] = [
            ("rate", self.rate.map(|v| v.to_string())),
            ("horizon", self.horizon.map(|v| v.to_string())),
            ("psi", self.psi.clone()),
            ("eps", self.eps.clone()),
            ("u-grid", self.u_grid.clone()),
            ("trials", self.trials.map(|v| v.to_string())),
            ("steps", self.steps.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("workers", self.workers.map(|v| v.to_string())),
            ("out", self.out.as_ref().map(|p| p.display().to_string())),
            ("quick", self.quick.then(|| "true".into())),
            ("thresholds", self.thresholds.as_ref().map(|p| p.display().to_string())),
            ("input", self.input.as_ref().map(|p| p.display().to_string())),
            ("tests", self.tests.clone()),
            ("alt-upper", self.alt_upper.map(|v| v.to_string())),
            ("clamp-u", self.clamp_u.then(|| "true".into())),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                s.set(key, v)?;
            }
        }
        if self.no_plot {
            s.set("plot", "false")?;
        }
        if let Some(n) = self.dump_paths {
            s.set("dump-paths", n.to_string())?;
        }
        Ok(s)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (command, flags) = match &cli.command {
        Sub::Calibrate(f) => (Command::Calibrate, f),
        Sub::PowerFinite(f) => (Command::PowerFinite, f),
        Sub::PowerLimit(f) => (Command::PowerLimit, f),
        Sub::Compare(f) => (Command::Compare, f),
        Sub::Tables(f) => (Command::Tables, f),
    };
    let result = flags.settings().and_then(|s| run(command, &s));
    match result {
        Ok(out) => {
            for w in &out.warnings {
                warn!("{w}");
            }
            print!("{}", out.report);
            for f in &out.files {
                println!("wrote {}", f.display());
            }
            if let Some(m) = &out.manifest {
                println!("manifest {}", m.display());
            }
            if let Some(n) = out.verified {
                println!("checksums reproduced for {n} file(s)");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
