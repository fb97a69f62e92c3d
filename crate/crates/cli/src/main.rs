use clap::{Args, Parser, Subcommand};
use schatten_lab::lab::{self, ExperimentConfig, Report};
use std::path::PathBuf;
use std::process::ExitCode;

/// Runs a registered experiment and writes results.csv and summary.json.
///
/// Exit status: 0 when every check passes, 1 when any check fails, 2 on invalid input.
#[derive(Parser)]
#[command(name = "labcli", version)]
struct Cli {
    #[command(subcommand)]
    scenario: Scenario,
}

#[derive(Subcommand)]
enum Scenario {
    /// Sandwiched T_S bounds under grid refinement and Knapp witnesses
    Restriction(Common),
    /// Divergence exponent of the trial density matrices
    Optimality(Common),
    /// Orthonormal Strichartz ratios and slopes
    Strichartz(Common),
    /// Uniform Sobolev sweep and the 1D Hilbert–Schmidt check
    Sobolev(Common),
    /// Boundary values of the Birman–Schwinger family and the resolvent jump
    Lap(Common),
    /// Complex eigenvalue sums, delta well and determinant zero counts
    Eigen(Common),
    /// Density-matrix Hartree flow and its conservation laws
    Hartree(Common),
    /// 1D transfer matrices, weak-coupling deficits and unitarity
    Scatter(Common),
    /// Fast consistency checks of the core
    Selftest(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; its scenario must match the subcommand
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: the config's output or ./lab-out/<scenario>)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; falls back to SCHATTEN_LAB_WORKERS, then to all cores
    #[arg(long)]
    workers: Option<usize>,
}

impl Scenario {
    fn split(&self) -> (&'static str, &Common) {
        match self {
            Scenario::Restriction(c) => ("restriction", c),
            Scenario::Optimality(c) => ("optimality", c),
            Scenario::Strichartz(c) => ("strichartz", c),
            Scenario::Sobolev(c) => ("sobolev", c),
            Scenario::Lap(c) => ("lap", c),
            Scenario::Eigen(c) => ("eigen", c),
            Scenario::Hartree(c) => ("hartree", c),
            Scenario::Scatter(c) => ("scatter", c),
            Scenario::Selftest(c) => ("selftest", c),
        }
    }
}

fn load(name: &str, common: &Common) -> Result<ExperimentConfig, String> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            let cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
            if cfg.scenario != name {
                return Err(format!("config is for scenario '{}', not '{name}'", cfg.scenario));
            }
            cfg
        }
        None => ExperimentConfig::new(name, 0),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn workers(common: &Common) -> Result<usize, String> {
    if let Some(w) = common.workers {
        return Ok(w);
    }
    match std::env::var("SCHATTEN_LAB_WORKERS") {
        Ok(v) => v.trim().parse().map_err(|_| format!("SCHATTEN_LAB_WORKERS must be a non-negative integer, got '{v}'")),
        Err(_) => Ok(0),
    }
}

fn print(report: &Report, out: &std::path::Path) {
    for c in &report.checks {
        println!("{} [{}] {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.tag, c.name, c.detail);
    }
    for s in &report.slopes {
        let exp = s.expected.map(|e| format!(" (reference {e:.4})")).unwrap_or_default();
        println!("slope {}: {:.4} ± {:.4}{exp}", s.name, s.fit.slope, s.fit.std_error);
    }
    println!("{} rows in {:.1}s -> {}", report.rows.len(), report.wall_time, out.display());
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, common) = cli.scenario.split();
    let prepared = load(name, common).and_then(|cfg| {
        let w = workers(common)?;
        let resolved = lab::resolve(&cfg).map_err(|e| e.to_string())?;
        Ok((resolved, w))
    });
    let (cfg, w) = match prepared {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let out = common
        .out
        .clone()
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("lab-out").join(name));
    let report = match lab::run(&cfg, w) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = report.write(&out) {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    print(&report, &out);
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
