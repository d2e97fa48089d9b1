use clap::{Args, Parser, Subcommand};
use lipcert::pipeline::{run_to_dir, Stage};
use lipcert::scenario::{list_catalog, Scenario};
use rayon::prelude::*;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Output directory override; `--out` takes precedence.
const OUT_ENV: &str = "LIPCERT_OUT";

#[derive(Parser)]
#[command(name = "lipcert", version, about = "Lipschitz-regularity laboratory for integral functionals on planar domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Hypothesis checks only: domain convexity, LBSC, structural hypotheses on f, components.
    Check(Target),
    /// Checks plus a sampled conjugate of the Lagrangian (conjugate.csv).
    Conjugate(Target),
    /// Checks plus the minimizing sequence (or the relaxed solve).
    Solve(Target),
    /// Solve plus barriers, comparison and Lipschitz/Hölder certificates.
    Certify(Target),
    /// Relaxed solve plus the covering repair (nonconvex scenarios).
    Repair(Target),
    /// Everything the scenario's pipeline flags ask for.
    Run(Target),
    /// Built-in Lagrangians, traces and source fields.
    List,
}

#[derive(Args)]
struct Target {
    /// Scenario files (TOML).
    #[arg(required = true)]
    scenarios: Vec<PathBuf>,
    /// Output root; each scenario writes into <out>/<name>/.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run independent scenarios concurrently.
    #[arg(long)]
    parallel: bool,
}

fn out_root(cli: Option<&Path>) -> PathBuf {
    cli.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("lipcert-out"))
}

fn run_one(path: &Path, stage: Stage, root: &Path) -> i32 {
    let scenario = match Scenario::load(path) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            return 1;
        }
    };
    let dir = root.join(&scenario.name);
    match run_to_dir(&scenario, stage, &dir, Some(path)) {
        Ok(out) => {
            let r = &out.report;
            if r.failures.is_empty() {
                println!("{}: ok -> {}", scenario.name, dir.display());
            } else {
                println!("{}: exit {} -> {}", scenario.name, r.exit_code, dir.display());
                for f in &r.failures {
                    println!("  [{:?}] {}: {}", f.kind, f.check, f.message);
                }
            }
            r.exit_code
        }
        Err(e) => {
            eprintln!("{}: {e}", scenario.name);
            1
        }
    }
}

/// Most severe code: errors, then hypothesis, nonconvergence, certificate.
fn combine(codes: &[i32]) -> i32 {
    codes.iter().copied().filter(|&c| c != 0).min().unwrap_or(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (stage, target) = match cli.command {
        Command::List => {
            print!("{}", list_catalog());
            return ExitCode::SUCCESS;
        }
        Command::Check(t) => (Stage::Check, t),
        Command::Conjugate(t) => (Stage::Conjugate, t),
        Command::Solve(t) => (Stage::Solve, t),
        Command::Certify(t) => (Stage::Certify, t),
        Command::Repair(t) => (Stage::Repair, t),
        Command::Run(t) => (Stage::Run, t),
    };
    let root = out_root(target.out.as_deref());
    let codes: Vec<i32> = if target.parallel {
        target.scenarios.par_iter().map(|p| run_one(p, stage, &root)).collect()
    } else {
        target.scenarios.iter().map(|p| run_one(p, stage, &root)).collect()
    };
    ExitCode::from(combine(&codes) as u8)
}
