//! `pdebs`: run backstepping boundary-control scenarios from JSON configs.
//!
//! Exit codes: 0 success, 1 configuration error, 2 numerical failure,
//! 3 selfcheck failure. Reports go to stdout as JSON; diagnostics go to
//! stderr.

mod config;
mod selfcheck;

use std::collections::HashSet;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pdebs_core::actuation::{min_modes_sector, min_modes_square, min_modes_strip};
use pdebs_core::experiments::{run_scenarios, Scenario};
use pdebs_core::kernels::{build_kernel_table, KernelGeometry, PlantParams};
use pdebs_core::Error;
use serde::Serialize;

use config::ConfigError;

const OUTPUT_DIR_VAR: &str = "PDEBS_OUTPUT_DIR";

#[derive(Parser)]
#[command(
    name = "pdebs",
    version,
    about = "Backstepping boundary control of 2-D reaction-diffusion PDEs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the built-in invariant suite.
    Selfcheck,
    /// Wavenumber ensemble on the strip.
    Strip(RunArgs),
    /// Unit square with boundary control on one edge.
    Square(RunArgs),
    /// Circular sector controlled on the arc.
    Sector(RunArgs),
    /// Square with a corner cut, simulated on the extended square.
    Piano(RunArgs),
    /// Write the outer-boundary kernel row as CSV.
    KernelDump(KernelDumpArgs),
    /// Print the mode threshold N0 and the controlled-mode count N.
    Budget(BudgetArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario config; repeat to run several scenarios.
    #[arg(long = "config", required = true)]
    configs: Vec<PathBuf>,
    /// Scenarios run concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct PlantArgs {
    #[arg(long, allow_negative_numbers = true)]
    epsilon: f64,
    #[arg(long, allow_negative_numbers = true)]
    lambda: f64,
    #[arg(long, allow_negative_numbers = true)]
    c: f64,
}

impl PlantArgs {
    fn params(&self) -> Result<PlantParams, Failure> {
        PlantParams::new(self.epsilon, self.lambda, self.c).map_err(Failure::from)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelKind {
    Strip,
    Square,
    Sector,
}

#[derive(Args)]
struct KernelDumpArgs {
    #[command(flatten)]
    plant: PlantArgs,
    #[arg(long, value_enum, default_value_t = KernelKind::Square)]
    geometry: KernelKind,
    /// Side length of the square.
    #[arg(long, default_value_t = 1.0)]
    extent: f64,
    /// Angular wavenumber `α_n` of the sector mode.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    #[arg(long, default_value_t = 257)]
    samples: usize,
    /// CSV destination, columns `xi,value`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BudgetArgs {
    #[command(flatten)]
    plant: PlantArgs,
    /// Use the strip threshold instead of the square one.
    #[arg(long, conflicts_with_all = ["theta1", "theta2", "radius"])]
    strip: bool,
    #[arg(long, allow_negative_numbers = true, requires_all = ["theta2", "radius"])]
    theta1: Option<f64>,
    #[arg(long, allow_negative_numbers = true, requires_all = ["theta1", "radius"])]
    theta2: Option<f64>,
    #[arg(long, requires_all = ["theta1", "theta2"])]
    radius: Option<f64>,
}

/// Error on its way to an exit code.
enum Failure {
    Config(String),
    Numerical(String),
    Selfcheck,
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Numerical(_) => 2,
            Failure::Selfcheck => 3,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Numerical(_) | Error::Fit(_) => Failure::Numerical(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Failure::Numerical(format!("cannot serialize report: {e}")))?;
    println!("{text}");
    Ok(())
}

fn load_scenarios(kind: &str, args: &RunArgs) -> Result<Vec<Scenario>, Failure> {
    let env_dir = std::env::var_os(OUTPUT_DIR_VAR).map(PathBuf::from);
    let mut scenarios = Vec::with_capacity(args.configs.len());
    let mut dirs = HashSet::new();
    for path in &args.configs {
        let fail = |e: ConfigError| Failure::Config(format!("{}: {e}", path.display()));
        let cfg = config::load(path).map_err(fail)?;
        if cfg.geometry.kind() != kind {
            return Err(Failure::Config(format!(
                "{}: `geometry.kind` is {:?} but the subcommand is {kind:?}",
                path.display(),
                cfg.geometry.kind()
            )));
        }
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or(kind);
        let s = cfg.to_scenario(stem, env_dir.as_deref()).map_err(fail)?;
        if let Some(dir) = &s.output_dir {
            if !dirs.insert(dir.clone()) && args.configs.len() > 1 {
                return Err(Failure::Config(format!(
                    "{}: output directory {} is shared with another scenario",
                    path.display(),
                    dir.display()
                )));
            }
        }
        scenarios.push(s);
    }
    Ok(scenarios)
}

fn run_geometry(kind: &str, args: &RunArgs) -> Result<(), Failure> {
    if args.jobs == 0 {
        return Err(Failure::Config("--jobs must be at least 1".into()));
    }
    let scenarios = load_scenarios(kind, args)?;
    let results = run_scenarios(&scenarios, args.jobs);
    let mut reports = Vec::new();
    let mut failure = None;
    let mut failed = 0;
    for (s, result) in scenarios.iter().zip(results) {
        match result {
            Ok(report) => {
                if !report.pass {
                    eprintln!(
                        "{}: fitted rate below target {}",
                        s.name, report.target_rate
                    );
                }
                reports.push(report);
            }
            Err(e) => {
                eprintln!("error: {e}");
                failed += 1;
                // a numerical failure outranks a config failure in the exit code
                let f = Failure::from(e);
                if failure
                    .as_ref()
                    .is_none_or(|old: &Failure| f.code() > old.code())
                {
                    failure = Some(f);
                }
            }
        }
    }
    if reports.len() == 1 && args.configs.len() == 1 {
        print_json(&reports[0])?;
    } else if !reports.is_empty() {
        print_json(&reports)?;
    }
    let summary = format!("{failed} of {} scenarios failed", scenarios.len());
    match failure {
        Some(Failure::Numerical(_)) => Err(Failure::Numerical(summary)),
        Some(_) => Err(Failure::Config(summary)),
        None => Ok(()),
    }
}

#[derive(Serialize)]
struct KernelDumpReport<'a> {
    geometry: KernelGeometry,
    samples: usize,
    file: &'a Path,
}

fn kernel_dump(args: &KernelDumpArgs) -> Result<(), Failure> {
    let p = args.plant.params()?;
    let geometry = match args.geometry {
        KernelKind::Strip => KernelGeometry::Strip,
        KernelKind::Square => KernelGeometry::Square {
            extent: args.extent,
        },
        KernelKind::Sector => KernelGeometry::Sector {
            alpha: args.alpha.ok_or_else(|| {
                Failure::Config("--alpha is required for the sector kernel".into())
            })?,
            radius: args.radius,
        },
    };
    let table = build_kernel_table(&p, geometry, args.samples)?;
    let file = File::create(&args.out)
        .map_err(|e| Failure::Config(format!("cannot create {}: {e}", args.out.display())))?;
    table.write_csv(BufWriter::new(file))?;
    print_json(&KernelDumpReport {
        geometry,
        samples: table.len(),
        file: &args.out,
    })
}

#[derive(Serialize)]
struct BudgetReport {
    geometry: &'static str,
    n0: f64,
    n: usize,
}

fn budget(args: &BudgetArgs) -> Result<(), Failure> {
    let p = args.plant.params()?;
    let (geometry, b) = match (args.theta1, args.theta2, args.radius) {
        (Some(t1), Some(t2), Some(r)) => ("sector", min_modes_sector(&p, t1, t2, r)?),
        _ if args.strip => ("strip", min_modes_strip(&p)),
        _ => ("square", min_modes_square(&p)),
    };
    print_json(&BudgetReport {
        geometry,
        n0: b.n0,
        n: b.n,
    })
}

fn run(cli: Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Selfcheck => {
            let report = selfcheck::run();
            print_json(&report)?;
            for c in report.checks.iter().filter(|c| !c.pass) {
                eprintln!("selfcheck {} failed: {}", c.name, c.detail);
            }
            if report.pass {
                Ok(())
            } else {
                Err(Failure::Selfcheck)
            }
        }
        Command::Strip(a) => run_geometry("strip", a),
        Command::Square(a) => run_geometry("square", a),
        Command::Sector(a) => run_geometry("sector", a),
        Command::Piano(a) => run_geometry("piano", a),
        Command::KernelDump(a) => kernel_dump(a),
        Command::Budget(a) => budget(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Config(msg) | Failure::Numerical(msg) => eprintln!("error: {msg}"),
                Failure::Selfcheck => {}
            }
            ExitCode::from(f.code())
        }
    }
}
