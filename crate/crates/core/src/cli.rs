//! Command-line front end.
//!
//! Exit codes: 0 success, 2 invalid input, 3 no feasible capacity, 4 I/O.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::analysis::{
    compare_report, report_json, write_curve_csv, write_long_csv, AnalysisError, CostCurve,
};
use crate::capacity::{write_capacity_csv, CapacityError};
use crate::kv::{parse_decimal_list, KvWriter};
use crate::scenario::{load_scenario, manifest_entries, validate_file, ConfigError, LoadedScenario, Overrides};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "evcost", version, about = "Cost curves and break-even points for FaaS vs. stream processing")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check catalogs, deployment descriptors, SUT models and scenarios.
    Validate {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Write the cost curve of one scenario.
    Curve(RunArgs),
    /// Compare two scenarios on a shared load grid.
    Compare(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long = "scenario", required = true)]
    pub scenarios: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the seed in every scenario file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated sensor counts overriding the scenario grid.
    #[arg(long)]
    pub grid: Option<String>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(e) if e.is_io() => EXIT_IO,
            CliError::Config(_) | CliError::Usage(_) => EXIT_VALIDATION,
            CliError::Analysis(AnalysisError::Capacity {
                source: CapacityError::NoFeasibleCapacity { .. },
                ..
            }) => EXIT_INFEASIBLE,
            CliError::Analysis(_) => EXIT_VALIDATION,
            CliError::Io { .. } => EXIT_IO,
        }
    }
}

/// Runs a parsed command and returns the process exit code. Diagnostics go
/// to stderr.
pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Validate { paths } => return cmd_validate(&paths),
        Command::Curve(args) => cmd_curve(&args),
        Command::Compare(args) => cmd_compare(&args),
    };
    match result {
        Ok(written) => {
            for path in written {
                println!("{}", path.display());
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Validates every file; the exit code is that of the first failure.
pub fn cmd_validate(paths: &[PathBuf]) -> i32 {
    let mut code = EXIT_OK;
    for path in paths {
        match validate_file(path) {
            Ok(kind) => println!("ok {} ({kind:?})", path.display()),
            Err(e) => {
                match e.field() {
                    Some(field) => eprintln!("invalid {} [{field}]: {e}", path.display()),
                    None => eprintln!("invalid {}: {e}", path.display()),
                }
                if code == EXIT_OK {
                    code = CliError::Config(e).exit_code();
                }
            }
        }
    }
    code
}

fn overrides(args: &RunArgs) -> Result<Overrides, CliError> {
    let grid = args
        .grid
        .as_deref()
        .map(|g| parse_decimal_list("--grid", g))
        .transpose()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(Overrides { seed: args.seed, grid })
}

fn file_stem(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

struct OutputDir {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl OutputDir {
    fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root)
            .map_err(|e| CliError::Io { path: root.to_path_buf(), message: e.to_string() })?;
        Ok(OutputDir { root: root.to_path_buf(), written: Vec::new() })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.root.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::Io { path: path.clone(), message: e.to_string() })?;
        self.written.push(path);
        Ok(())
    }

    fn write_curve(&mut self, loaded: &LoadedScenario, curve: &CostCurve) -> Result<(), CliError> {
        let stem = file_stem(&loaded.scenario.label);
        let mut buf = Vec::new();
        write_curve_csv(&mut buf, curve).expect("in-memory write");
        self.write(&format!("curve_{stem}.csv"), &buf)?;
        if loaded.scenario.search.is_some() {
            let mut buf = Vec::new();
            write_capacity_csv(&mut buf, &curve.capacity_results()).expect("in-memory write");
            self.write(&format!("capacity_{stem}.csv"), &buf)?;
        }
        Ok(())
    }
}

fn manifest(command: &str, args: &RunArgs, loaded: &[LoadedScenario]) -> String {
    let mut w = KvWriter::new();
    w.str("tool", env!("CARGO_PKG_NAME")).str("version", env!("CARGO_PKG_VERSION"));
    w.str("command", command);
    w.display("out", args.out.display());
    if let Some(seed) = args.seed {
        w.int("seed_override", seed);
    }
    if let Some(grid) = &args.grid {
        w.str("grid_override", grid);
    }
    w.int("scenario_count", loaded.len() as u64);
    for (i, l) in loaded.iter().enumerate() {
        manifest_entries(&mut w, &format!("scenario_{i}_"), l);
    }
    w.finish()
}

pub fn cmd_curve(args: &RunArgs) -> Result<Vec<PathBuf>, CliError> {
    let [path] = args.scenarios.as_slice() else {
        return Err(CliError::Usage("curve takes exactly one --scenario".into()));
    };
    let loaded = load_scenario(path, &overrides(args)?)?;
    let curve = loaded.scenario.curve()?;
    let mut out = OutputDir::create(&args.out)?;
    out.write_curve(&loaded, &curve)?;
    out.write("manifest.toml", manifest("curve", args, std::slice::from_ref(&loaded)).as_bytes())?;
    Ok(out.written)
}

pub fn cmd_compare(args: &RunArgs) -> Result<Vec<PathBuf>, CliError> {
    if args.scenarios.len() != 2 {
        return Err(CliError::Usage("compare takes exactly two --scenario arguments".into()));
    }
    let ov = overrides(args)?;
    let loaded = args
        .scenarios
        .iter()
        .map(|p| load_scenario(p, &ov))
        .collect::<Result<Vec<_>, _>>()?;
    let scenarios: Vec<_> = loaded.iter().map(|l| l.scenario.clone()).collect();
    let report = compare_report(&scenarios)?;

    let mut out = OutputDir::create(&args.out)?;
    out.write("report.json", report_json(&report).as_bytes())?;
    for (l, curve) in loaded.iter().zip(&report.curves) {
        out.write_curve(l, curve)?;
    }
    let mut buf = Vec::new();
    write_long_csv(&mut buf, &report.curves).expect("in-memory write");
    out.write("costs_long.csv", &buf)?;
    out.write("manifest.toml", manifest("compare", args, &loaded).as_bytes())?;
    Ok(out.written)
}
