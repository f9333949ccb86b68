use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use lurecert::model::{load_document, LureSystem, SystemDocument};
use serde_json::Value;

#[derive(Debug, Parser)]
#[command(name = "lurecert", version, about = "Local stability certificates for positive Lur'e systems with neural-network feedback")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: RunOptions,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate positivity and print the stable sector limits
    Check,
    /// Sweep network sector slopes over boxes [0, y_bar]
    Sector(SectorArgs),
    /// Aizerman-type certificate with its analytic region of attraction
    Certify,
    /// Quadratic Lyapunov certificate and sublevel-set search
    Lyap(LyapArgs),
    /// Simulate initial conditions drawn from a certified region
    Simulate(SimulateArgs),
    /// Run both certificates and tabulate runtimes and regions
    Compare,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Sector(_) => "sector",
            Command::Certify => "certify",
            Command::Lyap(_) => "lyap",
            Command::Simulate(_) => "simulate",
            Command::Compare => "compare",
        }
    }
}

#[derive(Debug, Args)]
pub struct RunOptions {
    /// System file (JSON)
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Directory for the JSON report and CSV side files
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Sample count (per level for lyap, initial conditions for simulate)
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    #[arg(long, global = true, default_value_t = lurecert::sim::DEFAULT_HORIZON)]
    pub horizon: f64,
    #[arg(long, global = true, default_value_t = lurecert::sim::DEFAULT_STEP)]
    pub step: f64,
    /// Largest output box probed by the Γ search
    #[arg(long = "y-max", global = true, default_value_t = 50.0)]
    pub y_max: f64,
    /// Absolute tolerance of the Γ search
    #[arg(long, global = true, default_value_t = 1e-3)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct SectorArgs {
    /// Comma-separated box sizes; defaults to 20 even steps up to --y-max
    #[arg(long = "y-bars", value_delimiter = ',')]
    pub y_bars: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct LyapArgs {
    /// Points per axis of the V' grid
    #[arg(long, default_value_t = 41)]
    pub grid: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RegionKind {
    Aizerman,
    Lyapunov,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value_t = RegionKind::Aizerman)]
    pub region: RegionKind,
    /// Scale factor on the region's bound (half-space) or level (ellipsoid)
    #[arg(long, default_value_t = 1.0)]
    pub inflate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok = 0,
    NotCertified = 1,
    InputError = 2,
}

/// Input problem; always exits with status 2.
#[derive(Debug)]
pub struct InputError(pub String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl<E: std::error::Error> From<E> for InputError {
    fn from(e: E) -> Self {
        InputError(e.to_string())
    }
}

pub type CmdResult = Result<Output, InputError>;

/// What a command produced: report, side files and a human summary.
pub struct Output {
    pub status: Status,
    pub report: Value,
    pub files: Vec<(String, Vec<u8>)>,
    pub summary: Vec<String>,
}

impl Output {
    pub fn new(status: Status, report: Value) -> Self {
        Self {
            status,
            report,
            files: Vec::new(),
            summary: Vec::new(),
        }
    }

    pub fn line(&mut self, s: impl Into<String>) {
        self.summary.push(s.into());
    }

    pub fn emit(&self, command: &str, opts: &RunOptions) -> Result<(), InputError> {
        for line in &self.summary {
            println!("{line}");
        }
        let Some(dir) = &opts.out else {
            return Ok(());
        };
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        let mut text = serde_json::to_string_pretty(&self.report)?;
        text.push('\n');
        let report = dir.join(format!("{command}.json"));
        fs::write(&report, text).map_err(|e| io_error(&report, e))?;
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            fs::write(&path, bytes).map_err(|e| io_error(&path, e))?;
        }
        Ok(())
    }
}

fn io_error(path: &Path, e: std::io::Error) -> InputError {
    InputError(format!("{}: {e}", path.display()))
}

impl RunOptions {
    pub fn document(&self) -> Result<SystemDocument, InputError> {
        let path = self.input.as_ref().ok_or_else(|| InputError("--input is required".into()))?;
        Ok(load_document(path)?)
    }

    pub fn system(&self) -> Result<(LureSystem, SystemDocument), InputError> {
        let doc = self.document()?;
        let system = doc.clone().into_system()?;
        Ok((system, doc))
    }

    pub fn input_name(&self) -> String {
        self.input.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
    }

    pub fn check_search(&self) -> Result<(), InputError> {
        if !(self.y_max.is_finite() && self.y_max > 0.0) {
            return Err(InputError(format!("--y-max must be positive, got {}", self.y_max)));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(InputError(format!("--tol must be positive, got {}", self.tol)));
        }
        Ok(())
    }

    pub fn check_integration(&self) -> Result<(), InputError> {
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(InputError(format!("--step must be positive, got {}", self.step)));
        }
        if !(self.horizon.is_finite() && self.horizon >= self.step) {
            return Err(InputError(format!("--horizon must be at least --step, got {}", self.horizon)));
        }
        Ok(())
    }
}

/// JSON number, or null for non-finite values.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

pub fn matrix(m: &lurecert::numcore::Matrix) -> Value {
    Value::Array(m.to_rows().into_iter().map(|r| Value::Array(r.into_iter().map(num).collect())).collect())
}

pub fn vector(v: &[f64]) -> Value {
    Value::Array(v.iter().copied().map(num).collect())
}

pub fn csv_bytes(header: &[String], rows: &[Vec<f64>]) -> Result<Vec<u8>, InputError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(f64::to_string))?;
    }
    w.into_inner().map_err(|e| InputError(e.to_string()))
}
