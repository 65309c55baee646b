//! The `qrecon` command-line tool.
//!
//! Exit codes: `0` success, `2` an invalid invocation or input, `3` a typed
//! algorithm-level failure (the inputs are inconsistent or non-generic).

pub mod format;

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use qrecon_core::harness::{batch_stats, run_batch, BatchSummary, TrialRecord};
use qrecon_core::reconstruct::GenericityFlag;
use qrecon_core::state::parse_parties;
use qrecon_core::tomography::{planar_density, GridSpec, GridWavefunction, Plane, Profile};
use qrecon_core::{
    fidelity, reconstruct_tripartite, DensityMatrix, Dims, Error, ReconstructionConfig, ReconstructionReport,
};
use serde::Serialize;

use crate::format::{write_report, MatrixFile};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_ALGORITHM: i32 = 3;

/// Minimum per-trial fidelity for `roundtrip` to count a batch as passing.
pub const ROUNDTRIP_FIDELITY: f64 = 1.0 - 1e-8;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Algorithm(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Algorithm(_) => EXIT_ALGORITHM,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_algorithmic() {
            CliError::Algorithm(e)
        } else {
            CliError::Usage(e.to_string())
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => f.write_str(msg),
            CliError::Algorithm(e) => write!(f, "{}: {e}", e.name()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "qrecon", version, about = "Reconstruct a tripartite pure state from its AB and BC marginals")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a Haar-random pure state.
    Gen {
        #[arg(long, value_parser = parse_dims)]
        dims: Dims,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a reduced density matrix of a state file.
    Marginals {
        #[arg(long = "in")]
        input: PathBuf,
        /// Parties to keep, e.g. AB or B.
        #[arg(long)]
        keep: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct a pure state from rho_AB and rho_BC.
    Reconstruct {
        #[arg(long)]
        ab: PathBuf,
        #[arg(long)]
        bc: PathBuf,
        #[arg(long, value_parser = parse_dims)]
        dims: Dims,
        #[command(flatten)]
        tolerances: ToleranceArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: PathBuf,
        /// Pure state to compare the reconstruction against.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Record wall-clock timings in the report.
        #[arg(long)]
        timings: bool,
    },
    /// Run a batch of Haar round trips.
    Roundtrip {
        #[arg(long, value_parser = parse_dims)]
        dims: Dims,
        #[arg(long)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed_base: u64,
        #[command(flatten)]
        tolerances: ToleranceArgs,
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        timings: bool,
    },
    /// Reconstruct a built-in spatial wavefunction from its XY and YZ densities.
    TomoDemo {
        #[arg(long, value_parser = parse_triple)]
        grid: [usize; 3],
        #[arg(long)]
        profile: Profile,
        #[command(flatten)]
        tolerances: ToleranceArgs,
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        timings: bool,
    },
}

/// Overrides for [`ReconstructionConfig`] fields.
#[derive(Debug, Clone, Default, Args)]
pub struct ToleranceArgs {
    #[arg(long)]
    pub rank_threshold: Option<f64>,
    #[arg(long)]
    pub gap_tol: Option<f64>,
    #[arg(long)]
    pub pair_tol: Option<f64>,
    #[arg(long)]
    pub edge_tol: Option<f64>,
    #[arg(long)]
    pub phase_tol: Option<f64>,
    #[arg(long)]
    pub marginal_tol: Option<f64>,
}

impl ToleranceArgs {
    pub fn config(&self) -> Result<ReconstructionConfig, CliError> {
        let d = ReconstructionConfig::default();
        let config = ReconstructionConfig {
            rank_threshold: self.rank_threshold.unwrap_or(d.rank_threshold),
            gap_tol: self.gap_tol.unwrap_or(d.gap_tol),
            pair_tol: self.pair_tol.unwrap_or(d.pair_tol),
            edge_tol: self.edge_tol.unwrap_or(d.edge_tol),
            phase_tol: self.phase_tol.unwrap_or(d.phase_tol),
            marginal_tol: self.marginal_tol.unwrap_or(d.marginal_tol),
        };
        config.validate()?;
        Ok(config)
    }
}

fn parse_triple(s: &str) -> Result<[usize; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    let [a, b, c] = parts.as_slice() else {
        return Err(format!("expected three comma-separated integers, got {s:?}"));
    };
    let n = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
    Ok([n(a)?, n(b)?, n(c)?])
}

fn parse_dims(s: &str) -> Result<Dims, String> {
    let [a, b, c] = parse_triple(s)?;
    Dims::new(a, b, c).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Timings {
    pub total_seconds: f64,
}

/// JSON report of one reconstruction.
#[derive(Debug, Clone, Serialize)]
pub struct ReconstructionSummary {
    pub outcome: String,
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fidelity: Option<f64>,
    pub marginal_residual_ab: Option<f64>,
    pub marginal_residual_bc: Option<f64>,
    pub eq8_residual: Option<f64>,
    pub cycle_residual: Option<f64>,
    pub genericity_flags: Vec<GenericityFlag>,
    pub config: ReconstructionConfig,
    pub timings: Option<Timings>,
}

impl ReconstructionSummary {
    fn success(report: &ReconstructionReport, fidelity: Option<f64>, config: ReconstructionConfig) -> Self {
        ReconstructionSummary {
            outcome: qrecon_core::harness::SUCCESS.into(),
            error: None,
            fidelity,
            marginal_residual_ab: Some(report.marginal_residual_ab),
            marginal_residual_bc: Some(report.marginal_residual_bc),
            eq8_residual: Some(report.eq8_residual),
            cycle_residual: Some(report.cycle_residual),
            genericity_flags: report.genericity_flags.clone(),
            config,
            timings: None,
        }
    }

    fn failure(e: &Error, config: ReconstructionConfig) -> Self {
        ReconstructionSummary {
            outcome: e.name().into(),
            error: Some(e.to_string()),
            fidelity: None,
            marginal_residual_ab: None,
            marginal_residual_bc: None,
            eq8_residual: None,
            cycle_residual: None,
            genericity_flags: Vec::new(),
            config,
            timings: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RoundtripReport {
    pub dims: Dims,
    pub trials: usize,
    pub seed_base: u64,
    pub passed: bool,
    pub config: ReconstructionConfig,
    pub summary: BatchSummary,
    pub records: Vec<TrialRecord>,
    pub timings: Option<Timings>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TomoReport {
    pub grid: [usize; 3],
    pub spacings: [f64; 3],
    pub profile: Profile,
    #[serde(flatten)]
    pub result: ReconstructionSummary,
}

/// Parses `args` (program name first), runs the command and returns the exit
/// code. Diagnostics go to standard error.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("qrecon: {e}");
            e.exit_code()
        }
    }
}

/// Runs one command. `Ok` carries the exit code for commands that write a
/// report even when the reconstruction fails.
pub fn run(command: &Command) -> Result<i32, CliError> {
    let start = Instant::now();
    let elapsed = |on: bool| on.then(|| Timings { total_seconds: start.elapsed().as_secs_f64() });
    match command {
        Command::Gen { dims, seed, out } => {
            MatrixFile::Pure(qrecon_core::harness::sample_haar_state(*dims, *seed)).write(out)?;
            Ok(EXIT_OK)
        }
        Command::Marginals { input, keep, out } => {
            let keep = parse_parties(keep)?;
            let rho = match MatrixFile::read(input)? {
                MatrixFile::Pure(psi) => psi.partial_trace(&keep)?,
                MatrixFile::Density(rho) => rho.partial_trace(&keep)?,
                MatrixFile::Grid(_) => {
                    return Err(CliError::Usage(format!("{}: cannot trace a grid wavefunction", input.display())))
                }
            };
            MatrixFile::Density(rho).write(out)?;
            Ok(EXIT_OK)
        }
        Command::Reconstruct { ab, bc, dims, tolerances, out, report, truth, timings } => {
            let config = tolerances.config()?;
            let rho_ab = MatrixFile::read(ab)?.into_density(ab)?;
            let rho_bc = MatrixFile::read(bc)?.into_density(bc)?;
            let truth = truth.as_deref().map(|p| MatrixFile::read(p)?.into_pure(p)).transpose()?;
            match reconstruct_tripartite(&rho_ab, &rho_bc, *dims, &config) {
                Ok(r) => {
                    let f = truth.as_ref().map(|t| fidelity(&r.state, t)).transpose()?;
                    MatrixFile::Pure(r.state.clone()).write(out)?;
                    let mut summary = ReconstructionSummary::success(&r, f, config);
                    summary.timings = elapsed(*timings);
                    write_report(report, &summary)?;
                    Ok(EXIT_OK)
                }
                Err(e) => algorithm_failure(e, report, config, elapsed(*timings), |s| s),
            }
        }
        Command::Roundtrip { dims, trials, seed_base, tolerances, report, timings } => {
            let config = tolerances.config()?;
            if *trials == 0 {
                return Err(CliError::Usage("--trials must be at least 1".into()));
            }
            let records = run_batch(*dims, *trials, *seed_base, &config);
            let summary = batch_stats(&records)?;
            let passed = summary.successes == *trials
                && summary.min_fidelity().is_some_and(|f| f >= ROUNDTRIP_FIDELITY);
            let out = RoundtripReport {
                dims: *dims,
                trials: *trials,
                seed_base: *seed_base,
                passed,
                config,
                summary,
                records,
                timings: elapsed(*timings),
            };
            write_report(report, &out)?;
            Ok(if passed { EXIT_OK } else { EXIT_ALGORITHM })
        }
        Command::TomoDemo { grid, profile, tolerances, report, timings } => {
            let config = tolerances.config()?;
            let spec = GridSpec::centered(*grid)?;
            let psi = profile.wavefunction(&spec)?;
            let wrap = |result: ReconstructionSummary| TomoReport {
                grid: *grid,
                spacings: spec.spacings(),
                profile: *profile,
                result,
            };
            match tomography_round_trip(&psi, &spec, &config) {
                Ok((r, f)) => {
                    let mut summary = ReconstructionSummary::success(&r, Some(f), config);
                    summary.timings = elapsed(*timings);
                    write_report(report, &wrap(summary))?;
                    Ok(EXIT_OK)
                }
                Err(e) => algorithm_failure(e, report, config, elapsed(*timings), wrap),
            }
        }
    }
}

fn tomography_round_trip(
    psi: &GridWavefunction,
    spec: &GridSpec,
    config: &ReconstructionConfig,
) -> Result<(ReconstructionReport, f64), Error> {
    let rho_xy: DensityMatrix = planar_density(psi, Plane::XY);
    let rho_yz = planar_density(psi, Plane::YZ);
    let r = reconstruct_tripartite(&rho_xy, &rho_yz, spec.dims(), config)?;
    let f = GridWavefunction::from_pure_state(*spec, &r.state)?.fidelity(psi)?;
    Ok((r, f))
}

/// Writes the failure report for algorithm-level errors and maps everything
/// else to a usage failure.
fn algorithm_failure<T: Serialize>(
    e: Error,
    report: &Path,
    config: ReconstructionConfig,
    timings: Option<Timings>,
    wrap: impl FnOnce(ReconstructionSummary) -> T,
) -> Result<i32, CliError> {
    if !e.is_algorithmic() {
        return Err(e.into());
    }
    let mut summary = ReconstructionSummary::failure(&e, config);
    summary.timings = timings;
    write_report(report, &wrap(summary))?;
    eprintln!("qrecon: {}", CliError::Algorithm(e));
    Ok(EXIT_ALGORITHM)
}
