//! Scenario runner behind the `isoperi` binary.
//!
//! `isoperi <command> --scenario <file> [--out <dir>] [--seed <int>]`
//! loads every input named by the scenario, runs the command, and only then
//! writes its JSON report (plus a CSV for sweeps and optional traces).
//! Exit codes: 0 success, 2 input error, 3 numerical or degeneracy error.
//! Failures print one JSON object on standard error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Parser;
use isoperi_core::calibration::verify_certificate;
use isoperi_core::functionals::{
    length, multi_volume, omega_volume, spanning_volume_bracket, spectral_multi_volume,
    stationarity_fit,
};
use isoperi_core::optimizer::minimize_length;
use isoperi_core::stability::constrained_hessian_spectrum;
use isoperi_core::sweep::{sweep_profile, write_sweep_csv};
use serde::Serialize;
use serde_json::json;

pub mod scenario;

use scenario::Job;
pub use scenario::{Command, Scenario};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) | CliError::Output(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Input(_) => "input",
            CliError::Numerical(_) => "numerical",
            CliError::Output(_) => "output",
        }
    }

    pub fn to_json(&self) -> String {
        json!({
            "error": self.kind(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        })
        .to_string()
    }
}

impl From<isoperi_core::Error> for CliError {
    fn from(e: isoperi_core::Error) -> Self {
        if e.is_input_error() {
            CliError::Input(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "isoperi",
    version,
    about = "Length minimization under volume constraints for closed curves in R^n"
)]
pub struct Args {
    #[arg(value_enum)]
    pub command: Command,
    /// Scenario JSON file.
    #[arg(long)]
    pub scenario: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Overrides the scenario's seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// A file to be written once the command has succeeded.
struct Artifact {
    name: String,
    bytes: Vec<u8>,
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| CliError::Numerical(format!("cannot encode report: {e}")))?;
    bytes.push(b'\n');
    Ok(bytes)
}

#[derive(Serialize)]
struct EvalReport {
    dimension: usize,
    vertices: usize,
    length: f64,
    multi_volume: isoperi_core::MultiVolume,
    spectral_multi_volume: isoperi_core::MultiVolume,
    #[serde(skip_serializing_if = "Option::is_none")]
    omega_volume: Option<f64>,
    stationarity: isoperi_core::StationarityFit,
    volume_bracket: isoperi_core::VolumeBracket,
}

#[derive(Serialize)]
struct SweepReport<'a> {
    csv: &'a str,
    warm_start: bool,
    points: &'a [isoperi_core::SweepPoint],
}

fn execute(s: &Scenario) -> Result<Vec<Artifact>, CliError> {
    let report = |bytes| Artifact {
        name: s.output.clone(),
        bytes,
    };
    Ok(match &s.job {
        Job::Eval { curve, form } => {
            let r = EvalReport {
                dimension: curve.dim(),
                vertices: curve.num_vertices(),
                length: length(curve),
                multi_volume: multi_volume(curve),
                spectral_multi_volume: spectral_multi_volume(curve),
                omega_volume: form.as_ref().map(|f| omega_volume(curve, f)).transpose()?,
                stationarity: stationarity_fit(curve, None)?,
                volume_bracket: spanning_volume_bracket(curve),
            };
            vec![report(to_json(&r)?)]
        }
        Job::Minimize {
            curve,
            constraints,
            config,
            trace,
        } => {
            let r = minimize_length(curve, constraints, config)?;
            let mut out = vec![report(to_json(&r)?)];
            if let Some(name) = trace {
                let mut bytes = vec![];
                r.write_trace_csv(&mut bytes)?;
                out.push(Artifact {
                    name: name.clone(),
                    bytes,
                });
            }
            out
        }
        Job::Spectrum {
            curve,
            constraints,
            config,
        } => vec![report(to_json(&constrained_hessian_spectrum(
            curve,
            constraints,
            config,
        )?)?)],
        Job::Calibrate {
            curve,
            form,
            params,
        } => {
            let c = verify_certificate(
                form,
                &params.region,
                curve,
                params.samples,
                params.tol,
                params.tangent_sampling,
            )?;
            vec![report(to_json(&c)?)]
        }
        Job::Sweep {
            curve,
            constraints,
            targets,
            config,
        } => {
            let points = sweep_profile(curve, constraints, targets, config)?;
            let csv_name = format!(
                "{}.csv",
                Path::new(&s.output)
                    .file_stem()
                    .and_then(|f| f.to_str())
                    .unwrap_or("sweep")
            );
            let mut csv = vec![];
            write_sweep_csv(&points, &mut csv)?;
            let r = SweepReport {
                csv: &csv_name,
                warm_start: config.warm_start,
                points: &points,
            };
            vec![
                report(to_json(&r)?),
                Artifact {
                    name: csv_name,
                    bytes: csv,
                },
            ]
        }
    })
}

fn write_all(out: &Path, artifacts: &[Artifact]) -> Result<(), CliError> {
    fs::create_dir_all(out)
        .map_err(|e| CliError::Output(format!("cannot create {}: {e}", out.display())))?;
    for a in artifacts {
        let path = out.join(&a.name);
        fs::write(&path, &a.bytes)
            .map_err(|e| CliError::Output(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

/// Runs one parsed invocation and returns the paths written.
pub fn run(args: &Args) -> Result<Vec<PathBuf>, CliError> {
    let scenario = Scenario::load(args.command, &args.scenario, args.seed)?;
    let artifacts = execute(&scenario)?;
    write_all(&args.out, &artifacts)?;
    Ok(artifacts.iter().map(|a| args.out.join(&a.name)).collect())
}

/// Parses `argv`, runs, reports failures on standard error, and returns the
/// process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return 0;
        }
        Err(e) => {
            let err = CliError::Input(
                e.kind().to_string() + ": " + e.to_string().lines().next().unwrap_or(""),
            );
            eprintln!("{}", err.to_json());
            return err.exit_code();
        }
    };
    match run(&args) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}
