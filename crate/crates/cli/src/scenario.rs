//! Scenario files and the inputs they reference.
//!
//! Paths inside a scenario are resolved against the scenario file's
//! directory. Every input is loaded and validated before any command runs.

use std::fs;
use std::path::{Path, PathBuf};

use isoperi_core::calibration::{
    Monomial, PolynomialOneForm, Region, TangentSampling, DEFAULT_SAMPLES,
};
use isoperi_core::curves::{random_perturbation, random_star, sample_fourier};
use isoperi_core::{
    ConstantTwoForm, ConstraintSet, ConstraintSpec, DiscreteCurve, FormEntry, FourierCurve,
    OptimizerConfig, SpectrumConfig, SweepConfig,
};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Eval,
    Minimize,
    Spectrum,
    Calibrate,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Eval => "eval",
            Command::Minimize => "minimize",
            Command::Spectrum => "spectrum",
            Command::Calibrate => "calibrate",
            Command::Sweep => "sweep",
        }
    }
}

/// Where the starting curve comes from.
#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CurveSource {
    /// Polygon file `{"n": .., "vertices": [[..], ..]}`.
    Polygon(PathBuf),
    /// Trigonometric curve file `{"n", "a0", "terms"}` sampled at `samples`.
    Fourier { path: PathBuf, samples: usize },
    /// Seeded random star-shaped polygon in the (x0, x1) plane.
    RandomStar {
        vertices: usize,
        r_min: f64,
        r_max: f64,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    /// Optional cross-check against the command given on the command line.
    #[serde(default)]
    pub command: Option<Command>,
    pub curve: CurveSource,
    /// Seeded random displacement of every vertex, applied after loading.
    #[serde(default)]
    pub perturbation: Option<f64>,
    /// `ConstraintSpec` JSON.
    #[serde(default)]
    pub constraints: Option<PathBuf>,
    /// Constant 2-form `{"n", "entries"}`, used by eval.
    #[serde(default)]
    pub two_form: Option<PathBuf>,
    /// Polynomial 1-form `{"n", "monomials"}`, used by calibrate.
    #[serde(default)]
    pub one_form: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub params: serde_json::Value,
    /// Report file name inside the output directory.
    #[serde(default)]
    pub output: Option<String>,
    /// Optional CSV trace file name for minimize.
    #[serde(default)]
    pub trace: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TwoFormFile {
    n: usize,
    entries: Vec<FormEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OneFormFile {
    n: usize,
    monomials: Vec<Monomial>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateParams {
    pub region: Region,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub tangent_sampling: TangentSampling,
}

fn default_samples() -> usize {
    DEFAULT_SAMPLES
}

fn default_tol() -> f64 {
    1e-6
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepParams {
    pub targets: Vec<f64>,
    #[serde(default = "default_warm_start")]
    pub warm_start: bool,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
}

fn default_warm_start() -> bool {
    SweepConfig::default().warm_start
}

/// Fully loaded inputs for one command.
pub enum Job {
    Eval {
        curve: DiscreteCurve,
        form: Option<ConstantTwoForm>,
    },
    Minimize {
        curve: DiscreteCurve,
        constraints: ConstraintSet,
        config: OptimizerConfig,
        trace: Option<String>,
    },
    Spectrum {
        curve: DiscreteCurve,
        constraints: ConstraintSet,
        config: SpectrumConfig,
    },
    Calibrate {
        curve: DiscreteCurve,
        form: PolynomialOneForm,
        params: CalibrateParams,
    },
    Sweep {
        curve: DiscreteCurve,
        constraints: ConstraintSet,
        targets: Vec<f64>,
        config: SweepConfig,
    },
}

pub struct Scenario {
    pub command: Command,
    pub seed: u64,
    pub output: String,
    pub job: Job,
}

fn read_json<T: DeserializeOwned>(path: &Path, what: &str) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {what} file {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("cannot parse {what} file {}: {e}", path.display())))
}

fn params<T: DeserializeOwned + Default>(value: &serde_json::Value) -> Result<T, CliError> {
    if value.is_null() {
        return Ok(T::default());
    }
    serde_json::from_value(value.clone())
        .map_err(|e| CliError::Input(format!("invalid params: {e}")))
}

fn required<'a>(
    path: &'a Option<PathBuf>,
    key: &str,
    command: Command,
) -> Result<&'a PathBuf, CliError> {
    path.as_ref()
        .ok_or_else(|| CliError::Input(format!("{} needs a \"{key}\" entry", command.name())))
}

/// Rejects file names that would escape the output directory.
fn plain_file_name(name: &str, key: &str) -> Result<String, CliError> {
    let p = Path::new(name);
    match (p.file_name(), p.components().count()) {
        (Some(f), 1) if f == p.as_os_str() => Ok(name.to_string()),
        _ => Err(CliError::Input(format!(
            "\"{key}\" must be a plain file name, got {name:?}"
        ))),
    }
}

impl Scenario {
    pub fn load(
        command: Command,
        path: &Path,
        seed_override: Option<u64>,
    ) -> Result<Scenario, CliError> {
        let file: ScenarioFile = read_json(path, "scenario")?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &PathBuf| base.join(p);

        if let Some(c) = file.command {
            if c != command {
                return Err(CliError::Input(format!(
                    "scenario is for {}, not {}",
                    c.name(),
                    command.name()
                )));
            }
        }
        let seed = seed_override.or(file.seed).unwrap_or(0);

        let mut curve = match &file.curve {
            CurveSource::Polygon(p) => read_json::<DiscreteCurve>(&resolve(p), "curve")?,
            CurveSource::Fourier { path, samples } => {
                let f: FourierCurve = read_json(&resolve(path), "Fourier curve")?;
                sample_fourier(&f, *samples)?
            }
            CurveSource::RandomStar {
                vertices,
                r_min,
                r_max,
            } => random_star(*vertices, *r_min, *r_max, seed)?,
        };
        if let Some(m) = file.perturbation {
            curve = random_perturbation(&curve, m, seed)?;
        }
        let n = curve.dim();

        let load_constraints = || -> Result<ConstraintSet, CliError> {
            let spec: ConstraintSpec = read_json(
                &resolve(required(&file.constraints, "constraints", command)?),
                "constraints",
            )?;
            Ok(spec.build(n)?)
        };

        let job = match command {
            Command::Eval => {
                let form = match &file.two_form {
                    Some(p) => {
                        let f: TwoFormFile = read_json(&resolve(p), "2-form")?;
                        if f.n != n {
                            return Err(CliError::Input(format!(
                                "2-form is on R^{}, curve is in R^{n}",
                                f.n
                            )));
                        }
                        Some(ConstantTwoForm::from_entries(f.n, &f.entries)?)
                    }
                    None => None,
                };
                if !file.params.is_null() {
                    return Err(CliError::Input("eval takes no params".into()));
                }
                Job::Eval { curve, form }
            }
            Command::Minimize => {
                let mut config: OptimizerConfig = params(&file.params)?;
                config.seed = seed;
                config.validate()?;
                let trace = file
                    .trace
                    .as_deref()
                    .map(|t| plain_file_name(t, "trace"))
                    .transpose()?;
                Job::Minimize {
                    constraints: load_constraints()?,
                    curve,
                    config,
                    trace,
                }
            }
            Command::Spectrum => Job::Spectrum {
                constraints: load_constraints()?,
                curve,
                config: params(&file.params)?,
            },
            Command::Calibrate => {
                let f: OneFormFile = read_json(
                    &resolve(required(&file.one_form, "one_form", command)?),
                    "1-form",
                )?;
                let form = PolynomialOneForm::from_monomials(f.n, &f.monomials)?;
                if file.params.is_null() {
                    return Err(CliError::Input(
                        "calibrate needs params with a region".into(),
                    ));
                }
                let params: CalibrateParams = serde_json::from_value(file.params.clone())
                    .map_err(|e| CliError::Input(format!("invalid params: {e}")))?;
                params.region.validate()?;
                Job::Calibrate {
                    curve,
                    form,
                    params,
                }
            }
            Command::Sweep => {
                if file.params.is_null() {
                    return Err(CliError::Input("sweep needs params with targets".into()));
                }
                let mut p: SweepParams = serde_json::from_value(file.params.clone())
                    .map_err(|e| CliError::Input(format!("invalid params: {e}")))?;
                p.optimizer.seed = seed;
                p.optimizer.validate()?;
                Job::Sweep {
                    constraints: load_constraints()?,
                    curve,
                    targets: p.targets,
                    config: SweepConfig {
                        warm_start: p.warm_start,
                        optimizer: p.optimizer,
                    },
                }
            }
        };

        let output = match &file.output {
            Some(o) => plain_file_name(o, "output")?,
            None => format!("{}.json", command.name()),
        };
        Ok(Scenario {
            command,
            seed,
            output,
            job,
        })
    }
}
