//! Scenario files: a TOML document with `[scenario]`, `[params]`, `[method]`
//! and `[outputs]` tables plus a top-level `schema_version`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sdefl_core::kalman::EkfObjective;
use sdefl_core::optim::Bounds;
use sdefl_core::particle::ResampleMode;
use sdefl_core::{JumpConvention, ModelParams, ModelTag};
use serde::Deserialize;

use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Scenarios compiled into the binary, in the order `reproduce` runs them.
pub const BUILTIN: &[(&str, &str)] = &[
    ("ou_mle", include_str!("../scenarios/ou_mle.toml")),
    ("ou_mle_corrected", include_str!("../scenarios/ou_mle_corrected.toml")),
    ("ou_kalman", include_str!("../scenarios/ou_kalman.toml")),
    ("bk_mle", include_str!("../scenarios/bk_mle.toml")),
    ("ou_jump_mle", include_str!("../scenarios/ou_jump_mle.toml")),
    ("ou_jump_mle_paper", include_str!("../scenarios/ou_jump_mle_paper.toml")),
    ("ou_jump_kalman", include_str!("../scenarios/ou_jump_kalman.toml")),
    ("heston_ekf", include_str!("../scenarios/heston_ekf.toml")),
    ("heston_ekf_estimate_paper", include_str!("../scenarios/heston_ekf_estimate_paper.toml")),
    ("heston_ekf_estimate_corrected", include_str!("../scenarios/heston_ekf_estimate_corrected.toml")),
    ("heston_particle_ekf", include_str!("../scenarios/heston_particle_ekf.toml")),
    ("bates_ekf", include_str!("../scenarios/bates_ekf.toml")),
    ("bates_particle_ekf", include_str!("../scenarios/bates_particle_ekf.toml")),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodKind {
    Mle,
    Kalman,
    Ekf,
    ParticleEkf,
}

impl MethodKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mle" => Some(Self::Mle),
            "kalman" => Some(Self::Kalman),
            "ekf" => Some(Self::Ekf),
            "particle_ekf" => Some(Self::ParticleEkf),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Mle => "mle",
            Self::Kalman => "kalman",
            Self::Ekf => "ekf",
            Self::ParticleEkf => "particle_ekf",
        }
    }

    pub fn supports(self, tag: ModelTag) -> bool {
        match self {
            Self::Mle | Self::Kalman => !tag.is_stochastic_volatility(),
            Self::Ekf | Self::ParticleEkf => tag.is_stochastic_volatility(),
        }
    }

    /// Whether the method produces a filtered state sequence.
    pub fn filters(self) -> bool {
        !matches!(self, Self::Mle)
    }
}

/// Starting point and box for calibration.
#[derive(Debug, Clone)]
pub struct Estimation {
    pub init: ModelParams,
    pub bounds: Bounds,
    pub multi_start: usize,
}

#[derive(Debug, Clone)]
pub struct Method {
    pub kind: MethodKind,
    pub estimation: Option<Estimation>,
    /// Measurement noise variance of the linear filter.
    pub meas_var: f64,
    /// Jump weight used by the likelihood (simulation has its own setting).
    pub jump_convention: JumpConvention,
    pub objective: EkfObjective,
    pub n_particles: usize,
    /// Initial variance-state uncertainty of the extended filters.
    pub p0: f64,
    pub resample: ResampleMode,
}

#[derive(Debug, Clone)]
pub struct Outputs {
    pub csv: bool,
    pub plot: bool,
    /// Subdirectory of the output root; defaults to the scenario name.
    pub dir: String,
}

/// A validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub params: ModelParams,
    pub dt: f64,
    pub n_steps: usize,
    pub seed: u64,
    /// Starting state: x0 for OU, r0 for B-K, S0 for Heston and Bates.
    pub x0: f64,
    /// Starting variance for Heston and Bates.
    pub v0: f64,
    pub simulation_jump_convention: JumpConvention,
    /// Data to use instead of simulating.
    pub input_csv: Option<PathBuf>,
    pub method: Method,
    pub outputs: Outputs,
}

impl Scenario {
    pub fn model(&self) -> ModelTag {
        self.params.tag()
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.seed = s;
        }
        self
    }

    /// Parse and validate scenario text. Relative `input_csv` paths resolve
    /// against `base_dir` when given.
    pub fn from_toml(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let raw: RawFile = toml::from_str(text).map_err(|e| CliError::validation(e.message().to_string()))?;
        raw.validate(base_dir)
    }

    pub fn builtin(name: &str) -> Option<Self> {
        BUILTIN
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, text)| Self::from_toml(text, None).expect("shipped scenarios validate"))
    }

    /// Load a scenario file, or a shipped scenario when no such file exists.
    pub fn load(target: &str) -> Result<Self> {
        let path = Path::new(target);
        if path.is_file() {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            return Self::from_toml(&text, path.parent());
        }
        Self::builtin(target).ok_or_else(|| {
            let names: Vec<&str> = BUILTIN.iter().map(|(n, _)| *n).collect();
            CliError::validation(format!("no scenario file or shipped scenario named {target:?}; shipped: {}", names.join(", ")))
        })
    }

    pub fn all_builtin() -> Vec<Self> {
        BUILTIN.iter().map(|(n, _)| Self::builtin(n).expect("listed")).collect()
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    schema_version: u32,
    scenario: RawScenario,
    params: BTreeMap<String, f64>,
    method: RawMethod,
    #[serde(default)]
    outputs: RawOutputs,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: String,
    #[serde(default)]
    description: String,
    model: String,
    dt: f64,
    n_steps: usize,
    seed: u64,
    x0: Option<f64>,
    v0: Option<f64>,
    jump_convention: Option<String>,
    input_csv: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMethod {
    kind: String,
    init: Option<BTreeMap<String, f64>>,
    bounds: Option<BTreeMap<String, [f64; 2]>>,
    #[serde(default)]
    multi_start: usize,
    meas_var: Option<f64>,
    jump_convention: Option<String>,
    objective: Option<String>,
    n_particles: Option<usize>,
    p0: Option<f64>,
    resample: Option<String>,
    ess_fraction: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutputs {
    #[serde(default = "yes")]
    csv: bool,
    #[serde(default = "yes")]
    plot: bool,
    dir: Option<String>,
}

impl Default for RawOutputs {
    fn default() -> Self {
        Self { csv: true, plot: true, dir: None }
    }
}

fn yes() -> bool {
    true
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::validation(msg)
}

fn valid_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' || c == '-')
}

/// Values of a name-keyed table in the model's parameter order.
fn ordered<T: Copy>(tag: ModelTag, table: &BTreeMap<String, T>, what: &str) -> Result<Vec<T>> {
    let names = tag.param_names();
    if let Some(extra) = table.keys().find(|k| !names.contains(&k.as_str())) {
        return Err(invalid(format!("{what}: unknown parameter {extra:?} for model {}", tag.as_str())));
    }
    names
        .iter()
        .map(|n| table.get(*n).copied().ok_or_else(|| invalid(format!("{what}: missing parameter {n:?}"))))
        .collect()
}

fn params(tag: ModelTag, v: &[f64], what: &str) -> Result<ModelParams> {
    ModelParams::from_vec(tag, v).map_err(|e| invalid(format!("{what}: {e}")))
}

fn convention(s: Option<&str>, what: &str) -> Result<JumpConvention> {
    match s {
        None => Ok(JumpConvention::default()),
        Some(s) => JumpConvention::parse(s).ok_or_else(|| invalid(format!("{what}: expected cdf_dt or cdf_raw, got {s:?}"))),
    }
}

impl RawFile {
    fn validate(self, base_dir: Option<&Path>) -> Result<Scenario> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let sc = self.scenario;
        if !valid_name(&sc.name) {
            return Err(invalid(format!("name {:?} must be non-empty lowercase letters, digits, '_' or '-'", sc.name)));
        }
        let tag = ModelTag::parse(&sc.model)
            .ok_or_else(|| invalid(format!("unknown model {:?}; expected ou, ou_jump, bk, heston or bates", sc.model)))?;
        let truth = params(tag, &ordered(tag, &self.params, "[params]")?, "[params]")?;
        if !(sc.dt > 0.0) || !sc.dt.is_finite() {
            return Err(invalid(format!("dt must be a positive number, got {}", sc.dt)));
        }
        if sc.n_steps < 2 {
            return Err(invalid(format!("n_steps must be at least 2, got {}", sc.n_steps)));
        }
        let x0 = sc.x0.unwrap_or(match tag {
            ModelTag::Ou | ModelTag::OuJump => 0.0,
            ModelTag::Bk => 1.0,
            ModelTag::Heston | ModelTag::Bates => 100.0,
        });
        if !x0.is_finite() || (matches!(tag, ModelTag::Bk | ModelTag::Heston | ModelTag::Bates) && x0 <= 0.0) {
            return Err(invalid(format!("x0 = {x0} is not a valid starting state for {}", tag.as_str())));
        }
        let v0 = match (&truth, sc.v0) {
            (ModelParams::Heston(h), v) => v.unwrap_or(h.theta_v),
            (ModelParams::Bates(b), v) => v.unwrap_or(b.heston.theta_v),
            (_, Some(_)) => return Err(invalid("v0 only applies to heston and bates")),
            (_, None) => 0.0,
        };
        if !(v0 >= 0.0) || !v0.is_finite() {
            return Err(invalid(format!("v0 must be a non-negative number, got {v0}")));
        }
        if sc.jump_convention.is_some() && tag != ModelTag::OuJump {
            return Err(invalid("[scenario] jump_convention only applies to ou_jump"));
        }
        let simulation_jump_convention = convention(sc.jump_convention.as_deref(), "[scenario] jump_convention")?;
        let input_csv = sc.input_csv.map(|p| match base_dir {
            Some(b) if p.is_relative() => b.join(p),
            _ => p,
        });

        let method = self.method.validate(tag)?;
        let outputs = Outputs {
            csv: self.outputs.csv,
            plot: self.outputs.plot,
            dir: self.outputs.dir.unwrap_or_else(|| sc.name.clone()),
        };
        if !valid_name(&outputs.dir) {
            return Err(invalid(format!("[outputs] dir {:?} must be a plain directory name", outputs.dir)));
        }
        Ok(Scenario {
            name: sc.name,
            description: sc.description,
            params: truth,
            dt: sc.dt,
            n_steps: sc.n_steps,
            seed: sc.seed,
            x0,
            v0,
            simulation_jump_convention,
            input_csv,
            method,
            outputs,
        })
    }
}

impl RawMethod {
    fn validate(self, tag: ModelTag) -> Result<Method> {
        let kind = MethodKind::parse(&self.kind)
            .ok_or_else(|| invalid(format!("unknown method {:?}; expected mle, kalman, ekf or particle_ekf", self.kind)))?;
        if !kind.supports(tag) {
            let need = if tag.is_stochastic_volatility() { "ekf or particle_ekf" } else { "mle or kalman" };
            return Err(invalid(format!("method {} cannot run on model {}; use {need}", kind.as_str(), tag.as_str())));
        }
        let estimation = match (self.init, self.bounds) {
            (None, None) => None,
            (Some(init), Some(bounds)) => {
                if kind == MethodKind::ParticleEkf {
                    return Err(invalid("particle_ekf only filters; remove init and bounds"));
                }
                let init = ordered(tag, &init, "[method.init]")?;
                let bounds = ordered(tag, &bounds, "[method.bounds]")?;
                let bounds = Bounds::new(bounds.iter().map(|b| b[0]).collect(), bounds.iter().map(|b| b[1]).collect())
                    .map_err(|e| invalid(format!("[method.bounds]: {e}")))?;
                if !bounds.contains(&init) {
                    return Err(invalid("[method.init] lies outside [method.bounds]"));
                }
                Some(Estimation { init: params(tag, &init, "[method.init]")?, bounds, multi_start: self.multi_start })
            }
            _ => return Err(invalid("[method] init and bounds must be given together")),
        };
        if kind == MethodKind::Mle && estimation.is_none() {
            return Err(invalid("method mle needs [method.init] and [method.bounds]"));
        }
        let meas_var = self.meas_var.unwrap_or(1e-4);
        if !(meas_var >= 0.0) || !meas_var.is_finite() {
            return Err(invalid(format!("meas_var must be a non-negative number, got {meas_var}")));
        }
        let objective = match self.objective.as_deref() {
            None => EkfObjective::default(),
            Some(s) => EkfObjective::parse(s)
                .ok_or_else(|| invalid(format!("objective: expected posterior or innovation, got {s:?}")))?,
        };
        let n_particles = self.n_particles.unwrap_or(1000);
        if n_particles == 0 {
            return Err(invalid("n_particles must be at least 1"));
        }
        let p0 = self.p0.unwrap_or(0.01);
        if !(p0 > 0.0) || !p0.is_finite() {
            return Err(invalid(format!("p0 must be a positive number, got {p0}")));
        }
        let resample = match (self.resample.as_deref(), self.ess_fraction) {
            (None | Some("always"), None) => ResampleMode::Always,
            (Some("ess"), f) => {
                let f = f.unwrap_or(0.5);
                if !(f > 0.0 && f <= 1.0) {
                    return Err(invalid(format!("ess_fraction must lie in (0, 1], got {f}")));
                }
                ResampleMode::EssBelow(f)
            }
            (None | Some("always"), Some(_)) => return Err(invalid("ess_fraction needs resample = \"ess\"")),
            (Some(s), _) => return Err(invalid(format!("resample: expected always or ess, got {s:?}"))),
        };
        Ok(Method {
            kind,
            estimation,
            meas_var,
            jump_convention: convention(self.jump_convention.as_deref(), "[method] jump_convention")?,
            objective,
            n_particles,
            p0,
            resample,
        })
    }
}
