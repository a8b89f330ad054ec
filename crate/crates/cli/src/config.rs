//! Experiment configuration: one JSON document per run.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use paneitz_core::continuation::{q_window, DiagnosticExponents, PathConfig};
use paneitz_core::grid::MIN_RESOLUTION;
use paneitz_core::invariants::{default_subcritical_exponent, subcritical_window};
use paneitz_core::{make_grid, BackgroundManifold, ConformalFactor, Metric};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;
pub const MAX_RESOLUTION: usize = 512;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Curvature,
    CovarianceTest,
    Invariants,
    Starter,
    Continue,
    Identities,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Curvature => "curvature",
            Task::CovarianceTest => "covariance-test",
            Task::Invariants => "invariants",
            Task::Starter => "starter",
            Task::Continue => "continue",
            Task::Identities => "identities",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackgroundSpec {
    RoundSphere {
        n: usize,
        #[serde(default = "one")]
        radius: f64,
    },
    FlatTorus {
        n: usize,
        #[serde(default = "two_pi")]
        period: f64,
    },
    SphereProduct {
        p: usize,
        a: f64,
        q: usize,
        b: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn two_pi() -> f64 {
    2.0 * std::f64::consts::PI
}

impl BackgroundSpec {
    pub fn manifold(&self) -> BackgroundManifold {
        match *self {
            BackgroundSpec::RoundSphere { n, radius } => BackgroundManifold::RoundSphere { n, radius },
            BackgroundSpec::FlatTorus { n, period } => BackgroundManifold::FlatTorus { n, period },
            BackgroundSpec::SphereProduct { p, a, q, b } => BackgroundManifold::SphereProduct { p, a, q, b },
        }
    }

    pub fn dimension(&self) -> usize {
        self.manifold().dimension()
    }
}

impl Default for BackgroundSpec {
    fn default() -> Self {
        BackgroundSpec::RoundSphere { n: 6, radius: 1.0 }
    }
}

/// Conformal perturbation `rho = 1 + a (T_k + sum_j w_j T_{k+j}) / (1 + sum_j |w_j|)`
/// of the model metric, with `T_k(cos theta) = cos(k theta)` and the weights
/// `w_j` drawn from the run seed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    pub amplitude: f64,
    #[serde(default = "one_usize")]
    pub mode: usize,
    #[serde(default)]
    pub extra_modes: usize,
}

fn one_usize() -> usize {
    1
}

/// Task parameters; unset entries take the module defaults.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// Subcritical exponent of the starter.
    pub p: Option<f64>,
    /// Diagnostic exponents.
    pub q: Option<f64>,
    pub alpha: Option<f64>,
    /// Lambda schedule.
    pub initial_step_fraction: Option<f64>,
    pub min_step: Option<f64>,
    pub max_steps: Option<usize>,
    /// `rho = 1 + c cos(theta)` in the covariance test.
    pub covariance_amplitude: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default = "report_name")]
    pub report: String,
    #[serde(default = "csv_name")]
    pub csv: String,
}

fn report_name() -> String {
    "report.json".into()
}

fn csv_name() -> String {
    "path.csv".into()
}

impl Default for Outputs {
    fn default() -> Self {
        Self { dir: None, report: report_name(), csv: csv_name() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub task: Task,
    #[serde(default)]
    pub background: BackgroundSpec,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    #[serde(default)]
    pub perturbation: Option<Perturbation>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub outputs: Outputs,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

fn default_resolution() -> usize {
    64
}

impl ExperimentConfig {
    pub fn new(task: Task) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            task,
            background: BackgroundSpec::default(),
            resolution: default_resolution(),
            perturbation: None,
            seed: 0,
            params: Params::default(),
            outputs: Outputs::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Self::from_json(&text)
    }

    /// A JSON array of configs.
    pub fn load_list(path: &Path) -> Result<Vec<Self>, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn dimension(&self) -> usize {
        self.background.dimension()
    }

    /// Checks every parameter against its window; the message echoes the bounds.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("schema_version {} unsupported (expected {SCHEMA_VERSION})", self.schema_version));
        }
        if !(MIN_RESOLUTION..=MAX_RESOLUTION).contains(&self.resolution) {
            return bad(format!("resolution {} outside [{MIN_RESOLUTION}, {MAX_RESOLUTION}]", self.resolution));
        }
        if let Err(e) = self.background.manifold().validate() {
            return bad(format!("background: {e}"));
        }
        if let Some(pert) = &self.perturbation {
            if !(0.0..1.0).contains(&pert.amplitude) {
                return bad(format!("perturbation amplitude {} outside [0, 1)", pert.amplitude));
            }
            if pert.mode == 0 {
                return bad("perturbation mode must be >= 1".into());
            }
            if pert.mode + pert.extra_modes >= self.resolution / 2 {
                return bad(format!(
                    "perturbation modes up to {} must stay below resolution / 2 = {}",
                    pert.mode + pert.extra_modes,
                    self.resolution / 2
                ));
            }
        }
        let n = self.dimension();
        let pr = &self.params;
        if let Some(p) = pr.p {
            let (lo, hi) = subcritical_window(n);
            if !(p > lo && p < hi) {
                return bad(format!("p = {p} outside the open window ({lo}, {hi})"));
            }
        }
        if pr.q.is_some() || pr.alpha.is_some() {
            if n < 6 {
                return bad(format!("diagnostic exponents need n >= 6, got n = {n}"));
            }
            let (lo, hi) = q_window(n);
            let exps = self.exponents();
            if exps.validate(n).is_err() {
                return bad(format!("q = {} outside the window ({lo}, {hi}) or alpha not finite", exps.q));
            }
        }
        if let Some(f) = pr.initial_step_fraction {
            if !(f > 0.0 && f <= 1.0) {
                return bad(format!("initial_step_fraction {f} outside (0, 1]"));
            }
        }
        if let Some(s) = pr.min_step {
            if !(s > 0.0 && s < 4.0) {
                return bad(format!("min_step {s} outside (0, 4)"));
            }
        }
        if pr.max_steps == Some(0) {
            return bad("max_steps must be >= 1".into());
        }
        if let Some(c) = pr.covariance_amplitude {
            if !(0.0..1.0).contains(&c) {
                return bad(format!("covariance_amplitude {c} outside [0, 1)"));
            }
        }
        Ok(())
    }

    pub fn subcritical_exponent(&self) -> f64 {
        self.params.p.unwrap_or_else(|| default_subcritical_exponent(self.dimension()))
    }

    pub fn exponents(&self) -> DiagnosticExponents {
        let n = self.dimension();
        // Below n = 6 the exponents are never used; the defaults of n = 6 stand in.
        let d = DiagnosticExponents::defaults(n.max(6));
        DiagnosticExponents { q: self.params.q.unwrap_or(d.q), alpha: self.params.alpha.unwrap_or(d.alpha) }
    }

    pub fn path_config(&self) -> PathConfig {
        let mut c = PathConfig::default();
        let pr = &self.params;
        if let Some(f) = pr.initial_step_fraction {
            c.initial_step_fraction = f;
        }
        if let Some(s) = pr.min_step {
            c.min_step = s;
        }
        if let Some(m) = pr.max_steps {
            c.max_steps = m;
        }
        if self.dimension() >= 6 {
            c.newton.exponents = Some(self.exponents());
        }
        c
    }
}

/// The model metric, the perturbation factor (if any) and the metric every
/// task runs on.
pub struct Background {
    pub model: Metric,
    pub rho: Option<ConformalFactor>,
    pub metric: Metric,
}

/// Perturbation profile at the grid's interpolation coordinate.
pub fn perturbation_profile(pert: &Perturbation, seed: u64, x: &[f64]) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights: Vec<f64> = (0..pert.extra_modes).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    let total = 1.0 + weights.iter().map(|w| w.abs()).sum::<f64>();
    x.iter()
        .map(|&x| {
            let t = x.clamp(-1.0, 1.0).acos();
            let mut s = (pert.mode as f64 * t).cos();
            for (j, w) in weights.iter().enumerate() {
                s += w * ((pert.mode + j + 1) as f64 * t).cos();
            }
            1.0 + pert.amplitude * s / total
        })
        .collect()
}

pub fn build_background(cfg: &ExperimentConfig) -> paneitz_core::Result<Background> {
    let grid = make_grid(&cfg.background.manifold(), cfg.resolution)?;
    let model = Metric::model(Arc::new(grid));
    match cfg.perturbation {
        Some(pert) if pert.amplitude != 0.0 => {
            let rho = ConformalFactor::fourth_order(perturbation_profile(&pert, cfg.seed, model.grid().x()))?;
            let metric = model.perturbed(&rho)?;
            Ok(Background { model, rho: Some(rho), metric })
        }
        _ => Ok(Background { metric: model.clone(), model, rho: None }),
    }
}
