//! Experiment configuration: TOML with nested blocks, resolved into library objects.
//!
//! Algebra elements and momenta are upper-triangle coordinate lists in the
//! lexicographic `E_ij` order (`E12, E13, …, E1n, E23, …`). Group elements are
//! `"identity"`, `"random"`, a row-major matrix, or `{ exp = [coords] }`.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use lievortex::control::{PlanarField, RankOptions, Region, SteerOptions};
use lievortex::inertia::InertiaOperator;
use lievortex::liecore::{algebra_dim, exp, AlgebraElement, GroupElement, Momentum};
use lievortex::reduction::{IntegrationOptions, ReducedSystem};
use lievortex::sampling::{random_momentum, random_rotation, seeded};
use lievortex::signal::ControlSignal;
use lievortex::vortex::DEFAULT_RANK_TOL;
use nalgebra::{DMatrix, Matrix3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("{field}: {message}")]
    Field { field: String, message: String },
}

fn field_err(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field { field: field.to_string(), message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    Chaplygin,
    Vortex,
    Stiefel,
    Steer,
    Transfer,
    RankCheck,
    Transversality,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Chaplygin => "chaplygin",
            Command::Vortex => "vortex",
            Command::Stiefel => "stiefel",
            Command::Steer => "steer",
            Command::Transfer => "transfer",
            Command::RankCheck => "rank-check",
            Command::Transversality => "transversality",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    #[default]
    Left,
    Right,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub command: Option<Command>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub chirality: Side,
    pub lambda: Option<Vec<f64>>,
    pub operator: Option<OperatorBlock>,
    pub momentum: Option<MomentumBlock>,
    pub group: Option<GroupBlock>,
    pub integration: Option<IntegrationBlock>,
    pub controls: Option<ControlsBlock>,
    pub steering: Option<SteeringBlock>,
    pub vortex: Option<VortexBlock>,
    pub transfer: Option<TransferBlock>,
    pub rank: Option<RankBlock>,
    pub planar: Option<PlanarBlock>,
    pub chaplygin: Option<ChaplyginBlock>,
    /// Directory against which relative paths (signal files) are resolved.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorKind {
    /// `A⁻¹(M) = UM + MU`; `u` holds `n` diagonal entries or `n²` row-major entries.
    Manakov,
    /// Symmetric positive-definite matrix on the coordinates, `entries` row-major.
    Dense,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorBlock {
    pub kind: OperatorKind,
    pub u: Option<Vec<f64>>,
    pub entries: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentumBlock {
    pub coords: Option<Vec<f64>>,
    /// Draw uniform coordinates in `[-scale, scale]` from the run seed.
    pub random_scale: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GroupSpec {
    Named(String),
    Matrix(Vec<f64>),
    Exp { exp: Vec<f64> },
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupBlock {
    pub g0: Option<GroupSpec>,
    pub target: Option<GroupSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationBlock {
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(default = "default_budget")]
    pub drift_budget: f64,
    #[serde(default = "default_every")]
    pub sample_every: usize,
}

fn default_t_end() -> f64 {
    10.0
}
fn default_h() -> f64 {
    1e-3
}
fn default_budget() -> f64 {
    1e-6
}
fn default_every() -> usize {
    1
}

impl Default for IntegrationBlock {
    fn default() -> Self {
        Self { t_end: default_t_end(), h: default_h(), drift_budget: default_budget(), sample_every: default_every() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlsBlock {
    pub directions: Vec<Vec<f64>>,
    pub epsilon: f64,
    pub segments: usize,
    pub horizon: f64,
    pub step: Option<f64>,
    /// A signal document (bare or inside a steering result) to replay.
    pub signal: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteeringBlock {
    pub tol: Option<f64>,
    pub polish_tol: Option<f64>,
    pub max_starts: Option<usize>,
    pub max_iterations: Option<usize>,
    pub batch: Option<usize>,
    pub time_limit: Option<f64>,
    pub check_rank: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VortexBlock {
    #[serde(default = "default_rank_tol")]
    pub rank_tol: f64,
    #[serde(default = "default_grid")]
    pub grid_steps: usize,
}

fn default_rank_tol() -> f64 {
    DEFAULT_RANK_TOL
}
fn default_grid() -> usize {
    16
}

impl Default for VortexBlock {
    fn default() -> Self {
        Self { rank_tol: default_rank_tol(), grid_steps: default_grid() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferBlock {
    #[serde(default = "default_s")]
    pub s: Vec<f64>,
}

fn default_s() -> Vec<f64> {
    vec![0.5, 1.0, 2.0]
}

impl Default for TransferBlock {
    fn default() -> Self {
        Self { s: default_s() }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankBlock {
    pub depth: Option<usize>,
    pub tol: Option<f64>,
    pub include_drift: Option<bool>,
    pub delta: Option<f64>,
    /// Evaluate at this many random points instead of `group.g0`.
    pub samples: Option<usize>,
    /// Pairs checked for generating the whole algebra.
    pub generators: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldSpec {
    Named(String),
    Constant([f64; 2]),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub band: Option<[f64; 2]>,
    pub line: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanarBlock {
    pub f: FieldSpec,
    pub g: FieldSpec,
    pub point: [f64; 2],
    #[serde(default = "default_depth")]
    pub depth: usize,
    pub words: Option<Vec<String>>,
    #[serde(default = "default_planar_tol")]
    pub tol: f64,
    pub region: Option<RegionSpec>,
    #[serde(default = "default_samples_x")]
    pub samples_x: usize,
    #[serde(default = "default_samples_y")]
    pub samples_y: usize,
    #[serde(default = "default_y_range")]
    pub y_range: [f64; 2],
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_planar_h")]
    pub h: f64,
    #[serde(default)]
    pub measure_preserving: bool,
}

fn default_depth() -> usize {
    3
}
fn default_planar_tol() -> f64 {
    1e-8
}
fn default_samples_x() -> usize {
    17
}
fn default_samples_y() -> usize {
    5
}
fn default_y_range() -> [f64; 2] {
    [-1.0, 1.0]
}
fn default_t_max() -> f64 {
    TAU
}
fn default_planar_h() -> f64 {
    1e-2
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChaplyginBlock {
    /// Three principal moments or nine row-major entries.
    pub inertia: Vec<f64>,
    pub momentum: [f64; 3],
    pub gamma: [f64; 3],
    pub d: f64,
}

pub fn load(path: &Path) -> Result<Config, ConfigError> {
    let text =
        std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
    let mut cfg: Config = toml::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(cfg)
}

/// Sub-stream offsets so each random quantity has its own seed.
const STREAM_MOMENTUM: u64 = 0x6d6f6d;
const STREAM_G0: u64 = 0x6730;
const STREAM_TARGET: u64 = 0x746172;
pub const STREAM_RANK: u64 = 0x72616e6b;

fn finite(field: &str, values: &[f64]) -> Result<(), ConfigError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(field_err(field, "entries must be finite"))
    }
}

impl Config {
    pub fn n(&self) -> Result<usize, ConfigError> {
        match self.n {
            Some(n) if (2..=32).contains(&n) => Ok(n),
            Some(n) => Err(field_err("n", format!("{n} is outside 2..=32"))),
            None => Err(field_err("n", "required for this command")),
        }
    }

    pub fn seed(&self, what: &str) -> Result<u64, ConfigError> {
        self.seed.ok_or_else(|| field_err("seed", format!("required by {what}")))
    }

    pub fn algebra(&self, field: &str, coords: &[f64]) -> Result<AlgebraElement, ConfigError> {
        let n = self.n()?;
        finite(field, coords)?;
        AlgebraElement::from_coords(n, coords)
            .map_err(|_| field_err(field, format!("expected {} coordinates, found {}", algebra_dim(n), coords.len())))
    }

    pub fn operator(&self) -> Result<InertiaOperator, ConfigError> {
        let n = self.n()?;
        let block = self.operator.as_ref().ok_or_else(|| field_err("operator", "block required"))?;
        match block.kind {
            OperatorKind::Manakov => {
                let u = self.manakov_u()?;
                InertiaOperator::manakov(u).map_err(|e| field_err("operator.u", e.to_string()))
            }
            OperatorKind::Dense => {
                let d = algebra_dim(n);
                let e = block
                    .entries
                    .as_ref()
                    .ok_or_else(|| field_err("operator.entries", "required for kind = \"dense\""))?;
                finite("operator.entries", e)?;
                if e.len() != d * d {
                    return Err(field_err(
                        "operator.entries",
                        format!("expected {} entries, found {}", d * d, e.len()),
                    ));
                }
                InertiaOperator::dense(n, DMatrix::from_row_slice(d, d, e))
                    .map_err(|e| field_err("operator.entries", e.to_string()))
            }
        }
    }

    pub fn manakov_u(&self) -> Result<DMatrix<f64>, ConfigError> {
        let n = self.n()?;
        let block = self.operator.as_ref().ok_or_else(|| field_err("operator", "block required"))?;
        if block.kind != OperatorKind::Manakov {
            return Err(field_err("operator.kind", "this command needs kind = \"manakov\""));
        }
        let u = block.u.as_ref().ok_or_else(|| field_err("operator.u", "required for kind = \"manakov\""))?;
        finite("operator.u", u)?;
        if u.len() == n {
            Ok(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(u)))
        } else if u.len() == n * n {
            Ok(DMatrix::from_row_slice(n, n, u))
        } else {
            Err(field_err("operator.u", format!("expected {n} or {} entries, found {}", n * n, u.len())))
        }
    }

    pub fn momentum(&self) -> Result<Momentum, ConfigError> {
        let n = self.n()?;
        let block = self.momentum.as_ref().ok_or_else(|| field_err("momentum", "block required"))?;
        match (&block.coords, block.random_scale) {
            (Some(c), None) => Ok(self.algebra("momentum.coords", c)?.to_momentum()),
            (None, Some(scale)) if scale > 0.0 && scale.is_finite() => {
                let mut rng = seeded(self.seed("momentum.random_scale")? ^ STREAM_MOMENTUM);
                Ok(random_momentum(&mut rng, n, scale))
            }
            (None, Some(_)) => Err(field_err("momentum.random_scale", "must be positive and finite")),
            _ => Err(field_err("momentum", "give exactly one of coords or random_scale")),
        }
    }

    pub fn lambda(&self) -> Result<AlgebraElement, ConfigError> {
        match &self.lambda {
            Some(c) => self.algebra("lambda", c),
            None => Ok(AlgebraElement::zeros(self.n()?)),
        }
    }

    pub fn system(&self) -> Result<ReducedSystem, ConfigError> {
        let (a, m) = (self.operator()?, self.momentum()?);
        let sys = match self.chirality {
            Side::Left => ReducedSystem::left(a, m),
            Side::Right => ReducedSystem::right(a, m),
        }
        .map_err(|e| field_err("operator", e.to_string()))?;
        sys.with_lambda(self.lambda()?).map_err(|e| field_err("lambda", e.to_string()))
    }

    fn group_spec(&self, field: &str, spec: Option<&GroupSpec>, stream: u64) -> Result<GroupElement, ConfigError> {
        let n = self.n()?;
        match spec {
            None => Ok(GroupElement::identity(n)),
            Some(GroupSpec::Named(s)) if s == "identity" => Ok(GroupElement::identity(n)),
            Some(GroupSpec::Named(s)) if s == "random" => {
                Ok(random_rotation(&mut seeded(self.seed(field)? ^ stream), n))
            }
            Some(GroupSpec::Named(s)) => {
                Err(field_err(field, format!("unknown name {s:?}; use \"identity\" or \"random\"")))
            }
            Some(GroupSpec::Matrix(v)) => {
                finite(field, v)?;
                if v.len() != n * n {
                    return Err(field_err(field, format!("expected {} row-major entries, found {}", n * n, v.len())));
                }
                GroupElement::with_tolerance(DMatrix::from_row_slice(n, n, v), 1e-9)
                    .map_err(|e| field_err(field, e.to_string()))
            }
            Some(GroupSpec::Exp { exp: c }) => Ok(exp(&self.algebra(field, c)?)),
        }
    }

    pub fn g0(&self) -> Result<GroupElement, ConfigError> {
        self.group_spec("group.g0", self.group.as_ref().and_then(|g| g.g0.as_ref()), STREAM_G0)
    }

    pub fn target(&self) -> Result<GroupElement, ConfigError> {
        let spec = self.group.as_ref().and_then(|g| g.target.as_ref());
        if spec.is_none() {
            return Err(field_err("group.target", "required for this command"));
        }
        self.group_spec("group.target", spec, STREAM_TARGET)
    }

    pub fn integration(&self) -> Result<IntegrationOptions, ConfigError> {
        let b = self.integration.clone().unwrap_or_default();
        if !(b.h > 0.0 && b.h.is_finite()) {
            return Err(field_err("integration.h", "must be positive"));
        }
        if !(b.t_end >= 0.0 && b.t_end.is_finite()) {
            return Err(field_err("integration.t_end", "must be non-negative"));
        }
        if !(b.drift_budget > 0.0) {
            return Err(field_err("integration.drift_budget", "must be positive"));
        }
        if b.sample_every == 0 {
            return Err(field_err("integration.sample_every", "must be at least 1"));
        }
        Ok(IntegrationOptions { t_end: b.t_end, h: b.h, drift_budget: b.drift_budget, sample_every: b.sample_every })
    }

    pub fn controls_block(&self) -> Result<&ControlsBlock, ConfigError> {
        self.controls.as_ref().ok_or_else(|| field_err("controls", "block required"))
    }

    pub fn control_dirs(&self) -> Result<Vec<AlgebraElement>, ConfigError> {
        let c = self.controls_block()?;
        c.directions.iter().enumerate().map(|(i, d)| self.algebra(&format!("controls.directions[{i}]"), d)).collect()
    }

    pub fn control_system(&self) -> Result<lievortex::control::ControlSystem, ConfigError> {
        let c = self.controls_block()?;
        if self.chirality != Side::Left {
            return Err(field_err("chirality", "controlled systems must be left-invariant"));
        }
        if c.directions.is_empty() {
            return Err(field_err("controls.directions", "need at least one direction"));
        }
        let csys = lievortex::control::ControlSystem::new(
            self.system()?,
            self.control_dirs()?,
            c.epsilon,
            c.segments,
            c.horizon,
        )
        .map_err(|e| field_err("controls", e.to_string()))?;
        match c.step {
            Some(h) => csys.with_step(h).map_err(|e| field_err("controls.step", e.to_string())),
            None => Ok(csys),
        }
    }

    /// Loads `controls.signal`, either a bare `{values, horizon}` document or
    /// one carrying it under `"signal"`.
    pub fn signal(&self) -> Result<Option<ControlSignal>, ConfigError> {
        let Some(path) = self.controls.as_ref().and_then(|c| c.signal.as_ref()) else {
            return Ok(None);
        };
        let path = self.base_dir.join(path);
        let text = std::fs::read_to_string(&path).map_err(|source| ConfigError::Read { path: path.clone(), source })?;
        let doc: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| field_err("controls.signal", format!("{}: {e}", path.display())))?;
        let body = doc.get("signal").unwrap_or(&doc);
        #[derive(Deserialize)]
        struct Raw {
            values: Vec<Vec<f64>>,
            horizon: f64,
        }
        let raw: Raw = serde_json::from_value(body.clone()).map_err(|e| field_err("controls.signal", e.to_string()))?;
        ControlSignal::new(raw.values, raw.horizon).map(Some).map_err(|e| field_err("controls.signal", e.to_string()))
    }

    pub fn steer_options(&self) -> Result<SteerOptions, ConfigError> {
        let b = self.steering.clone().unwrap_or_default();
        let d = SteerOptions::default();
        let opts = SteerOptions {
            tol: b.tol.unwrap_or(d.tol),
            polish_tol: b.polish_tol.unwrap_or(d.polish_tol),
            max_starts: b.max_starts.unwrap_or(d.max_starts),
            max_iterations: b.max_iterations.unwrap_or(d.max_iterations),
            batch: b.batch.unwrap_or(d.batch),
            seed: self.seed("steering")?,
            fd_step: d.fd_step,
            time_limit: b.time_limit,
            check_rank: b.check_rank.unwrap_or(d.check_rank),
        };
        if !(opts.tol > 0.0) || opts.max_starts == 0 || opts.batch == 0 {
            return Err(field_err("steering", "need tol > 0, max_starts ≥ 1 and batch ≥ 1"));
        }
        Ok(opts)
    }

    pub fn rank_options(&self) -> RankOptions {
        let b = self.rank.clone().unwrap_or_default();
        let d = RankOptions::default();
        RankOptions {
            depth: b.depth.unwrap_or(d.depth),
            tol: b.tol.unwrap_or(d.tol),
            include_drift: b.include_drift.unwrap_or(d.include_drift),
            delta: b.delta.unwrap_or(d.delta),
        }
    }

    pub fn planar(&self) -> Result<&PlanarBlock, ConfigError> {
        self.planar.as_ref().ok_or_else(|| field_err("planar", "block required"))
    }

    pub fn chaplygin_inertia(&self) -> Result<Matrix3<f64>, ConfigError> {
        let b = self.chaplygin.as_ref().ok_or_else(|| field_err("chaplygin", "block required"))?;
        finite("chaplygin.inertia", &b.inertia)?;
        match b.inertia.len() {
            3 => Ok(Matrix3::from_diagonal(&nalgebra::Vector3::from_column_slice(&b.inertia))),
            9 => Ok(Matrix3::from_row_slice(&b.inertia)),
            k => Err(field_err("chaplygin.inertia", format!("expected 3 or 9 entries, found {k}"))),
        }
    }
}

pub fn field(spec: &FieldSpec, name: &str) -> Result<PlanarField, ConfigError> {
    match spec {
        FieldSpec::Constant([a, b]) => Ok(PlanarField::constant(*a, *b)),
        FieldSpec::Named(s) if s == "cosine" => Ok(PlanarField::cosine_example()),
        FieldSpec::Named(s) if s == "nonanalytic" => Ok(PlanarField::nonanalytic_example()),
        FieldSpec::Named(s) => {
            Err(field_err(name, format!("unknown field {s:?}; use \"cosine\", \"nonanalytic\" or [a, b]")))
        }
    }
}

pub fn region(spec: Option<&RegionSpec>) -> Result<Region, ConfigError> {
    match spec {
        Some(RegionSpec { band: Some([a, b]), line: None }) if a <= b => Ok(Region::band(*a, *b)),
        Some(RegionSpec { band: None, line: Some(c) }) => Ok(Region::line(*c)),
        None => Err(field_err("planar.region", "required for transversality")),
        _ => Err(field_err("planar.region", "give exactly one of band = [a, b] (a ≤ b) or line = c")),
    }
}

pub fn config_error(field: &str, message: impl Into<String>) -> ConfigError {
    field_err(field, message)
}
