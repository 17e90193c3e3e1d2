//! Experiment configuration: a TOML file of sections, unknown keys rejected.
//!
//! ```toml
//! [problem]
//! kind = "source"      # or "backward"
//! truth = "sin2"
//! t_final = 1.0        # defaults to 1 (source) or 0.05 (backward)
//! steps = 100
//!
//! [grid]
//! nx = 33
//! ny = 33
//!
//! [pod]
//! n_pod = 9
//! basis = "adjoint"    # "traditional", "foreign:<shape>", "adjoint:<kind>"
//! ```

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::assembly::CoefficientSet;
use crate::error::{Error, Result};
use crate::inverse::{InverseConfig, SolveMode};
use crate::mesh::Grid2D;
use crate::pod::{ModeSelector, SnapshotLayout};
use crate::reduced::{BasisOptions, ProblemKind};
use crate::shapes::list_shapes;
use crate::timestep::TimeGrid;

/// Where the reduced basis comes from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum BasisSource {
    /// Adjoint snapshots driven by the measurement, same kind as the problem.
    Adjoint,
    /// Adjoint snapshots of the given kind, driven by the same measurement.
    AdjointOf(ProblemKind),
    /// Snapshots of the true forward trajectory.
    Traditional,
    /// Forward snapshots driven by a named shape instead of the truth.
    Foreign(String),
}

impl FromStr for BasisSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "adjoint" => Ok(Self::Adjoint),
            None if s == "traditional" => Ok(Self::Traditional),
            Some(("adjoint", kind)) => Ok(Self::AdjointOf(ProblemKind::parse(kind)?)),
            Some(("foreign", name)) if !name.is_empty() => Ok(Self::Foreign(name.to_string())),
            _ => Err(Error::Config(format!(
                "unknown basis source `{s}` (adjoint|adjoint:<kind>|traditional|foreign:<shape>)"
            ))),
        }
    }
}

impl TryFrom<String> for BasisSource {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl fmt::Display for BasisSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Adjoint => write!(f, "adjoint"),
            Self::AdjointOf(k) => write!(f, "adjoint:{}", k.name()),
            Self::Traditional => write!(f, "traditional"),
            Self::Foreign(name) => write!(f, "foreign:{name}"),
        }
    }
}

impl From<BasisSource> for String {
    fn from(b: BasisSource) -> String {
        b.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemSection {
    pub kind: ProblemKind,
    pub truth: String,
    pub t_final: Option<f64>,
    pub steps: usize,
}

impl Default for ProblemSection {
    fn default() -> Self {
        Self {
            kind: ProblemKind::InverseSource,
            truth: "sin2".into(),
            t_final: None,
            steps: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub nx: usize,
    pub ny: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { nx: 33, ny: 33 }
    }
}

/// Constant diffusion `q` and reaction `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoefficientSection {
    pub q: f64,
    pub c: f64,
}

impl Default for CoefficientSection {
    fn default() -> Self {
        Self { q: 1.0, c: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeasurementSection {
    /// Relative noise level `p`.
    pub noise: f64,
    pub seed: u64,
    /// Detectors per axis of the uniform interior layout.
    pub detectors: usize,
}

impl Default for MeasurementSection {
    fn default() -> Self {
        Self {
            noise: 0.0,
            seed: 1,
            detectors: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PodSection {
    pub n_pod: Option<usize>,
    /// Tail energy threshold; exclusive with `n_pod`.
    pub energy: Option<f64>,
    pub max_snapshots: usize,
    pub basis: BasisSource,
}

impl Default for PodSection {
    fn default() -> Self {
        Self {
            n_pod: None,
            energy: None,
            max_snapshots: 201,
            basis: BasisSource::Adjoint,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InverseSection {
    pub lambda: f64,
    pub beta: Option<f64>,
    pub max_iters: usize,
    pub grad_tol: Option<f64>,
    pub mode: SolveMode,
}

impl Default for InverseSection {
    fn default() -> Self {
        Self {
            lambda: 1e-8,
            beta: None,
            max_iters: 10_000,
            grad_tol: None,
            mode: SolveMode::Direct,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub problem: ProblemSection,
    pub grid: GridSection,
    pub coefficients: CoefficientSection,
    pub measurement: MeasurementSection,
    pub pod: PodSection,
    pub inverse: InverseSection,
    pub output: OutputSection,
}

/// Parses the right-hand side of an override as a TOML value, falling
/// back to a bare string.
fn override_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

impl ExperimentConfig {
    /// Desk-scale defaults for a problem kind.
    pub fn for_kind(kind: ProblemKind) -> Self {
        let mut cfg = Self::default();
        cfg.problem.kind = kind;
        cfg
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let cfg: Self = toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Applies `section.key=value`.
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        let (key, raw) = spec
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{spec}` is not of the form section.key=value")))?;
        let (section, field) = key
            .trim()
            .split_once('.')
            .ok_or_else(|| Error::Config(format!("override key `{key}` is not of the form section.key")))?;
        let mut table = toml::Table::try_from(&*self).map_err(|e| Error::Config(e.to_string()))?;
        let sec = table
            .entry(section.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("`{section}` is not a section")))?;
        sec.insert(field.to_string(), override_value(raw.trim()));
        let next: Self = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("override `{spec}`: {}", e.message())))?;
        next.validate()?;
        *self = next;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.grid.nx < 3 || self.grid.ny < 3 {
            return bad(format!("grid must be at least 3x3, got {}x{}", self.grid.nx, self.grid.ny));
        }
        if let Some(t) = self.problem.t_final {
            if !(t > 0.0) || !t.is_finite() {
                return bad(format!("t_final must be positive, got {t}"));
            }
        }
        if self.problem.steps == 0 {
            return bad("steps must be >= 1".into());
        }
        let shapes = list_shapes();
        let known = |name: &str| shapes.contains(&name);
        if !known(&self.problem.truth) {
            return bad(format!("unknown truth `{}` (available: {})", self.problem.truth, shapes.join(", ")));
        }
        if let BasisSource::Foreign(name) = &self.pod.basis {
            if !known(name) {
                return bad(format!("unknown foreign shape `{name}` (available: {})", shapes.join(", ")));
            }
        }
        if !(self.coefficients.q > 0.0) || !(self.coefficients.c >= 0.0) {
            return bad(format!("need q > 0 and c >= 0, got q = {}, c = {}", self.coefficients.q, self.coefficients.c));
        }
        if !(self.measurement.noise >= 0.0) {
            return bad(format!("noise must be >= 0, got {}", self.measurement.noise));
        }
        if self.measurement.detectors == 0 {
            return bad("detectors must be >= 1".into());
        }
        if self.pod.n_pod.is_some() && self.pod.energy.is_some() {
            return bad("set at most one of pod.n_pod and pod.energy".into());
        }
        if let Some(e) = self.pod.energy {
            if !(0.0..1.0).contains(&e) {
                return bad(format!("pod.energy must lie in [0, 1), got {e}"));
            }
        }
        if self.pod.max_snapshots < 3 || self.pod.max_snapshots.is_multiple_of(2) {
            return bad(format!("max_snapshots must be odd and >= 3, got {}", self.pod.max_snapshots));
        }
        self.inverse_config().validate().map_err(|e| Error::Config(e.to_string()))
    }

    pub fn t_final(&self) -> f64 {
        self.problem.t_final.unwrap_or(match self.problem.kind {
            ProblemKind::InverseSource => 1.0,
            ProblemKind::Backward => 0.05,
        })
    }

    pub fn grid(&self) -> Result<Grid2D> {
        Grid2D::new(self.grid.nx, self.grid.ny)
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.t_final(), self.problem.steps)
    }

    pub fn coefficient_set(&self) -> CoefficientSet {
        CoefficientSet::constant(self.coefficients.q, self.coefficients.c)
    }

    pub fn basis_options(&self) -> BasisOptions {
        let selector = match (self.pod.n_pod, self.pod.energy) {
            (_, Some(e)) => ModeSelector::Energy(e),
            (Some(n), None) => ModeSelector::Count(n),
            (None, None) => ModeSelector::Count(9),
        };
        BasisOptions {
            selector,
            max_snapshots: self.pod.max_snapshots,
            layout: SnapshotLayout::StatesAndQuotients,
        }
    }

    pub fn inverse_config(&self) -> InverseConfig {
        InverseConfig {
            lambda: self.inverse.lambda,
            beta: self.inverse.beta,
            max_iters: self.inverse.max_iters,
            grad_tol: self.inverse.grad_tol,
            mode: self.inverse.mode,
            initial: None,
        }
    }
}
