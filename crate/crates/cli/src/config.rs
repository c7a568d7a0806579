//! Run configuration (TOML) and its translation into core types.

use std::path::{Path, PathBuf};

use magflow_core::flow::line::LineConfig;
use magflow_core::force::CustomField;
use magflow_core::{
    FlowConfig, ForceField, ForceKind, ManifoldModel, ProjectionMode, SpatialScheme, TimeScheme, TimeStep, Vec3,
};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    #[default]
    Flow,
    StabilityPair,
    BlowUpLine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub experiment: Experiment,
    /// Relative paths resolve against the directory of the config file.
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub plots: bool,
    pub model: Option<ModelSpec>,
    pub force: Option<ForceSpec>,
    pub initial: Option<InitialSpec>,
    #[serde(default)]
    pub flow: FlowSpec,
    #[serde(default)]
    pub monitors: MonitorSpec,
    pub stability: Option<StabilitySpec>,
    pub line: Option<LineSpec>,
}

fn default_output() -> PathBuf {
    PathBuf::from("output")
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelName {
    Sphere,
    Cylinder,
    TorusOfRevolution,
    FlatTorus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelName,
    pub radius: Option<f64>,
    pub major: Option<f64>,
    pub minor: Option<f64>,
    pub dim: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ForceName {
    Zero,
    ConstantCross,
    RadialCross,
    ParallelRotation,
    LinearScalar,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomSample {
    pub point: [f64; 3],
    /// q rows, one column per increasing k-tuple.
    pub matrix: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForceSpec {
    pub kind: ForceName,
    pub b: Option<[f64; 3]>,
    pub c: Option<f64>,
    pub scale: Option<f64>,
    pub degree: Option<usize>,
    pub samples: Option<Vec<CustomSample>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialName {
    CylinderCaseA,
    CylinderCaseB,
    Fourier,
    Samples,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierTerm {
    pub component: usize,
    pub mode: u32,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    pub kind: InitialName,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub mu: Option<f64>,
    #[serde(default)]
    pub terms: Vec<FourierTerm>,
    /// Integer winding per ambient axis (flat torus only): adds w·s.
    pub winding: Option<[i64; 3]>,
    /// CSV file with one row of q coordinates per node.
    pub path: Option<PathBuf>,
    /// Project the sampled loop onto the model before starting.
    #[serde(default)]
    pub project: bool,
    /// Push every node this far along the outward normal.
    #[serde(default)]
    pub displace: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProjectionName {
    EveryStep,
    Never,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeName {
    Central2,
    Spectral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepperName {
    Euler,
    Rk4,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DtSpec {
    Fixed(f64),
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowSpec {
    pub nodes: usize,
    pub dt: DtSpec,
    pub t_end: f64,
    pub projection: ProjectionName,
    pub scheme: SchemeName,
    pub stepper: StepperName,
    pub record_every: usize,
    pub drift_tolerance: f64,
    pub residual_tolerance: f64,
}

impl Default for FlowSpec {
    fn default() -> Self {
        Self {
            nodes: 128,
            dt: DtSpec::Named("auto".into()),
            t_end: 1.0,
            projection: ProjectionName::EveryStep,
            scheme: SchemeName::Central2,
            stepper: StepperName::Euler,
            record_every: 100,
            drift_tolerance: 1e-10,
            residual_tolerance: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonitorSpec {
    pub energy: bool,
    /// Final residual sup-norm must not exceed the residual tolerance.
    pub residual: bool,
    pub drift: bool,
    /// Compare with the closed-form cylinder solution.
    pub oracle: bool,
    pub oracle_tolerance: f64,
}

impl Default for MonitorSpec {
    fn default() -> Self {
        Self { energy: true, residual: false, drift: false, oracle: false, oracle_tolerance: 5e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StabilityVariant {
    /// Perturb one Fourier mode of the initial loop.
    Initial,
    /// Rescale the force.
    Force,
    /// Two identical runs.
    Identical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilitySpec {
    pub variant: StabilityVariant,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_force_scale")]
    pub force_scale: f64,
    /// Perturbed Fourier mode; its phase is drawn from the seed.
    #[serde(default = "default_mode")]
    pub mode: u32,
    #[serde(default = "default_window")]
    pub window: [f64; 2],
}

fn default_delta() -> f64 {
    1e-3
}
fn default_force_scale() -> f64 {
    1.0 + 1e-3
}
fn default_mode() -> u32 {
    2
}
fn default_window() -> [f64; 2] {
    [0.05, 1.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LineSpec {
    pub blow_up_time: f64,
    pub half_width: f64,
    pub intervals: usize,
    pub dt_factor: f64,
    pub t_end: f64,
    pub stepper: StepperName,
    pub record_every: usize,
}

impl Default for LineSpec {
    fn default() -> Self {
        let d = LineConfig::default();
        Self {
            blow_up_time: d.blow_up_time,
            half_width: d.half_width,
            intervals: d.intervals,
            dt_factor: d.dt_factor,
            t_end: d.t_end,
            stepper: StepperName::Rk4,
            record_every: d.record_every,
        }
    }
}

fn cfg_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn require(v: Option<f64>, what: &str) -> Result<f64, CliError> {
    v.ok_or_else(|| cfg_err(format!("missing {what}")))
}

impl ModelSpec {
    pub fn build(&self) -> Result<ManifoldModel, CliError> {
        let unused = |name: &str, set: bool| if set { Err(cfg_err(format!("model {:?} takes no `{name}`", self.kind))) } else { Ok(()) };
        let model = match self.kind {
            ModelName::Sphere | ModelName::Cylinder => {
                unused("major", self.major.is_some())?;
                unused("minor", self.minor.is_some())?;
                unused("dim", self.dim.is_some())?;
                let r = require(self.radius, "model.radius")?;
                if self.kind == ModelName::Sphere {
                    ManifoldModel::sphere(r)
                } else {
                    ManifoldModel::cylinder(r)
                }
            }
            ModelName::TorusOfRevolution => {
                unused("radius", self.radius.is_some())?;
                unused("dim", self.dim.is_some())?;
                ManifoldModel::torus_of_revolution(require(self.major, "model.major")?, require(self.minor, "model.minor")?)
            }
            ModelName::FlatTorus => {
                unused("radius", self.radius.is_some())?;
                unused("major", self.major.is_some())?;
                unused("minor", self.minor.is_some())?;
                ManifoldModel::flat_torus(self.dim.ok_or_else(|| cfg_err("missing model.dim"))?)
            }
        };
        model.map_err(|e| cfg_err(e.to_string()))
    }
}

impl ForceSpec {
    pub fn build(&self) -> Result<ForceField, CliError> {
        let allow = |b: bool, c: bool, custom: bool| -> Result<(), CliError> {
            if (!b && self.b.is_some()) || (!c && self.c.is_some()) || (!custom && (self.samples.is_some() || self.degree.is_some())) {
                return Err(cfg_err(format!("force {:?} given parameters it does not take", self.kind)));
            }
            Ok(())
        };
        let kind = match self.kind {
            ForceName::Zero => {
                allow(false, false, false)?;
                ForceKind::Zero
            }
            ForceName::ConstantCross => {
                allow(true, false, false)?;
                let b = self.b.ok_or_else(|| cfg_err("missing force.b"))?;
                ForceKind::ConstantCross { b: Vec3::from(b) }
            }
            ForceName::RadialCross => {
                allow(false, false, false)?;
                ForceKind::RadialCross
            }
            ForceName::ParallelRotation => {
                allow(false, true, false)?;
                ForceKind::ParallelRotation { c: require(self.c, "force.c")? }
            }
            ForceName::LinearScalar => {
                allow(false, false, false)?;
                ForceKind::LinearScalar
            }
            ForceName::Custom => {
                allow(false, false, true)?;
                let degree = self.degree.unwrap_or(1);
                let samples = self.samples.as_ref().ok_or_else(|| cfg_err("missing force.samples"))?;
                let dim = samples.first().map(|s| s.matrix.len()).ok_or_else(|| cfg_err("force.samples is empty"))?;
                let mut tab = Vec::with_capacity(samples.len());
                for s in samples {
                    let cols = s.matrix.first().map(Vec::len).unwrap_or(0);
                    if s.matrix.iter().any(|row| row.len() != cols) {
                        return Err(cfg_err("ragged custom force matrix"));
                    }
                    let m = DMatrix::from_fn(s.matrix.len(), cols, |i, j| s.matrix[i][j]);
                    tab.push((Vec3::from(s.point), m));
                }
                ForceKind::Custom(CustomField::new(dim, degree, tab).map_err(|e| cfg_err(e.to_string()))?)
            }
        };
        let scale = self.scale.unwrap_or(1.0);
        if !scale.is_finite() {
            return Err(cfg_err("force.scale must be finite"));
        }
        Ok(ForceField::new(kind).scaled(scale))
    }
}

impl FlowSpec {
    pub fn build(&self) -> Result<FlowConfig, CliError> {
        let dt = match &self.dt {
            DtSpec::Fixed(v) => TimeStep::Fixed(*v),
            DtSpec::Named(s) if s == "auto" => TimeStep::Auto,
            DtSpec::Named(s) => return Err(cfg_err(format!("flow.dt must be a number or \"auto\", got {s:?}"))),
        };
        let cfg = FlowConfig {
            nodes: self.nodes,
            dt,
            t_end: self.t_end,
            projection: match self.projection {
                ProjectionName::EveryStep => ProjectionMode::EveryStep,
                ProjectionName::Never => ProjectionMode::Never,
            },
            scheme: match self.scheme {
                SchemeName::Central2 => SpatialScheme::Central2,
                SchemeName::Spectral => SpatialScheme::Spectral,
            },
            stepper: stepper(self.stepper),
            record_every: self.record_every,
            tolerances: magflow_core::flow::Tolerances { drift: self.drift_tolerance, residual: self.residual_tolerance },
        };
        cfg.validate().map_err(|e| cfg_err(e.to_string()))?;
        Ok(cfg)
    }
}

fn stepper(s: StepperName) -> TimeScheme {
    match s {
        StepperName::Euler => TimeScheme::Euler,
        StepperName::Rk4 => TimeScheme::Rk4,
    }
}

impl LineSpec {
    pub fn build(&self) -> Result<LineConfig, CliError> {
        let cfg = LineConfig {
            blow_up_time: self.blow_up_time,
            half_width: self.half_width,
            intervals: self.intervals,
            dt_factor: self.dt_factor,
            t_end: self.t_end,
            stepper: stepper(self.stepper),
            record_every: self.record_every,
        };
        cfg.validate().map_err(|e| cfg_err(e.to_string()))?;
        Ok(cfg)
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| cfg_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_table(table: toml::Table) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| cfg_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; a relative `output_dir` is anchored at the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| cfg_err(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        if let Some(init) = cfg.initial.as_mut() {
            if let Some(p) = init.path.as_mut() {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    /// Checks everything that can be checked without running.
    pub fn validate(&self) -> Result<(), CliError> {
        match self.experiment {
            Experiment::BlowUpLine => {
                if self.model.is_some() || self.initial.is_some() || self.stability.is_some() {
                    return Err(cfg_err("blow-up-line takes only a [line] section"));
                }
                self.line.clone().unwrap_or_default().build()?;
                if let Some(f) = &self.force {
                    if f.kind != ForceName::LinearScalar {
                        return Err(cfg_err("blow-up-line uses the linear-scalar force"));
                    }
                }
            }
            Experiment::Flow | Experiment::StabilityPair => {
                if self.line.is_some() {
                    return Err(cfg_err("[line] only applies to blow-up-line"));
                }
                let model = self.model.as_ref().ok_or_else(|| cfg_err("missing [model]"))?.build()?;
                let force = self.force.as_ref().ok_or_else(|| cfg_err("missing [force]"))?.build()?;
                force.check_compatible(&model).map_err(|e| cfg_err(e.to_string()))?;
                if force.degree() != 1 {
                    return Err(cfg_err(format!(
                        "unsupported: time integration needs a 1-force, got degree {}",
                        force.degree()
                    )));
                }
                let flow = self.flow.build()?;
                let init = self.initial.as_ref().ok_or_else(|| cfg_err("missing [initial]"))?;
                init.check(&model)?;
                if self.monitors.drift && flow.projection != ProjectionMode::Never {
                    return Err(cfg_err("the drift monitor needs flow.projection = \"never\""));
                }
                if self.monitors.oracle && !matches!(init.kind, InitialName::CylinderCaseA | InitialName::CylinderCaseB) {
                    return Err(cfg_err("the oracle monitor needs a cylinder-case-a/b initial loop"));
                }
                match (self.experiment, &self.stability) {
                    (Experiment::StabilityPair, None) => return Err(cfg_err("missing [stability]")),
                    (Experiment::Flow, Some(_)) => return Err(cfg_err("[stability] only applies to stability-pair")),
                    (_, Some(s)) => {
                        let [a, b] = s.window;
                        if !(s.delta.is_finite() && s.force_scale.is_finite() && a >= 0.0 && b > a) {
                            return Err(cfg_err("invalid [stability] parameters"));
                        }
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }
}

impl InitialSpec {
    fn check(&self, model: &ManifoldModel) -> Result<(), CliError> {
        let case = matches!(self.kind, InitialName::CylinderCaseA | InitialName::CylinderCaseB);
        if case && model.kind() != (magflow_core::ModelKind::Cylinder { radius: 1.0 }) {
            return Err(cfg_err("cylinder-case-a/b live on the unit cylinder"));
        }
        match self.kind {
            InitialName::CylinderCaseA => {
                if self.mu.is_some() {
                    return Err(cfg_err("cylinder-case-a takes `a` and `b`"));
                }
            }
            InitialName::CylinderCaseB => {
                if self.a.is_some() || self.b.is_some() {
                    return Err(cfg_err("cylinder-case-b takes `mu`"));
                }
            }
            InitialName::Fourier => {
                if self.terms.is_empty() {
                    return Err(cfg_err("fourier initial loop needs [[initial.terms]]"));
                }
                if let Some(t) = self.terms.iter().find(|t| t.component >= model.ambient_dim()) {
                    return Err(cfg_err(format!("term component {} exceeds the ambient dimension", t.component)));
                }
            }
            InitialName::Samples => {
                if self.path.is_none() {
                    return Err(cfg_err("samples initial loop needs `path`"));
                }
            }
        }
        if self.winding.is_some_and(|w| w.iter().any(|&x| x != 0)) && !model.is_flat_quotient() {
            return Err(cfg_err("winding only applies to the flat torus"));
        }
        if !case && (self.a.is_some() || self.b.is_some() || self.mu.is_some()) {
            return Err(cfg_err("`a`, `b`, `mu` only apply to the cylinder cases"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [model]
        kind = "flat-torus"
        dim = 2
        [force]
        kind = "parallel-rotation"
        c = 1.0
        [initial]
        kind = "fourier"
        terms = [{ component = 0, mode = 1, cos = 1.0 }]
        [flow]
        nodes = 32
        dt = "auto"
        t_end = 0.1
        projection = "every-step"
        scheme = "central2"
        stepper = "euler"
        record_every = 10
        drift_tolerance = 1e-10
        residual_tolerance = 1e-3
    "#;

    #[test]
    fn parses_minimal_config() {
        let cfg = RunConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.experiment, Experiment::Flow);
        assert_eq!(cfg.flow.build().unwrap().dt, TimeStep::Auto);
    }

    #[test]
    fn rejects_unknown_keys() {
        let bad = MINIMAL.replace("c = 1.0", "c = 1.0\ncolour = 3");
        assert!(matches!(RunConfig::from_toml_str(&bad), Err(CliError::Config(_))));
        let bad = format!("bogus = 1\n{MINIMAL}");
        assert!(RunConfig::from_toml_str(&bad).is_err());
    }

    #[test]
    fn rejects_inconsistent_choices() {
        let bad = MINIMAL.replace("parallel-rotation", "radial-cross").replace("c = 1.0", "");
        assert!(RunConfig::from_toml_str(&bad).is_err());
        let bad = MINIMAL.replace("dt = \"auto\"", "dt = \"fast\"");
        assert!(RunConfig::from_toml_str(&bad).is_err());
        let bad = MINIMAL.replace("nodes = 32", "nodes = 30");
        assert!(RunConfig::from_toml_str(&bad).is_err());
        let bad = MINIMAL.replace("kind = \"fourier\"", "kind = \"cylinder-case-a\"");
        assert!(RunConfig::from_toml_str(&bad).is_err());
    }

    #[test]
    fn fixed_dt_parses() {
        let cfg = RunConfig::from_toml_str(&MINIMAL.replace("dt = \"auto\"", "dt = 0.001")).unwrap();
        assert_eq!(cfg.flow.build().unwrap().dt, TimeStep::Fixed(0.001));
    }
}
