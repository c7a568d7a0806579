//! Method-of-lines integration of the extrinsic heat flow
//! (Δ − ∂t)u = Π_u(du, du) + Z̃_u(du) for loops u: S¹ → M ⊂ ℝ^q.
//!
//! Loops are sampled at s_j = 2πj/N. On the flat torus the stored positions
//! live on the universal cover and satisfy u_{j+N} = u_j + `period_shift`.

pub mod line;

use std::f64::consts::TAU;

use thiserror::Error;

use crate::analysis::{self, NodeDiagnostics, StateDiagnostics};
use crate::force::{ForceError, ForceField};
use crate::geometry::{ManifoldModel, Vec3};
use crate::spectral::FourierDifferentiator;

/// Courant factor σ in the automatic step dt = σ·h²/2.
pub const AUTO_CFL_SIGMA: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("node {node} left the tubular neighborhood at t = {time} (distance {distance})")]
    LeftTubularNeighborhood { node: usize, time: f64, distance: f64 },
    #[error("non-finite or runaway value at t = {time} (numerical blow-up)")]
    NonFiniteValue { time: f64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid flow configuration: {0}")]
    InvalidConfig(String),
    #[error("initial loop is not on the manifold (max distance {distance})")]
    InitialOffManifold { distance: f64 },
    #[error(transparent)]
    Force(#[from] ForceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpatialScheme {
    Central2,
    Spectral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeScheme {
    Euler,
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionMode {
    EveryStep,
    Never,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeStep {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub drift: f64,
    pub residual: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { drift: 1e-10, residual: 1e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowConfig {
    pub nodes: usize,
    pub dt: TimeStep,
    pub t_end: f64,
    pub projection: ProjectionMode,
    pub scheme: SpatialScheme,
    pub stepper: TimeScheme,
    pub record_every: usize,
    pub tolerances: Tolerances,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            nodes: 128,
            dt: TimeStep::Auto,
            t_end: 1.0,
            projection: ProjectionMode::EveryStep,
            scheme: SpatialScheme::Central2,
            stepper: TimeScheme::Euler,
            record_every: 100,
            tolerances: Tolerances::default(),
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<(), FlowError> {
        if self.nodes < 16 || !self.nodes.is_power_of_two() {
            return Err(FlowError::InvalidConfig(format!("node count must be a power of two ≥ 16, got {}", self.nodes)));
        }
        if let TimeStep::Fixed(dt) = self.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(FlowError::InvalidConfig(format!("dt must be positive, got {dt}")));
            }
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(FlowError::InvalidConfig(format!("t_end must be nonnegative, got {}", self.t_end)));
        }
        if self.record_every == 0 {
            return Err(FlowError::InvalidConfig("record_every must be positive".into()));
        }
        Ok(())
    }

    /// Grid spacing h = 2π/N.
    pub fn spacing(&self) -> f64 {
        TAU / self.nodes as f64
    }

    pub fn time_step(&self) -> f64 {
        match self.dt {
            TimeStep::Auto => AUTO_CFL_SIGMA * self.spacing().powi(2) / 2.0,
            TimeStep::Fixed(dt) => dt,
        }
    }
}

/// A sampled loop at time `time`.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopState {
    pub positions: Vec<Vec3>,
    pub time: f64,
    /// Deck translation across the seam: u_{j+N} = u_j + period_shift.
    pub period_shift: Vec3,
}

impl LoopState {
    pub fn new(positions: Vec<Vec3>, time: f64) -> Self {
        Self { positions, time, period_shift: Vec3::zeros() }
    }

    pub fn with_shift(positions: Vec<Vec3>, time: f64, period_shift: Vec3) -> Self {
        Self { positions, time, period_shift }
    }

    /// Samples `f` at s_j = 2πj/N.
    pub fn from_fn(nodes: usize, f: impl Fn(f64) -> Vec3) -> Self {
        Self::new((0..nodes).map(|j| f(TAU * j as f64 / nodes as f64)).collect(), 0.0)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        TAU / self.len() as f64
    }

    pub fn parameters(&self) -> impl Iterator<Item = f64> + '_ {
        let h = self.spacing();
        (0..self.len()).map(move |j| h * j as f64)
    }

    /// Translate every node by `offset`.
    pub fn translated(&self, offset: &Vec3) -> Self {
        Self {
            positions: self.positions.iter().map(|p| p + offset).collect(),
            time: self.time,
            period_shift: self.period_shift,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Derivatives {
    pub first: Vec<Vec3>,
    pub second: Vec<Vec3>,
}

/// Spatial discretization for a fixed node count.
#[derive(Debug, Clone)]
pub struct Discretization {
    nodes: usize,
    scheme: SpatialScheme,
    fourier: Option<FourierDifferentiator>,
}

impl Discretization {
    pub fn new(nodes: usize, scheme: SpatialScheme) -> Self {
        let fourier = (scheme == SpatialScheme::Spectral).then(|| FourierDifferentiator::new(nodes));
        Self { nodes, scheme, fourier }
    }

    pub fn scheme(&self) -> SpatialScheme {
        self.scheme
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn derivatives(&self, state: &LoopState) -> Derivatives {
        let n = state.len();
        debug_assert_eq!(n, self.nodes);
        let h = TAU / n as f64;
        let shift = state.period_shift;
        match &self.fourier {
            None => {
                let at = |j: isize| -> Vec3 {
                    if j < 0 {
                        state.positions[(j + n as isize) as usize] - shift
                    } else if j >= n as isize {
                        state.positions[j as usize - n] + shift
                    } else {
                        state.positions[j as usize]
                    }
                };
                let mut first = Vec::with_capacity(n);
                let mut second = Vec::with_capacity(n);
                for j in 0..n as isize {
                    let (l, c, r) = (at(j - 1), at(j), at(j + 1));
                    first.push((r - l) / (2.0 * h));
                    second.push((r - c * 2.0 + l) / (h * h));
                }
                Derivatives { first, second }
            }
            Some(fourier) => {
                // periodic part p(s) = u(s) − shift·s/2π
                let slope = shift / TAU;
                let mut first = vec![slope; n];
                let mut second = vec![Vec3::zeros(); n];
                for c in 0..3 {
                    if shift[c] == 0.0 && state.positions.iter().all(|p| p[c] == 0.0) {
                        continue;
                    }
                    let values: Vec<f64> = (0..n).map(|j| state.positions[j][c] - slope[c] * h * j as f64).collect();
                    let (d1, d2) = fourier.derivatives(&values);
                    for j in 0..n {
                        first[j][c] += d1[j];
                        second[j][c] = d2[j];
                    }
                }
                Derivatives { first, second }
            }
        }
    }
}

/// First and second derivatives of the loop under `scheme`.
pub fn spatial_derivatives(state: &LoopState, scheme: SpatialScheme) -> Derivatives {
    Discretization::new(state.len(), scheme).derivatives(state)
}

/// Velocity field F_j = Δu_j − Π_{u_j}(u′_j, u′_j) − Z̃_{u_j}(u′_j).
pub fn rhs(
    state: &LoopState,
    model: &ManifoldModel,
    force: &ForceField,
    disc: &Discretization,
) -> Result<Vec<Vec3>, FlowError> {
    let tube = model.tubular_radius();
    for (node, p) in state.positions.iter().enumerate() {
        let distance = model.distance(p);
        if !distance.is_finite() || !p.iter().all(|c| c.is_finite()) {
            return Err(FlowError::NonFiniteValue { time: state.time });
        }
        if distance >= tube {
            return Err(FlowError::LeftTubularNeighborhood { node, time: state.time, distance });
        }
    }
    let d = disc.derivatives(state);
    Ok(state
        .positions
        .iter()
        .zip(d.first.iter().zip(&d.second))
        .map(|(u, (du, ddu))| {
            ddu - model.second_fundamental_unchecked(u, du) - force.extend_vector(model, u, du)
        })
        .collect())
}

fn axpy(state: &LoopState, dir: &[Vec3], dt: f64) -> LoopState {
    LoopState {
        positions: state.positions.iter().zip(dir).map(|(p, f)| p + f * dt).collect(),
        time: state.time + dt,
        period_shift: state.period_shift,
    }
}

fn check_finite(state: &LoopState) -> Result<(), FlowError> {
    if state.positions.iter().all(|p| p.iter().all(|c| c.is_finite())) {
        Ok(())
    } else {
        Err(FlowError::NonFiniteValue { time: state.time })
    }
}

/// One explicit step of size `dt`, followed by projection when enabled.
pub fn step(
    state: &LoopState,
    config: &FlowConfig,
    model: &ManifoldModel,
    force: &ForceField,
    disc: &Discretization,
    dt: f64,
) -> Result<LoopState, FlowError> {
    let mut next = match config.stepper {
        TimeScheme::Euler => axpy(state, &rhs(state, model, force, disc)?, dt),
        TimeScheme::Rk4 => {
            let k1 = rhs(state, model, force, disc)?;
            let k2 = rhs(&axpy(state, &k1, dt / 2.0), model, force, disc)?;
            let k3 = rhs(&axpy(state, &k2, dt / 2.0), model, force, disc)?;
            let k4 = rhs(&axpy(state, &k3, dt), model, force, disc)?;
            let combined: Vec<Vec3> = (0..state.len())
                .map(|j| (k1[j] + k2[j] * 2.0 + k3[j] * 2.0 + k4[j]) / 6.0)
                .collect();
            axpy(state, &combined, dt)
        }
    };
    check_finite(&next)?;
    if config.projection == ProjectionMode::EveryStep {
        for (node, p) in next.positions.iter_mut().enumerate() {
            *p = model.project(p).map_err(|_| FlowError::LeftTubularNeighborhood {
                node,
                time: state.time + dt,
                distance: model.distance(p),
            })?;
        }
    }
    Ok(next)
}

/// A recorded state with its diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub state: LoopState,
    pub diagnostics: StateDiagnostics,
    pub nodes: NodeDiagnostics,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Completed,
    /// The integrator stopped; `time` is that of the last good state.
    Failed { error: FlowError, time: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowTrajectory {
    pub records: Vec<Record>,
    pub config: FlowConfig,
    pub dt: f64,
    pub termination: Termination,
}

impl FlowTrajectory {
    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.state.time).collect()
    }

    pub fn final_state(&self) -> &LoopState {
        &self.records.last().expect("trajectory holds the initial state").state
    }

    pub fn completed(&self) -> bool {
        self.termination == Termination::Completed
    }

    /// Record closest to time `t`.
    pub fn at_time(&self, t: f64) -> &Record {
        self.records
            .iter()
            .min_by(|a, b| (a.state.time - t).abs().total_cmp(&(b.state.time - t).abs()))
            .expect("trajectory holds the initial state")
    }
}

/// Integrate from `initial` to `config.t_end`.
///
/// Configuration and initial-data problems are returned as errors; failures
/// during time stepping end the trajectory early with
/// [`Termination::Failed`].
pub fn integrate(
    initial: &LoopState,
    config: &FlowConfig,
    model: &ManifoldModel,
    force: &ForceField,
) -> Result<FlowTrajectory, FlowError> {
    config.validate()?;
    if force.degree() != 1 {
        return Err(FlowError::Unsupported(format!(
            "time integration is only available for 1-forces (loops); got degree {}",
            force.degree()
        )));
    }
    force.check_compatible(model)?;
    if initial.len() != config.nodes {
        return Err(FlowError::InvalidConfig(format!(
            "initial loop has {} nodes, configuration expects {}",
            initial.len(),
            config.nodes
        )));
    }
    let max_distance = initial.positions.iter().map(|p| model.distance(p)).fold(0.0, f64::max);
    let allowed = match config.projection {
        ProjectionMode::EveryStep => config.tolerances.drift,
        ProjectionMode::Never => model.tubular_radius(),
    };
    if !(max_distance <= allowed) || max_distance >= model.tubular_radius() {
        return Err(FlowError::InitialOffManifold { distance: max_distance });
    }

    let disc = Discretization::new(config.nodes, config.scheme);
    let dt = config.time_step();
    let steps = if config.t_end == 0.0 { 0 } else { (config.t_end / dt).ceil() as usize };

    let start = LoopState { time: 0.0, ..initial.clone() };
    let record = |s: LoopState| -> Result<Record, FlowError> {
        let (diagnostics, nodes) = analysis::diagnose(&s, model, force, &disc)?;
        Ok(Record { state: s, diagnostics, nodes })
    };
    let mut records = vec![record(start.clone())?];
    let mut current = start;
    let mut termination = Termination::Completed;
    for n in 1..=steps {
        let target = if n == steps { config.t_end } else { n as f64 * dt };
        let h = target - current.time;
        match step(&current, config, model, force, &disc, h) {
            Ok(mut next) => {
                next.time = target;
                current = next;
            }
            Err(error) => {
                termination = Termination::Failed { error, time: current.time };
                break;
            }
        }
        if n % config.record_every == 0 || n == steps {
            match record(current.clone()) {
                Ok(r) => records.push(r),
                Err(error) => {
                    termination = Termination::Failed { error, time: current.time };
                    break;
                }
            }
        }
    }
    Ok(FlowTrajectory { records, config: *config, dt, termination })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::force::ForceKind;

    #[test]
    fn derivatives_of_unit_circle() {
        let state = LoopState::from_fn(64, |s| Vec3::new(s.cos(), s.sin(), 0.0));
        let h = state.spacing();
        let c2 = spatial_derivatives(&state, SpatialScheme::Central2);
        let sp = spatial_derivatives(&state, SpatialScheme::Spectral);
        for (j, u) in state.positions.iter().enumerate() {
            // the central second difference of a unit mode is −(2 − 2cos h)/h² times it
            assert!((c2.second[j] + u).norm() < h * h / 10.0);
            assert!((sp.second[j] + u).norm() < 1e-10);
        }
    }

    #[test]
    fn derivatives_of_constant_and_frequency_two() {
        let c = LoopState::from_fn(32, |_| Vec3::new(1.0, 2.0, 3.0));
        for scheme in [SpatialScheme::Central2, SpatialScheme::Spectral] {
            let d = spatial_derivatives(&c, scheme);
            assert!(d.first.iter().chain(&d.second).all(|v| v.norm() < 1e-13));
        }
        let state = LoopState::from_fn(128, |s| Vec3::new((2.0 * s).cos(), (2.0 * s).sin(), 0.0));
        let d = spatial_derivatives(&state, SpatialScheme::Spectral);
        for (j, u) in state.positions.iter().enumerate() {
            assert!((d.second[j] + u * 4.0).norm() < 1e-10);
        }
        let d = spatial_derivatives(&state, SpatialScheme::Central2);
        let h = state.spacing();
        for (j, u) in state.positions.iter().enumerate() {
            assert!((d.second[j] + u * 4.0).norm() < 2.0 * h * h);
        }
    }

    #[test]
    fn winding_loop_derivatives_use_the_period_shift() {
        let n = 32;
        let mut state = LoopState::from_fn(n, |s| Vec3::new(s, (2.0 * s).sin(), 0.0));
        state.period_shift = Vec3::new(TAU, 0.0, 0.0);
        for scheme in [SpatialScheme::Central2, SpatialScheme::Spectral] {
            let d = spatial_derivatives(&state, scheme);
            assert!((d.first[0].x - 1.0).abs() < 1e-12);
            assert!((d.first[n - 1].x - 1.0).abs() < 1e-12);
            assert!(d.second.iter().all(|v| v.x.abs() < 1e-10));
        }
    }

    #[test]
    fn rhs_examples() {
        let flat = ManifoldModel::flat_torus(2).unwrap();
        let rot = ForceField::new(ForceKind::ParallelRotation { c: 0.7 });
        let mut state = LoopState::from_fn(32, |s| Vec3::new(s, 0.0, 0.0));
        state.period_shift = Vec3::new(TAU, 0.0, 0.0);
        let f = rhs(&state, &flat, &rot, &Discretization::new(32, SpatialScheme::Central2)).unwrap();
        assert!(f.iter().all(|v| (v - Vec3::new(0.0, -0.7, 0.0)).norm() < 1e-12));

        let cyl = ManifoldModel::cylinder(1.0).unwrap();
        let radial = ForceField::new(ForceKind::RadialCross);
        let constant = LoopState::from_fn(16, |_| Vec3::new(0.0, 1.0, 0.3));
        let f = rhs(&constant, &cyl, &radial, &Discretization::new(16, SpatialScheme::Central2)).unwrap();
        assert!(f.iter().all(|v| v.norm() == 0.0));

        let circle = LoopState::from_fn(64, |s| Vec3::new(s.cos(), s.sin(), 0.0));
        let f = rhs(&circle, &cyl, &radial, &Discretization::new(64, SpatialScheme::Spectral)).unwrap();
        for v in &f {
            assert!((v - Vec3::z()).norm() < 1e-7, "{v:?}");
        }
    }

    #[test]
    fn rhs_rejects_points_outside_tube() {
        let cyl = ManifoldModel::cylinder(1.0).unwrap();
        let state = LoopState::from_fn(16, |s| Vec3::new(2.0 * s.cos(), 2.0 * s.sin(), 0.0));
        let err = rhs(&state, &cyl, &ForceField::zero(), &Discretization::new(16, SpatialScheme::Central2));
        assert!(matches!(err, Err(FlowError::LeftTubularNeighborhood { node: 0, .. })));
    }

    #[test]
    fn config_validation() {
        let mut c = FlowConfig { nodes: 24, ..Default::default() };
        assert!(c.validate().is_err());
        c.nodes = 8;
        assert!(c.validate().is_err());
        c.nodes = 16;
        assert!(c.validate().is_ok());
        c.dt = TimeStep::Fixed(-1.0);
        assert!(c.validate().is_err());
        let c = FlowConfig { nodes: 64, ..Default::default() };
        let h = TAU / 64.0;
        assert!((c.time_step() - 0.25 * h * h).abs() < 1e-18);
    }

    #[test]
    fn zero_time_trajectory_is_the_initial_state() {
        let flat = ManifoldModel::flat_torus(2).unwrap();
        let init = LoopState::from_fn(16, |s| Vec3::new(s.cos(), s.sin(), 0.0));
        let cfg = FlowConfig { nodes: 16, t_end: 0.0, ..Default::default() };
        let traj = integrate(&init, &cfg, &flat, &ForceField::zero()).unwrap();
        assert_eq!(traj.records.len(), 1);
        assert_eq!(traj.records[0].state, init);
        assert!(traj.completed());
    }

    #[test]
    fn higher_degree_forces_are_rejected() {
        let mut m = nalgebra::DMatrix::zeros(3, 3);
        m[(2, 0)] = 1.0;
        let f = crate::force::CustomField::new(3, 2, vec![(Vec3::zeros(), m)]).unwrap();
        let z = ForceField::new(ForceKind::Custom(f));
        let flat = ManifoldModel::flat_torus(3).unwrap();
        let init = LoopState::from_fn(16, |s| Vec3::new(s.cos(), s.sin(), 0.0));
        let cfg = FlowConfig { nodes: 16, ..Default::default() };
        assert!(matches!(integrate(&init, &cfg, &flat, &z), Err(FlowError::Unsupported(_))));
    }

    #[test]
    fn projected_step_lands_on_manifold() {
        let s = ManifoldModel::sphere(1.0).unwrap();
        let init = LoopState::from_fn(32, |t| Vec3::new(t.cos(), t.sin(), 0.3 * (2.0 * t).sin()).normalize());
        let cfg = FlowConfig { nodes: 32, ..Default::default() };
        let disc = Discretization::new(32, cfg.scheme);
        let next = step(&init, &cfg, &s, &ForceField::zero(), &disc, cfg.time_step()).unwrap();
        assert!(next.positions.iter().all(|p| s.distance(p) <= 1e-12));
    }
}
