//! Energy densities, magnetic-geodesic residuals, Bochner balances,
//! maximum-principle bound monitors and trajectory-pair comparisons.

use std::f64::consts::TAU;

use thiserror::Error;

use crate::exterior::{wedge, MultiVector};
use crate::flow::{self, Discretization, FlowError, FlowTrajectory, LoopState, ProjectionMode, SpatialScheme};
use crate::force::{ForceError, ForceField};
use crate::geometry::{ManifoldModel, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("unsupported domain: {0}")]
    UnsupportedDomain(String),
    #[error("unsupported model: {0}")]
    UnsupportedModel(String),
    #[error("monitor requires an unprojected trajectory")]
    WrongMode,
    #[error("trajectories do not share a grid: {0}")]
    GridMismatch(String),
    #[error("not enough recorded states: {0}")]
    TooShort(String),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Force(#[from] ForceError),
}

/// Per-state summary stored with every recorded state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDiagnostics {
    pub e_sup: f64,
    pub energy: f64,
    pub kappa_sup: f64,
    pub kinetic: f64,
    pub residual_sup: f64,
    pub drift_sup: f64,
    pub drift_integral: f64,
}

/// Per-node values behind [`StateDiagnostics`].
#[derive(Debug, Clone, PartialEq)]
pub struct NodeDiagnostics {
    pub e: Vec<f64>,
    pub kappa: Vec<f64>,
    pub residual: Vec<f64>,
    pub drift: Vec<f64>,
}

/// Periodic trapezoid rule on a uniform grid over [0, 2π).
pub fn trapezoid(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() * TAU / values.len() as f64
}

fn sup(values: &[f64]) -> f64 {
    values.iter().copied().fold(0.0, f64::max)
}

/// e_j = ½|u′_j|².
pub fn energy_density(state: &LoopState, scheme: SpatialScheme) -> Vec<f64> {
    flow::spatial_derivatives(state, scheme).first.iter().map(|d| 0.5 * d.norm_squared()).collect()
}

/// κ_j = ½|∂ₜu_j|² from rhs values.
pub fn kinetic_density(velocity: &[Vec3]) -> Vec<f64> {
    velocity.iter().map(|v| 0.5 * v.norm_squared()).collect()
}

fn residual_from(state: &LoopState, d: &flow::Derivatives, model: &ManifoldModel, force: &ForceField) -> Result<Vec<Vec3>, FlowError> {
    state
        .positions
        .iter()
        .enumerate()
        .map(|(node, u)| {
            let outside = |_| FlowError::LeftTubularNeighborhood { node, time: state.time, distance: model.distance(u) };
            let p = model.project(u).map_err(outside)?;
            let jac = model.projection_jacobian(u).map_err(outside)?;
            let du = d.first[node];
            let tension = jac * (d.second[node] - model.second_fundamental_unchecked(u, &du));
            Ok(tension - force.evaluate_vector(model, &p, &(jac * du)))
        })
        .collect()
}

/// r_j = P(Δu − Π) − Z(P u′), the discrete ∇γ′ − Z(γ′) of a loop.
///
/// Along the flow the velocity equals r up to the normal O(h²) defect of
/// an on-manifold state.
pub fn geodesic_residual(
    state: &LoopState,
    model: &ManifoldModel,
    force: &ForceField,
    scheme: SpatialScheme,
) -> Result<Vec<Vec3>, AnalysisError> {
    if force.degree() != 1 {
        return Err(ForceError::DegreeMismatch { expected: 1, got: force.degree() }.into());
    }
    let disc = Discretization::new(state.len(), scheme);
    Ok(residual_from(state, &disc.derivatives(state), model, force)?)
}

/// Per-state diagnostics used by the integrator.
pub fn diagnose(
    state: &LoopState,
    model: &ManifoldModel,
    force: &ForceField,
    disc: &Discretization,
) -> Result<(StateDiagnostics, NodeDiagnostics), FlowError> {
    let velocity = flow::rhs(state, model, force, disc)?;
    let d = disc.derivatives(state);
    let residual: Vec<f64> = residual_from(state, &d, model, force)?.iter().map(|r| r.norm()).collect();
    let e: Vec<f64> = d.first.iter().map(|v| 0.5 * v.norm_squared()).collect();
    let kappa = kinetic_density(&velocity);
    let drift: Vec<f64> = state.positions.iter().map(|p| model.squared_drift(p)).collect();
    let summary = StateDiagnostics {
        e_sup: sup(&e),
        energy: trapezoid(&e),
        kappa_sup: sup(&kappa),
        kinetic: trapezoid(&kappa),
        residual_sup: sup(&residual),
        drift_sup: sup(&drift),
        drift_integral: trapezoid(&drift),
    };
    Ok((summary, NodeDiagnostics { e, kappa, residual, drift }))
}

/// Domain Σ of a sampled k-dimensional map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaDomain {
    /// ℝ^k/(2πℤ)^k with the flat metric.
    FlatSquareTorus,
    /// Any other metric on Σ; no residual is available.
    Curved,
}

/// A map Σ → ℝ^q sampled on `side^k` nodes, index = Σ_a i_a·side^a.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    pub domain: SigmaDomain,
    pub side: usize,
    pub dim: usize,
    pub positions: Vec<Vec3>,
    /// Deck translation picked up when crossing the seam of axis a.
    pub lifts: Vec<Vec3>,
}

impl GridMap {
    pub fn from_fn(dim: usize, side: usize, f: impl Fn(&[f64]) -> Vec3) -> Self {
        let h = TAU / side as f64;
        let total = side.pow(dim as u32);
        let positions = (0..total)
            .map(|idx| {
                let x: Vec<f64> = (0..dim).map(|a| h * ((idx / side.pow(a as u32)) % side) as f64).collect();
                f(&x)
            })
            .collect();
        Self { domain: SigmaDomain::FlatSquareTorus, side, dim, positions, lifts: vec![Vec3::zeros(); dim] }
    }

    fn neighbor(&self, idx: usize, axis: usize, forward: bool) -> Vec3 {
        let stride = self.side.pow(axis as u32);
        let i = (idx / stride) % self.side;
        if forward {
            if i + 1 == self.side {
                self.positions[idx - i * stride] + self.lifts[axis]
            } else {
                self.positions[idx + stride]
            }
        } else if i == 0 {
            self.positions[idx + (self.side - 1) * stride] - self.lifts[axis]
        } else {
            self.positions[idx - stride]
        }
    }
}

/// Elliptic residual P(τ(φ)) − Z(φ_1 ∧ … ∧ φ_k) of a sampled map from a flat
/// square torus, with central second-order differences.
pub fn brane_residual(map: &GridMap, model: &ManifoldModel, force: &ForceField) -> Result<Vec<Vec3>, AnalysisError> {
    if map.domain != SigmaDomain::FlatSquareTorus {
        return Err(AnalysisError::UnsupportedDomain("the residual needs a flat square torus grid".into()));
    }
    if force.degree() != map.dim {
        return Err(ForceError::DegreeMismatch { expected: force.degree(), got: map.dim }.into());
    }
    if map.side < 3 || map.lifts.len() != map.dim || map.positions.len() != map.side.pow(map.dim as u32) {
        return Err(AnalysisError::GridMismatch("inconsistent grid map".into()));
    }
    let q = model.ambient_dim();
    let h = TAU / map.side as f64;
    let mut out = Vec::with_capacity(map.positions.len());
    for (idx, u) in map.positions.iter().enumerate() {
        let outside = |_| FlowError::LeftTubularNeighborhood { node: idx, time: 0.0, distance: model.distance(u) };
        let p = model.project(u).map_err(outside)?;
        let jac = model.projection_jacobian(u).map_err(outside)?;
        let mut tension = Vec3::zeros();
        let mut partials = Vec::with_capacity(map.dim);
        for a in 0..map.dim {
            let (l, r) = (map.neighbor(idx, a, false), map.neighbor(idx, a, true));
            let da = (r - l) / (2.0 * h);
            tension += (r - u * 2.0 + l) / (h * h) - model.second_fundamental_unchecked(u, &da);
            partials.push(jac * da);
        }
        let slices: Vec<Vec<f64>> = partials.iter().map(|v| v.iter().take(q).copied().collect()).collect();
        let refs: Vec<&[f64]> = slices.iter().map(|v| v.as_slice()).collect();
        let xi: MultiVector = wedge(&refs).map_err(ForceError::from)?;
        out.push(jac * tension - force.evaluate(model, &p, &xi)?);
    }
    Ok(out)
}

/// One row of the energy monitor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyRow {
    pub time: f64,
    pub e_sup: f64,
    pub energy: f64,
    pub kappa_sup: f64,
    pub kinetic: f64,
    /// e^{λt}·max e(f).
    pub e_bound: f64,
    /// e^{λT}·max e(f), the horizon form of the same bound.
    pub e_bound_horizon: f64,
    /// e^{Ct}·max κ(f).
    pub kappa_bound: f64,
    pub e_margin: f64,
    pub kappa_margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub lambda: f64,
    pub mu: f64,
    pub c: f64,
    pub curvature_bound: f64,
    pub horizon: f64,
    pub tolerance: f64,
    pub rows: Vec<EnergyRow>,
    /// Times at which an observed value exceeded bound·(1 + tolerance).
    pub violations: Vec<f64>,
}

impl EnergyReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Maximum-principle bounds e ≤ e^{λt}·max e(f) and κ ≤ e^{Ct}·max κ(f).
pub fn energy_bound_monitor(
    trajectory: &FlowTrajectory,
    force: &ForceField,
    model: &ManifoldModel,
) -> Result<EnergyReport, AnalysisError> {
    let norms = force.norm_constants(model)?;
    let first = trajectory.records.first().ok_or_else(|| AnalysisError::TooShort("empty trajectory".into()))?;
    let horizon = trajectory.records.last().map(|r| r.state.time).unwrap_or(0.0);
    let e0 = first.diagnostics.e_sup;
    let k0 = first.diagnostics.kappa_sup;
    let lambda = 0.5 * norms.sup * norms.sup;
    let mu = 2f64.powf(1.5) * norms.sup_grad;
    let curvature_bound = model.curvature_bound();
    let c = 4.0 * curvature_bound * (lambda * horizon).exp() * e0 + lambda + mu * (lambda * horizon / 2.0).exp() * e0.sqrt();
    let tolerance = 1e-6 + 10.0 * trajectory.config.spacing().powi(2);
    let mut rows = Vec::with_capacity(trajectory.records.len());
    let mut violations = Vec::new();
    for r in &trajectory.records {
        let t = r.state.time;
        let d = r.diagnostics;
        let e_bound = (lambda * t).exp() * e0;
        let kappa_bound = (c * t).exp() * k0;
        if d.e_sup > e_bound * (1.0 + tolerance) || d.kappa_sup > kappa_bound * (1.0 + tolerance) {
            violations.push(t);
        }
        rows.push(EnergyRow {
            time: t,
            e_sup: d.e_sup,
            energy: d.energy,
            kappa_sup: d.kappa_sup,
            kinetic: d.kinetic,
            e_bound,
            e_bound_horizon: (lambda * horizon).exp() * e0,
            kappa_bound,
            e_margin: e_bound - d.e_sup,
            kappa_margin: kappa_bound - d.kappa_sup,
        });
    }
    Ok(EnergyReport { lambda, mu, c, curvature_bound, horizon, tolerance, rows, violations })
}

/// max_j |∂ₜe − Δe + |u″|² − ⟨Z(u′), u″⟩| at the middle of three states.
///
/// ∂ₜe is the central difference of the recorded energy densities; the
/// spatial terms use the given scheme at the middle state.
pub fn bochner_residual(
    window: [&LoopState; 3],
    model: &ManifoldModel,
    force: &ForceField,
    scheme: SpatialScheme,
) -> Result<f64, AnalysisError> {
    if !model.is_flat_quotient() {
        return Err(AnalysisError::UnsupportedModel(format!("{:?} is curved", model.kind())));
    }
    if !force.is_parallel() {
        return Err(AnalysisError::UnsupportedModel(format!("force {} is not parallel", force.name())));
    }
    let n = window[1].len();
    if window.iter().any(|s| s.len() != n) {
        return Err(AnalysisError::GridMismatch("window states differ in size".into()));
    }
    let span = window[2].time - window[0].time;
    if !(span > 0.0) {
        return Err(AnalysisError::TooShort("window times must increase".into()));
    }
    let disc = Discretization::new(n, scheme);
    let e: Vec<Vec<f64>> = window
        .iter()
        .map(|s| disc.derivatives(s).first.iter().map(|d| 0.5 * d.norm_squared()).collect())
        .collect();
    let mid = disc.derivatives(window[1]);
    let laplace_e = match scheme {
        SpatialScheme::Central2 => {
            let h2 = (TAU / n as f64).powi(2);
            (0..n).map(|j| (e[1][(j + 1) % n] - 2.0 * e[1][j] + e[1][(j + n - 1) % n]) / h2).collect::<Vec<_>>()
        }
        SpatialScheme::Spectral => crate::spectral::FourierDifferentiator::new(n).derivatives(&e[1]).1,
    };
    let mut worst: f64 = 0.0;
    for j in 0..n {
        let dt_e = (e[2][j] - e[0][j]) / span;
        let du = mid.first[j];
        let ddu = mid.second[j];
        let z = force.evaluate_vector(model, &window[1].positions[j], &du);
        worst = worst.max((dt_e - laplace_e[j] + ddu.norm_squared() - z.dot(&ddu)).abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub times: Vec<f64>,
    /// D(t) = ∫|uₜ − vₜ|² ds.
    pub distance: Vec<f64>,
    pub initial_sup_squared: f64,
    pub force_mismatch_squared: f64,
    pub fitted_c: f64,
    pub window: (f64, f64),
    /// Whether D(t) ≤ 2π e^{Ĉt}(|u₀ − v₀|²_∞ + t|Z − Z′|²_∞) on the window.
    pub bound_holds: bool,
}

/// Compare two trajectories recorded on the same grid and times.
pub fn stability_compare(
    u: &FlowTrajectory,
    v: &FlowTrajectory,
    force_u: &ForceField,
    force_v: &ForceField,
    model: &ManifoldModel,
    window: (f64, f64),
) -> Result<StabilityReport, AnalysisError> {
    if u.records.len() != v.records.len() {
        return Err(AnalysisError::GridMismatch(format!("{} vs {} recorded states", u.records.len(), v.records.len())));
    }
    let mut times = Vec::new();
    let mut distance = Vec::new();
    for (a, b) in u.records.iter().zip(&v.records) {
        if a.state.len() != b.state.len() || a.state.time != b.state.time {
            return Err(AnalysisError::GridMismatch(format!("state at t = {} does not match t = {}", a.state.time, b.state.time)));
        }
        let diff: Vec<f64> = a.state.positions.iter().zip(&b.state.positions).map(|(x, y)| (x - y).norm_squared()).collect();
        times.push(a.state.time);
        distance.push(trapezoid(&diff));
    }
    let first = (&u.records[0].state, &v.records[0].state);
    let initial_sup_squared = first.0.positions.iter().zip(&first.1.positions).map(|(x, y)| (x - y).norm_squared()).fold(0.0, f64::max);
    let mismatch = force_u.sup_distance(force_v, model)?;
    let force_mismatch_squared = mismatch * mismatch;
    let d0 = distance[0];
    let in_window = |t: f64| t >= window.0 && t <= window.1;
    let mut fitted_c: f64 = 0.0;
    for (&t, &d) in times.iter().zip(&distance) {
        if !in_window(t) || d == 0.0 || t == 0.0 {
            continue;
        }
        let rate = if d0 > 0.0 {
            (d.ln() - d0.ln()) / t
        } else if force_mismatch_squared > 0.0 {
            (d / (TAU * t * force_mismatch_squared)).ln() / t
        } else {
            f64::INFINITY
        };
        fitted_c = fitted_c.max(rate.max(0.0));
    }
    let bound_holds = fitted_c.is_finite()
        && times.iter().zip(&distance).filter(|(t, _)| in_window(**t)).all(|(&t, &d)| {
            let bound = TAU * (fitted_c * t).exp() * (initial_sup_squared + t * force_mismatch_squared);
            d <= bound * (1.0 + 1e-12)
        });
    Ok(StabilityReport { times, distance, initial_sup_squared, force_mismatch_squared, fitted_c, window, bound_holds })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftReport {
    pub times: Vec<f64>,
    pub drift_sup: Vec<f64>,
    pub drift_integral: Vec<f64>,
    pub allowance: f64,
    /// Recorded intervals (end time, increase) where ∫h grew beyond the allowance.
    pub increases: Vec<(f64, f64)>,
}

impl DriftReport {
    pub fn strictly_decreasing(&self) -> bool {
        self.drift_integral.windows(2).all(|w| w[1] < w[0])
    }

    pub fn max_integral(&self) -> f64 {
        sup(&self.drift_integral)
    }

    pub fn passed(&self) -> bool {
        self.increases.is_empty()
    }
}

/// h_sup and ∫h over an unprojected trajectory, with the check d/dt ∫h ≤ 0
/// up to an O(h² + dt) allowance.
pub fn unprojected_drift_monitor(trajectory: &FlowTrajectory) -> Result<DriftReport, AnalysisError> {
    if trajectory.config.projection != ProjectionMode::Never {
        return Err(AnalysisError::WrongMode);
    }
    let allowance = 10.0 * (trajectory.config.spacing().powi(2) + trajectory.dt);
    let times: Vec<f64> = trajectory.times();
    let drift_sup: Vec<f64> = trajectory.records.iter().map(|r| r.diagnostics.drift_sup).collect();
    let drift_integral: Vec<f64> = trajectory.records.iter().map(|r| r.diagnostics.drift_integral).collect();
    let increases = drift_integral
        .windows(2)
        .zip(&times[1..])
        .filter(|(w, _)| w[1] - w[0] > allowance)
        .map(|(w, &t)| (t, w[1] - w[0]))
        .collect();
    Ok(DriftReport { times, drift_sup, drift_integral, allowance, increases })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{integrate, FlowConfig, TimeScheme, TimeStep};
    use crate::force::{CustomField, ForceKind};
    use nalgebra::DMatrix;

    fn circle(n: usize) -> LoopState {
        LoopState::from_fn(n, |s| Vec3::new(s.cos(), s.sin(), 0.0))
    }

    #[test]
    fn energy_density_examples() {
        let e = energy_density(&circle(64), SpatialScheme::Spectral);
        assert!(e.iter().all(|v| (v - 0.5).abs() < 1e-12));
        let c = LoopState::from_fn(16, |_| Vec3::new(0.3, 0.1, 0.0));
        assert!(energy_density(&c, SpatialScheme::Central2).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn geodesic_residual_examples() {
        let sphere = ManifoldModel::sphere(1.0).unwrap();
        let n = 128;
        let r = geodesic_residual(&circle(n), &sphere, &ForceField::zero(), SpatialScheme::Central2).unwrap();
        let h = TAU / n as f64;
        assert!(r.iter().all(|v| v.norm() < h * h));

        // the horizontal circle on the unit cylinder: ∇γ′ = 0 and Z(γ′) = (0, 0, −1)
        let cyl = ManifoldModel::cylinder(1.0).unwrap();
        let r = geodesic_residual(&circle(n), &cyl, &ForceField::new(ForceKind::RadialCross), SpatialScheme::Spectral).unwrap();
        assert!(r.iter().all(|v| (v - Vec3::z()).norm() < 1e-8));
    }

    #[test]
    fn residual_matches_velocity_on_flat_torus() {
        let flat = ManifoldModel::flat_torus(2).unwrap();
        let z = ForceField::new(ForceKind::ParallelRotation { c: 1.3 });
        let state = LoopState::from_fn(32, |s| Vec3::new(s.cos(), 0.5 * (2.0 * s).sin(), 0.0));
        let disc = Discretization::new(32, SpatialScheme::Central2);
        let f = flow::rhs(&state, &flat, &z, &disc).unwrap();
        let r = geodesic_residual(&state, &flat, &z, SpatialScheme::Central2).unwrap();
        let (_, nodes) = diagnose(&state, &flat, &z, &disc).unwrap();
        for j in 0..32 {
            assert!((f[j] - r[j]).norm() < 1e-12);
            assert!((nodes.kappa[j] - 0.5 * f[j].norm_squared()).abs() < 1e-12);
        }
    }

    #[test]
    fn brane_residual_flat_examples() {
        let flat = ManifoldModel::flat_torus(3).unwrap();
        let mut m = DMatrix::zeros(3, 3);
        m[(2, 0)] = 1.0;
        let z = ForceField::new(ForceKind::Custom(CustomField::new(3, 2, vec![(Vec3::zeros(), m)]).unwrap()));
        let mut map = GridMap::from_fn(2, 16, |x| Vec3::new(x[0], x[1], 0.0));
        map.lifts = vec![Vec3::new(TAU, 0.0, 0.0), Vec3::new(0.0, TAU, 0.0)];
        let r = brane_residual(&map, &flat, &z).unwrap();
        assert!(r.iter().all(|v| (v + Vec3::z()).norm() < 1e-12));
        map.domain = SigmaDomain::Curved;
        assert!(matches!(brane_residual(&map, &flat, &z), Err(AnalysisError::UnsupportedDomain(_))));
    }

    #[test]
    fn bochner_rejects_curved_targets() {
        let s = circle(16);
        let sphere = ManifoldModel::sphere(1.0).unwrap();
        assert!(matches!(
            bochner_residual([&s, &s, &s], &sphere, &ForceField::zero(), SpatialScheme::Central2),
            Err(AnalysisError::UnsupportedModel(_))
        ));
    }

    #[test]
    fn bochner_constant_loop_is_zero() {
        let flat = ManifoldModel::flat_torus(2).unwrap();
        let c = LoopState::from_fn(16, |_| Vec3::new(1.0, 2.0, 0.0));
        let mut c2 = c.clone();
        c2.time = 1.0;
        let mut c3 = c.clone();
        c3.time = 2.0;
        let z = ForceField::new(ForceKind::ParallelRotation { c: 1.0 });
        assert_eq!(bochner_residual([&c, &c2, &c3], &flat, &z, SpatialScheme::Central2).unwrap(), 0.0);
    }

    #[test]
    fn zero_force_energy_bound_is_the_initial_maximum() {
        let flat = ManifoldModel::flat_torus(2).unwrap();
        let init = LoopState::from_fn(32, |s| Vec3::new(0.3 * s.cos(), 0.2 * (2.0 * s).sin(), 0.0));
        let cfg = FlowConfig { nodes: 32, t_end: 0.5, record_every: 20, ..Default::default() };
        let traj = integrate(&init, &cfg, &flat, &ForceField::zero()).unwrap();
        let rep = energy_bound_monitor(&traj, &ForceField::zero(), &flat).unwrap();
        assert_eq!(rep.lambda, 0.0);
        assert!(rep.passed());
        assert!(rep.rows.iter().all(|r| r.e_bound == rep.rows[0].e_sup));
        assert!(rep.rows.windows(2).all(|w| w[1].e_bound >= w[0].e_bound && w[1].kappa_bound >= w[0].kappa_bound));
    }

    #[test]
    fn energy_monitor_needs_norm_constants() {
        let flat = ManifoldModel::flat_torus(1).unwrap();
        let init = LoopState::from_fn(16, |s| Vec3::new(0.1 * s.sin(), 0.0, 0.0));
        let cfg = FlowConfig { nodes: 16, t_end: 0.0, ..Default::default() };
        let lin = ForceField::new(ForceKind::LinearScalar);
        let traj = integrate(&init, &cfg, &flat, &ForceField::zero()).unwrap();
        assert!(matches!(energy_bound_monitor(&traj, &lin, &flat), Err(AnalysisError::Force(ForceError::MissingNormConstants(_)))));
    }

    #[test]
    fn identical_runs_have_zero_distance() {
        let flat = ManifoldModel::flat_torus(2).unwrap();
        let z = ForceField::new(ForceKind::ParallelRotation { c: 1.0 });
        let init = LoopState::from_fn(32, |s| Vec3::new(s.cos(), 0.5 * s.sin(), 0.0));
        let cfg = FlowConfig { nodes: 32, t_end: 0.3, record_every: 10, stepper: TimeScheme::Euler, ..Default::default() };
        let a = integrate(&init, &cfg, &flat, &z).unwrap();
        let b = integrate(&init, &cfg, &flat, &z).unwrap();
        let rep = stability_compare(&a, &b, &z, &z, &flat, (0.05, 1.0)).unwrap();
        assert!(rep.distance.iter().all(|d| *d == 0.0));
        assert_eq!(rep.fitted_c, 0.0);
        assert!(rep.bound_holds);
    }

    #[test]
    fn drift_monitor_requires_unprojected_runs() {
        let cyl = ManifoldModel::cylinder(1.0).unwrap();
        let cfg = FlowConfig { nodes: 16, t_end: 0.0, ..Default::default() };
        let traj = integrate(&circle(16), &cfg, &cyl, &ForceField::zero()).unwrap();
        assert_eq!(unprojected_drift_monitor(&traj), Err(AnalysisError::WrongMode));
        let cfg = FlowConfig { projection: ProjectionMode::Never, dt: TimeStep::Auto, ..cfg };
        assert!(unprojected_drift_monitor(&integrate(&circle(16), &cfg, &cyl, &ForceField::zero()).unwrap()).is_ok());
    }
}
