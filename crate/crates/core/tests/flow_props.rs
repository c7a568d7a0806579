use magflow_core::flow::{integrate, Discretization, FlowTrajectory};
use magflow_core::oracle::{case_a_initial, decompose, embed_cylinder};
use magflow_core::{
    FlowConfig, ForceField, ForceKind, LoopState, ManifoldModel, ProjectionMode, SpatialScheme, TimeScheme, TimeStep, Vec3,
};
use proptest::prelude::*;

fn case_a(nodes: usize) -> LoopState {
    let (phi, z) = case_a_initial(1.0, 0.5, nodes);
    embed_cylinder(&decompose(&phi, &z).unwrap(), 1.0, nodes).unwrap()
}

fn cylinder() -> (ManifoldModel, ForceField) {
    (ManifoldModel::cylinder(1.0).unwrap(), ForceField::new(ForceKind::RadialCross))
}

fn config(nodes: usize, dt: TimeStep, t_end: f64) -> FlowConfig {
    FlowConfig { nodes, dt, t_end, record_every: 10, ..FlowConfig::default() }
}

fn largest_increase(traj: &FlowTrajectory) -> f64 {
    traj.records
        .windows(2)
        .map(|w| w[1].diagnostics.drift_integral - w[0].diagnostics.drift_integral)
        .chain(traj.records.iter().map(|r| r.diagnostics.drift_integral - traj.records[0].diagnostics.drift_integral))
        .fold(0.0, f64::max)
}

#[test]
fn unprojected_drift_increase_shrinks_under_refinement() {
    let (model, force) = cylinder();
    let mut increases = Vec::new();
    for (nodes, dt) in [(32usize, 2e-3), (64, 1e-3)] {
        let cfg = FlowConfig { projection: ProjectionMode::Never, ..config(nodes, TimeStep::Fixed(dt), 1.0) };
        let traj = integrate(&case_a(nodes), &cfg, &model, &force).unwrap();
        assert!(traj.completed());
        increases.push(largest_increase(&traj));
    }
    assert!(increases[0] <= 1e-13 || increases[0] / increases[1] >= 3.0, "{increases:?}");
}

#[test]
fn central_differences_converge_at_second_order() {
    let (model, force) = cylinder();
    let reference_cfg = FlowConfig { scheme: SpatialScheme::Spectral, stepper: TimeScheme::Rk4, ..config(128, TimeStep::Auto, 0.5) };
    let reference = integrate(&case_a(128), &reference_cfg, &model, &force).unwrap();
    let exact = reference.final_state();
    let mut errors = Vec::new();
    for nodes in [32usize, 64] {
        let traj = integrate(&case_a(nodes), &config(nodes, TimeStep::Auto, 0.5), &model, &force).unwrap();
        let stride = 128 / nodes;
        let err = traj
            .final_state()
            .positions
            .iter()
            .enumerate()
            .map(|(j, p)| (p - exact.positions[j * stride]).norm())
            .fold(0.0, f64::max);
        errors.push(err);
    }
    let ratio = errors[0] / errors[1];
    assert!(ratio >= 3.5, "{errors:?} ratio {ratio}");
}

fn ellipse(nodes: usize, offset: Vec3) -> LoopState {
    LoopState::from_fn(nodes, |s| Vec3::new(s.cos(), 0.5 * s.sin(), 0.0) + offset)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn rotation_flow_commutes_with_translations(cx in -3.0..3.0f64, cy in -3.0..3.0f64, c in -2.0..2.0f64) {
        let model = ManifoldModel::flat_torus(2).unwrap();
        let force = ForceField::new(ForceKind::ParallelRotation { c });
        let cfg = config(32, TimeStep::Auto, 0.5);
        let offset = Vec3::new(cx, cy, 0.0);
        let a = integrate(&ellipse(32, Vec3::zeros()), &cfg, &model, &force).unwrap();
        let b = integrate(&ellipse(32, offset), &cfg, &model, &force).unwrap();
        for (ra, rb) in a.records.iter().zip(&b.records) {
            for (p, q) in ra.state.positions.iter().zip(&rb.state.positions) {
                prop_assert!((q - p - offset).norm() <= 1e-10);
            }
        }
    }
}

#[test]
fn identical_inputs_give_bitwise_identical_trajectories() {
    let (model, force) = cylinder();
    let cfg = FlowConfig { stepper: TimeScheme::Rk4, ..config(64, TimeStep::Auto, 0.3) };
    let a = integrate(&case_a(64), &cfg, &model, &force).unwrap();
    let b = integrate(&case_a(64), &cfg, &model, &force).unwrap();
    assert_eq!(a.records.len(), b.records.len());
    for (x, y) in a.records.iter().zip(&b.records) {
        assert_eq!(x.state, y.state);
        assert_eq!(x.diagnostics, y.diagnostics);
    }
}

#[test]
fn projected_flow_stays_on_the_sphere() {
    let model = ManifoldModel::sphere(1.0).unwrap();
    let force = ForceField::new(ForceKind::ConstantCross { b: Vec3::new(0.0, 0.0, 0.5) });
    let init = LoopState::from_fn(64, |s| Vec3::new(s.cos(), s.sin(), 0.2 * (2.0 * s).sin()).normalize());
    let cfg = config(64, TimeStep::Auto, 0.5);
    let traj = integrate(&init, &cfg, &model, &force).unwrap();
    assert!(traj.completed());
    for r in &traj.records {
        assert!(r.state.positions.iter().all(|p| model.distance(p) <= cfg.tolerances.drift));
    }
}

#[test]
fn rotation_flow_runs_to_completion_without_drift() {
    let model = ManifoldModel::flat_torus(2).unwrap();
    let force = ForceField::new(ForceKind::ParallelRotation { c: 1.0 });
    let circle = LoopState::from_fn(64, |s| Vec3::new(s.cos(), s.sin(), 0.0));
    let traj = integrate(&circle, &config(64, TimeStep::Auto, 5.0), &model, &force).unwrap();
    assert!(traj.completed());
    assert_eq!(traj.final_state().time, 5.0);
    assert!(traj.records.iter().all(|r| r.diagnostics.drift_sup == 0.0));
}

#[test]
fn auto_time_step_follows_the_parabolic_limit() {
    for nodes in [16usize, 64, 256] {
        let cfg = config(nodes, TimeStep::Auto, 1.0);
        let h = std::f64::consts::TAU / nodes as f64;
        assert!((cfg.time_step() - 0.5 * h * h / 2.0).abs() <= 1e-15);
        assert_eq!(Discretization::new(nodes, SpatialScheme::Central2).nodes(), nodes);
    }
}

#[test]
fn recorded_times_increase() {
    let (model, force) = cylinder();
    let traj = integrate(&case_a(32), &config(32, TimeStep::Auto, 0.4), &model, &force).unwrap();
    assert!(traj.times().windows(2).all(|w| w[1] > w[0]));
    assert_eq!(traj.times()[0], 0.0);
}
