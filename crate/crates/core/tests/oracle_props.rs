use std::f64::consts::TAU;

use magflow_core::analysis::{diagnose, energy_bound_monitor, energy_density, trapezoid};
use magflow_core::flow::{integrate, rhs, Discretization};
use magflow_core::oracle::{
    case_a_closed_form, case_a_initial, case_b_closed_form, case_b_initial, decompose, embed_cylinder, evolve,
    series_coefficients, series_sum,
};
use magflow_core::{FlowConfig, ForceField, ForceKind, ManifoldModel, SpatialScheme, TimeStep};
use num_complex::Complex64;
use proptest::prelude::*;

const I: Complex64 = Complex64::new(0.0, 1.0);

fn grid(n: usize) -> Vec<f64> {
    (0..n).map(|j| TAU * j as f64 / n as f64).collect()
}

fn samples(phi: &[f64], z: &[f64]) -> Vec<Complex64> {
    phi.iter().zip(z).map(|(p, z)| Complex64::new(*p, *z)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn series_matches_multipliers(a in -1.0..1.0f64, b in -1.0..1.0f64, mu in -0.5..0.5f64, t in 0.0..0.5f64) {
        for (phi, z) in [case_a_initial(a, b, 32), case_b_initial(mu, 32)] {
            let state = decompose(&phi, &z).unwrap();
            let coeffs = series_coefficients(&samples(&phi, &z), 25).unwrap();
            let by_series = series_sum(&coeffs, t);
            let exact = evolve(&state, t).sample(32);
            for (x, y) in by_series.iter().zip(&exact) {
                prop_assert!((x - y).norm() <= 1e-8, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn evolve_reproduces_closed_forms(a in -1.0..1.0f64, b in -1.0..1.0f64, mu in -0.5..0.5f64, t in 0.0..8.0f64) {
        let (phi, z) = case_a_initial(a, b, 32);
        let sa = evolve(&decompose(&phi, &z).unwrap(), t);
        let (phi, z) = case_b_initial(mu, 32);
        let sb = evolve(&decompose(&phi, &z).unwrap(), t);
        for s in grid(32) {
            prop_assert!((sa.value(s) - case_a_closed_form(a, b, s, t)).norm() <= 1e-12);
            prop_assert!((sb.value(s) - case_b_closed_form(mu, s, t)).norm() <= 1e-12);
        }
    }

    #[test]
    fn trapezoid_energy_matches_fourier_energy(a in -1.0..1.0f64, b in -1.0..1.0f64, mu in -0.5..0.5f64, t in 0.0..2.0f64) {
        for (phi, z) in [case_a_initial(a, b, 64), case_b_initial(mu, 64)] {
            let state = evolve(&decompose(&phi, &z).unwrap(), t);
            let loop_ = embed_cylinder(&state, 1.0, 64).unwrap();
            let e = trapezoid(&energy_density(&loop_, SpatialScheme::Spectral));
            prop_assert!((e - state.energy()).abs() <= 1e-8, "{e} vs {}", state.energy());
        }
    }

    #[test]
    fn case_b_recurs_up_to_vertical_translation(mu in -0.5..0.5f64, t in 0.0..6.0f64) {
        let (phi, z) = case_b_initial(mu, 32);
        let state = decompose(&phi, &z).unwrap();
        let now = evolve(&state, t);
        let later = evolve(&state, t + TAU);
        for s in grid(32) {
            let gap = later.value(s) - now.value(s) - I * TAU;
            prop_assert!(gap.norm() <= mu.abs() / 2.0 * (-2.0 * t).exp() + 1e-12);
        }
    }
}

#[test]
fn geodesic_criterion_along_both_cases() {
    let (phi, z) = case_a_initial(1.0, 0.5, 32);
    let limit = evolve(&decompose(&phi, &z).unwrap(), 30.0);
    let (phi, z) = case_b_initial(0.5, 32);
    let b = decompose(&phi, &z).unwrap();
    for s in grid(32) {
        assert!((limit.second_derivative(s) + I * limit.derivative(s)).norm() <= 1e-12);
        for t in [0.0, 0.7, 3.0] {
            let st = evolve(&b, t);
            let expected = I * (1.0 - 0.5 * (I * s).exp() * (-2.0 * t).exp());
            assert!((st.second_derivative(s) + I * st.derivative(s) - expected).norm() <= 1e-12);
        }
    }
}

fn case_a_run(t_end: f64) -> (magflow_core::FlowTrajectory, ManifoldModel, ForceField) {
    let model = ManifoldModel::cylinder(1.0).unwrap();
    let force = ForceField::new(ForceKind::RadialCross);
    let (phi, z) = case_a_initial(1.0, 0.5, 64);
    let init = embed_cylinder(&decompose(&phi, &z).unwrap(), 1.0, 64).unwrap();
    let cfg = FlowConfig { nodes: 64, dt: TimeStep::Auto, t_end, record_every: 20, ..FlowConfig::default() };
    (integrate(&init, &cfg, &model, &force).unwrap(), model, force)
}

#[test]
fn reported_bounds_are_nondecreasing() {
    let (traj, model, force) = case_a_run(1.0);
    let rep = energy_bound_monitor(&traj, &force, &model).unwrap();
    assert!(rep.lambda >= 0.0 && rep.c >= 0.0);
    for w in rep.rows.windows(2) {
        assert!(w[1].e_bound >= w[0].e_bound);
        assert!(w[1].kappa_bound >= w[0].kappa_bound);
    }
}

#[test]
fn kinetic_density_is_half_the_squared_velocity() {
    let (traj, model, force) = case_a_run(0.2);
    let disc = Discretization::new(64, SpatialScheme::Central2);
    for r in &traj.records {
        let f = rhs(&r.state, &model, &force, &disc).unwrap();
        let (_, nodes) = diagnose(&r.state, &model, &force, &disc).unwrap();
        for (k, v) in nodes.kappa.iter().zip(&f) {
            assert!((k - 0.5 * v.norm_squared()).abs() <= 1e-12);
        }
    }
}
