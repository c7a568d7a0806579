//! Executes a validated configuration and writes its artifacts.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use magflow_core::analysis::{self, DriftReport, EnergyReport, StabilityReport};
use magflow_core::flow::line::{integrate_line, LineTrajectory};
use magflow_core::flow::{self, Discretization, FlowTrajectory, Record, Termination};
use magflow_core::oracle::{self, CylinderFourierState};
use magflow_core::{FlowConfig, ForceField, LoopState, ManifoldModel, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::{Experiment, InitialName, InitialSpec, RunConfig, StabilitySpec, StabilityVariant};
use crate::error::CliError;
use crate::output;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    MonitorViolation,
    IntegratorError,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Success => 0,
            Status::MonitorViolation => 3,
            Status::IntegratorError => 4,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Status::Success => "success",
            Status::MonitorViolation => "monitor-violation",
            Status::IntegratorError => "integrator-error",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub status: Status,
    pub output_dir: PathBuf,
    pub report: Value,
}

fn cfg_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn grid(nodes: usize) -> impl Iterator<Item = f64> {
    (0..nodes).map(move |j| TAU * j as f64 / nodes as f64)
}

/// Closed-form Fourier state of the cylinder cases at t = 0.
pub fn case_oracle(spec: &InitialSpec, nodes: usize) -> Result<Option<CylinderFourierState>, CliError> {
    let (phi, z) = match spec.kind {
        InitialName::CylinderCaseA => oracle::case_a_initial(spec.a.unwrap_or(1.0), spec.b.unwrap_or(0.5), nodes),
        InitialName::CylinderCaseB => oracle::case_b_initial(spec.mu.unwrap_or(0.5), nodes),
        _ => return Ok(None),
    };
    oracle::decompose(&phi, &z).map(Some).map_err(|e| cfg_err(e.to_string()))
}

fn read_samples(path: &Path, q: usize) -> Result<Vec<Vec3>, CliError> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| cfg_err(format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| cfg_err(e.to_string()))?;
        let vals: Result<Vec<f64>, _> = rec.iter().map(|f| f.trim().parse::<f64>()).collect();
        match vals {
            Ok(v) if v.len() == q => out.push(Vec3::from_fn(|c, _| if c < q { v[c] } else { 0.0 })),
            Ok(v) => return Err(cfg_err(format!("row {} has {} values, expected {q}", i + 1, v.len()))),
            Err(_) if i == 0 => continue,
            Err(e) => return Err(cfg_err(format!("row {}: {e}", i + 1))),
        }
    }
    Ok(out)
}

pub fn build_initial(spec: &InitialSpec, model: &ManifoldModel, nodes: usize) -> Result<LoopState, CliError> {
    let q = model.ambient_dim();
    let mut state = match spec.kind {
        InitialName::CylinderCaseA | InitialName::CylinderCaseB => {
            let st = case_oracle(spec, nodes)?.expect("cylinder case");
            oracle::embed_cylinder(&st, 1.0, nodes).map_err(|e| cfg_err(e.to_string()))?
        }
        InitialName::Fourier => {
            let positions = grid(nodes)
                .map(|s| {
                    let mut p = Vec3::zeros();
                    for t in &spec.terms {
                        let m = t.mode as f64;
                        p[t.component] += t.cos * (m * s).cos() + t.sin * (m * s).sin();
                    }
                    p
                })
                .collect();
            LoopState::new(positions, 0.0)
        }
        InitialName::Samples => {
            let path = spec.path.as_ref().expect("validated");
            let positions = read_samples(path, q)?;
            if positions.len() != nodes {
                return Err(cfg_err(format!("{} holds {} nodes, flow.nodes is {nodes}", path.display(), positions.len())));
            }
            LoopState::new(positions, 0.0)
        }
    };
    if let Some(w) = spec.winding {
        let shift = Vec3::new(w[0] as f64, w[1] as f64, w[2] as f64) * TAU;
        for (p, s) in state.positions.iter_mut().zip(grid(nodes)) {
            *p += shift * (s / TAU);
        }
        state.period_shift = shift;
    }
    if spec.project {
        for p in state.positions.iter_mut() {
            *p = model.project(p).map_err(|e| cfg_err(format!("initial loop: {e}")))?;
        }
    }
    if spec.displace != 0.0 {
        for p in state.positions.iter_mut() {
            let n = model.unit_normal(p).ok_or_else(|| cfg_err("displacement needs a curved model with a normal"))?;
            *p += n * spec.displace;
        }
    }
    Ok(state)
}

/// Everything computed for a flow experiment.
pub struct FlowRun {
    pub model: ManifoldModel,
    pub force: ForceField,
    pub config: FlowConfig,
    pub trajectory: FlowTrajectory,
}

fn parts(cfg: &RunConfig) -> Result<(ManifoldModel, ForceField, FlowConfig, LoopState), CliError> {
    let model = cfg.model.as_ref().ok_or_else(|| cfg_err("missing [model]"))?.build()?;
    let force = cfg.force.as_ref().ok_or_else(|| cfg_err("missing [force]"))?.build()?;
    let flow = cfg.flow.build()?;
    let init = build_initial(cfg.initial.as_ref().ok_or_else(|| cfg_err("missing [initial]"))?, &model, flow.nodes)?;
    Ok((model, force, flow, init))
}

fn integrate(init: &LoopState, flow: &FlowConfig, model: &ManifoldModel, force: &ForceField) -> Result<FlowTrajectory, CliError> {
    flow::integrate(init, flow, model, force).map_err(|e| cfg_err(e.to_string()))
}

pub fn simulate_flow(cfg: &RunConfig) -> Result<FlowRun, CliError> {
    let (model, force, config, init) = parts(cfg)?;
    let trajectory = integrate(&init, &config, &model, &force)?;
    Ok(FlowRun { model, force, config, trajectory })
}

/// The second run of a stability pair.
pub fn pair_partner(
    spec: &StabilitySpec,
    seed: u64,
    init: &LoopState,
    model: &ManifoldModel,
    force: &ForceField,
) -> Result<(LoopState, ForceField), CliError> {
    match spec.variant {
        StabilityVariant::Identical => Ok((init.clone(), force.clone())),
        StabilityVariant::Force => Ok((init.clone(), force.scaled(spec.force_scale))),
        StabilityVariant::Initial => {
            let phase = ChaCha8Rng::seed_from_u64(seed).random_range(0.0..TAU);
            let m = spec.mode as f64;
            let mut v = init.clone();
            for (p, s) in v.positions.iter_mut().zip(grid(init.len())) {
                p[0] += spec.delta * (m * s + phase).cos();
                if !model.is_flat_quotient() {
                    *p = model.project(p).map_err(|e| cfg_err(format!("perturbed loop: {e}")))?;
                }
            }
            Ok((v, force.clone()))
        }
    }
}

pub struct PairRun {
    pub first: FlowRun,
    pub second: FlowTrajectory,
    pub second_force: ForceField,
    pub report: StabilityReport,
}

pub fn simulate_pair(cfg: &RunConfig) -> Result<PairRun, CliError> {
    let spec = cfg.stability.as_ref().ok_or_else(|| cfg_err("missing [stability]"))?;
    let (model, force, config, init) = parts(cfg)?;
    let (v0, force_v) = pair_partner(spec, cfg.seed, &init, &model, &force)?;
    let u = integrate(&init, &config, &model, &force)?;
    let v = integrate(&v0, &config, &model, &force_v)?;
    let report = analysis::stability_compare(&u, &v, &force, &force_v, &model, (spec.window[0], spec.window[1]))
        .map_err(|e| CliError::Integrator(e.to_string()))?;
    Ok(PairRun { first: FlowRun { model, force, config, trajectory: u }, second: v, second_force: force_v, report })
}

fn triple(observed: f64, bound: f64) -> Value {
    json!({ "observed": observed, "bound": bound, "margin": bound - observed })
}

fn energy_json(r: &EnergyReport) -> Value {
    json!({
        "lambda": r.lambda,
        "mu": r.mu,
        "c": r.c,
        "curvature_bound": r.curvature_bound,
        "horizon": r.horizon,
        "tolerance": r.tolerance,
        "passed": r.passed(),
        "violations": r.violations,
        "rows": r.rows.iter().map(|row| json!({
            "t": row.time,
            "e_sup": triple(row.e_sup, row.e_bound),
            "e_bound_horizon": row.e_bound_horizon,
            "kappa_sup": triple(row.kappa_sup, row.kappa_bound),
            "energy": row.energy,
            "kinetic": row.kinetic,
        })).collect::<Vec<_>>(),
    })
}

fn drift_json(r: &DriftReport) -> Value {
    json!({
        "allowance": r.allowance,
        "max_integral": r.max_integral(),
        "strictly_decreasing": r.strictly_decreasing(),
        "increases": r.increases,
        "passed": r.passed(),
        "rows": r.times.iter().zip(&r.drift_sup).zip(&r.drift_integral)
            .map(|((t, s), i)| json!({ "t": t, "h_sup": s, "h_integral": i })).collect::<Vec<_>>(),
    })
}

pub fn stability_json(r: &StabilityReport) -> Value {
    json!({
        "initial_sup_squared": r.initial_sup_squared,
        "force_mismatch_squared": r.force_mismatch_squared,
        "fitted_c": r.fitted_c,
        "window": [r.window.0, r.window.1],
        "bound_holds": r.bound_holds,
        "passed": r.bound_holds,
        "rows": r.times.iter().zip(&r.distance).map(|(t, d)| {
            let bound = TAU * (r.fitted_c * t).exp() * (r.initial_sup_squared + t * r.force_mismatch_squared);
            json!({ "t": t, "distance": triple(*d, bound) })
        }).collect::<Vec<_>>(),
    })
}

fn diagnostics_json(traj: &FlowTrajectory) -> Value {
    Value::Array(
        traj.records
            .iter()
            .map(|r| {
                let d = r.diagnostics;
                json!({
                    "t": r.state.time,
                    "e_sup": d.e_sup,
                    "energy": d.energy,
                    "kappa_sup": d.kappa_sup,
                    "kinetic": d.kinetic,
                    "residual_sup": d.residual_sup,
                    "drift_sup": d.drift_sup,
                    "drift_integral": d.drift_integral,
                })
            })
            .collect(),
    )
}

fn termination_json(traj: &FlowTrajectory) -> Value {
    match &traj.termination {
        Termination::Completed => json!({ "completed": true }),
        Termination::Failed { error, time } => json!({ "completed": false, "error": error.to_string(), "last_good_time": time }),
    }
}

/// Oracle states at the recorded times, with their diagnostics.
pub fn oracle_records(run: &FlowRun, st: &CylinderFourierState) -> Result<Vec<Record>, CliError> {
    let disc = Discretization::new(run.config.nodes, run.config.scheme);
    run.trajectory
        .records
        .iter()
        .map(|r| {
            let state = oracle::embed_cylinder(&oracle::evolve(st, r.state.time), 1.0, run.config.nodes)
                .map_err(|e| cfg_err(e.to_string()))?;
            let (diagnostics, nodes) =
                analysis::diagnose(&state, &run.model, &run.force, &disc).map_err(|e| CliError::Integrator(e.to_string()))?;
            Ok(Record { state, diagnostics, nodes })
        })
        .collect()
}

pub fn max_node_distance(a: &LoopState, b: &LoopState) -> f64 {
    a.positions.iter().zip(&b.positions).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn snapshots(traj: &FlowTrajectory, q: usize) -> Vec<(String, Vec<Vec<f64>>)> {
    let n = traj.records.len();
    let mut picks = vec![0, n / 2, n - 1];
    picks.dedup();
    picks
        .into_iter()
        .map(|i| {
            let r = &traj.records[i];
            (format!("t = {:.3}", r.state.time), r.state.positions.iter().map(|p| p.iter().take(q).copied().collect()).collect())
        })
        .collect()
}

fn series(traj: &FlowTrajectory, f: impl Fn(&analysis::StateDiagnostics) -> f64) -> Vec<(f64, f64)> {
    traj.records.iter().map(|r| (r.state.time, f(&r.diagnostics))).collect()
}

/// Computes the monitors of a flow run, writing artifacts into `dir`.
fn flow_artifacts(cfg: &RunConfig, run: &FlowRun, dir: &Path) -> Result<(Value, bool), CliError> {
    let q = run.model.ambient_dim();
    let traj = &run.trajectory;
    output::write_trajectory(&dir.join("trajectory.csv"), &traj.records, q)?;
    let mut monitors = serde_json::Map::new();
    let mut passed = true;
    if cfg.monitors.energy {
        let r = analysis::energy_bound_monitor(traj, &run.force, &run.model).map_err(|e| cfg_err(e.to_string()))?;
        passed &= r.passed();
        monitors.insert("energy".into(), energy_json(&r));
    }
    if cfg.monitors.residual {
        let last = traj.final_state();
        let observed = traj.records.last().map(|r| r.diagnostics.residual_sup).unwrap_or(0.0);
        let bound = run.config.tolerances.residual;
        let ok = observed <= bound;
        passed &= ok;
        monitors.insert("residual".into(), json!({ "t": last.time, "residual_sup": triple(observed, bound), "passed": ok }));
    }
    if cfg.monitors.drift {
        let r = analysis::unprojected_drift_monitor(traj).map_err(|e| cfg_err(e.to_string()))?;
        passed &= r.passed();
        monitors.insert("drift".into(), drift_json(&r));
    }
    if cfg.monitors.oracle {
        let st = case_oracle(cfg.initial.as_ref().expect("validated"), run.config.nodes)?.expect("validated");
        let records = oracle_records(run, &st)?;
        output::write_trajectory(&dir.join("oracle.csv"), &records, q)?;
        let worst = traj.records.iter().zip(&records).map(|(a, b)| max_node_distance(&a.state, &b.state)).fold(0.0, f64::max);
        let ok = worst <= cfg.monitors.oracle_tolerance;
        passed &= ok;
        monitors.insert(
            "oracle".into(),
            json!({ "tag": "oracle", "file": "oracle.csv", "max_node_distance": triple(worst, cfg.monitors.oracle_tolerance), "passed": ok }),
        );
    }
    if cfg.plots {
        output::loop_svg(&dir.join("loop.svg"), "loop snapshots", &snapshots(traj, q))?;
        let mut s = vec![("e_sup", series(traj, |d| d.e_sup)), ("residual_sup", series(traj, |d| d.residual_sup))];
        if run.config.projection == flow::ProjectionMode::Never {
            s.push(("drift integral", series(traj, |d| d.drift_integral)));
        }
        output::series_svg(&dir.join("series.svg"), "diagnostics", &s)?;
    }
    Ok((Value::Object(monitors), passed))
}

fn status_of(completed: bool, passed: bool) -> Status {
    if !completed {
        Status::IntegratorError
    } else if !passed {
        Status::MonitorViolation
    } else {
        Status::Success
    }
}

fn line_json(traj: &LineTrajectory, t_blow: f64) -> Value {
    json!({
        "dt": traj.dt,
        "blow_up_detected": traj.blow_up_time().is_some(),
        "last_finite_time": traj.blow_up_time(),
        "error": traj.failure.as_ref().map(|(e, _)| e.to_string()),
        "witness_time": t_blow,
    })
}

/// Runs `cfg`, writing trajectory.csv, report.json and plots into its output directory.
pub fn execute(cfg: &RunConfig) -> Result<RunSummary, CliError> {
    cfg.validate()?;
    let dir = cfg.output_dir.clone();
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    let config_echo = serde_json::to_value(cfg).map_err(|e| CliError::Io(e.to_string()))?;
    let (status, body) = match cfg.experiment {
        Experiment::Flow => {
            let run = simulate_flow(cfg)?;
            let (monitors, passed) = flow_artifacts(cfg, &run, &dir)?;
            let status = status_of(run.trajectory.completed(), passed);
            (
                status,
                json!({
                    "dt": run.trajectory.dt,
                    "spacing": run.config.spacing(),
                    "termination": termination_json(&run.trajectory),
                    "diagnostics": diagnostics_json(&run.trajectory),
                    "monitors": monitors,
                }),
            )
        }
        Experiment::StabilityPair => {
            let pair = simulate_pair(cfg)?;
            let (mut monitors, mut passed) = flow_artifacts(cfg, &pair.first, &dir)?;
            output::write_trajectory(&dir.join("trajectory-pair.csv"), &pair.second.records, pair.first.model.ambient_dim())?;
            let identical = cfg.stability.as_ref().is_some_and(|s| s.variant == StabilityVariant::Identical);
            let mut stab = stability_json(&pair.report);
            let ok = pair.report.bound_holds && (!identical || pair.report.distance.iter().all(|d| *d == 0.0));
            stab["passed"] = json!(ok);
            passed &= ok;
            monitors.as_object_mut().expect("object").insert("stability".into(), stab);
            if cfg.plots {
                let d: Vec<(f64, f64)> = pair.report.times.iter().copied().zip(pair.report.distance.iter().copied()).collect();
                output::series_svg(&dir.join("stability.svg"), "pair distance", &[("D(t)", d)])?;
            }
            let completed = pair.first.trajectory.completed() && pair.second.completed();
            (
                status_of(completed, passed),
                json!({
                    "dt": pair.first.trajectory.dt,
                    "termination": termination_json(&pair.first.trajectory),
                    "termination_pair": termination_json(&pair.second),
                    "diagnostics": diagnostics_json(&pair.first.trajectory),
                    "monitors": monitors,
                }),
            )
        }
        Experiment::BlowUpLine => {
            let line = cfg.line.clone().unwrap_or_default().build()?;
            let traj = integrate_line(&line).map_err(|e| cfg_err(e.to_string()))?;
            output::write_line_trajectory(&dir.join("trajectory.csv"), &traj, line.blow_up_time)?;
            let t_grid: Vec<f64> = traj.states.iter().map(|s| s.time).filter(|t| *t < line.blow_up_time).collect();
            let witness = oracle::blow_up_residual(line.blow_up_time, &traj.grid, &t_grid).map_err(|e| cfg_err(e.to_string()))?;
            // blow-up is the expected outcome here, so it is a monitor, not an integrator failure
            let early = traj.blow_up_time().is_some_and(|t| t < line.blow_up_time);
            let ok = early && witness <= 1e-10;
            if cfg.plots {
                let s: Vec<(f64, f64)> = traj
                    .states
                    .iter()
                    .map(|st| (st.time, st.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))))
                    .collect();
                output::series_svg(&dir.join("series.svg"), "blow-up on the line", &[("sup |u|", s)])?;
            }
            (
                if ok { Status::Success } else { Status::MonitorViolation },
                json!({
                    "line": line_json(&traj, line.blow_up_time),
                    "monitors": {
                        "blow_up": { "detected_before_witness_time": early, "passed": ok },
                        "witness_residual": triple(witness, 1e-10),
                    },
                }),
            )
        }
    };
    let mut report = json!({ "status": status.name(), "passed": status == Status::Success, "config": config_echo });
    for (k, v) in body.as_object().expect("object") {
        report[k] = v.clone();
    }
    output::write_json(&dir.join("report.json"), &report)?;
    Ok(RunSummary { status, output_dir: dir, report })
}

pub type SweepItem = (PathBuf, Result<RunSummary, CliError>);

/// Runs every `*.toml` in `dir` concurrently; output directories must be distinct.
pub fn sweep(dir: &Path) -> Result<Vec<SweepItem>, CliError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| cfg_err(format!("cannot read {}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    paths.sort();
    let configs: Vec<(PathBuf, RunConfig)> =
        paths.into_iter().map(|p| RunConfig::load(&p).map(|c| (p, c))).collect::<Result<_, _>>()?;
    let mut seen = std::collections::BTreeMap::new();
    for (p, c) in &configs {
        let key = normalize(&c.output_dir);
        if let Some(other) = seen.insert(key, p.clone()) {
            return Err(cfg_err(format!("{} and {} share an output directory", other.display(), p.display())));
        }
    }
    Ok(std::thread::scope(|scope| {
        let handles: Vec<_> = configs.iter().map(|(p, c)| (p.clone(), scope.spawn(move || execute(c)))).collect();
        handles
            .into_iter()
            .map(|(p, h)| (p, h.join().unwrap_or_else(|_| Err(CliError::Integrator("worker panicked".into())))))
            .collect()
    }))
}

fn normalize(p: &Path) -> PathBuf {
    let abs = if p.is_absolute() { p.to_path_buf() } else { std::env::current_dir().unwrap_or_default().join(p) };
    let mut out = PathBuf::new();
    for c in abs.components() {
        match c {
            std::path::Component::ParentDir => {
                out.pop();
            }
            std::path::Component::CurDir => {}
            other => out.push(other),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn fourier_initial_with_winding() {
        let cfg = presets::load("flat-torus-2-rotation", &["initial.winding=[1,0,0]".into()]).unwrap();
        let model = cfg.model.as_ref().unwrap().build().unwrap();
        let init = build_initial(cfg.initial.as_ref().unwrap(), &model, 16).unwrap();
        assert_eq!(init.period_shift, Vec3::new(TAU, 0.0, 0.0));
        assert!((init.positions[4].x - (TAU / 4.0 + (TAU / 4.0).cos())).abs() < 1e-12);
    }

    #[test]
    fn displaced_case_a_sits_off_the_cylinder() {
        let cfg = presets::load("cylinder-case-a", &["initial.displace=0.0625".into()]).unwrap();
        let model = cfg.model.as_ref().unwrap().build().unwrap();
        let init = build_initial(cfg.initial.as_ref().unwrap(), &model, 32).unwrap();
        assert!(init.positions.iter().all(|p| (model.distance(p) - 0.0625).abs() < 1e-12));
    }

    #[test]
    fn partner_perturbation_is_seeded() {
        let cfg = presets::load("stability-pair", &[]).unwrap();
        let model = cfg.model.as_ref().unwrap().build().unwrap();
        let force = cfg.force.as_ref().unwrap().build().unwrap();
        let init = build_initial(cfg.initial.as_ref().unwrap(), &model, 32).unwrap();
        let spec = cfg.stability.as_ref().unwrap();
        let (a, _) = pair_partner(spec, 7, &init, &model, &force).unwrap();
        let (b, _) = pair_partner(spec, 7, &init, &model, &force).unwrap();
        let (c, _) = pair_partner(spec, 8, &init, &model, &force).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let sup = a.positions.iter().zip(&init.positions).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(sup <= 1e-3 + 1e-15 && sup > 5e-4);
    }
}
