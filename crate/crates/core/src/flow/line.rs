//! Scalar flow on the non-compact line with the force Z_s(v) = −s·v,
//! u̇ = u″ + u·u′, truncated to [−L, L] with Dirichlet data taken from the
//! exact solution u(s,t) = s/(T−t).

use super::{FlowError, TimeScheme};

/// Values beyond this magnitude count as numerical blow-up.
pub const BLOW_UP_THRESHOLD: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineConfig {
    /// Blow-up time of the exact solution.
    pub blow_up_time: f64,
    pub half_width: f64,
    /// Number of intervals on [−L, L].
    pub intervals: usize,
    /// Step as a multiple of h².
    pub dt_factor: f64,
    pub t_end: f64,
    pub stepper: TimeScheme,
    pub record_every: usize,
}

impl Default for LineConfig {
    fn default() -> Self {
        Self {
            blow_up_time: 1.0,
            half_width: 1.0,
            intervals: 64,
            dt_factor: 0.25,
            t_end: 2.0,
            stepper: TimeScheme::Rk4,
            record_every: 100,
        }
    }
}

impl LineConfig {
    pub fn validate(&self) -> Result<(), FlowError> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.blow_up_time) || !positive(self.half_width) || !positive(self.dt_factor) {
            return Err(FlowError::InvalidConfig("line parameters T, L and dt factor must be positive".into()));
        }
        if self.intervals < 4 || !self.intervals.is_multiple_of(2) {
            return Err(FlowError::InvalidConfig(format!("line needs an even interval count ≥ 4, got {}", self.intervals)));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) || self.record_every == 0 {
            return Err(FlowError::InvalidConfig("line t_end must be nonnegative and record_every positive".into()));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.intervals as f64
    }

    pub fn time_step(&self) -> f64 {
        self.dt_factor * self.spacing().powi(2)
    }

    pub fn grid(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..=self.intervals).map(|j| -self.half_width + h * j as f64).collect()
    }

    /// The exact witness s/(T−t).
    pub fn exact(&self, s: f64, t: f64) -> f64 {
        s / (self.blow_up_time - t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineState {
    pub values: Vec<f64>,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineTrajectory {
    pub grid: Vec<f64>,
    pub states: Vec<LineState>,
    pub dt: f64,
    /// `Some` when the run stopped early; the time is that of the last
    /// finite state.
    pub failure: Option<(FlowError, f64)>,
}

impl LineTrajectory {
    pub fn blow_up_time(&self) -> Option<f64> {
        match &self.failure {
            Some((FlowError::NonFiniteValue { .. }, t)) => Some(*t),
            _ => None,
        }
    }
}

fn rhs(cfg: &LineConfig, u: &[f64], t: f64) -> Vec<f64> {
    let n = u.len();
    let h = cfg.spacing();
    let mut v = u.to_vec();
    v[0] = cfg.exact(-cfg.half_width, t);
    v[n - 1] = cfg.exact(cfg.half_width, t);
    let mut out = vec![0.0; n];
    for j in 1..n - 1 {
        out[j] = (v[j + 1] - 2.0 * v[j] + v[j - 1]) / (h * h) + v[j] * (v[j + 1] - v[j - 1]) / (2.0 * h);
    }
    out
}

fn runaway(values: &[f64]) -> bool {
    values.iter().any(|v| !v.is_finite() || v.abs() > BLOW_UP_THRESHOLD)
}

/// Integrates from u(s,0) = s/T until `t_end` or numerical blow-up.
pub fn integrate_line(cfg: &LineConfig) -> Result<LineTrajectory, FlowError> {
    cfg.validate()?;
    let grid = cfg.grid();
    let dt = cfg.time_step();
    let mut u: Vec<f64> = grid.iter().map(|&s| cfg.exact(s, 0.0)).collect();
    let mut states = vec![LineState { values: u.clone(), time: 0.0 }];
    let steps = (cfg.t_end / dt).ceil() as usize;
    let mut time = 0.0;
    let mut failure = None;
    for n in 1..=steps {
        let target = if n == steps { cfg.t_end } else { n as f64 * dt };
        let h = target - time;
        let next: Vec<f64> = match cfg.stepper {
            TimeScheme::Euler => u.iter().zip(rhs(cfg, &u, time)).map(|(a, f)| a + h * f).collect(),
            TimeScheme::Rk4 => {
                let add = |a: &[f64], k: &[f64], c: f64| -> Vec<f64> { a.iter().zip(k).map(|(x, y)| x + c * y).collect() };
                let k1 = rhs(cfg, &u, time);
                let k2 = rhs(cfg, &add(&u, &k1, h / 2.0), time + h / 2.0);
                let k3 = rhs(cfg, &add(&u, &k2, h / 2.0), time + h / 2.0);
                let k4 = rhs(cfg, &add(&u, &k3, h), time + h);
                (0..u.len()).map(|j| u[j] + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])).collect()
            }
        };
        let mut next = next;
        let last = next.len() - 1;
        next[0] = cfg.exact(-cfg.half_width, target);
        next[last] = cfg.exact(cfg.half_width, target);
        if target >= cfg.blow_up_time || runaway(&next) {
            failure = Some((FlowError::NonFiniteValue { time: target }, time));
            break;
        }
        u = next;
        time = target;
        if n % cfg.record_every == 0 || n == steps {
            states.push(LineState { values: u.clone(), time });
        }
    }
    Ok(LineTrajectory { grid, states, dt, failure })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blows_up_before_the_witness_time() {
        let traj = integrate_line(&LineConfig::default()).unwrap();
        let t = traj.blow_up_time().expect("blow-up detected");
        assert!(t < 1.0 && t > 0.9, "{t}");
    }

    #[test]
    fn tracks_the_witness_early_on() {
        let cfg = LineConfig { t_end: 0.5, ..Default::default() };
        let traj = integrate_line(&cfg).unwrap();
        assert!(traj.failure.is_none());
        let last = traj.states.last().unwrap();
        assert_eq!(last.time, 0.5);
        for (s, v) in traj.grid.iter().zip(&last.values) {
            assert!((v - cfg.exact(*s, 0.5)).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(integrate_line(&LineConfig { intervals: 3, ..Default::default() }).is_err());
        assert!(integrate_line(&LineConfig { blow_up_time: 0.0, ..Default::default() }).is_err());
    }
}
