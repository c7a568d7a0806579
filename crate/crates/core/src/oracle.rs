//! Closed-form references: the complexified cylinder flow ξ̇ = ξ″ + iξ′
//! with ξ = φ + iz, the blow-up witness u = s/(T−t), and brute-force
//! permutation sums for the exterior algebra.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::exterior::{increasing_tuples, MultiVector};
use crate::flow::LoopState;
use crate::geometry::{wrap_signed, Vec3};
use crate::spectral::{wavenumber, FourierDifferentiator};

/// Largest tolerated energy in the unresolved Nyquist mode.
pub const ALIAS_TOLERANCE: f64 = 1e-8;

/// Vertical period of the torus quotient of the unit cylinder.
pub const QUOTIENT_Z_PERIOD: f64 = TAU;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("input is not resolved by the grid (Nyquist energy {energy:e})")]
    AliasedInput { energy: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// ξ(s,t) = w·s + i·w·t + Σₙ cₙ(t)·e^{ins} with cₙ(t) = cₙ(0)·e^{−(n²+n)t}.
#[derive(Debug, Clone, PartialEq)]
pub struct CylinderFourierState {
    pub winding: i64,
    /// Coefficients for n = −n_max..=n_max, stored at index n + n_max.
    modes: Vec<Complex64>,
    pub time: f64,
}

impl CylinderFourierState {
    pub fn new(winding: i64, n_max: usize, time: f64) -> Self {
        Self { winding, modes: vec![Complex64::new(0.0, 0.0); 2 * n_max + 1], time }
    }

    pub fn n_max(&self) -> usize {
        self.modes.len() / 2
    }

    pub fn mode(&self, n: i64) -> Complex64 {
        let m = self.n_max() as i64;
        if n.abs() > m {
            Complex64::new(0.0, 0.0)
        } else {
            self.modes[(n + m) as usize]
        }
    }

    pub fn set_mode(&mut self, n: i64, c: Complex64) {
        let m = self.n_max() as i64;
        assert!(n.abs() <= m, "mode {n} beyond n_max {m}");
        self.modes[(n + m) as usize] = c;
    }

    pub fn modes(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        let m = self.n_max() as i64;
        self.modes.iter().enumerate().map(move |(i, c)| (i as i64 - m, *c))
    }

    /// ξ(s) at the state's time.
    pub fn value(&self, s: f64) -> Complex64 {
        let w = self.winding as f64;
        let series: Complex64 = self.modes().map(|(n, c)| c * (I * (n as f64 * s)).exp()).sum();
        Complex64::new(w * s, w * self.time) + series
    }

    /// ξ′(s).
    pub fn derivative(&self, s: f64) -> Complex64 {
        let series: Complex64 = self.modes().map(|(n, c)| c * I * n as f64 * (I * (n as f64 * s)).exp()).sum();
        Complex64::new(self.winding as f64, 0.0) + series
    }

    /// ξ″(s).
    pub fn second_derivative(&self, s: f64) -> Complex64 {
        self.modes().map(|(n, c)| -c * (n * n) as f64 * (I * (n as f64 * s)).exp()).sum()
    }

    /// ξ at s_j = 2πj/N.
    pub fn sample(&self, nodes: usize) -> Vec<Complex64> {
        (0..nodes).map(|j| self.value(TAU * j as f64 / nodes as f64)).collect()
    }

    /// E = ½∫|ξ′|² ds = π(w² + Σ n²|cₙ|²).
    pub fn energy(&self) -> f64 {
        let w = self.winding as f64;
        TAU / 2.0 * (w * w + self.modes().map(|(n, c)| (n * n) as f64 * c.norm_sqr()).sum::<f64>())
    }
}

/// Total increment of φ in units of 2π, and the continuous branch of φ.
fn unwrap_angle(phi: &[f64]) -> (i64, Vec<f64>) {
    let n = phi.len();
    let mut unwrapped = Vec::with_capacity(n);
    let mut acc = phi[0];
    unwrapped.push(acc);
    for j in 1..n {
        acc += wrap_signed(phi[j] - phi[j - 1], TAU);
        unwrapped.push(acc);
    }
    let closing = wrap_signed(phi[0] - phi[n - 1], TAU);
    let winding = ((acc + closing - phi[0]) / TAU).round() as i64;
    (winding, unwrapped)
}

fn check_grid(n: usize) -> Result<(), OracleError> {
    if n < 4 || !n.is_multiple_of(2) {
        return Err(OracleError::InvalidArgument(format!("need an even number of samples ≥ 4, got {n}")));
    }
    Ok(())
}

/// Fourier decomposition of initial data φ₀ + iz₀ sampled at s_j = 2πj/N.
pub fn decompose(phi0: &[f64], z0: &[f64]) -> Result<CylinderFourierState, OracleError> {
    let n = phi0.len();
    check_grid(n)?;
    if z0.len() != n {
        return Err(OracleError::InvalidArgument(format!("φ has {n} samples, z has {}", z0.len())));
    }
    let (winding, phi) = unwrap_angle(phi0);
    let h = TAU / n as f64;
    let periodic: Vec<Complex64> =
        (0..n).map(|j| Complex64::new(phi[j] - winding as f64 * h * j as f64, z0[j])).collect();
    let coeffs = FourierDifferentiator::new(n).coefficients(&periodic);
    let energy = coeffs[n / 2].norm_sqr();
    if energy > ALIAS_TOLERANCE {
        return Err(OracleError::AliasedInput { energy });
    }
    let mut state = CylinderFourierState::new(winding, n / 2 - 1, 0.0);
    for (i, c) in coeffs.iter().enumerate() {
        if 2 * i != n {
            state.set_mode(wavenumber(i, n), *c);
        }
    }
    Ok(state)
}

/// Advance by `dt` ≥ 0 with the exact multiplier e^{−(n²+n)dt}.
pub fn evolve(state: &CylinderFourierState, dt: f64) -> CylinderFourierState {
    let mut out = state.clone();
    for (i, c) in out.modes.iter_mut().enumerate() {
        let n = i as f64 - state.n_max() as f64;
        *c *= (-(n * n + n) * dt).exp();
    }
    out.time = state.time + dt;
    out
}

/// The coefficients aₙ of ξ(s,t) = Σ aₙ(s)tⁿ by the recursion
/// aₙ = (a″ₙ₋₁ + i a′ₙ₋₁)/n, with spectral derivatives. Returns a₀..=a_{n_terms}.
pub fn series_coefficients(a0: &[Complex64], n_terms: usize) -> Result<Vec<Vec<Complex64>>, OracleError> {
    let n = a0.len();
    check_grid(n)?;
    if n_terms > 25 {
        return Err(OracleError::InvalidArgument(format!("at most 25 terms, got {n_terms}")));
    }
    let re: Vec<f64> = a0.iter().map(|c| c.re).collect();
    let (winding, _) = unwrap_angle(&re);
    let w = winding as f64;
    let h = TAU / n as f64;
    let fourier = FourierDifferentiator::new(n);
    let periodic: Vec<Complex64> = a0.iter().enumerate().map(|(j, c)| c - w * h * j as f64).collect();
    let mut hat = fourier.coefficients(&periodic);
    let energy = hat[n / 2].norm_sqr();
    if energy > ALIAS_TOLERANCE {
        return Err(OracleError::AliasedInput { energy });
    }
    // drop round-off so that repeated differentiation does not amplify it
    let floor = 1e-13 * hat.iter().map(|c| c.norm()).fold(w.abs(), f64::max).max(1e-300);
    for c in hat.iter_mut() {
        if c.norm() <= floor {
            *c = Complex64::new(0.0, 0.0);
        }
    }
    hat[n / 2] = Complex64::new(0.0, 0.0);
    let mut out = vec![a0.to_vec()];
    for m in 1..=n_terms {
        for (i, c) in hat.iter_mut().enumerate() {
            let k = wavenumber(i, n) as f64;
            *c *= Complex64::new(-(k * k) - k, 0.0) / m as f64;
        }
        // (w·s)″ + i(w·s)′ = i·w enters a₁ only
        if m == 1 {
            hat[0] += I * w;
        }
        out.push(fourier.synthesize(&hat));
    }
    Ok(out)
}

/// Σ aₙ tⁿ at every node.
pub fn series_sum(coeffs: &[Vec<Complex64>], t: f64) -> Vec<Complex64> {
    let n = coeffs[0].len();
    (0..n)
        .map(|j| coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, a| acc * t + a[j]))
        .collect()
}

/// Case a): φ₀ = A cos s, z₀ = B sin s.
pub fn case_a_initial(a: f64, b: f64, nodes: usize) -> (Vec<f64>, Vec<f64>) {
    let s = (0..nodes).map(|j| TAU * j as f64 / nodes as f64);
    (s.clone().map(|s| a * s.cos()).collect(), s.map(|s| b * s.sin()).collect())
}

/// Case b): φ₀ = s, z₀ = μ cos s.
pub fn case_b_initial(mu: f64, nodes: usize) -> (Vec<f64>, Vec<f64>) {
    let s = (0..nodes).map(|j| TAU * j as f64 / nodes as f64);
    (s.clone().collect(), s.map(|s| mu * s.cos()).collect())
}

/// ξ(s,t) = ((A−B)/2)e^{−is} + ((A+B)/2)e^{is}e^{−2t}.
pub fn case_a_closed_form(a: f64, b: f64, s: f64, t: f64) -> Complex64 {
    (a - b) / 2.0 * (-I * s).exp() + (a + b) / 2.0 * (I * s).exp() * (-2.0 * t).exp()
}

/// ξ(s,t) = s + it + iμ cos s + (iμ/2)e^{is}(e^{−2t} − 1).
pub fn case_b_closed_form(mu: f64, s: f64, t: f64) -> Complex64 {
    Complex64::new(s, t) + I * mu * s.cos() + I * mu / 2.0 * (I * s).exp() * ((-2.0 * t).exp() - 1.0)
}

/// Loop (r cos φ, r sin φ, z) on the cylinder of radius `radius`; only
/// the unit cylinder carries the complexified flow.
pub fn embed_cylinder(state: &CylinderFourierState, radius: f64, nodes: usize) -> Result<LoopState, OracleError> {
    if radius != 1.0 {
        return Err(OracleError::InvalidArgument(format!("the complexified flow lives on the unit cylinder, got radius {radius}")));
    }
    let positions = state.sample(nodes).iter().map(|xi| Vec3::new(xi.re.cos(), xi.re.sin(), xi.im)).collect();
    Ok(LoopState::new(positions, state.time))
}

/// Distance on the torus quotient of the unit cylinder (z mod 2π).
pub fn cylinder_quotient_distance(a: &Vec3, b: &Vec3) -> f64 {
    let planar = ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt();
    planar.hypot(wrap_signed(a.z - b.z, QUOTIENT_Z_PERIOD))
}

/// max |u″ + u·u′ − u̇| for u = s/(T−t) over the grid, from the closed-form
/// derivatives u′ = 1/(T−t), u″ = 0, u̇ = s/(T−t)².
pub fn blow_up_residual(blow_up_time: f64, s_grid: &[f64], t_grid: &[f64]) -> Result<f64, OracleError> {
    if !(blow_up_time > 0.0) {
        return Err(OracleError::InvalidArgument("T must be positive".into()));
    }
    let mut worst: f64 = 0.0;
    for &t in t_grid {
        if t >= blow_up_time {
            return Err(OracleError::InvalidArgument(format!("sample time {t} is not before T = {blow_up_time}")));
        }
        let r = blow_up_time - t;
        for &s in s_grid {
            let u = s / r;
            let (du, ddu, dot_u) = (1.0 / r, 0.0, s / (r * r));
            worst = worst.max((ddu + u * du - dot_u).abs());
        }
    }
    Ok(worst)
}

/// The same residual with central differences in s and t on [−L, L].
pub fn blow_up_residual_fd(blow_up_time: f64, half_width: f64, intervals: usize, t: f64) -> Result<f64, OracleError> {
    if !(t >= 0.0 && t < blow_up_time) || intervals < 2 {
        return Err(OracleError::InvalidArgument(format!("need 0 ≤ t < T and ≥ 2 intervals, got t = {t}")));
    }
    let h = 2.0 * half_width / intervals as f64;
    let k = 1e-4 * (blow_up_time - t);
    let u = |s: f64, t: f64| s / (blow_up_time - t);
    let mut worst: f64 = 0.0;
    for j in 1..intervals {
        let s = -half_width + h * j as f64;
        let du = (u(s + h, t) - u(s - h, t)) / (2.0 * h);
        let ddu = (u(s + h, t) - 2.0 * u(s, t) + u(s - h, t)) / (h * h);
        let dot_u = (u(s, t + k) - u(s, (t - k).max(0.0))) / (t + k - (t - k).max(0.0));
        worst = worst.max((ddu + u(s, t) * du - dot_u).abs());
    }
    Ok(worst)
}

/// All permutations of 0..k with their signs.
pub fn permutations(k: usize) -> Vec<(Vec<usize>, f64)> {
    fn go(prefix: &mut Vec<usize>, rest: &mut Vec<usize>, sign: f64, out: &mut Vec<(Vec<usize>, f64)>) {
        if rest.is_empty() {
            out.push((prefix.clone(), sign));
            return;
        }
        for i in 0..rest.len() {
            let x = rest.remove(i);
            prefix.push(x);
            // moving element i to the front of `rest` takes i transpositions
            go(prefix, rest, if i % 2 == 0 { sign } else { -sign }, out);
            prefix.pop();
            rest.insert(i, x);
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut (0..k).collect(), 1.0, &mut out);
    out
}

/// v₁∧…∧v_k by the Leibniz sum over permutations.
pub fn brute_force_wedge(vectors: &[Vec<f64>]) -> MultiVector {
    let k = vectors.len();
    let q = vectors[0].len();
    let perms = permutations(k);
    let coeffs = increasing_tuples(q, k)
        .iter()
        .map(|tuple| perms.iter().map(|(p, sign)| sign * (0..k).map(|a| vectors[a][tuple[p[a]]]).product::<f64>()).sum())
        .collect();
    MultiVector::from_coeffs(q, k, coeffs).expect("coefficient count matches")
}

/// (A₁ ∧̃ … ∧̃ A_k)(ξ₁∧…∧ξ_k) = Σ_σ A_{σ(1)}ξ₁ ∧ … ∧ A_{σ(k)}ξ_k.
pub fn brute_force_tilde(maps: &[DMatrix<f64>], vectors: &[Vec<f64>]) -> MultiVector {
    let k = maps.len();
    let q = maps[0].nrows();
    let mut total = vec![0.0; increasing_tuples(q, k).len()];
    for (p, _) in permutations(k) {
        let images: Vec<Vec<f64>> = (0..k)
            .map(|a| {
                let x = nalgebra::DVector::from_column_slice(&vectors[a]);
                (&maps[p[a]] * x).iter().copied().collect()
            })
            .collect();
        for (t, c) in total.iter_mut().zip(brute_force_wedge(&images).coeffs()) {
            *t += c;
        }
    }
    MultiVector::from_coeffs(q, k, total).expect("coefficient count matches")
}

/// Σ_{σ,τ} sgn σ sgn τ Π_a ⟨u_{σ(a)}, v_{τ(a)}⟩, the tensor inner product of
/// the antisymmetrized tensors of u₁∧…∧u_k and v₁∧…∧v_k.
pub fn brute_force_tensor_inner(u: &[Vec<f64>], v: &[Vec<f64>]) -> f64 {
    let k = u.len();
    let perms = permutations(k);
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut total = 0.0;
    for (p, sp) in &perms {
        for (r, sr) in &perms {
            total += sp * sr * (0..k).map(|a| dot(&u[p[a]], &v[r[a]])).product::<f64>();
        }
    }
    total
}
