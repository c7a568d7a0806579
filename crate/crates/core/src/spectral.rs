//! Fourier differentiation of periodic samples on [0, 2π).

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Planned forward/inverse transforms for one grid size.
#[derive(Clone)]
pub struct FourierDifferentiator {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FourierDifferentiator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FourierDifferentiator").field("n", &self.n).finish()
    }
}

/// Signed wavenumber of FFT bin `i`; the Nyquist bin maps to +n/2.
pub fn wavenumber(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

impl FourierDifferentiator {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { n, forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Normalized Fourier coefficients c_k with f(s_j) = Σ c_k e^{i k s_j}.
    pub fn coefficients(&self, values: &[Complex64]) -> Vec<Complex64> {
        let mut buf = values.to_vec();
        self.forward.process(&mut buf);
        let scale = 1.0 / self.n as f64;
        buf.iter_mut().for_each(|c| *c *= scale);
        buf
    }

    /// Inverse of [`FourierDifferentiator::coefficients`].
    pub fn synthesize(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let mut buf = coeffs.to_vec();
        self.inverse.process(&mut buf);
        buf
    }

    /// First and second derivatives of real periodic samples.
    ///
    /// The Nyquist mode is dropped from the first derivative and kept in
    /// the second, which keeps both operators real.
    pub fn derivatives(&self, values: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let mut hat: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut hat);
        let mut d1 = hat.clone();
        let mut d2 = hat;
        for i in 0..n {
            let k = wavenumber(i, n) as f64;
            d1[i] *= if 2 * i == n { Complex64::new(0.0, 0.0) } else { Complex64::new(0.0, k) };
            d2[i] *= -k * k;
        }
        self.inverse.process(&mut d1);
        self.inverse.process(&mut d2);
        let scale = 1.0 / n as f64;
        (d1.iter().map(|c| c.re * scale).collect(), d2.iter().map(|c| c.re * scale).collect())
    }

    /// Complex first and second derivatives (used by the oracle).
    pub fn complex_derivatives(&self, values: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let n = self.n;
        let hat = self.coefficients(values);
        let mut d1 = hat.clone();
        let mut d2 = hat;
        for i in 0..n {
            let k = wavenumber(i, n) as f64;
            d1[i] *= if 2 * i == n { Complex64::new(0.0, 0.0) } else { Complex64::new(0.0, k) };
            d2[i] *= -k * k;
        }
        (self.synthesize(&d1), self.synthesize(&d2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn derivatives_of_trig_modes() {
        let n = 32;
        let d = FourierDifferentiator::new(n);
        let s: Vec<f64> = (0..n).map(|j| TAU * j as f64 / n as f64).collect();
        let f: Vec<f64> = s.iter().map(|x| (3.0 * x).sin() + 0.5 * (2.0 * x).cos()).collect();
        let (d1, d2) = d.derivatives(&f);
        for (j, x) in s.iter().enumerate() {
            assert!((d1[j] - (3.0 * (3.0 * x).cos() - (2.0 * x).sin())).abs() < 1e-12);
            assert!((d2[j] - (-9.0 * (3.0 * x).sin() - 2.0 * (2.0 * x).cos())).abs() < 1e-12);
        }
    }

    #[test]
    fn coefficient_roundtrip() {
        let n = 16;
        let d = FourierDifferentiator::new(n);
        let v: Vec<Complex64> = (0..n).map(|j| Complex64::new(j as f64, -(j as f64).sqrt())).collect();
        let back = d.synthesize(&d.coefficients(&v));
        for (a, b) in v.iter().zip(&back) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
