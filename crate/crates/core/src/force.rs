//! Lorentz forces and k-forces.
//!
//! A force Z is a bundle map Λ^k TM → TM whose form Ω(w, ξ) = ⟨w, Z(ξ)⟩ is
//! closed. Built-in fields have degree one; tabulated `Custom` fields may
//! carry any degree k ≤ q. Evaluation always returns a vector tangent to
//! the model at the evaluation point.

use std::f64::consts::{SQRT_2, TAU};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::exterior::{binomial, increasing_tuples, underlined_power, ExteriorError, MultiVector};
use crate::geometry::{ManifoldModel, ModelKind, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ForceError {
    #[error("force of degree {expected} evaluated on a {got}-vector")]
    DegreeMismatch { expected: usize, got: usize },
    #[error("force {force} is not defined on model {model}")]
    IncompatibleModel { force: String, model: String },
    #[error("closedness check not applicable: {0}")]
    NotApplicable(String),
    #[error("norm constants are not available for force {0}")]
    MissingNormConstants(String),
    #[error("invalid custom field: {0}")]
    InvalidCustom(String),
    #[error(transparent)]
    Exterior(#[from] ExteriorError),
}

/// Tabulated k-force: sample points with the matrix of Z in the
/// increasing-tuple basis (q rows, C(q,k) columns).
#[derive(Debug, Clone, PartialEq)]
pub struct CustomField {
    dim: usize,
    degree: usize,
    samples: Vec<(Vec3, DMatrix<f64>)>,
}

impl CustomField {
    pub fn new(dim: usize, degree: usize, samples: Vec<(Vec3, DMatrix<f64>)>) -> Result<Self, ForceError> {
        if !(1..=3).contains(&dim) || degree == 0 || degree > dim {
            return Err(ForceError::InvalidCustom(format!("dimension {dim} with degree {degree}")));
        }
        if samples.is_empty() {
            return Err(ForceError::InvalidCustom("no samples".into()));
        }
        let cols = binomial(dim, degree);
        for (_, m) in &samples {
            if m.shape() != (dim, cols) {
                return Err(ForceError::InvalidCustom(format!(
                    "sample matrix has shape {:?}, expected ({dim}, {cols})",
                    m.shape()
                )));
            }
        }
        Ok(Self { dim, degree, samples })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn samples(&self) -> &[(Vec3, DMatrix<f64>)] {
        &self.samples
    }

    /// Matrix of Z at `x`: affine least-squares blend of the nearest
    /// 2q+1 samples, falling back to the nearest sample when they do not
    /// span an affine frame.
    pub fn matrix_at(&self, x: &Vec3) -> DMatrix<f64> {
        let q = self.dim;
        let mut order: Vec<(f64, usize)> = self
            .samples
            .iter()
            .enumerate()
            .map(|(i, (p, _))| ((p - x).rows(0, q).norm_squared(), i))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0));
        let nearest = &self.samples[order[0].1].1;
        let m = (2 * q + 1).min(order.len());
        if m < q + 1 {
            return nearest.clone();
        }
        let design = DMatrix::from_fn(m, q + 1, |r, c| {
            if c == 0 {
                1.0
            } else {
                self.samples[order[r].1].0[c - 1] - x[c - 1]
            }
        });
        let svd = design.clone().svd(true, true);
        let smax = svd.singular_values.max();
        if svd.singular_values.min() <= 1e-10 * smax {
            return nearest.clone();
        }
        let (rows, cols) = nearest.shape();
        let mut out = DMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                let values = DVector::from_fn(m, |r, _| self.samples[order[r].1].1[(i, j)]);
                if let Ok(coef) = svd.solve(&values, 1e-14) {
                    out[(i, j)] = coef[0];
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ForceKind {
    Zero,
    /// Z(v) = v × B for a constant B.
    ConstantCross { b: Vec3 },
    /// Z(v) = v × B̂ with B̂(x, y, z) = (x, y, 0), projected onto the tangent space.
    RadialCross,
    /// Z = c·J with J the quarter turn of the flat 2-torus.
    ParallelRotation { c: f64 },
    /// Z_s(v) = −s·v on the real line.
    LinearScalar,
    Custom(CustomField),
}

/// Sup norms |Z|_{L∞} and |∇Z|_{L∞}; `estimated` marks sampled values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormConstants {
    pub sup: f64,
    pub sup_grad: f64,
    pub estimated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForceField {
    kind: ForceKind,
    scale: f64,
}

impl ForceField {
    pub fn new(kind: ForceKind) -> Self {
        Self { kind, scale: 1.0 }
    }

    pub fn zero() -> Self {
        Self::new(ForceKind::Zero)
    }

    /// The same field multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self { kind: self.kind.clone(), scale: self.scale * factor }
    }

    pub fn kind(&self) -> &ForceKind {
        &self.kind
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn degree(&self) -> usize {
        match &self.kind {
            ForceKind::Custom(c) => c.degree,
            _ => 1,
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ForceKind::Zero => "zero",
            ForceKind::ConstantCross { .. } => "constant-cross",
            ForceKind::RadialCross => "radial-cross",
            ForceKind::ParallelRotation { .. } => "parallel-rotation",
            ForceKind::LinearScalar => "linear-scalar",
            ForceKind::Custom(_) => "custom",
        }
    }

    /// True for fields with ∇Z = 0 on flat targets.
    pub fn is_parallel(&self) -> bool {
        matches!(
            self.kind,
            ForceKind::Zero | ForceKind::ConstantCross { .. } | ForceKind::ParallelRotation { .. }
        )
    }

    pub fn check_compatible(&self, model: &ManifoldModel) -> Result<(), ForceError> {
        let ok = match (&self.kind, model.kind()) {
            (ForceKind::Zero, _) => true,
            (ForceKind::ConstantCross { .. }, _) => model.ambient_dim() == 3,
            (ForceKind::RadialCross, ModelKind::Cylinder { .. } | ModelKind::TorusOfRevolution { .. }) => true,
            (ForceKind::ParallelRotation { .. }, ModelKind::FlatTorus { dim: 2 }) => true,
            (ForceKind::Custom(c), _) => c.dim == model.ambient_dim(),
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(ForceError::IncompatibleModel { force: self.name().into(), model: format!("{:?}", model.kind()) })
        }
    }

    /// Z_x(v) for a degree-one field at a point x of M.
    pub fn evaluate_vector(&self, model: &ManifoldModel, x: &Vec3, v: &Vec3) -> Vec3 {
        let raw = match &self.kind {
            ForceKind::Zero => return Vec3::zeros(),
            ForceKind::ConstantCross { b } => v.cross(b),
            ForceKind::RadialCross => v.cross(&Vec3::new(x.x, x.y, 0.0)),
            ForceKind::ParallelRotation { c } => Vec3::new(-v.y, v.x, 0.0) * *c,
            ForceKind::LinearScalar => Vec3::new(-x.x * v.x, 0.0, 0.0),
            ForceKind::Custom(f) => {
                let m = f.matrix_at(x);
                let mut out = Vec3::zeros();
                for i in 0..f.dim {
                    for j in 0..f.dim {
                        out[i] += m[(i, j)] * v[j];
                    }
                }
                out
            }
        };
        let tangent = if model.is_flat_quotient() || matches!(self.kind, ForceKind::LinearScalar) {
            raw
        } else {
            model.projection_jacobian(x).map(|p| p * raw).unwrap_or(raw)
        };
        tangent * self.scale
    }

    /// Z_x(ξ) for a k-vector ξ tangent at x.
    pub fn evaluate(&self, model: &ManifoldModel, x: &Vec3, xi: &MultiVector) -> Result<Vec3, ForceError> {
        let k = self.degree();
        if xi.degree() != k {
            return Err(ForceError::DegreeMismatch { expected: k, got: xi.degree() });
        }
        if k == 1 {
            let mut v = Vec3::zeros();
            for (i, c) in xi.coeffs().iter().enumerate().take(3) {
                v[i] = *c;
            }
            return Ok(self.evaluate_vector(model, x, &v));
        }
        let ForceKind::Custom(f) = &self.kind else {
            unreachable!("only custom fields have degree above one")
        };
        if xi.dim() != f.dim {
            return Err(ExteriorError::DimensionMismatch { expected: f.dim, got: xi.dim() }.into());
        }
        let m = f.matrix_at(x);
        let v = m * DVector::from_column_slice(xi.coeffs());
        let mut raw = Vec3::zeros();
        for i in 0..f.dim {
            raw[i] = v[i];
        }
        let tangent = if model.is_flat_quotient() {
            raw
        } else {
            model.projection_jacobian(x).map(|p| p * raw).unwrap_or(raw)
        };
        Ok(tangent * self.scale)
    }

    /// Frame norm [Σ_J |Z(e_J)|²]^{1/2} over an orthonormal basis of Λ^k T_xM.
    pub fn frame_norm_at(&self, model: &ManifoldModel, x: &Vec3) -> f64 {
        let frame = model.tangent_frame(x);
        let k = self.degree();
        let q = model.ambient_dim();
        let mut total = 0.0;
        for tuple in increasing_tuples(frame.len(), k) {
            let vecs: Vec<Vec<f64>> = tuple.iter().map(|&i| frame[i].as_slice()[..q].to_vec()).collect();
            let refs: Vec<&[f64]> = vecs.iter().map(|v| v.as_slice()).collect();
            let xi = crate::exterior::wedge(&refs).expect("frame vectors span a k-plane");
            if let Ok(z) = self.evaluate(model, x, &xi) {
                total += z.norm_squared();
            }
        }
        total.sqrt()
    }

    /// Closed-form |Z|_{L∞} and |∇Z|_{L∞} for built-in fields, sampled for custom fields.
    pub fn norm_constants(&self, model: &ManifoldModel) -> Result<NormConstants, ForceError> {
        let s = self.scale.abs();
        let closed = |sup: f64, grad: f64| Ok(NormConstants { sup: sup * s, sup_grad: grad * s, estimated: false });
        let max_curvature = match model.kind() {
            ModelKind::Sphere { radius } | ModelKind::Cylinder { radius } => 1.0 / radius,
            ModelKind::TorusOfRevolution { major, minor } => (1.0 / minor).max(1.0 / (major - minor)),
            ModelKind::FlatTorus { .. } => 0.0,
        };
        match &self.kind {
            ForceKind::Zero => closed(0.0, 0.0),
            ForceKind::ConstantCross { b } => closed(SQRT_2 * b.norm(), SQRT_2 * b.norm() * max_curvature),
            ForceKind::ParallelRotation { c } => closed(SQRT_2 * c.abs(), 0.0),
            ForceKind::RadialCross => match model.kind() {
                ModelKind::Cylinder { radius } => closed(SQRT_2 * radius, 0.0),
                ModelKind::TorusOfRevolution { major, minor } => {
                    // Z = a(θ)·J with a = (R + r cos θ) cos θ; |∇Z| = √2 |a'(θ)| / r.
                    let n = 100_000;
                    let grad = (0..n)
                        .map(|i| {
                            let th = TAU * i as f64 / n as f64;
                            (th.sin() * (major + 2.0 * minor * th.cos())).abs() / minor
                        })
                        .fold(0.0, f64::max);
                    closed(SQRT_2 * (major + minor), SQRT_2 * grad)
                }
                _ => Err(ForceError::MissingNormConstants(self.name().into())),
            },
            ForceKind::LinearScalar => Err(ForceError::MissingNormConstants(self.name().into())),
            ForceKind::Custom(f) => {
                let sup = f.samples.iter().map(|(_, m)| m.norm()).fold(0.0, f64::max);
                let mut grad: f64 = 0.0;
                for (i, (p, a)) in f.samples.iter().enumerate() {
                    for (q, b) in &f.samples[i + 1..] {
                        let d = (p - q).norm();
                        if d > 0.0 {
                            grad = grad.max((a - b).norm() / d);
                        }
                    }
                }
                Ok(NormConstants { sup: sup * s, sup_grad: grad * s, estimated: true })
            }
        }
    }

    /// |Z − Z′|_{L∞}: closed form when the fields differ only by scale,
    /// sampled on M otherwise.
    pub fn sup_distance(&self, other: &ForceField, model: &ManifoldModel) -> Result<f64, ForceError> {
        if self.kind == other.kind {
            let unit = ForceField::new(self.kind.clone()).norm_constants(model)?;
            return Ok((self.scale - other.scale).abs() * unit.sup);
        }
        let q = model.ambient_dim();
        let mut worst: f64 = 0.0;
        for x in crate::geometry::sample_points(model, 4096) {
            let frame = model.tangent_frame(&x);
            let mut total = 0.0;
            for e in &frame {
                let d = self.evaluate_vector(model, &x, e) - other.evaluate_vector(model, &x, e);
                total += d.rows(0, q).norm_squared();
            }
            worst = worst.max(total.sqrt());
        }
        Ok(worst)
    }

    /// Largest finite-difference |dΩ| over `sample_count` points.
    ///
    /// When k+1 reaches the intrinsic dimension, dΩ is a form above top
    /// degree and 0 is returned.
    pub fn check_closedness(&self, model: &ManifoldModel, sample_count: usize) -> Result<f64, ForceError> {
        let k = self.degree();
        let n = model.intrinsic_dim();
        if k + 1 >= n {
            return Ok(0.0);
        }
        if !model.is_flat_quotient() {
            return Err(ForceError::NotApplicable(format!(
                "dΩ is only computed in flat coordinates, model is {:?}",
                model.kind()
            )));
        }
        let points = match &self.kind {
            ForceKind::Custom(f) => interior_points(f, sample_count),
            _ => crate::geometry::sample_points(model, sample_count),
        };
        let omega = |x: &Vec3, tuple: &[usize]| -> f64 {
            let (first, rest) = tuple.split_first().expect("nonempty");
            let xi = MultiVector::basis(n, rest);
            self.evaluate(model, x, &xi).map(|z| z[*first]).unwrap_or(0.0)
        };
        let step = 1e-4;
        let mut worst: f64 = 0.0;
        for x in &points {
            for tuple in increasing_tuples(n, k + 2) {
                let mut d = 0.0;
                for (t, &axis) in tuple.iter().enumerate() {
                    let rest: Vec<usize> = tuple.iter().enumerate().filter(|(i, _)| *i != t).map(|(_, &v)| v).collect();
                    let e = Vec3::ith(axis, step);
                    let deriv = (omega(&(x + e), &rest) - omega(&(x - e), &rest)) / (2.0 * step);
                    d += if t % 2 == 0 { deriv } else { -deriv };
                }
                worst = worst.max(d.abs());
            }
        }
        Ok(worst)
    }

    /// Tubular extension Z̃_x(ξ) = ψ(dist(x, M)) · Z_{π(x)}((dπ_x)^{k̲} ξ).
    pub fn extend(&self, model: &ManifoldModel, x: &Vec3, xi: &MultiVector) -> Result<Vec3, ForceError> {
        let k = self.degree();
        if xi.degree() != k {
            return Err(ForceError::DegreeMismatch { expected: k, got: xi.degree() });
        }
        let psi = cutoff(model.distance(x), model.tubular_radius());
        if psi == 0.0 {
            return Ok(Vec3::zeros());
        }
        let q = model.ambient_dim();
        let p = model.project(x).expect("cut-off support lies inside the tube");
        let jac = model.projection_jacobian(x).expect("cut-off support lies inside the tube");
        let jq = DMatrix::from_fn(q, q, |i, j| jac[(i, j)]);
        let pushed = underlined_power(&jq, k)?.apply(xi)?;
        Ok(self.evaluate(model, &p, &pushed)? * psi)
    }

    /// Degree-one fast path of [`ForceField::extend`].
    pub fn extend_vector(&self, model: &ManifoldModel, x: &Vec3, v: &Vec3) -> Vec3 {
        if matches!(self.kind, ForceKind::Zero) {
            return Vec3::zeros();
        }
        if model.is_flat_quotient() {
            return self.evaluate_vector(model, x, v);
        }
        let psi = cutoff(model.distance(x), model.tubular_radius());
        if psi == 0.0 {
            return Vec3::zeros();
        }
        let p = model.project(x).expect("cut-off support lies inside the tube");
        let jac = model.projection_jacobian(x).expect("cut-off support lies inside the tube");
        self.evaluate_vector(model, &p, &(jac * v)) * psi
    }
}

/// C² smoothstep s(τ) = 6τ⁵ − 15τ⁴ + 10τ³ on [0, 1].
pub fn smoothstep(tau: f64) -> f64 {
    let t = tau.clamp(0.0, 1.0);
    t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

/// Cut-off ψ: 1 for d ≤ ε/4, 0 for d ≥ ε/2, smoothstep in between.
pub fn cutoff(distance: f64, tube: f64) -> f64 {
    if !tube.is_finite() {
        return 1.0;
    }
    let inner = tube / 4.0;
    if distance <= inner {
        1.0
    } else if distance >= 2.0 * inner {
        0.0
    } else {
        1.0 - smoothstep((distance - inner) / inner)
    }
}

fn interior_points(f: &CustomField, count: usize) -> Vec<Vec3> {
    let q = f.dim;
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for (p, _) in &f.samples {
        for i in 0..q {
            lo[i] = lo[i].min(p[i]);
            hi[i] = hi[i].max(p[i]);
        }
    }
    (0..count)
        .map(|j| {
            let mut x = Vec3::zeros();
            for i in 0..q {
                let u = crate::geometry::halton(j + 1, [2, 3, 5][i]);
                x[i] = lo[i] + (hi[i] - lo[i]) * (0.1 + 0.8 * u);
            }
            x
        })
        .collect()
}

/// Matrix of Z(v) = v × B on ℝ³ (used by tests and tabulated fields).
pub fn cross_matrix(b: &Vec3) -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 3, &[0.0, b.z, -b.y, -b.z, 0.0, b.x, b.y, -b.x, 0.0])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &Vec3, b: &Vec3, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn evaluate_examples() {
        let flat3 = ManifoldModel::flat_torus(3).unwrap();
        let z = ForceField::new(ForceKind::ConstantCross { b: Vec3::z() });
        assert!(close(&z.evaluate_vector(&flat3, &Vec3::zeros(), &Vec3::x()), &Vec3::new(0.0, -1.0, 0.0), 0.0));

        let cyl = ManifoldModel::cylinder(1.0).unwrap();
        let z = ForceField::new(ForceKind::RadialCross);
        let out = z.evaluate_vector(&cyl, &Vec3::x(), &Vec3::y());
        assert!(close(&out, &Vec3::new(0.0, 0.0, -1.0), 1e-15));

        let flat2 = ManifoldModel::flat_torus(2).unwrap();
        let z = ForceField::new(ForceKind::ParallelRotation { c: 1.0 });
        assert!(close(&z.evaluate_vector(&flat2, &Vec3::zeros(), &Vec3::x()), &Vec3::y(), 0.0));
    }

    #[test]
    fn evaluate_rejects_wrong_degree() {
        let flat3 = ManifoldModel::flat_torus(3).unwrap();
        let z = ForceField::new(ForceKind::ConstantCross { b: Vec3::z() });
        let xi = MultiVector::basis(3, &[0, 1]);
        assert!(matches!(z.evaluate(&flat3, &Vec3::zeros(), &xi), Err(ForceError::DegreeMismatch { .. })));
    }

    #[test]
    fn compatibility() {
        let flat2 = ManifoldModel::flat_torus(2).unwrap();
        let cyl = ManifoldModel::cylinder(1.0).unwrap();
        assert!(ForceField::new(ForceKind::ParallelRotation { c: 1.0 }).check_compatible(&flat2).is_ok());
        assert!(ForceField::new(ForceKind::ParallelRotation { c: 1.0 }).check_compatible(&cyl).is_err());
        assert!(ForceField::new(ForceKind::RadialCross).check_compatible(&flat2).is_err());
        assert!(ForceField::new(ForceKind::LinearScalar).check_compatible(&cyl).is_err());
        assert!(ForceField::zero().check_compatible(&cyl).is_ok());
    }

    #[test]
    fn closedness_examples() {
        let flat3 = ManifoldModel::flat_torus(3).unwrap();
        let z = ForceField::new(ForceKind::ConstantCross { b: Vec3::new(0.3, -1.0, 2.0) });
        assert!(z.check_closedness(&flat3, 200).unwrap() <= 1e-6);

        let cyl = ManifoldModel::cylinder(1.0).unwrap();
        assert_eq!(ForceField::new(ForceKind::RadialCross).check_closedness(&cyl, 100).unwrap(), 0.0);

        // Ω = x dy∧dz, i.e. Z(v) = x·(0, v_z, −v_y), tabulated on a grid.
        let mut samples = Vec::new();
        for i in 0..5 {
            for j in 0..5 {
                for l in 0..5 {
                    let p = Vec3::new(i as f64, j as f64, l as f64) * 0.5;
                    let m = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 0.0, 0.0, p.x, 0.0, -p.x, 0.0]);
                    samples.push((p, m));
                }
            }
        }
        let custom = ForceField::new(ForceKind::Custom(CustomField::new(3, 1, samples).unwrap()));
        let d = custom.check_closedness(&flat3, 50).unwrap();
        assert!((d - 1.0).abs() < 1e-6, "dΩ = {d}");
    }

    #[test]
    fn cutoff_plateaus_and_shell() {
        assert_eq!(cutoff(0.0, 0.5), 1.0);
        assert_eq!(cutoff(0.125, 0.5), 1.0);
        assert_eq!(cutoff(0.25, 0.5), 0.0);
        assert_eq!(cutoff(0.3, 0.5), 0.0);
        // τ = 0.6: s = 6·0.6⁵ − 15·0.6⁴ + 10·0.6³ = 0.68256
        assert!((cutoff(0.2, 0.5) - 0.31744).abs() < 1e-14);
        assert_eq!(cutoff(10.0, f64::INFINITY), 1.0);
    }

    #[test]
    fn extend_examples() {
        let cyl = ManifoldModel::cylinder(1.0).unwrap();
        let z = ForceField::new(ForceKind::RadialCross);
        let v = Vec3::new(0.2, 0.7, -0.4);
        let on = z.extend_vector(&cyl, &Vec3::x(), &v);
        let tangent = cyl.tangent_project(&Vec3::x(), &v).unwrap();
        assert!(close(&on, &z.evaluate_vector(&cyl, &Vec3::x(), &tangent), 1e-15));

        assert_eq!(z.extend_vector(&cyl, &Vec3::new(1.3, 0.0, 0.0), &v), Vec3::zeros());

        // dπ at (1.05, 0, 0) scales the azimuthal direction by 1/1.05, ψ = 1.
        let got = z.extend_vector(&cyl, &Vec3::new(1.05, 0.0, 0.0), &Vec3::y());
        assert!(close(&got, &Vec3::new(0.0, 0.0, -1.0 / 1.05), 1e-15));
        // inside the shell: ψ(0.2) = 0.31744, azimuthal scaling 1/1.2
        let got = z.extend_vector(&cyl, &Vec3::new(1.2, 0.0, 0.0), &Vec3::y());
        assert!(close(&got, &Vec3::new(0.0, 0.0, -0.31744 / 1.2), 1e-14));

        let xi = MultiVector::basis(3, &[1]);
        let general = z.extend(&cyl, &Vec3::new(1.2, 0.0, 0.0), &xi).unwrap();
        assert!(close(&general, &got, 1e-15));
    }

    #[test]
    fn norm_constants() {
        let flat2 = ManifoldModel::flat_torus(2).unwrap();
        let z = ForceField::new(ForceKind::ParallelRotation { c: 2.0 });
        let n = z.norm_constants(&flat2).unwrap();
        assert!((n.sup - 2.0 * SQRT_2).abs() < 1e-15 && n.sup_grad == 0.0 && !n.estimated);
        assert!((z.frame_norm_at(&flat2, &Vec3::zeros()) - n.sup).abs() < 1e-14);

        let line = ForceField::new(ForceKind::LinearScalar);
        assert!(matches!(line.norm_constants(&flat2), Err(ForceError::MissingNormConstants(_))));

        let scaled = z.scaled(1.001);
        let d = z.sup_distance(&scaled, &flat2).unwrap();
        assert!((d - 0.001 * 2.0 * SQRT_2).abs() < 1e-14);
    }

    #[test]
    fn custom_affine_blend_is_exact_for_linear_fields() {
        let mut samples = Vec::new();
        for i in 0..4 {
            for j in 0..4 {
                let p = Vec3::new(i as f64, j as f64, 0.0);
                let m = DMatrix::from_row_slice(2, 2, &[0.0, p.x + 2.0 * p.y, -(p.x + 2.0 * p.y), 0.0]);
                samples.push((p, m));
            }
        }
        let f = CustomField::new(2, 1, samples).unwrap();
        let m = f.matrix_at(&Vec3::new(1.3, 1.7, 0.0));
        assert!((m[(0, 1)] - (1.3 + 3.4)).abs() < 1e-12);
        assert!(CustomField::new(2, 1, vec![(Vec3::zeros(), DMatrix::zeros(3, 3))]).is_err());
    }

    #[test]
    fn degree_two_custom_force() {
        // Z(e1∧e2) = e3 style 2-force on ℝ³: matrix column for (0,1) is e3.
        let mut m = DMatrix::zeros(3, 3);
        m[(2, 0)] = 1.0;
        let f = CustomField::new(3, 2, vec![(Vec3::zeros(), m)]).unwrap();
        let z = ForceField::new(ForceKind::Custom(f));
        let flat3 = ManifoldModel::flat_torus(3).unwrap();
        let xi = crate::exterior::wedge(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]).unwrap();
        assert!(close(&z.evaluate(&flat3, &Vec3::zeros(), &xi).unwrap(), &Vec3::z(), 0.0));
        let ext = z.extend(&flat3, &Vec3::new(1.0, 2.0, 3.0), &xi).unwrap();
        assert!(close(&ext, &Vec3::z(), 1e-15));
        // top degree on the 3-torus would need k + 1 ≥ 3
        assert_eq!(z.check_closedness(&flat3, 10).unwrap(), 0.0);
    }
}
