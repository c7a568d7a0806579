//! Embedded manifold models: nearest-point projection, its differential,
//! the second-fundamental correction and the normal residual.
//!
//! Every model lives in ambient space of dimension at most three, so points
//! and vectors are stored as [`Vec3`]. Models with a smaller ambient
//! dimension (the flat 2-torus) keep the unused coordinates at zero.

use std::f64::consts::TAU;

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Relative step used by the finite-difference Hessian of the projection.
pub const HESSIAN_STEP: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point at distance {distance} is outside the tubular neighborhood of radius {radius}")]
    OutsideTubularNeighborhood { distance: f64, radius: f64 },
    #[error("invalid model parameters: {0}")]
    InvalidModel(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelKind {
    Sphere { radius: f64 },
    /// Axis of symmetry is the z-axis.
    Cylinder { radius: f64 },
    /// Core circle of radius `major` in the xy-plane, tube radius `minor`.
    TorusOfRevolution { major: f64, minor: f64 },
    /// ℝⁿ/(2πℤ)ⁿ, stored on the universal cover.
    FlatTorus { dim: usize },
}

/// An embedded manifold M ⊂ ℝ^q together with its tubular radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManifoldModel {
    kind: ModelKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalResidual {
    pub value: Vec3,
    pub squared_norm: f64,
}

impl ManifoldModel {
    pub fn new(kind: ModelKind) -> Result<Self, GeometryError> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(GeometryError::InvalidModel(format!("{name} must be positive, got {v}")))
            }
        };
        match kind {
            ModelKind::Sphere { radius } | ModelKind::Cylinder { radius } => positive("radius", radius)?,
            ModelKind::TorusOfRevolution { major, minor } => {
                positive("major radius", major)?;
                positive("minor radius", minor)?;
                // The tube of radius minor/2 must stay clear of the symmetry axis.
                if major <= 1.5 * minor {
                    return Err(GeometryError::InvalidModel(format!(
                        "torus of revolution needs major > 1.5 * minor (got {major}, {minor})"
                    )));
                }
            }
            ModelKind::FlatTorus { dim } => {
                if !(1..=3).contains(&dim) {
                    return Err(GeometryError::InvalidModel(format!(
                        "flat torus dimension must be 1, 2 or 3, got {dim}"
                    )));
                }
            }
        }
        Ok(Self { kind })
    }

    pub fn sphere(radius: f64) -> Result<Self, GeometryError> {
        Self::new(ModelKind::Sphere { radius })
    }

    pub fn cylinder(radius: f64) -> Result<Self, GeometryError> {
        Self::new(ModelKind::Cylinder { radius })
    }

    pub fn torus_of_revolution(major: f64, minor: f64) -> Result<Self, GeometryError> {
        Self::new(ModelKind::TorusOfRevolution { major, minor })
    }

    pub fn flat_torus(dim: usize) -> Result<Self, GeometryError> {
        Self::new(ModelKind::FlatTorus { dim })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn ambient_dim(&self) -> usize {
        match self.kind {
            ModelKind::FlatTorus { dim } => dim,
            _ => 3,
        }
    }

    pub fn intrinsic_dim(&self) -> usize {
        match self.kind {
            ModelKind::FlatTorus { dim } => dim,
            _ => 2,
        }
    }

    pub fn is_flat_quotient(&self) -> bool {
        matches!(self.kind, ModelKind::FlatTorus { .. })
    }

    /// Constant tubular radius ε.
    pub fn tubular_radius(&self) -> f64 {
        match self.kind {
            ModelKind::Sphere { radius } | ModelKind::Cylinder { radius } => radius / 2.0,
            ModelKind::TorusOfRevolution { minor, .. } => minor / 2.0,
            ModelKind::FlatTorus { .. } => f64::INFINITY,
        }
    }

    /// Length scale for finite-difference steps.
    pub fn scale(&self) -> f64 {
        match self.kind {
            ModelKind::Sphere { radius } | ModelKind::Cylinder { radius } => radius,
            ModelKind::TorusOfRevolution { minor, .. } => minor,
            ModelKind::FlatTorus { .. } => 1.0,
        }
    }

    /// Stored bound on the curvature tensor, sup |R^M|, taken as the
    /// supremum of the absolute sectional curvature.
    pub fn curvature_bound(&self) -> f64 {
        match self.kind {
            ModelKind::Sphere { radius } => 1.0 / (radius * radius),
            ModelKind::Cylinder { .. } | ModelKind::FlatTorus { .. } => 0.0,
            // K = cos θ / (r (R + r cos θ)) peaks in absolute value on the inner equator.
            ModelKind::TorusOfRevolution { major, minor } => 1.0 / (minor * (major - minor)),
        }
    }

    /// Mask selecting the ambient coordinates in use.
    fn coordinate_mask(&self) -> Mat3 {
        let mut m = Mat3::zeros();
        for i in 0..self.ambient_dim() {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Closed-form Euclidean distance from `x` to M.
    pub fn distance(&self, x: &Vec3) -> f64 {
        match self.kind {
            ModelKind::Sphere { radius } => (x.norm() - radius).abs(),
            ModelKind::Cylinder { radius } => (x.xy().norm() - radius).abs(),
            ModelKind::TorusOfRevolution { major, minor } => {
                let rho = x.xy().norm();
                ((rho - major).hypot(x.z) - minor).abs()
            }
            ModelKind::FlatTorus { .. } => 0.0,
        }
    }

    fn check_tube(&self, x: &Vec3) -> Result<(), GeometryError> {
        let distance = self.distance(x);
        let radius = self.tubular_radius();
        if distance < radius {
            Ok(())
        } else {
            Err(GeometryError::OutsideTubularNeighborhood { distance, radius })
        }
    }

    /// Nearest-point projection π onto M.
    pub fn project(&self, x: &Vec3) -> Result<Vec3, GeometryError> {
        self.check_tube(x)?;
        Ok(self.project_unchecked(x))
    }

    fn project_unchecked(&self, x: &Vec3) -> Vec3 {
        match self.kind {
            ModelKind::Sphere { radius } => x * (radius / x.norm()),
            ModelKind::Cylinder { radius } => {
                let h = x.xy() * (radius / x.xy().norm());
                Vec3::new(h.x, h.y, x.z)
            }
            ModelKind::TorusOfRevolution { major, minor } => {
                let core = torus_core_point(x, major);
                let w = x - core;
                core + w * (minor / w.norm())
            }
            ModelKind::FlatTorus { .. } => self.coordinate_mask() * x,
        }
    }

    /// Jacobian dπ at a point of the tube. On M this is the orthogonal
    /// projector onto the tangent space.
    pub fn projection_jacobian(&self, x: &Vec3) -> Result<Mat3, GeometryError> {
        self.check_tube(x)?;
        Ok(self.projection_jacobian_unchecked(x))
    }

    fn projection_jacobian_unchecked(&self, x: &Vec3) -> Mat3 {
        match self.kind {
            ModelKind::Sphere { radius } => {
                let n = x.norm();
                let u = x / n;
                (Mat3::identity() - u * u.transpose()) * (radius / n)
            }
            ModelKind::Cylinder { radius } => {
                let h = Vec3::new(x.x, x.y, 0.0);
                let rho = h.norm();
                let u = h / rho;
                let horizontal = Mat3::from_diagonal(&Vec3::new(1.0, 1.0, 0.0));
                let mut j = (horizontal - u * u.transpose()) * (radius / rho);
                j[(2, 2)] = 1.0;
                j
            }
            ModelKind::TorusOfRevolution { major, minor } => {
                let h = Vec3::new(x.x, x.y, 0.0);
                let rho = h.norm();
                let u = h / rho;
                let horizontal = Mat3::from_diagonal(&Vec3::new(1.0, 1.0, 0.0));
                let d_core = (horizontal - u * u.transpose()) * (major / rho);
                let core = u * major;
                let w = x - core;
                let wn = w.norm();
                let v = w / wn;
                let d_w = Mat3::identity() - d_core;
                d_core + (Mat3::identity() - v * v.transpose()) * d_w * (minor / wn)
            }
            ModelKind::FlatTorus { .. } => self.coordinate_mask(),
        }
    }

    /// dπ_x(v) for x on M: the tangential part of `v`.
    pub fn tangent_project(&self, x: &Vec3, v: &Vec3) -> Result<Vec3, GeometryError> {
        Ok(self.projection_jacobian(x)? * v)
    }

    /// (∇_X dπ)(X) at `x`, by central differences of dπ along X.
    ///
    /// Along M this is normal to M; for the flat torus it vanishes.
    pub fn second_fundamental_correction(&self, x: &Vec3, tangent: &Vec3) -> Result<Vec3, GeometryError> {
        self.check_tube(x)?;
        Ok(self.second_fundamental_unchecked(x, tangent))
    }

    pub(crate) fn second_fundamental_unchecked(&self, x: &Vec3, tangent: &Vec3) -> Vec3 {
        if self.is_flat_quotient() {
            return Vec3::zeros();
        }
        let len = tangent.norm();
        if len == 0.0 {
            return Vec3::zeros();
        }
        let dir = tangent / len;
        let step = HESSIAN_STEP * self.scale();
        let forward = self.projection_jacobian_unchecked(&(x + dir * step));
        let backward = self.projection_jacobian_unchecked(&(x - dir * step));
        (forward - backward) * dir * (len * len / (2.0 * step))
    }

    /// ρ(x) = x − π(x) and h = |ρ|².
    pub fn normal_residual(&self, x: &Vec3) -> Result<NormalResidual, GeometryError> {
        let p = self.project(x)?;
        let value = x - p;
        Ok(NormalResidual { value, squared_norm: value.norm_squared() })
    }

    /// Squared distance h(x) without the tube check (used by diagnostics).
    pub(crate) fn squared_drift(&self, x: &Vec3) -> f64 {
        let d = self.distance(x);
        d * d
    }

    /// Orthonormal basis of the tangent space at π(x).
    pub fn tangent_frame(&self, x: &Vec3) -> Vec<Vec3> {
        match self.kind {
            ModelKind::Sphere { .. } => {
                let n = x.normalize();
                let seed = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
                let e1 = (seed - n * n.dot(&seed)).normalize();
                let e2 = n.cross(&e1);
                vec![e1, e2]
            }
            ModelKind::Cylinder { .. } => {
                let phi = x.y.atan2(x.x);
                vec![Vec3::new(-phi.sin(), phi.cos(), 0.0), Vec3::z()]
            }
            ModelKind::TorusOfRevolution { major, .. } => {
                let phi = x.y.atan2(x.x);
                let e_phi = Vec3::new(-phi.sin(), phi.cos(), 0.0);
                let w = (x - torus_core_point(x, major)).normalize();
                vec![e_phi, w.cross(&e_phi)]
            }
            ModelKind::FlatTorus { dim } => (0..dim).map(|i| Vec3::ith(i, 1.0)).collect(),
        }
    }

    /// Outward unit normal at π(x) for the surface models.
    pub fn unit_normal(&self, x: &Vec3) -> Option<Vec3> {
        match self.kind {
            ModelKind::Sphere { .. } => Some(x.normalize()),
            ModelKind::Cylinder { .. } => Some(Vec3::new(x.x, x.y, 0.0).normalize()),
            ModelKind::TorusOfRevolution { major, .. } => Some((x - torus_core_point(x, major)).normalize()),
            ModelKind::FlatTorus { .. } => None,
        }
    }

    /// Reduce a point of the flat torus to the fundamental domain [0, 2π)ⁿ.
    /// Other models are returned unchanged.
    pub fn wrap(&self, x: &Vec3) -> Vec3 {
        match self.kind {
            ModelKind::FlatTorus { dim } => {
                let mut y = *x;
                for i in 0..dim {
                    y[i] = y[i].rem_euclid(TAU);
                }
                y
            }
            _ => *x,
        }
    }

    /// Distance between two points measured on the quotient for the flat
    /// torus and in ambient space otherwise.
    pub fn quotient_distance(&self, a: &Vec3, b: &Vec3) -> f64 {
        match self.kind {
            ModelKind::FlatTorus { dim } => {
                let mut s = 0.0;
                for i in 0..dim {
                    let d = wrap_signed(a[i] - b[i], TAU);
                    s += d * d;
                }
                s.sqrt()
            }
            _ => (a - b).norm(),
        }
    }

    /// A point of M from intrinsic parameters in [0, 1)^n (used for sampling).
    pub fn point_from_unit_params(&self, p: [f64; 3]) -> Vec3 {
        match self.kind {
            ModelKind::Sphere { radius } => {
                let z = 2.0 * p[0] - 1.0;
                let phi = TAU * p[1];
                let r = (1.0 - z * z).max(0.0).sqrt();
                Vec3::new(r * phi.cos(), r * phi.sin(), z) * radius
            }
            ModelKind::Cylinder { radius } => {
                let phi = TAU * p[0];
                Vec3::new(radius * phi.cos(), radius * phi.sin(), 4.0 * radius * (p[1] - 0.5))
            }
            ModelKind::TorusOfRevolution { major, minor } => {
                let phi = TAU * p[0];
                let theta = TAU * p[1];
                let rho = major + minor * theta.cos();
                Vec3::new(rho * phi.cos(), rho * phi.sin(), minor * theta.sin())
            }
            ModelKind::FlatTorus { dim } => {
                let mut x = Vec3::zeros();
                for i in 0..dim {
                    x[i] = TAU * p[i];
                }
                x
            }
        }
    }
}

/// Radical-inverse (Halton) coordinate of `index` in `base`.
pub fn halton(mut index: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

/// Deterministic low-discrepancy sample of points on M.
pub fn sample_points(model: &ManifoldModel, count: usize) -> Vec<Vec3> {
    (1..=count)
        .map(|i| model.point_from_unit_params([halton(i, 2), halton(i, 3), halton(i, 5)]))
        .collect()
}

fn torus_core_point(x: &Vec3, major: f64) -> Vec3 {
    let h = Vec3::new(x.x, x.y, 0.0);
    h * (major / h.norm())
}

/// Representative of `d` modulo `period` in [−period/2, period/2).
pub fn wrap_signed(d: f64, period: f64) -> f64 {
    (d + 0.5 * period).rem_euclid(period) - 0.5 * period
}
