//! Exterior algebra of small Euclidean spaces.
//!
//! k-vectors are stored densely on the basis e_I = e_{i₁}∧…∧e_{i_k} with
//! I strictly increasing (lexicographic order). Wedges of vectors follow
//! the determinant convention, so the coefficient of e_I in ξ₁∧…∧ξ_k is
//! the k×k minor of [ξ₁ … ξ_k] on the rows I.
//!
//! Linear maps Λ^k ℝ^m → Λ^k ℝ^q are [`MultiLinearMap`]s. The tilde-wedge
//! of maps is built up from the shuffle product of two such maps; the
//! underlined power A^{k̲} = A^k / k! is computed independently as the
//! compound matrix of minors of A.

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExteriorError {
    #[error("degree {degree} out of range 1..={max}")]
    DegreeOutOfRange { degree: usize, max: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("degree mismatch: {left} vs {right}")]
    DegreeMismatch { left: usize, right: usize },
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

pub fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// All strictly increasing k-tuples from 0..n in lexicographic order.
pub fn increasing_tuples(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(binomial(n, k));
    if k > n {
        return out;
    }
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        // advance the rightmost index that still has room
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < n - k + i {
                cur[i] += 1;
                for j in i + 1..k {
                    cur[j] = cur[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Position of an increasing tuple in [`increasing_tuples`] order.
pub fn tuple_index(n: usize, tuple: &[usize]) -> usize {
    let k = tuple.len();
    let mut idx = 0;
    let mut prev = 0;
    for (pos, &t) in tuple.iter().enumerate() {
        for skipped in prev..t {
            idx += binomial(n - skipped - 1, k - pos - 1);
        }
        prev = t + 1;
    }
    idx
}

fn minor(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> f64 {
    let k = rows.len();
    let sub = DMatrix::from_fn(k, k, |i, j| m[(rows[i], cols[j])]);
    sub.determinant()
}

/// A k-vector in Λ^k ℝ^q.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiVector {
    dim: usize,
    degree: usize,
    coeffs: Vec<f64>,
}

impl MultiVector {
    pub fn zero(dim: usize, degree: usize) -> Self {
        Self { dim, degree, coeffs: vec![0.0; binomial(dim, degree)] }
    }

    pub fn from_coeffs(dim: usize, degree: usize, coeffs: Vec<f64>) -> Result<Self, ExteriorError> {
        if degree == 0 || degree > dim {
            return Err(ExteriorError::DegreeOutOfRange { degree, max: dim });
        }
        let expected = binomial(dim, degree);
        if coeffs.len() != expected {
            return Err(ExteriorError::DimensionMismatch { expected, got: coeffs.len() });
        }
        Ok(Self { dim, degree, coeffs })
    }

    /// The basis element e_I.
    pub fn basis(dim: usize, tuple: &[usize]) -> Self {
        let mut mv = Self::zero(dim, tuple.len());
        mv.coeffs[tuple_index(dim, tuple)] = 1.0;
        mv
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, tuple: &[usize]) -> f64 {
        self.coeffs[tuple_index(self.dim, tuple)]
    }

    /// Exterior product of a k-vector and an l-vector.
    pub fn wedge_with(&self, other: &MultiVector) -> Result<MultiVector, ExteriorError> {
        if self.dim != other.dim {
            return Err(ExteriorError::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        let degree = self.degree + other.degree;
        if degree > self.dim {
            return Err(ExteriorError::DegreeOutOfRange { degree, max: self.dim });
        }
        let mut out = MultiVector::zero(self.dim, degree);
        let left = increasing_tuples(self.dim, self.degree);
        let right = increasing_tuples(self.dim, other.degree);
        for (i, a) in left.iter().enumerate() {
            if self.coeffs[i] == 0.0 {
                continue;
            }
            for (j, b) in right.iter().enumerate() {
                if other.coeffs[j] == 0.0 || a.iter().any(|x| b.contains(x)) {
                    continue;
                }
                let inversions = a.iter().map(|x| b.iter().filter(|y| *y < x).count()).sum::<usize>();
                let sign = if inversions % 2 == 0 { 1.0 } else { -1.0 };
                let mut merged: Vec<usize> = a.iter().chain(b).copied().collect();
                merged.sort_unstable();
                out.coeffs[tuple_index(self.dim, &merged)] += sign * self.coeffs[i] * other.coeffs[j];
            }
        }
        Ok(out)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { coeffs: self.coeffs.iter().map(|c| c * factor).collect(), ..self.clone() }
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

/// ξ₁∧…∧ξ_k for vectors of a common dimension q.
pub fn wedge(vectors: &[&[f64]]) -> Result<MultiVector, ExteriorError> {
    let k = vectors.len();
    let q = vectors.first().map_or(0, |v| v.len());
    if k == 0 || k > q {
        return Err(ExteriorError::DegreeOutOfRange { degree: k, max: q });
    }
    if let Some(bad) = vectors.iter().find(|v| v.len() != q) {
        return Err(ExteriorError::DimensionMismatch { expected: q, got: bad.len() });
    }
    let columns = DMatrix::from_fn(q, k, |i, j| vectors[j][i]);
    let cols: Vec<usize> = (0..k).collect();
    let coeffs = increasing_tuples(q, k).iter().map(|rows| minor(&columns, rows, &cols)).collect();
    Ok(MultiVector { dim: q, degree: k, coeffs })
}

/// The ∧-metric: Σ_{I increasing} α_I β_I, so that basis k-vectors have unit length.
pub fn wedge_inner(a: &MultiVector, b: &MultiVector) -> Result<f64, ExteriorError> {
    if a.degree != b.degree {
        return Err(ExteriorError::DegreeMismatch { left: a.degree, right: b.degree });
    }
    if a.dim != b.dim {
        return Err(ExteriorError::DimensionMismatch { expected: a.dim, got: b.dim });
    }
    Ok(a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x * y).sum())
}

/// The full tensor metric on alternating k-tensors, k! times the ∧-metric.
pub fn tensor_inner(a: &MultiVector, b: &MultiVector) -> Result<f64, ExteriorError> {
    Ok(factorial(a.degree) * wedge_inner(a, b)?)
}

/// A linear map Λ^k ℝ^m → Λ^k ℝ^q in the increasing-tuple bases.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiLinearMap {
    degree: usize,
    source_dim: usize,
    target_dim: usize,
    matrix: DMatrix<f64>,
}

impl MultiLinearMap {
    /// Degree-one map from a q×m matrix.
    pub fn from_linear(a: &DMatrix<f64>) -> Self {
        Self { degree: 1, source_dim: a.ncols(), target_dim: a.nrows(), matrix: a.clone() }
    }

    pub fn from_matrix(degree: usize, source_dim: usize, target_dim: usize, matrix: DMatrix<f64>) -> Result<Self, ExteriorError> {
        let rows = binomial(target_dim, degree);
        let cols = binomial(source_dim, degree);
        if matrix.nrows() != rows {
            return Err(ExteriorError::DimensionMismatch { expected: rows, got: matrix.nrows() });
        }
        if matrix.ncols() != cols {
            return Err(ExteriorError::DimensionMismatch { expected: cols, got: matrix.ncols() });
        }
        Ok(Self { degree, source_dim, target_dim, matrix })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn source_dim(&self) -> usize {
        self.source_dim
    }

    pub fn target_dim(&self) -> usize {
        self.target_dim
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn apply(&self, xi: &MultiVector) -> Result<MultiVector, ExteriorError> {
        if xi.degree != self.degree {
            return Err(ExteriorError::DegreeMismatch { left: self.degree, right: xi.degree });
        }
        if xi.dim != self.source_dim {
            return Err(ExteriorError::DimensionMismatch { expected: self.source_dim, got: xi.dim });
        }
        let v = &self.matrix * nalgebra::DVector::from_column_slice(&xi.coeffs);
        Ok(MultiVector { dim: self.target_dim, degree: self.degree, coeffs: v.as_slice().to_vec() })
    }

    /// |A| = [Σ_J |A(e_J)|²]^{1/2} over the orthonormal basis of Λ^k.
    pub fn frame_norm(&self) -> f64 {
        self.matrix.norm()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { matrix: &self.matrix * factor, ..self.clone() }
    }

    /// The ∧̃-product Λ̃^a ⊗ Λ̃^b → Λ̃^{a+b}:
    /// (P∧̃Q)(e_J) = Σ over (a,b)-shuffles S of J of sign(S) · P(e_S) ∧ Q(e_{J∖S}).
    pub fn tilde(&self, other: &MultiLinearMap) -> Result<MultiLinearMap, ExteriorError> {
        if self.source_dim != other.source_dim {
            return Err(ExteriorError::DimensionMismatch { expected: self.source_dim, got: other.source_dim });
        }
        if self.target_dim != other.target_dim {
            return Err(ExteriorError::DimensionMismatch { expected: self.target_dim, got: other.target_dim });
        }
        let degree = self.degree + other.degree;
        let max = self.source_dim.min(self.target_dim);
        if degree > max {
            return Err(ExteriorError::DegreeOutOfRange { degree, max });
        }
        let (m, q) = (self.source_dim, self.target_dim);
        let mut matrix = DMatrix::zeros(binomial(q, degree), binomial(m, degree));
        for (col, j) in increasing_tuples(m, degree).iter().enumerate() {
            for positions in increasing_tuples(degree, self.degree) {
                let displacement: usize = positions.iter().enumerate().map(|(i, p)| p - i).sum();
                let sign = if displacement.is_multiple_of(2) { 1.0 } else { -1.0 };
                let first: Vec<usize> = positions.iter().map(|&p| j[p]).collect();
                let second: Vec<usize> = j.iter().copied().filter(|x| !first.contains(x)).collect();
                let left = self.apply(&MultiVector::basis(m, &first))?;
                let right = other.apply(&MultiVector::basis(m, &second))?;
                let prod = left.wedge_with(&right)?;
                for (row, c) in prod.coeffs.iter().enumerate() {
                    matrix[(row, col)] += sign * c;
                }
            }
        }
        Ok(MultiLinearMap { degree, source_dim: m, target_dim: q, matrix })
    }
}

/// A₁∧̃…∧̃A_k for q×m matrices.
pub fn tilde_wedge(maps: &[DMatrix<f64>]) -> Result<MultiLinearMap, ExteriorError> {
    let (first, rest) = maps
        .split_first()
        .ok_or(ExteriorError::DegreeOutOfRange { degree: 0, max: 0 })?;
    rest.iter().try_fold(MultiLinearMap::from_linear(first), |acc, a| {
        if a.shape() != first.shape() {
            return Err(ExteriorError::DimensionMismatch { expected: first.nrows(), got: a.nrows() });
        }
        acc.tilde(&MultiLinearMap::from_linear(a))
    })
}

/// A^{k̲} = A^k / k!, the k-th compound matrix of A.
pub fn underlined_power(a: &DMatrix<f64>, k: usize) -> Result<MultiLinearMap, ExteriorError> {
    let (q, m) = a.shape();
    let max = q.min(m);
    if k == 0 || k > max {
        return Err(ExteriorError::DegreeOutOfRange { degree: k, max });
    }
    let rows = increasing_tuples(q, k);
    let cols = increasing_tuples(m, k);
    let matrix = DMatrix::from_fn(rows.len(), cols.len(), |i, j| minor(a, &rows[i], &cols[j]));
    Ok(MultiLinearMap { degree: k, source_dim: m, target_dim: q, matrix })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tuple_enumeration_and_lookup() {
        let t = increasing_tuples(4, 2);
        assert_eq!(t, vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
        for (i, tup) in t.iter().enumerate() {
            assert_eq!(tuple_index(4, tup), i);
        }
        for (i, tup) in increasing_tuples(5, 3).iter().enumerate() {
            assert_eq!(tuple_index(5, tup), i);
        }
    }

    #[test]
    fn wedge_examples() {
        let e1 = [1.0, 0.0, 0.0];
        let e2 = [0.0, 1.0, 0.0];
        let w = wedge(&[&e1, &e2]).unwrap();
        assert_eq!(w.coeffs(), &[1.0, 0.0, 0.0]);

        let v = [0.3, -1.2, 2.0];
        assert!(wedge(&[&v, &v]).unwrap().norm() < 1e-15);

        let a = [1.0, 1.0, 0.0];
        let b = [0.0, 1.0, 1.0];
        let w = wedge(&[&a, &b]).unwrap();
        for (got, want) in w.coeffs().iter().zip([1.0, 1.0, 1.0]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn wedge_degree_errors() {
        let v = [1.0, 2.0];
        assert!(matches!(wedge(&[&v, &v, &v]), Err(ExteriorError::DegreeOutOfRange { .. })));
        assert!(matches!(wedge(&[]), Err(ExteriorError::DegreeOutOfRange { .. })));
        let w = [1.0, 2.0, 3.0];
        assert!(matches!(wedge(&[&v, &w]), Err(ExteriorError::DimensionMismatch { .. })));
    }

    #[test]
    fn tilde_wedge_examples() {
        let id = DMatrix::<f64>::identity(2, 2);
        let aa = tilde_wedge(&[id.clone(), id.clone()]).unwrap();
        let out = aa.apply(&MultiVector::basis(2, &[0, 1])).unwrap();
        assert_eq!(out.coeffs(), &[2.0]);

        let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, -1.0, 0.5, 3.0, 0.0]);
        let single = tilde_wedge(std::slice::from_ref(&a)).unwrap();
        assert_eq!(single.matrix(), &a);

        let zero = DMatrix::zeros(3, 2);
        let z = tilde_wedge(&[zero, a.clone()]).unwrap();
        assert!(z.matrix().iter().all(|c| *c == 0.0));

        let b = DMatrix::zeros(2, 2);
        assert!(matches!(tilde_wedge(&[a, b]), Err(ExteriorError::DimensionMismatch { .. })));
    }

    #[test]
    fn underlined_power_examples() {
        let id = DMatrix::<f64>::identity(2, 2);
        let p = underlined_power(&id, 2).unwrap();
        assert_eq!(p.apply(&MultiVector::basis(2, &[0, 1])).unwrap().coeffs(), &[1.0]);

        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 3.0]));
        let p = underlined_power(&d, 2).unwrap();
        let out = p.apply(&MultiVector::basis(2, &[0, 1])).unwrap();
        assert!((out.coeffs()[0] - 6.0).abs() < 1e-14);

        let a = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, -4.0, 5.0, 6.0]);
        assert_eq!(underlined_power(&a, 1).unwrap().matrix(), &a);
        assert!(matches!(underlined_power(&a, 0), Err(ExteriorError::DegreeOutOfRange { .. })));
        assert!(matches!(underlined_power(&a, 3), Err(ExteriorError::DegreeOutOfRange { .. })));
    }

    #[test]
    fn underlined_power_is_normalized_tilde_power() {
        let a = DMatrix::from_row_slice(3, 3, &[0.2, -1.0, 0.7, 1.1, 0.4, -0.3, 0.0, 0.9, 1.5]);
        for k in 1..=3 {
            let via_tilde = tilde_wedge(&vec![a.clone(); k]).unwrap().scaled(1.0 / factorial(k));
            let compound = underlined_power(&a, k).unwrap();
            assert!((via_tilde.matrix() - compound.matrix()).norm() < 1e-12);
        }
    }

    #[test]
    fn wedge_inner_examples() {
        let e12 = MultiVector::basis(3, &[0, 1]);
        let e13 = MultiVector::basis(3, &[0, 2]);
        assert_eq!(wedge_inner(&e12, &e12).unwrap(), 1.0);
        assert_eq!(wedge_inner(&e12, &e13).unwrap(), 0.0);
        assert_eq!(wedge_inner(&e12.scaled(2.0), &e12.scaled(3.0)).unwrap(), 6.0);
        assert_eq!(tensor_inner(&e12, &e12).unwrap(), 2.0);
        let e1 = MultiVector::basis(3, &[0]);
        assert!(matches!(wedge_inner(&e12, &e1), Err(ExteriorError::DegreeMismatch { .. })));
    }

    #[test]
    fn multivector_wedge_matches_vector_wedge() {
        let a = [1.0, 2.0, 0.5, -1.0];
        let b = [0.0, -1.0, 3.0, 2.0];
        let c = [2.0, 0.0, 1.0, 1.0];
        let ab = wedge(&[&a, &b]).unwrap();
        let abc = ab.wedge_with(&wedge(&[&c]).unwrap()).unwrap();
        let direct = wedge(&[&a, &b, &c]).unwrap();
        for (x, y) in abc.coeffs().iter().zip(direct.coeffs()) {
            assert!((x - y).abs() < 1e-13);
        }
    }
}
