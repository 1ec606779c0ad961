//! Polyhedral cones `Q = { y : (y, a_i) >= 0 for all i }` given by unit wall
//! normals in general position, their Gram matrices and span reduction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, dot, norm, Matrix};

/// Normals whose input length differs from one by more than this are flagged.
pub const RENORMALIZATION_WARNING: f64 = 1e-6;
/// Smallest singular value of the normal matrix below which the arrangement
/// is rejected as degenerate.
pub const INDEPENDENCE_THRESHOLD: f64 = 1e-9;

/// A validated cone: `n` unit, linearly independent normals in `R^dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeSpec {
    dim: usize,
    normals: Vec<Vec<f64>>,
    renormalized: bool,
}

impl ConeSpec {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of walls `n`.
    pub fn walls(&self) -> usize {
        self.normals.len()
    }

    pub fn normals(&self) -> &[Vec<f64>] {
        &self.normals
    }

    pub fn normal(&self, wall: usize) -> &[f64] {
        &self.normals[wall]
    }

    /// True when at least one input vector was noticeably off unit length.
    pub fn was_renormalized(&self) -> bool {
        self.renormalized
    }

    pub fn is_square(&self) -> bool {
        self.walls() == self.dim
    }

    /// `(y, a_i)` for every wall.
    pub fn margins(&self, y: &[f64]) -> Vec<f64> {
        self.normals.iter().map(|a| dot(a, y)).collect()
    }

    /// The matrix `A` whose columns are the normals (row-major, `dim x n`).
    pub fn matrix(&self) -> Matrix {
        (0..self.dim)
            .map(|r| self.normals.iter().map(|a| a[r]).collect())
            .collect()
    }

    /// Same walls with normal `wall` replaced by its negative.
    pub fn with_flipped(&self, wall: usize) -> ConeSpec {
        let mut normals = self.normals.clone();
        for x in normals[wall].iter_mut() {
            *x = -*x;
        }
        ConeSpec { dim: self.dim, normals, renormalized: self.renormalized }
    }

    /// Cone obtained by multiplying normal `i` by `signs[i]`.
    pub fn with_signs(&self, signs: &[f64]) -> ConeSpec {
        let normals = self
            .normals
            .iter()
            .zip(signs)
            .map(|(a, s)| linalg::scaled(a, *s))
            .collect();
        ConeSpec { dim: self.dim, normals, renormalized: self.renormalized }
    }

    pub fn to_file(&self) -> ConeFile {
        ConeFile { dim: self.dim, normals: self.normals.clone() }
    }
}

/// Validates and renormalizes a list of wall normals.
pub fn make_cone(dim: usize, normals: &[Vec<f64>]) -> Result<ConeSpec> {
    if normals.is_empty() || normals.len() > dim {
        return Err(Error::WallCount { walls: normals.len(), dim });
    }
    let mut renormalized = false;
    let mut unit = Vec::with_capacity(normals.len());
    for (index, v) in normals.iter().enumerate() {
        if v.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: v.len() });
        }
        let len = norm(v);
        if !len.is_finite() || len == 0.0 {
            return Err(Error::ZeroVector { index });
        }
        renormalized |= (len - 1.0).abs() > RENORMALIZATION_WARNING;
        unit.push(linalg::scaled(v, 1.0 / len));
    }
    let cone = ConeSpec { dim, normals: unit, renormalized };
    let lambda = min_eigenvalue(&gram(&cone)).value;
    let sigma_min = lambda.max(0.0).sqrt();
    if sigma_min <= INDEPENDENCE_THRESHOLD {
        return Err(Error::DegenerateArrangement { sigma_min });
    }
    Ok(cone)
}

/// On-disk cone description: `{ "dim": m, "normals": [[...], ...] }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeFile {
    pub dim: usize,
    pub normals: Vec<Vec<f64>>,
}

impl ConeFile {
    pub fn into_cone(self) -> Result<ConeSpec> {
        make_cone(self.dim, &self.normals)
    }
}

/// Matrix of pairwise inner products of the wall normals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramMatrix {
    order: usize,
    entries: Matrix,
}

impl GramMatrix {
    /// Accepts any symmetric matrix with unit diagonal; positive
    /// definiteness is reported by [`min_eigenvalue`], not enforced here.
    pub fn from_entries(entries: Matrix) -> Result<Self> {
        let order = entries.len();
        for (i, row) in entries.iter().enumerate() {
            if row.len() != order {
                return Err(Error::DimensionMismatch { expected: order, found: row.len() });
            }
            if (row[i] - 1.0).abs() > 1e-12 {
                return Err(Error::Config(format!("gram diagonal entry {i} is {} not 1", row[i])));
            }
            for (j, x) in row.iter().enumerate() {
                if (x - entries[j][i]).abs() > 1e-14 {
                    return Err(Error::Config(format!("gram entry ({i},{j}) is not symmetric")));
                }
            }
        }
        Ok(GramMatrix { order, entries })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn entries(&self) -> &Matrix {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i][j]
    }

    /// Principal submatrix on the given (sorted) index set.
    pub fn principal(&self, indices: &[usize]) -> Matrix {
        indices
            .iter()
            .map(|&i| indices.iter().map(|&j| self.entries[i][j]).collect())
            .collect()
    }

    /// `D G D` with `D = diag(signs)`.
    pub fn with_signs(&self, signs: &[f64]) -> GramMatrix {
        let entries = (0..self.order)
            .map(|i| (0..self.order).map(|j| signs[i] * signs[j] * self.entries[i][j]).collect())
            .collect();
        GramMatrix { order: self.order, entries }
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::symmetric_eigen(&self.entries).values
    }
}

pub fn gram(cone: &ConeSpec) -> GramMatrix {
    let n = cone.walls();
    let mut entries = vec![vec![0.0; n]; n];
    for i in 0..n {
        entries[i][i] = 1.0;
        for j in i + 1..n {
            let g = dot(cone.normal(i), cone.normal(j));
            entries[i][j] = g;
            entries[j][i] = g;
        }
    }
    GramMatrix { order: n, entries }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinEigenvalue {
    pub value: f64,
    /// `false` flags an invalid Gram input (the arrangement is not in
    /// general position).
    pub positive_definite: bool,
}

pub fn min_eigenvalue(g: &GramMatrix) -> MinEigenvalue {
    let value = g.eigenvalues().first().copied().unwrap_or(f64::NAN);
    MinEigenvalue { value, positive_definite: value > 0.0 }
}

/// Orthonormal basis of `span(a_1, ..., a_n)` inside `R^m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanBasis {
    pub ambient_dim: usize,
    pub vectors: Vec<Vec<f64>>,
}

impl SpanBasis {
    /// Coordinates of the orthogonal projection of `x` onto the span.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        self.vectors.iter().map(|b| dot(b, x)).collect()
    }

    /// Embeds span coordinates back into `R^m`.
    pub fn lift(&self, coords: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ambient_dim];
        for (c, b) in coords.iter().zip(&self.vectors) {
            for (o, x) in out.iter_mut().zip(b) {
                *o += c * x;
            }
        }
        out
    }
}

/// Re-expresses the cone in an orthonormal basis of the span of its normals.
/// The dynamics orthogonal to the span is free motion, so the reduced cone
/// carries all collision behaviour.
pub fn reduce_to_span(dim: usize, normals: &[Vec<f64>]) -> Result<(ConeSpec, SpanBasis)> {
    let cone = make_cone(dim, normals)?;
    reduce(&cone)
}

pub fn reduce(cone: &ConeSpec) -> Result<(ConeSpec, SpanBasis)> {
    let vectors = linalg::orthonormalize(cone.normals()).ok_or(Error::DegenerateArrangement {
        sigma_min: 0.0,
    })?;
    let basis = SpanBasis { ambient_dim: cone.dim(), vectors };
    let coords: Vec<Vec<f64>> = cone.normals().iter().map(|a| basis.project(a)).collect();
    let reduced = make_cone(cone.walls(), &coords)?;
    Ok((reduced, basis))
}

/// True iff `(point, a_i) >= -tol` for every wall.
pub fn contains(cone: &ConeSpec, point: &[f64], tol: f64) -> Result<bool> {
    if point.len() != cone.dim() {
        return Err(Error::DimensionMismatch { expected: cone.dim(), found: point.len() });
    }
    Ok(cone.margins(point).iter().all(|&m| m >= -tol))
}
