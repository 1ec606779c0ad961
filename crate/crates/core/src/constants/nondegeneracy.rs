//! Nondegeneracy constant `C = min_{|y|=1, y in Q} max_i dist(y, B_i)` of a
//! square cone, where `B_i = { x : (x, a_i) = 0, (x, a_j) >= 0 }` is a face.
//!
//! The distance to a face is exact: the projection of `y` onto the face lies
//! in the relative interior of some sub-face `{ (x, a_k) = 0, k in K }` with
//! `i in K`, so it is the orthogonal projection onto that linear subspace for
//! the right `K`. All `2^n - 1` subspaces are precomputed once; a candidate
//! counts for face `i` when `i in K` and the projected point stays in `Q`.

use crate::cone::ConeSpec;
use crate::constants::charge::subsets;
use crate::constants::sphere::{self, Domain, MaxObjective, MultistartOptions, Piece};
use crate::constants::{ConstantEstimate, EstimateOptions, Method};
use crate::error::{Error, Result};
use crate::linalg::{self, dot};

const FEASIBILITY_TOL: f64 = 1e-12;

struct Subspace {
    mask: u64,
    /// Orthonormal basis of `span{a_k : k in K}`.
    basis: Vec<Vec<f64>>,
    /// `cross[l][j] = (basis[l], a_j)`.
    cross: Vec<Vec<f64>>,
}

pub struct FaceDistances {
    normals: Vec<Vec<f64>>,
    subspaces: Vec<Subspace>,
}

impl FaceDistances {
    pub fn new(cone: &ConeSpec) -> Self {
        let normals = cone.normals().to_vec();
        let subspaces = subsets(normals.len())
            .filter_map(|k| {
                let vectors: Vec<Vec<f64>> = k.iter().map(|&i| normals[i].clone()).collect();
                let basis = linalg::orthonormalize(&vectors)?;
                let cross = basis.iter().map(|u| normals.iter().map(|a| dot(u, a)).collect()).collect();
                let mask = k.iter().fold(0u64, |m, &i| m | (1 << i));
                Some(Subspace { mask, basis, cross })
            })
            .collect();
        FaceDistances { normals, subspaces }
    }

    /// `dist(y, B_i)` for every wall, with the index of the minimizing subspace.
    fn evaluate(&self, y: &[f64]) -> Vec<(f64, usize)> {
        let n = self.normals.len();
        let margins: Vec<f64> = self.normals.iter().map(|a| dot(a, y)).collect();
        let mut best = vec![(f64::INFINITY, usize::MAX); n];
        for (idx, s) in self.subspaces.iter().enumerate() {
            let coeffs: Vec<f64> = s.basis.iter().map(|u| dot(u, y)).collect();
            let dist = coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
            if (0..n)
                .filter(|&i| s.mask & (1 << i) != 0)
                .all(|i| dist >= best[i].0)
            {
                continue;
            }
            let feasible = (0..n).filter(|&j| s.mask & (1 << j) == 0).all(|j| {
                let proj: f64 = coeffs.iter().zip(&s.cross).map(|(c, row)| c * row[j]).sum();
                margins[j] - proj >= -FEASIBILITY_TOL
            });
            if !feasible {
                continue;
            }
            for (i, b) in best.iter_mut().enumerate() {
                if s.mask & (1 << i) != 0 && dist < b.0 {
                    *b = (dist, idx);
                }
            }
        }
        best
    }

    pub fn distances(&self, y: &[f64]) -> Vec<f64> {
        self.evaluate(y).into_iter().map(|(d, _)| d).collect()
    }

    /// `max_i dist(y, B_i)`
    pub fn max_distance(&self, y: &[f64]) -> f64 {
        self.evaluate(y).into_iter().map(|(d, _)| d).fold(0.0, f64::max)
    }
}

impl MaxObjective for FaceDistances {
    fn dim(&self) -> usize {
        self.normals[0].len()
    }

    fn value(&self, y: &[f64]) -> f64 {
        self.max_distance(y)
    }

    fn pieces_above(&self, y: &[f64], floor: f64) -> Vec<Piece> {
        self.evaluate(y)
            .into_iter()
            .filter(|&(d, _)| d >= floor && d > 0.0)
            .map(|(d, idx)| {
                // gradient of |P_K y| is P_K y / |P_K y|
                let s = &self.subspaces[idx];
                let mut grad = vec![0.0; y.len()];
                for u in &s.basis {
                    let c = dot(u, y) / d;
                    for (g, x) in grad.iter_mut().zip(u) {
                        *g += c * x;
                    }
                }
                Piece { grad }
            })
            .collect()
    }
}

fn check_square(cone: &ConeSpec) -> Result<()> {
    if cone.is_square() {
        Ok(())
    } else {
        Err(Error::NotSquare { walls: cone.walls(), dim: cone.dim() })
    }
}

fn single_wall() -> ConstantEstimate {
    // Q is a half-line; its unit vector is at distance 1 from the apex
    ConstantEstimate { value: 1.0, certified_lower: Some(1.0), method: Method::ClosedForm, starts_used: 0 }
}

pub fn bfk_constant_multistart(cone: &ConeSpec, opts: &MultistartOptions) -> Result<ConstantEstimate> {
    check_square(cone)?;
    if cone.walls() == 1 {
        return Ok(single_wall());
    }
    let domain = Domain::cone(cone).ok_or(Error::DegenerateArrangement { sigma_min: 0.0 })?;
    let r = sphere::multistart(&FaceDistances::new(cone), &domain, opts);
    Ok(ConstantEstimate { value: r.value, certified_lower: None, method: Method::Multistart, starts_used: r.starts_used })
}

/// Dense grid estimate, `None` above dimension 3.
pub fn bfk_constant_grid(cone: &ConeSpec) -> Result<Option<ConstantEstimate>> {
    check_square(cone)?;
    if cone.walls() == 1 {
        return Ok(Some(single_wall()));
    }
    let domain = Domain::cone(cone).ok_or(Error::DegenerateArrangement { sigma_min: 0.0 })?;
    Ok(sphere::grid_oracle(&FaceDistances::new(cone), &domain).map(|r| ConstantEstimate {
        value: r.value,
        certified_lower: None,
        method: Method::GridOracle,
        starts_used: r.starts_used,
    }))
}

/// Multistart estimate, refined by the grid oracle for dimension <= 3 when
/// `opts.grid_refine` is set. The result is always an evaluation at a unit
/// vector of `Q`, so it can only overestimate `C`.
pub fn bfk_constant(cone: &ConeSpec, opts: &EstimateOptions) -> Result<ConstantEstimate> {
    let mut est = bfk_constant_multistart(cone, &opts.multistart)?;
    if opts.grid_refine && est.method != Method::ClosedForm {
        if let Some(grid) = bfk_constant_grid(cone)? {
            if grid.value < est.value {
                est.value = grid.value;
                est.method = Method::GridOracle;
            }
            est.starts_used += grid.starts_used;
        }
    }
    debug_assert!(est.value > 0.0 && est.value <= 1.0 + 1e-12, "C = {}", est.value);
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::make_cone;
    use crate::wedge::wedge_cone;
    use std::f64::consts::PI;

    #[test]
    fn orthant_face_distance_is_coordinate() {
        let c = make_cone(3, &linalg::identity(3)).unwrap();
        let f = FaceDistances::new(&c);
        let d = f.distances(&[0.2, 0.5, 0.7]);
        for (a, b) in d.iter().zip([0.2, 0.5, 0.7]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn obtuse_wedge_face_distance_uses_the_apex() {
        // wedge of angle 3pi/4: the foot of the perpendicular onto the line of
        // wall 0 falls outside the wedge for directions past pi/2
        let c = wedge_cone(0.75 * PI).unwrap();
        let f = FaceDistances::new(&c);
        let t = 0.7 * PI;
        let y = [t.cos(), t.sin()];
        let d = f.distances(&y);
        assert!((d[0] - 1.0).abs() < 1e-15);
        let t2 = 0.3 * PI;
        let d = f.distances(&[t2.cos(), t2.sin()]);
        assert!((d[0] - t2.sin()).abs() < 1e-15);
    }

    #[test]
    fn closed_form_examples() {
        let opts = EstimateOptions::default();
        let c = make_cone(2, &linalg::identity(2)).unwrap();
        let v = bfk_constant(&c, &opts).unwrap().value;
        assert!((v - 0.5f64.sqrt()).abs() < 1e-7, "{v}");

        let c = make_cone(1, &[vec![1.0]]).unwrap();
        assert_eq!(bfk_constant(&c, &opts).unwrap().value, 1.0);

        let c = make_cone(3, &linalg::identity(3)).unwrap();
        let v = bfk_constant(&c, &opts).unwrap().value;
        assert!((v - 1.0 / 3f64.sqrt()).abs() < 1e-7, "{v}");
    }
}
