//! Capacity constant `delta = min_{|y|=1} max_i |(y, a_i)| = sin(psi)`.
//!
//! For a square arrangement, minimizing `max_i |(y, a_i)|` on the sphere is
//! the same as maximizing `|y|` over the parallelotope `|(y, a_i)| <= 1`,
//! whose maximum sits at a vertex `A^T y = s`, `s in {+1,-1}^n`. Hence
//! `delta^-2 = max_s s^T G^{-1} s`. The multistart and grid routes below
//! search the sphere directly and serve as independent checks.

use crate::cone::{gram, min_eigenvalue, ConeSpec, GramMatrix};
use crate::constants::charge::sign_vector;
use crate::constants::sphere::{self, Domain, MaxObjective, MultistartOptions, Piece};
use crate::constants::{ConstantEstimate, Method};
use crate::error::{Error, Result};
use crate::linalg::{self, dot};

#[derive(Debug, Clone, PartialEq)]
pub struct Capacity {
    pub delta: ConstantEstimate,
    /// `arcsin(delta)` in radians; `pi/2` for a single wall.
    pub psi: f64,
}

/// `sqrt(lambda_min / n)`, the lower bound every estimate must respect.
pub fn delta_lower_bound(g: &GramMatrix) -> f64 {
    (min_eigenvalue(g).value.max(0.0) / g.order() as f64).sqrt()
}

fn psi_of(delta: f64, walls: usize) -> f64 {
    if walls == 1 {
        std::f64::consts::FRAC_PI_2
    } else {
        delta.clamp(0.0, 1.0).asin()
    }
}

/// Exact `delta` by enumerating the `2^(n-1)` vertex sign patterns.
/// Works from the Gram matrix, i.e. on the span of the normals.
pub fn capacity_delta(cone: &ConeSpec) -> Result<Capacity> {
    let g = gram(cone);
    let n = g.order();
    let inverse = inverse(&g).ok_or(Error::DegenerateArrangement { sigma_min: 0.0 })?;
    let mut worst = 0.0_f64;
    // s and -s give the same quadratic form
    for k in 0..(1u64 << (n - 1)) {
        let s = sign_vector(k, n);
        let q = dot(&s, &linalg::mat_vec(&inverse, &s));
        worst = worst.max(q);
    }
    let value = worst.sqrt().recip();
    Ok(Capacity {
        delta: ConstantEstimate {
            value,
            certified_lower: Some(delta_lower_bound(&g)),
            method: Method::SubsetEnumeration,
            starts_used: 1 << (n - 1),
        },
        psi: psi_of(value, n),
    })
}

fn inverse(g: &GramMatrix) -> Option<linalg::Matrix> {
    let n = g.order();
    let cols: Option<Vec<Vec<f64>>> = (0..n)
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            linalg::solve(g.entries(), &e)
        })
        .collect();
    // G symmetric, so the column list is also the row list
    cols
}

pub(crate) struct AbsMargin<'a> {
    normals: &'a [Vec<f64>],
}

impl<'a> AbsMargin<'a> {
    pub fn new(cone: &'a ConeSpec) -> Self {
        AbsMargin { normals: cone.normals() }
    }
}

impl MaxObjective for AbsMargin<'_> {
    fn dim(&self) -> usize {
        self.normals[0].len()
    }

    fn value(&self, y: &[f64]) -> f64 {
        self.normals.iter().map(|a| dot(a, y).abs()).fold(0.0, f64::max)
    }

    fn pieces_above(&self, y: &[f64], floor: f64) -> Vec<Piece> {
        self.normals
            .iter()
            .filter_map(|a| {
                let v = dot(a, y);
                let sign = if v < 0.0 { -1.0 } else { 1.0 };
                (v.abs() >= floor).then(|| Piece { grad: linalg::scaled(a, sign) })
            })
            .collect()
    }
}

fn require_square(cone: &ConeSpec) -> Result<()> {
    if cone.is_square() {
        Ok(())
    } else {
        Err(Error::NotSquare { walls: cone.walls(), dim: cone.dim() })
    }
}

/// Multistart descent estimate; always an evaluation at a unit vector, so
/// never below the true value.
pub fn capacity_delta_multistart(cone: &ConeSpec, opts: &MultistartOptions) -> Result<Capacity> {
    require_square(cone)?;
    let r = sphere::multistart(&AbsMargin::new(cone), &Domain::Sphere, opts);
    Ok(Capacity {
        delta: ConstantEstimate {
            value: r.value,
            certified_lower: Some(delta_lower_bound(&gram(cone))),
            method: Method::Multistart,
            starts_used: r.starts_used,
        },
        psi: psi_of(r.value, cone.walls()),
    })
}

/// Dense grid estimate, dimension at most 3.
pub fn capacity_delta_grid(cone: &ConeSpec) -> Result<Option<Capacity>> {
    require_square(cone)?;
    Ok(sphere::grid_oracle(&AbsMargin::new(cone), &Domain::Sphere).map(|r| Capacity {
        delta: ConstantEstimate {
            value: r.value,
            certified_lower: Some(delta_lower_bound(&gram(cone))),
            method: Method::GridOracle,
            starts_used: r.starts_used,
        },
        psi: psi_of(r.value, cone.walls()),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::make_cone;
    use crate::wedge::wedge_cone;
    use std::f64::consts::PI;

    #[test]
    fn orthant_delta() {
        for n in 1..=6 {
            let c = make_cone(n, &linalg::identity(n)).unwrap();
            let cap = capacity_delta(&c).unwrap();
            assert!((cap.delta.value - 1.0 / (n as f64).sqrt()).abs() < 1e-14);
            assert!((cap.delta.certified_lower.unwrap() - cap.delta.value).abs() < 1e-12);
        }
    }

    #[test]
    fn wedge_delta_matches_grid() {
        for theta in [PI / 2.0, PI / 3.0, 2.0 * PI / 3.0, 0.2] {
            let c = wedge_cone(theta).unwrap();
            let exact = capacity_delta(&c).unwrap().delta.value;
            let closed = (theta.min(PI - theta) / 2.0).sin();
            assert!((exact - closed).abs() < 1e-14, "theta={theta}");
            let grid = capacity_delta_grid(&c).unwrap().unwrap().delta.value;
            assert!(grid >= exact - 1e-15 && grid - exact < 1e-9);
        }
        let c = wedge_cone(PI / 2.0).unwrap();
        let cap = capacity_delta(&c).unwrap();
        assert!((cap.delta.certified_lower.unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn single_wall_psi_is_right_angle() {
        let c = make_cone(1, &[vec![-3.0]]).unwrap();
        let cap = capacity_delta(&c).unwrap();
        assert_eq!(cap.delta.value, 1.0);
        assert_eq!(cap.psi, std::f64::consts::FRAC_PI_2);
    }

    #[test]
    fn multistart_needs_square_cone() {
        let c = make_cone(3, &[vec![1.0, 0.0, 0.0]]).unwrap();
        assert!(capacity_delta_multistart(&c, &MultistartOptions::default()).is_err());
        // the exact route works on the span
        assert_eq!(capacity_delta(&c).unwrap().delta.value, 1.0);
    }
}
