//! Scalar characteristics of a cone and the collision-count bounds built
//! from them.

pub mod capacity;
pub mod charge;
pub mod nondegeneracy;
pub mod sphere;

use serde::{Deserialize, Serialize};

use crate::cone::{self, gram, min_eigenvalue, ConeSpec, GramMatrix};
use crate::error::{Error, Result};
use crate::linalg;
use crate::wedge;

pub use capacity::{capacity_delta, capacity_delta_grid, capacity_delta_multistart, Capacity};
pub use charge::{charge_phi, charge_sq, max_min_margin};
pub use nondegeneracy::{bfk_constant, bfk_constant_grid, bfk_constant_multistart};
pub use sphere::MultistartOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    SubsetEnumeration,
    Multistart,
    GridOracle,
}

/// How a constant was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantEstimate {
    pub value: f64,
    pub certified_lower: Option<f64>,
    pub method: Method,
    pub starts_used: usize,
}

impl ConstantEstimate {
    /// `value - certified_lower`, when a certificate exists.
    pub fn gap(&self) -> Option<f64> {
        self.certified_lower.map(|l| self.value - l)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateOptions {
    pub multistart: MultistartOptions,
    /// Refine nonconvex minimax constants with the dense grid when the
    /// (reduced) dimension is at most 3.
    pub grid_refine: bool,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions { multistart: MultistartOptions::default(), grid_refine: true }
    }
}

impl EstimateOptions {
    /// Multistart only, 16 starts of 200 iterations; used for large
    /// ensembles. On random cones with n <= 5 it stays within 1e-8 of the
    /// default setting.
    pub fn fast() -> Self {
        EstimateOptions {
            multistart: MultistartOptions { starts: 16, iterations: 200, ..MultistartOptions::default() },
            grid_refine: false,
        }
    }
}

/// Largest ball centred on the unit sphere inside `Q`: `(e, a_i) = d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InscribedBall {
    pub d: f64,
    pub e: Vec<f64>,
}

/// Solves `A^T w = (1, ..., 1)`; then `d = 1 / |w|`, `e = d w`.
pub fn inscribed_ball(cone: &ConeSpec) -> Result<InscribedBall> {
    if !cone.is_square() {
        return Err(Error::NotSquare { walls: cone.walls(), dim: cone.dim() });
    }
    let n = cone.walls();
    let at = cone.normals().to_vec();
    let w = linalg::solve(&at, &vec![1.0; n]).ok_or(Error::DegenerateArrangement { sigma_min: 0.0 })?;
    let d = linalg::norm(&w).recip();
    Ok(InscribedBall { d, e: linalg::scaled(&w, d) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TridiagonalCase {
    pub applicable: bool,
    pub bound: Option<u64>,
}

/// Banded arrangements with neighbour products `>= -1/2` admit at most
/// `n(n+1)/2` collisions.
pub fn tridiagonal_case(g: &GramMatrix) -> TridiagonalCase {
    let n = g.order();
    let banded = (0..n).all(|i| (i + 2..n).all(|j| g.get(i, j).abs() <= 1e-12));
    let neighbours = (0..n.saturating_sub(1)).all(|i| g.get(i, i + 1) >= -0.5 - 1e-12);
    let applicable = banded && neighbours;
    let n = n as u64;
    TridiagonalCase { applicable, bound: applicable.then_some(n * (n + 1) / 2) }
}

/// `n!` in floating point.
pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `n! (4 / lambda_min)^(n-1)`
pub fn bound_main(n: usize, lambda_min: f64) -> f64 {
    factorial(n) * (4.0 / lambda_min).powi(n as i32 - 1)
}

/// `(4 / (d delta))^(n-1)`
pub fn bound_dd(n: usize, d: f64, delta: f64) -> f64 {
    (4.0 / (d * delta)).powi(n as i32 - 1)
}

/// `(sin^2 phi / 2) (4 / sin^2 phi)^(2^(n-1)) - 1`
pub fn bound_sevryuk(n: usize, phi: f64) -> f64 {
    let s2 = phi.sin().powi(2);
    let exponent = 2f64.powi(n as i32 - 1);
    s2 / 2.0 * (4.0 / s2).powf(exponent) - 1.0
}

/// `8 (1/C + 2)^(2(n-1))`
pub fn bound_bfk(n: usize, c: f64) -> f64 {
    8.0 * (1.0 / c + 2.0).powi(2 * (n as i32 - 1))
}

/// All constants and bounds of a cone. Field names are the serialized keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    /// Number of walls.
    pub n: usize,
    /// Ambient dimension of the input cone.
    pub m: usize,
    pub lambda_min: f64,
    pub d: f64,
    pub delta: f64,
    pub psi: f64,
    #[serde(rename = "charge_SQ")]
    pub charge_sq: f64,
    pub charge_phi: f64,
    #[serde(rename = "bfk_C")]
    pub bfk_c: f64,
    pub bound_main: f64,
    pub bound_dd: f64,
    pub bound_sevryuk: f64,
    pub bound_bfk: f64,
    pub bound_wedge: Option<u64>,
    pub bound_tridiagonal: Option<u64>,
    pub tridiagonal_applicable: bool,
}

impl BoundsReport {
    /// Key/value pairs in declaration order; 17 significant digits for reals.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let r = |x: f64| format!("{x:.16e}");
        let o = |x: Option<u64>| x.map(|v| v.to_string()).unwrap_or_default();
        vec![
            ("n", self.n.to_string()),
            ("m", self.m.to_string()),
            ("lambda_min", r(self.lambda_min)),
            ("d", r(self.d)),
            ("delta", r(self.delta)),
            ("psi", r(self.psi)),
            ("charge_SQ", r(self.charge_sq)),
            ("charge_phi", r(self.charge_phi)),
            ("bfk_C", r(self.bfk_c)),
            ("bound_main", r(self.bound_main)),
            ("bound_dd", r(self.bound_dd)),
            ("bound_sevryuk", r(self.bound_sevryuk)),
            ("bound_bfk", r(self.bound_bfk)),
            ("bound_wedge", o(self.bound_wedge)),
            ("bound_tridiagonal", o(self.bound_tridiagonal)),
            ("tridiagonal_applicable", self.tridiagonal_applicable.to_string()),
        ]
    }

    /// `key = value` lines.
    pub fn to_text(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {}\n", if v.is_empty() { "none".into() } else { v }))
            .collect()
    }

    /// Header line plus one data line.
    pub fn to_csv(&self) -> String {
        let e = self.entries();
        let header: Vec<&str> = e.iter().map(|(k, _)| *k).collect();
        let values: Vec<&str> = e.iter().map(|(_, v)| v.as_str()).collect();
        format!("{}\n{}\n", header.join(","), values.join(","))
    }

    /// Smallest finite bound, the budget every trajectory must respect.
    pub fn tightest_bound(&self) -> f64 {
        [self.bound_main, self.bound_dd, self.bound_sevryuk, self.bound_bfk]
            .into_iter()
            .chain(self.bound_wedge.map(|b| b as f64))
            .chain(self.bound_tridiagonal.map(|b| b as f64))
            .filter(|b| b.is_finite())
            .fold(f64::INFINITY, f64::min)
    }

    /// Step budget for a trajectory: `ceil(bound_main) + 1`, saturating.
    pub fn default_max_steps(&self) -> usize {
        let b = self.bound_main.ceil();
        if b.is_finite() && b < 1e15 {
            b as usize + 1
        } else {
            usize::MAX
        }
    }
}

/// Computes every constant and bound. Cones with fewer walls than the
/// ambient dimension are first re-expressed on the span of their normals.
pub fn bounds_report(cone: &ConeSpec) -> Result<BoundsReport> {
    bounds_report_with(cone, &EstimateOptions::default())
}

pub fn bounds_report_with(cone: &ConeSpec, opts: &EstimateOptions) -> Result<BoundsReport> {
    let reduced;
    let square = if cone.is_square() {
        cone
    } else {
        reduced = cone::reduce(cone)?.0;
        &reduced
    };
    let n = square.walls();
    let g = gram(square);
    let lambda = min_eigenvalue(&g);
    if !lambda.positive_definite {
        return Err(Error::DegenerateArrangement { sigma_min: 0.0 });
    }
    let lambda_min = lambda.value;
    let ball = inscribed_ball(square)?;
    let cap = capacity_delta(square)?;
    let charge_sq = charge_sq(square).value;
    let charge_phi = charge::charge_phi_from_gram(&g).value;
    let c = bfk_constant(square, opts)?.value;
    let tri = tridiagonal_case(&g);
    let bound_wedge = (n == 2).then(|| wedge::sharp_bound(wedge::angle_from_gram(&g)));
    Ok(BoundsReport {
        n,
        m: cone.dim(),
        lambda_min,
        d: ball.d,
        delta: cap.delta.value,
        psi: cap.psi,
        charge_sq,
        charge_phi,
        bfk_c: c,
        bound_main: bound_main(n, lambda_min),
        bound_dd: bound_dd(n, ball.d, cap.delta.value),
        bound_sevryuk: bound_sevryuk(n, charge_phi),
        bound_bfk: bound_bfk(n, c),
        bound_wedge,
        bound_tridiagonal: tri.bound,
        tridiagonal_applicable: tri.applicable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::make_cone;
    use crate::wedge::wedge_cone;
    use std::f64::consts::PI;

    #[test]
    fn inscribed_ball_examples() {
        for n in 1..=5 {
            let c = make_cone(n, &linalg::identity(n)).unwrap();
            let b = inscribed_ball(&c).unwrap();
            let s = 1.0 / (n as f64).sqrt();
            assert!((b.d - s).abs() < 1e-15);
            assert!(b.e.iter().all(|x| (x - s).abs() < 1e-15));
        }
        let b = inscribed_ball(&wedge_cone(PI / 2.0).unwrap()).unwrap();
        assert!((b.d - 0.5f64.sqrt()).abs() < 1e-15);
        let b = inscribed_ball(&wedge_cone(PI / 3.0).unwrap()).unwrap();
        assert!((b.d - 0.5).abs() < 1e-15);
    }

    #[test]
    fn inscribed_ball_requires_square() {
        let c = make_cone(3, &[vec![1.0, 0.0, 0.0]]).unwrap();
        assert!(matches!(inscribed_ball(&c), Err(Error::NotSquare { .. })));
    }

    #[test]
    fn tridiagonal_examples() {
        let id = GramMatrix::from_entries(linalg::identity(3)).unwrap();
        assert_eq!(tridiagonal_case(&id), TridiagonalCase { applicable: true, bound: Some(6) });
        let w = GramMatrix::from_entries(vec![vec![1.0, -0.5], vec![-0.5, 1.0]]).unwrap();
        assert_eq!(tridiagonal_case(&w).bound, Some(3));
        let g = GramMatrix::from_entries(vec![
            vec![1.0, 0.0, 0.2],
            vec![0.0, 1.0, 0.0],
            vec![0.2, 0.0, 1.0],
        ])
        .unwrap();
        assert_eq!(tridiagonal_case(&g), TridiagonalCase { applicable: false, bound: None });
        let steep = GramMatrix::from_entries(vec![vec![1.0, -0.6], vec![-0.6, 1.0]]).unwrap();
        assert!(!tridiagonal_case(&steep).applicable);
    }

    #[test]
    fn bounds_report_examples() {
        let r = bounds_report(&make_cone(2, &linalg::identity(2)).unwrap()).unwrap();
        assert_eq!(r.bound_main, 8.0);
        assert_eq!(r.bound_wedge, Some(2));
        assert_eq!(r.bound_tridiagonal, Some(3));

        let r = bounds_report(&wedge_cone(PI / 3.0).unwrap()).unwrap();
        assert!((r.lambda_min - 0.5).abs() < 1e-15);
        assert!((r.bound_main - 16.0).abs() < 1e-12);
        assert_eq!(r.bound_wedge, Some(3));

        let r = bounds_report(&make_cone(3, &linalg::identity(3)).unwrap()).unwrap();
        assert_eq!(r.bound_main, 96.0);
        assert_eq!(r.bound_wedge, None);
    }

    #[test]
    fn bounds_report_reduces_span() {
        let c = make_cone(3, &[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap();
        let r = bounds_report(&c).unwrap();
        assert_eq!((r.n, r.m), (2, 3));
        assert_eq!(r.bound_main, 8.0);
        assert!((r.d - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn bound_formulas() {
        assert_eq!(factorial(5), 120.0);
        assert_eq!(bound_main(1, 0.3), 1.0);
        // (4 / (1/2 * 1/2))^1
        assert_eq!(bound_dd(2, 0.5, 0.5), 16.0);
        // phi = pi/2: 1/2 * 4^(2^(n-1)) - 1
        assert!((bound_sevryuk(2, PI / 2.0) - 7.0).abs() < 1e-12);
        assert_eq!(bound_bfk(2, 1.0), 72.0);
    }

    #[test]
    fn report_serializes_with_exact_keys() {
        let r = bounds_report(&make_cone(2, &linalg::identity(2)).unwrap()).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        let obj = v.as_object().unwrap();
        for key in ["lambda_min", "charge_SQ", "charge_phi", "bfk_C", "bound_wedge", "tridiagonal_applicable"] {
            assert!(obj.contains_key(key), "{key}");
        }
        let back: BoundsReport = serde_json::from_value(v).unwrap();
        assert_eq!(back, r);
        assert!(r.to_text().contains("bound_main = 8.0000000000000000e0"));
        assert_eq!(r.to_csv().lines().count(), 2);
    }
}
