//! Charges of a cone and of an arrangement.
//!
//! The charge `S(Q)` is `arcsin` of the best worst-case margin
//! `max_{|u|=1, u in Q} min_i (u, a_i)`. That max-min over the unit ball is
//! attained at `u = p / |p|` where `p` is the point of `conv{a_i}` nearest
//! the origin; `p` is the minimum-norm point of the affine hull of the walls
//! in its support, so enumerating all wall subsets finds it exactly. Each
//! subset is solved from the Gram matrix alone.

use crate::cone::{gram, ConeSpec, GramMatrix};
use crate::constants::{ConstantEstimate, Method};
use crate::linalg;

/// Margins at or below this mean the sign cone has empty interior.
pub const FEASIBILITY_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct MarginOptimum {
    /// `max_{|u| <= 1} min_i (u, a_i)`.
    pub margin: f64,
    /// Walls with equal margin at the optimum.
    pub active: Vec<usize>,
    /// `u = sum_i weights[i] a_i` is the optimal unit direction.
    pub weights: Vec<f64>,
}

pub(crate) fn subsets(n: usize) -> impl Iterator<Item = Vec<usize>> {
    (1u64..(1u64 << n)).map(move |mask| (0..n).filter(|&i| mask & (1 << i) != 0).collect())
}

/// Equal-margin stationary points over all wall subsets; the best true
/// worst-case margin among the candidates is returned.
pub fn max_min_margin(g: &GramMatrix) -> MarginOptimum {
    let n = g.order();
    let mut best = MarginOptimum { margin: f64::NEG_INFINITY, active: Vec::new(), weights: vec![0.0; n] };
    for subset in subsets(n) {
        let sub = g.principal(&subset);
        let Some(x) = linalg::solve(&sub, &vec![1.0; subset.len()]) else { continue };
        let total: f64 = x.iter().sum();
        if total <= 0.0 || !total.is_finite() {
            continue;
        }
        // p = sum lambda_i a_i with lambda = x / total, |p| = 1 / sqrt(total)
        let p_norm = total.sqrt().recip();
        let mut weights = vec![0.0; n];
        for (&i, xi) in subset.iter().zip(&x) {
            weights[i] = xi / total / p_norm;
        }
        // (u, a_j) for all walls
        let margin = (0..n)
            .map(|j| subset.iter().map(|&i| weights[i] * g.get(i, j)).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        if margin > best.margin {
            best = MarginOptimum { margin, active: subset, weights };
        }
    }
    best
}

fn charge_from_margin(margin: f64) -> f64 {
    margin.clamp(-1.0, 1.0).asin()
}

/// `S(Q)` in radians.
pub fn charge_sq(cone: &ConeSpec) -> ConstantEstimate {
    let opt = max_min_margin(&gram(cone));
    ConstantEstimate {
        value: charge_from_margin(opt.margin),
        certified_lower: None,
        method: Method::SubsetEnumeration,
        starts_used: (1usize << cone.walls()) - 1,
    }
}

/// Sign vector number `k` in `{+1,-1}^n` (bit `i` set means `-1`).
pub(crate) fn sign_vector(k: u64, n: usize) -> Vec<f64> {
    (0..n).map(|i| if k & (1 << i) != 0 { -1.0 } else { 1.0 }).collect()
}

/// Charge `phi` of the arrangement: the least `S` over the full-dimensional
/// cones cut out by the hyperplanes. `starts_used` counts those cones.
pub fn charge_phi(cone: &ConeSpec) -> ConstantEstimate {
    charge_phi_from_gram(&gram(cone))
}

pub(crate) fn charge_phi_from_gram(g: &GramMatrix) -> ConstantEstimate {
    let n = g.order();
    let mut phi = f64::INFINITY;
    let mut feasible = 0;
    for k in 0..(1u64 << n) {
        let signs = sign_vector(k, n);
        let opt = max_min_margin(&g.with_signs(&signs));
        if opt.margin > FEASIBILITY_MARGIN {
            feasible += 1;
            phi = phi.min(charge_from_margin(opt.margin));
        }
    }
    ConstantEstimate { value: phi, certified_lower: None, method: Method::SubsetEnumeration, starts_used: feasible }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::make_cone;
    use crate::wedge::wedge_cone;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_6, PI};

    /// max over a fine grid of unit u in the plane of min_i (u, a_i)
    fn planar_grid_charge(cone: &ConeSpec) -> f64 {
        let k = 2_000_000;
        (0..k)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / k as f64;
                let u = [t.cos(), t.sin()];
                cone.margins(&u).into_iter().fold(f64::INFINITY, f64::min)
            })
            .fold(f64::NEG_INFINITY, f64::max)
            .asin()
    }

    #[test]
    fn charge_sq_examples() {
        let orthant = make_cone(2, &[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let s = charge_sq(&orthant).value;
        assert!((s - FRAC_PI_4).abs() < 1e-12);
        assert!((planar_grid_charge(&orthant) - s).abs() < 1e-5);

        let w = wedge_cone(PI / 3.0).unwrap();
        let s = charge_sq(&w).value;
        assert!((s - FRAC_PI_6).abs() < 1e-12);
        assert!((planar_grid_charge(&w) - s).abs() < 1e-5);

        let half = make_cone(1, &[vec![1.0]]).unwrap();
        assert!((charge_sq(&half).value - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn obtuse_wedge_charge_is_not_the_inscribed_ball() {
        // wedge angle 2pi/3: the bisector makes angle pi/3 with both walls
        let w = wedge_cone(2.0 * PI / 3.0).unwrap();
        let s = charge_sq(&w).value;
        assert!((s - PI / 3.0).abs() < 1e-12);
        assert!((planar_grid_charge(&w) - s).abs() < 1e-5);
    }

    #[test]
    fn charge_phi_examples() {
        let orthant = make_cone(2, &[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let p = charge_phi(&orthant);
        assert!((p.value - FRAC_PI_4).abs() < 1e-12);
        assert_eq!(p.starts_used, 4);

        let w = wedge_cone(PI / 3.0).unwrap();
        assert!((charge_phi(&w).value - FRAC_PI_6).abs() < 1e-12);

        let half = make_cone(1, &[vec![1.0]]).unwrap();
        assert!((charge_phi(&half).value - FRAC_PI_2).abs() < 1e-15);
    }
}
