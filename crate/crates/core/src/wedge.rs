//! Two walls: the wedge angle, its sharp collision bound `ceil(pi/theta)`,
//! unfolding and the velocity-arc picture.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::cone::{gram, make_cone, ConeSpec, GramMatrix};
use crate::error::{Error, Result};
use crate::linalg::{self, dot};
use crate::simulator::{BilliardState, TrajectoryRecord};

/// Angular slack used when checking the velocity-arc identities.
pub const ARC_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct WedgeSpec {
    pub theta: f64,
    pub cone: ConeSpec,
}

impl WedgeSpec {
    pub fn new(cone: ConeSpec) -> Result<Self> {
        let theta = wedge_angle(&cone)?;
        Ok(WedgeSpec { theta, cone })
    }

    pub fn from_angle(theta: f64) -> Result<Self> {
        WedgeSpec::new(wedge_cone(theta)?)
    }

    pub fn sharp_bound(&self) -> u64 {
        sharp_bound(self.theta)
    }
}

/// The wedge `{ 0 <= arg y <= theta }`: wall 0 lies on the positive x-axis,
/// wall 1 on the ray at angle `theta`.
pub fn wedge_cone(theta: f64) -> Result<ConeSpec> {
    if !(theta > 0.0 && theta < PI) {
        return Err(Error::Config(format!("wedge angle {theta} is not in (0, pi)")));
    }
    make_cone(2, &[vec![0.0, 1.0], vec![theta.sin(), -theta.cos()]])
}

pub fn angle_from_gram(g: &GramMatrix) -> f64 {
    (-g.get(0, 1)).clamp(-1.0, 1.0).acos()
}

/// `theta = arccos(-(a_1, a_2))`
pub fn wedge_angle(cone: &ConeSpec) -> Result<f64> {
    if cone.walls() != 2 {
        return Err(Error::WrongWallCount { expected: 2, found: cone.walls() });
    }
    Ok(angle_from_gram(&gram(cone)))
}

/// `ceil(pi / theta)`. Ratios within `1e-9` above an integer are rounded
/// down so that angles like `pi/3`, which are not representable, still give
/// the exact integer.
pub fn sharp_bound(theta: f64) -> u64 {
    let ratio = PI / theta;
    (ratio - 1e-9).ceil().max(1.0) as u64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Unfolding {
    pub points: Vec<[f64; 2]>,
    /// Largest distance of a point from the best-fit line.
    pub residual: f64,
}

fn check_planar(record: &TrajectoryRecord, wedge: &WedgeSpec) -> Result<()> {
    if record.walls != 2 || record.dim != 2 || wedge.cone.dim() != 2 {
        return Err(Error::ConeMismatch);
    }
    Ok(())
}

/// Maps the trajectory into successive reflected copies of the wedge so that
/// it becomes a straight line. Breakpoints: the start, every collision and
/// one unit of flight after the last collision.
pub fn unfold(record: &TrajectoryRecord, wedge: &WedgeSpec) -> Result<Unfolding> {
    check_planar(record, wedge)?;
    let reflection = |a: &[f64]| -> [[f64; 2]; 2] {
        [[1.0 - 2.0 * a[0] * a[0], -2.0 * a[0] * a[1]], [-2.0 * a[1] * a[0], 1.0 - 2.0 * a[1] * a[1]]]
    };
    let apply = |t: &[[f64; 2]; 2], x: &[f64]| [t[0][0] * x[0] + t[0][1] * x[1], t[1][0] * x[0] + t[1][1] * x[1]];

    let mut map = [[1.0, 0.0], [0.0, 1.0]];
    let mut points = vec![[record.initial.q[0], record.initial.q[1]]];
    for ev in &record.events {
        points.push(apply(&map, &ev.q_at));
        let r = reflection(wedge.cone.normal(ev.wall));
        let mut next = [[0.0; 2]; 2];
        for (i, row) in next.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                *x = map[i][0] * r[0][j] + map[i][1] * r[1][j];
            }
        }
        map = reorthonormalize(next);
    }
    let last = record.last_state();
    points.push(apply(&map, &linalg::axpy(&last.q, 1.0, &last.v)));
    let residual = collinearity_residual(&points);
    Ok(Unfolding { points, residual })
}

/// Gram-Schmidt on the columns, keeping their orientation.
fn reorthonormalize(m: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let c0 = [m[0][0], m[1][0]];
    let n0 = (c0[0] * c0[0] + c0[1] * c0[1]).sqrt();
    let c0 = [c0[0] / n0, c0[1] / n0];
    let c1 = [m[0][1], m[1][1]];
    let p = c0[0] * c1[0] + c0[1] * c1[1];
    let c1 = [c1[0] - p * c0[0], c1[1] - p * c0[1]];
    let n1 = (c1[0] * c1[0] + c1[1] * c1[1]).sqrt();
    let c1 = [c1[0] / n1, c1[1] / n1];
    [[c0[0], c1[0]], [c0[1], c1[1]]]
}

/// Max distance from the total-least-squares line through `points`.
pub fn collinearity_residual(points: &[[f64; 2]]) -> f64 {
    if points.len() < 3 {
        return 0.0;
    }
    let k = points.len() as f64;
    let cx = points.iter().map(|p| p[0]).sum::<f64>() / k;
    let cy = points.iter().map(|p| p[1]).sum::<f64>() / k;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in points {
        let (dx, dy) = (p[0] - cx, p[1] - cy);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let eig = linalg::symmetric_eigen(&vec![vec![sxx, sxy], vec![sxy, syy]]);
    // the normal of the line is the eigenvector of the smaller eigenvalue
    let normal = &eig.vectors[0];
    points
        .iter()
        .map(|p| ((p[0] - cx) * normal[0] + (p[1] - cy) * normal[1]).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcReport {
    /// Angle at `v_k` between `v_{k-1}` and `v_{k+1}`, for `k = 1..N-1`.
    pub angles: Vec<f64>,
    pub max_angle_error: f64,
    /// `2 theta (N - 1)`
    pub turning: f64,
    pub pass: bool,
}

/// Each interior vertex of the velocity polygon has angle `theta`, and the
/// arcs `v_{k-1} v_{k+1}` of length `2 theta` fit on the circle.
pub fn velocity_arc_check(record: &TrajectoryRecord, wedge: &WedgeSpec) -> Result<ArcReport> {
    check_planar(record, wedge)?;
    let n = record.collisions();
    if n < 2 {
        return Err(Error::TooFewEvents { needed: 2, found: n });
    }
    if let Some(index) = record.events.windows(2).position(|w| w[0].wall == w[1].wall) {
        return Err(Error::Alternation { index });
    }
    let vs = &record.velocities;
    let angles: Vec<f64> = (1..n)
        .map(|k| {
            let a = linalg::sub(&vs[k - 1], &vs[k]);
            let b = linalg::sub(&vs[k + 1], &vs[k]);
            (dot(&a, &b) / (linalg::norm(&a) * linalg::norm(&b))).clamp(-1.0, 1.0).acos()
        })
        .collect();
    let max_angle_error = angles.iter().map(|a| (a - wedge.theta).abs()).fold(0.0, f64::max);
    let turning = 2.0 * wedge.theta * (n as f64 - 1.0);
    let pass = max_angle_error < ARC_TOL && turning < 2.0 * PI + ARC_TOL;
    Ok(ArcReport { angles, max_angle_error, turning, pass })
}

/// Starts on the unit circle inside the wedge, aimed close to the apex:
/// in the unfolded picture these lines sweep the widest range of copies.
pub fn probe_states(wedge: &WedgeSpec, per_axis: usize) -> Vec<BilliardState> {
    let Some(rays) = crate::constants::sphere::dual_rays(&wedge.cone) else { return Vec::new() };
    let mut out = Vec::with_capacity(per_axis * per_axis * 2);
    for i in 0..per_axis {
        let s = (i as f64 + 0.5) / per_axis as f64;
        let Some(p) = linalg::normalized(&linalg::axpy(&linalg::scaled(&rays[0], 1.0 - s), s, &rays[1])) else {
            continue;
        };
        for j in 0..per_axis {
            let eta = wedge.theta.min(PI / 2.0) * (j as f64 + 0.5) / per_axis as f64;
            for sign in [1.0, -1.0] {
                let (c, s) = ((sign * eta).cos(), (sign * eta).sin());
                let v = vec![-(c * p[0] - s * p[1]), -(s * p[0] + c * p[1])];
                if let Ok(state) = BilliardState::new(p.clone(), v) {
                    out.push(state);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::{run_default, Terminal};

    #[test]
    fn wedge_angle_examples() {
        let c = make_cone(2, &linalg::identity(2)).unwrap();
        assert!((wedge_angle(&c).unwrap() - PI / 2.0).abs() < 1e-15);
        let g = |c: f64| GramMatrix::from_entries(vec![vec![1.0, c], vec![c, 1.0]]).unwrap();
        assert!((angle_from_gram(&g(-0.5)) - PI / 3.0).abs() < 1e-15);
        assert!((angle_from_gram(&g(0.5)) - 2.0 * PI / 3.0).abs() < 1e-15);
        let c3 = make_cone(3, &linalg::identity(3)).unwrap();
        assert_eq!(wedge_angle(&c3), Err(Error::WrongWallCount { expected: 2, found: 3 }));
    }

    #[test]
    fn wedge_cone_has_requested_angle() {
        for theta in [0.1, PI / 3.0, 2.0, 3.0] {
            let w = WedgeSpec::from_angle(theta).unwrap();
            assert!((w.theta - theta).abs() < 1e-12);
        }
        assert!(wedge_cone(PI).is_err());
        assert!(wedge_cone(0.0).is_err());
    }

    #[test]
    fn sharp_bound_examples() {
        assert_eq!(sharp_bound(PI / 2.0), 2);
        assert_eq!(sharp_bound(PI / 3.0), 3);
        assert_eq!(sharp_bound(2.0 * PI / 5.0), 3);
        assert_eq!(sharp_bound(PI / 5.0), 5);
        assert_eq!(sharp_bound(0.99 * PI), 2);
    }

    #[test]
    fn unfold_zero_and_one_collision() {
        let w = WedgeSpec::from_angle(PI / 2.0).unwrap();
        let s = BilliardState::new(vec![1.0, 1.0], vec![1.0, 1.0]).unwrap();
        let rec = run_default(&s, &w.cone).unwrap();
        let u = unfold(&rec, &w).unwrap();
        assert_eq!(u.points.len(), 2);

        let s = BilliardState::new(vec![1.0, 2.0], vec![1.0, -1.0]).unwrap();
        let rec = run_default(&s, &w.cone).unwrap();
        assert_eq!(rec.collisions(), 1);
        let u = unfold(&rec, &w).unwrap();
        assert_eq!(u.points.len(), 3);
        assert!(u.residual < 1e-10);
        // unfolded continuation crosses into y < 0
        assert!(u.points[2][1] < 0.0);
    }

    #[test]
    fn arc_check_right_angle() {
        let w = WedgeSpec::from_angle(PI / 2.0).unwrap();
        let s = BilliardState::new(vec![1.0, 2.0], vec![-2.0, -1.0]).unwrap();
        let rec = run_default(&s, &w.cone).unwrap();
        assert_eq!(rec.collisions(), 2);
        let arc = velocity_arc_check(&rec, &w).unwrap();
        assert_eq!(arc.angles.len(), 1);
        assert!((arc.angles[0] - PI / 2.0).abs() < 1e-9);
        assert!(arc.pass);

        let s = BilliardState::new(vec![1.0, 1.0], vec![0.0, -1.0]).unwrap();
        let rec = run_default(&s, &w.cone).unwrap();
        assert_eq!(velocity_arc_check(&rec, &w), Err(Error::TooFewEvents { needed: 2, found: 1 }));
    }

    #[test]
    fn probes_reach_the_sharp_bound() {
        for theta in [PI / 2.0, PI / 3.0, 2.0 * PI / 5.0, PI / 5.0] {
            let w = WedgeSpec::from_angle(theta).unwrap();
            let best = probe_states(&w, 24)
                .iter()
                .filter_map(|s| run_default(s, &w.cone).ok())
                .filter(|r| r.terminal == Terminal::Escaped)
                .map(|r| r.collisions())
                .max()
                .unwrap();
            assert_eq!(best as u64, sharp_bound(theta), "theta={theta}");
        }
    }
}
