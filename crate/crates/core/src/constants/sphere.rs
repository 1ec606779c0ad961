//! Minimization of a max-of-pieces function over the unit sphere, optionally
//! restricted to a cone. Two independent routes: multistart descent from
//! low-discrepancy directions, and a dense grid with local zoom (m <= 3).

use crate::cone::ConeSpec;
use crate::linalg::{self, dot, norm, Matrix};

/// One smooth piece of a max-type objective, with its Euclidean gradient.
#[derive(Debug, Clone)]
pub(crate) struct Piece {
    pub grad: Vec<f64>,
}

pub(crate) trait MaxObjective {
    fn dim(&self) -> usize;
    fn value(&self, y: &[f64]) -> f64;
    /// Pieces whose value is at least `floor`.
    fn pieces_above(&self, y: &[f64], floor: f64) -> Vec<Piece>;
}

/// Where the unit vector lives.
#[derive(Debug, Clone)]
pub(crate) enum Domain {
    Sphere,
    /// Unit vectors of a square cone. `rays[i]` is the extreme ray dual to
    /// wall `i`, i.e. `(rays[i], a_j) = delta_ij`.
    Cone { normals: Vec<Vec<f64>>, rays: Vec<Vec<f64>> },
}

impl Domain {
    pub fn cone(cone: &ConeSpec) -> Option<Domain> {
        let rays = dual_rays(cone)?;
        Some(Domain::Cone { normals: cone.normals().to_vec(), rays })
    }

    fn dim(&self) -> Option<usize> {
        match self {
            Domain::Sphere => None,
            Domain::Cone { normals, .. } => Some(normals[0].len()),
        }
    }

    /// Maps `y` to a unit vector of the domain (clamping the cone
    /// coordinates at zero). `None` if nothing of the cone is left.
    fn retract(&self, y: &[f64]) -> Option<Vec<f64>> {
        match self {
            Domain::Sphere => linalg::normalized(y),
            Domain::Cone { normals, rays } => {
                let mut out = vec![0.0; y.len()];
                for (a, r) in normals.iter().zip(rays) {
                    let z = dot(a, y).max(0.0);
                    if z > 0.0 {
                        for (o, x) in out.iter_mut().zip(r) {
                            *o += z * x;
                        }
                    }
                }
                linalg::normalized(&out)
            }
        }
    }

    fn combine(&self, w: &[f64]) -> Option<Vec<f64>> {
        match self {
            Domain::Sphere => linalg::normalized(w),
            Domain::Cone { rays, .. } => {
                let mut out = vec![0.0; rays[0].len()];
                for (wi, r) in w.iter().zip(rays) {
                    for (o, x) in out.iter_mut().zip(r) {
                        *o += wi * x;
                    }
                }
                linalg::normalized(&out)
            }
        }
    }
}

/// Columns of `A^{-T}`: the extreme rays of a square cone.
pub(crate) fn dual_rays(cone: &ConeSpec) -> Option<Vec<Vec<f64>>> {
    let n = cone.walls();
    if n != cone.dim() {
        return None;
    }
    // A^T y = e_i  (rows of A^T are the normals)
    let at: Matrix = cone.normals().to_vec();
    (0..n)
        .map(|i| {
            let mut rhs = vec![0.0; n];
            rhs[i] = 1.0;
            linalg::solve(&at, &rhs)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultistartOptions {
    pub starts: usize,
    pub iterations: usize,
    /// Initial step length along the sphere.
    pub initial_step: f64,
    /// A start stops once its step has been halved below this.
    pub min_step: f64,
}

impl Default for MultistartOptions {
    fn default() -> Self {
        MultistartOptions { starts: 256, iterations: 500, initial_step: 0.25, min_step: 1e-10 }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct SearchResult {
    pub value: f64,
    pub argmin: Vec<f64>,
    pub starts_used: usize,
}

const FIRST_PRIMES: [u32; 32] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
    101, 103, 107, 109, 113, 127, 131,
];

/// Radical inverse of `index` in `base`.
pub(crate) fn radical_inverse(mut index: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while index > 0 {
        r += f * (index % b) as f64;
        index /= b;
        f *= inv;
    }
    r
}

/// Halton point `index` (1-based offset avoids the origin) in `[0,1)^dim`.
pub(crate) fn halton(index: u64, dim: usize) -> Vec<f64> {
    (0..dim).map(|k| radical_inverse(index + 1, FIRST_PRIMES[k % FIRST_PRIMES.len()])).collect()
}

/// Low-discrepancy start direction `k` for the domain.
fn start_direction(domain: &Domain, dim: usize, k: usize) -> Option<Vec<f64>> {
    match domain {
        Domain::Sphere => {
            // Box-Muller on consecutive pairs of Halton coordinates
            let pairs = dim.div_ceil(2);
            let u = halton(k as u64, 2 * pairs);
            let mut g = Vec::with_capacity(2 * pairs);
            for p in 0..pairs {
                let r = (-2.0 * (1.0 - u[2 * p]).ln()).sqrt();
                let t = 2.0 * std::f64::consts::PI * u[2 * p + 1];
                g.push(r * t.cos());
                g.push(r * t.sin());
            }
            g.truncate(dim);
            linalg::normalized(&g)
        }
        Domain::Cone { .. } => {
            if k == 0 {
                // all rays equally weighted: the inscribed-ball direction
                return domain.combine(&vec![1.0; dim]);
            }
            // exponential spacings of a Halton point are uniform on the simplex
            let w: Vec<f64> = halton(k as u64, dim).iter().map(|u| -(1.0 - u).ln()).collect();
            domain.combine(&w)
        }
    }
}

/// Descent on the sphere using the minimum-norm element of the tangential
/// gradients of all nearly active pieces; steps are accepted only when the
/// objective decreases, otherwise halved.
fn descend<O: MaxObjective>(obj: &O, domain: &Domain, start: Vec<f64>, opts: &MultistartOptions) -> (f64, Vec<f64>) {
    let mut y = start;
    let mut f = obj.value(&y);
    let mut step = opts.initial_step;
    for _ in 0..opts.iterations {
        if step < opts.min_step {
            break;
        }
        let pieces = obj.pieces_above(&y, f - step);
        let tangents: Vec<Vec<f64>> = pieces
            .iter()
            .map(|p| {
                let radial = dot(&p.grad, &y);
                linalg::axpy(&p.grad, -radial, &y)
            })
            .collect();
        if tangents.is_empty() {
            break;
        }
        let dir = linalg::min_norm_in_hull(&tangents, 60);
        let len = norm(&dir);
        if len < 1e-14 {
            // stationary for the active set; shrink the active band
            step *= 0.5;
            continue;
        }
        let trial = linalg::axpy(&y, -step / len, &dir);
        match domain.retract(&trial) {
            Some(next) => {
                let fnext = obj.value(&next);
                if fnext < f {
                    y = next;
                    f = fnext;
                    step = (step * 1.5).min(opts.initial_step);
                } else {
                    step *= 0.5;
                }
            }
            None => step *= 0.5,
        }
    }
    (f, y)
}

pub(crate) fn multistart<O: MaxObjective>(obj: &O, domain: &Domain, opts: &MultistartOptions) -> SearchResult {
    let dim = obj.dim();
    debug_assert!(domain.dim().is_none_or(|d| d == dim));
    let mut best = SearchResult { value: f64::INFINITY, argmin: Vec::new(), starts_used: 0 };
    for k in 0..opts.starts {
        let Some(start) = start_direction(domain, dim, k) else { continue };
        let (f, y) = descend(obj, domain, start, opts);
        best.starts_used += 1;
        // strict comparison keeps the earliest start on ties
        if f < best.value {
            best.value = f;
            best.argmin = y;
        }
    }
    best
}

/// Number of grid points used for the sphere or cone in dimension 3.
pub const GRID_POINTS_3D: usize = 1_000_000;
const GRID_POINTS_2D: usize = 1_000_000;
const ZOOM_CANDIDATES: usize = 16;
const ZOOM_RADIUS: i32 = 3;
const ZOOM_LEVELS: usize = 40;

/// Keeps the `cap` smallest values seen.
struct TopK {
    cap: usize,
    items: Vec<(f64, Vec<f64>)>,
}

impl TopK {
    fn new(cap: usize) -> Self {
        TopK { cap, items: Vec::with_capacity(cap + 1) }
    }

    fn offer(&mut self, value: f64, y: &[f64]) {
        if self.items.len() == self.cap && value >= self.items[self.cap - 1].0 {
            return;
        }
        let pos = self.items.partition_point(|(v, _)| *v <= value);
        self.items.insert(pos, (value, y.to_vec()));
        self.items.truncate(self.cap);
    }
}

/// Orthonormal basis of the tangent space at unit `y`.
fn tangent_basis(y: &[f64]) -> Vec<Vec<f64>> {
    let m = y.len();
    let mut vectors = vec![y.to_vec()];
    for k in 0..m {
        let mut e = vec![0.0; m];
        e[k] = 1.0;
        vectors.push(e);
    }
    // greedy Gram-Schmidt, dropping dependent candidates
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        let mut w = v;
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&w, b);
                w = linalg::axpy(&w, -c, b);
            }
        }
        let n = norm(&w);
        if n > 1e-8 {
            basis.push(linalg::scaled(&w, 1.0 / n));
        }
        if basis.len() == m {
            break;
        }
    }
    basis.split_off(1)
}

fn zoom<O: MaxObjective>(obj: &O, domain: &Domain, mut y: Vec<f64>, mut f: f64, h0: f64) -> (f64, Vec<f64>) {
    let mut h = h0;
    for _ in 0..ZOOM_LEVELS {
        let tangents = tangent_basis(&y);
        let mut best = (f, y.clone());
        let offsets = local_offsets(tangents.len());
        for off in &offsets {
            let mut trial = y.clone();
            for (o, t) in off.iter().zip(&tangents) {
                trial = linalg::axpy(&trial, *o as f64 * h, t);
            }
            if let Some(p) = domain.retract(&trial) {
                let v = obj.value(&p);
                if v < best.0 {
                    best = (v, p);
                }
            }
        }
        if best.0 < f {
            f = best.0;
            y = best.1;
        } else {
            h *= 0.5;
        }
    }
    (f, y)
}

fn local_offsets(k: usize) -> Vec<Vec<i32>> {
    let mut out = vec![Vec::new()];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|v| {
                (-ZOOM_RADIUS..=ZOOM_RADIUS).map(move |o| {
                    let mut w = v.clone();
                    w.push(o);
                    w
                })
            })
            .collect();
    }
    out
}

/// Dense grid search with local zoom around the best grid points.
/// Only defined for dimension 1, 2 and 3; returns `None` otherwise.
pub(crate) fn grid_oracle<O: MaxObjective>(obj: &O, domain: &Domain) -> Option<SearchResult> {
    let m = obj.dim();
    let mut top = TopK::new(ZOOM_CANDIDATES);
    let mut visited = 0usize;
    let mut visit = |y: Vec<f64>, top: &mut TopK| {
        visited += 1;
        top.offer(obj.value(&y), &y);
    };
    let spacing = match (m, domain) {
        (1, Domain::Sphere) => {
            visit(vec![1.0], &mut top);
            visit(vec![-1.0], &mut top);
            0.0
        }
        (1, Domain::Cone { .. }) => {
            if let Some(y) = domain.combine(&[1.0]) {
                visit(y, &mut top);
            }
            0.0
        }
        (2, Domain::Sphere) => {
            let k = GRID_POINTS_2D;
            for i in 0..k {
                let t = 2.0 * std::f64::consts::PI * i as f64 / k as f64;
                visit(vec![t.cos(), t.sin()], &mut top);
            }
            2.0 * std::f64::consts::PI / k as f64
        }
        (2, Domain::Cone { .. }) => {
            let k = GRID_POINTS_2D;
            for i in 0..=k {
                let t = i as f64 / k as f64;
                if let Some(y) = domain.combine(&[1.0 - t, t]) {
                    visit(y, &mut top);
                }
            }
            std::f64::consts::PI / k as f64
        }
        (3, Domain::Sphere) => {
            // Fibonacci lattice
            let k = GRID_POINTS_3D;
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            for i in 0..k {
                let z = 1.0 - (2.0 * i as f64 + 1.0) / k as f64;
                let r = (1.0 - z * z).max(0.0).sqrt();
                let phi = golden * i as f64;
                visit(vec![r * phi.cos(), r * phi.sin(), z], &mut top);
            }
            (4.0 * std::f64::consts::PI / k as f64).sqrt()
        }
        (3, Domain::Cone { .. }) => {
            // barycentric grid on the simplex of ray weights
            let k = ((2.0 * GRID_POINTS_3D as f64).sqrt().ceil()) as usize;
            for i in 0..=k {
                for j in 0..=(k - i) {
                    let w = [i as f64, j as f64, (k - i - j) as f64];
                    if let Some(y) = domain.combine(&w) {
                        visit(y, &mut top);
                    }
                }
            }
            1.0 / k as f64
        }
        _ => return None,
    };
    let mut best = SearchResult { value: f64::INFINITY, argmin: Vec::new(), starts_used: visited };
    for (v, y) in top.items {
        let (f, y) = if m > 1 { zoom(obj, domain, y, v, (4.0 * spacing).max(1e-4)) } else { (v, y) };
        if f < best.value {
            best.value = f;
            best.argmin = y;
        }
    }
    Some(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// max_i |(y, a_i)|
    struct AbsMax(Vec<Vec<f64>>);

    impl MaxObjective for AbsMax {
        fn dim(&self) -> usize {
            self.0[0].len()
        }
        fn value(&self, y: &[f64]) -> f64 {
            self.0.iter().map(|a| dot(a, y).abs()).fold(0.0, f64::max)
        }
        fn pieces_above(&self, y: &[f64], floor: f64) -> Vec<Piece> {
            self.0
                .iter()
                .filter_map(|a| {
                    let v = dot(a, y);
                    (v.abs() >= floor).then(|| Piece { grad: linalg::scaled(a, v.signum()) })
                })
                .collect()
        }
    }

    #[test]
    fn halton_first_values() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(3, 2), 0.75);
        assert!((radical_inverse(1, 3) - 1.0 / 3.0).abs() < 1e-16);
    }

    #[test]
    fn multistart_finds_orthant_capacity() {
        for n in 2..=4 {
            let obj = AbsMax(linalg::identity(n));
            let r = multistart(&obj, &Domain::Sphere, &MultistartOptions::default());
            let exact = 1.0 / (n as f64).sqrt();
            assert!(r.value >= exact - 1e-12);
            assert!(r.value - exact < 1e-6, "n={n}: {}", r.value);
        }
    }

    #[test]
    fn grid_oracle_circle_and_sphere() {
        let obj = AbsMax(linalg::identity(2));
        let r = grid_oracle(&obj, &Domain::Sphere).unwrap();
        assert!((r.value - 0.5f64.sqrt()).abs() < 1e-9);
        let obj = AbsMax(linalg::identity(3));
        let r = grid_oracle(&obj, &Domain::Sphere).unwrap();
        assert!((r.value - (1.0f64 / 3.0).sqrt()).abs() < 1e-6);
        assert!(grid_oracle(&AbsMax(linalg::identity(4)), &Domain::Sphere).is_none());
    }

    #[test]
    fn tangent_basis_is_orthonormal() {
        let y = linalg::normalized(&[0.3, -0.4, 0.8]).unwrap();
        let t = tangent_basis(&y);
        assert_eq!(t.len(), 2);
        assert!(dot(&t[0], &y).abs() < 1e-14 && dot(&t[1], &y).abs() < 1e-14);
        assert!(dot(&t[0], &t[1]).abs() < 1e-14);
    }
}
