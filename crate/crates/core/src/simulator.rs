//! Exact event-driven billiard flow inside a polyhedral cone.

use serde::{Deserialize, Serialize};

use crate::cone::{gram, min_eigenvalue, ConeSpec};
use crate::constants::{self, BoundsReport};
use crate::error::{Error, Result};
use crate::linalg::{self, dot, norm};

/// Slack for "inside the cone" checks on positions.
pub const CONTAINMENT_TOL: f64 = 1e-9;
/// Allowed deviation of the speed from one.
pub const SPEED_TOL: f64 = 1e-12;
/// `(v, a_i)` above `-GRAZING_TOL` is not approaching wall `i`.
pub const GRAZING_TOL: f64 = 1e-12;
/// Two hit times closer than `CORNER_TOL * (1 + t)` mean a corner hit.
pub const CORNER_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BilliardState {
    pub q: Vec<f64>,
    pub v: Vec<f64>,
    pub t: f64,
}

impl BilliardState {
    /// Unit-speed state at time zero; `v` is rescaled to length one.
    pub fn new(q: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        let v = linalg::normalized(&v).ok_or_else(|| Error::InvalidState("zero velocity".into()))?;
        Ok(BilliardState { q, v, t: 0.0 })
    }

    /// Free flight for time `dt`.
    pub fn advanced(&self, dt: f64) -> BilliardState {
        BilliardState { q: linalg::axpy(&self.q, dt, &self.v), v: self.v.clone(), t: self.t + dt }
    }

    fn validate(&self, cone: &ConeSpec) -> Result<()> {
        for x in [&self.q, &self.v] {
            if x.len() != cone.dim() {
                return Err(Error::DimensionMismatch { expected: cone.dim(), found: x.len() });
            }
        }
        if let Some((i, m)) = cone
            .margins(&self.q)
            .into_iter()
            .enumerate()
            .find(|&(_, m)| m < -CONTAINMENT_TOL || !m.is_finite())
        {
            return Err(Error::InvalidState(format!("position is outside wall {i} (margin {m:e})")));
        }
        let speed = norm(&self.v);
        if (speed - 1.0).abs() > SPEED_TOL {
            return Err(Error::InvalidState(format!("speed {speed} is not 1")));
        }
        Ok(())
    }
}

/// A specular reflection at wall `wall`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionEvent {
    pub t: f64,
    pub wall: usize,
    pub q_at: Vec<f64>,
    pub v_before: Vec<f64>,
    pub v_after: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NextEvent {
    Collision(CollisionEvent),
    Escape,
    /// Two walls are reached at (numerically) the same time.
    CornerHit { t: f64, walls: (usize, usize) },
}

/// `v - 2 (v, a) a`, renormalized.
pub fn reflect(v: &[f64], normal: &[f64]) -> Vec<f64> {
    let r = linalg::axpy(v, -2.0 * dot(v, normal), normal);
    linalg::normalized(&r).unwrap_or(r)
}

pub fn next_event(state: &BilliardState, cone: &ConeSpec) -> Result<NextEvent> {
    state.validate(cone)?;
    let mut hits: Vec<(f64, usize)> = cone
        .normals()
        .iter()
        .enumerate()
        .filter_map(|(i, a)| {
            let approach = dot(&state.v, a);
            (approach < -GRAZING_TOL).then(|| ((-dot(&state.q, a) / approach).max(0.0), i))
        })
        .collect();
    if hits.is_empty() {
        return Ok(NextEvent::Escape);
    }
    hits.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let (dt, wall) = hits[0];
    if let Some(&(dt2, wall2)) = hits.get(1) {
        if dt2 - dt < CORNER_TOL * (1.0 + dt) {
            return Ok(NextEvent::CornerHit { t: state.t + dt, walls: (wall, wall2) });
        }
    }
    let normal = cone.normal(wall);
    let hit = linalg::axpy(&state.q, dt, &state.v);
    // put the point exactly on the wall
    let q_at = linalg::axpy(&hit, -dot(&hit, normal), normal);
    Ok(NextEvent::Collision(CollisionEvent {
        t: state.t + dt,
        wall,
        q_at,
        v_before: state.v.clone(),
        v_after: reflect(&state.v, normal),
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Terminal {
    Escaped,
    CornerHit,
    /// The step budget ran out with collisions still pending.
    StepLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub walls: usize,
    pub dim: usize,
    pub initial: BilliardState,
    pub events: Vec<CollisionEvent>,
    pub terminal: Terminal,
    /// `v_0, ..., v_N`
    pub velocities: Vec<Vec<f64>>,
}

impl TrajectoryRecord {
    pub fn collisions(&self) -> usize {
        self.events.len()
    }

    pub fn wall_sequence(&self) -> Vec<usize> {
        self.events.iter().map(|e| e.wall).collect()
    }

    /// State right after the last collision (or the initial state).
    pub fn last_state(&self) -> BilliardState {
        match self.events.last() {
            Some(e) => BilliardState { q: e.q_at.clone(), v: e.v_after.clone(), t: e.t },
            None => self.initial.clone(),
        }
    }
}

/// `ceil(n! (4 / lambda_min)^(n-1)) + 1`, the budget used when none is given.
pub fn default_max_steps(cone: &ConeSpec) -> usize {
    let lambda = min_eigenvalue(&gram(cone)).value;
    let b = constants::bound_main(cone.walls(), lambda).ceil();
    if b.is_finite() && b < 1e15 {
        b as usize + 1
    } else {
        usize::MAX
    }
}

pub fn run(initial: &BilliardState, cone: &ConeSpec, max_steps: usize) -> Result<TrajectoryRecord> {
    if max_steps == 0 {
        return Err(Error::Config("max_steps must be at least 1".into()));
    }
    initial.validate(cone)?;
    let mut state = initial.clone();
    let mut events = Vec::new();
    let mut velocities = vec![initial.v.clone()];
    let terminal = loop {
        match next_event(&state, cone)? {
            NextEvent::Escape => break Terminal::Escaped,
            NextEvent::CornerHit { .. } => break Terminal::CornerHit,
            NextEvent::Collision(_) if events.len() >= max_steps => break Terminal::StepLimit,
            NextEvent::Collision(ev) => {
                state = BilliardState { q: ev.q_at.clone(), v: ev.v_after.clone(), t: ev.t };
                velocities.push(ev.v_after.clone());
                events.push(ev);
            }
        }
    };
    Ok(TrajectoryRecord { walls: cone.walls(), dim: cone.dim(), initial: initial.clone(), events, terminal, velocities })
}

/// Runs with [`default_max_steps`].
pub fn run_default(initial: &BilliardState, cone: &ConeSpec) -> Result<TrajectoryRecord> {
    run(initial, cone, default_max_steps(cone))
}

/// Length of the polygonal line through `v_0, ..., v_N`.
pub fn zigzag_length(record: &TrajectoryRecord) -> f64 {
    record.velocities.windows(2).map(|w| norm(&linalg::sub(&w[1], &w[0]))).sum()
}

/// Slack on the zigzag-length ceiling `2/d`.
pub const ZIGZAG_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditCheck {
    pub name: String,
    pub observed: f64,
    pub limit: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditVerdict {
    pub collisions: usize,
    pub zigzag_length: f64,
    pub checks: Vec<AuditCheck>,
    pub pass: bool,
}

impl AuditVerdict {
    pub fn failures(&self) -> impl Iterator<Item = &AuditCheck> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

/// Checks a complete trajectory against every bound of `report` and the
/// zigzag-length ceiling `2/d`.
pub fn audit(record: &TrajectoryRecord, report: &BoundsReport) -> Result<AuditVerdict> {
    if record.walls != report.n || record.dim != report.m {
        return Err(Error::ConeMismatch);
    }
    let n = record.collisions();
    let count = n as f64;
    let length = zigzag_length(record);
    let mut checks = Vec::new();
    let mut bound = |name: &str, limit: f64| {
        checks.push(AuditCheck { name: name.into(), observed: count, limit, pass: count <= limit });
    };
    bound("bound_main", report.bound_main);
    bound("bound_dd", report.bound_dd);
    bound("bound_sevryuk", report.bound_sevryuk);
    bound("bound_bfk", report.bound_bfk);
    if let Some(b) = report.bound_wedge {
        bound("bound_wedge", b as f64);
    }
    if let Some(b) = report.bound_tridiagonal {
        bound("bound_tridiagonal", b as f64);
    }
    let ceiling = 2.0 / report.d;
    checks.push(AuditCheck {
        name: "zigzag_length".into(),
        observed: length,
        limit: ceiling + ZIGZAG_TOL,
        pass: length <= ceiling + ZIGZAG_TOL,
    });
    checks.push(AuditCheck {
        name: "complete".into(),
        observed: if record.terminal == Terminal::StepLimit { 1.0 } else { 0.0 },
        limit: 0.0,
        pass: record.terminal != Terminal::StepLimit,
    });
    let pass = checks.iter().all(|c| c.pass);
    Ok(AuditVerdict { collisions: n, zigzag_length: length, checks, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::make_cone;
    use crate::constants::{bounds_report, inscribed_ball};

    fn orthant2() -> ConeSpec {
        make_cone(2, &linalg::identity(2)).unwrap()
    }

    #[test]
    fn next_event_axis_reflection() {
        let s = BilliardState::new(vec![1.0, 1.0], vec![-1.0, 0.0]).unwrap();
        match next_event(&s, &orthant2()).unwrap() {
            NextEvent::Collision(ev) => {
                assert_eq!(ev.wall, 0);
                assert_eq!(ev.t, 1.0);
                assert_eq!(ev.v_after, vec![1.0, 0.0]);
                assert_eq!(ev.q_at, vec![0.0, 1.0]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn next_event_escape_and_corner() {
        let s = BilliardState::new(vec![1.0, 1.0], vec![0.0, 1.0]).unwrap();
        assert_eq!(next_event(&s, &orthant2()).unwrap(), NextEvent::Escape);
        let s = BilliardState::new(vec![1.0, 1.0], vec![-1.0, -1.0]).unwrap();
        match next_event(&s, &orthant2()).unwrap() {
            NextEvent::CornerHit { t, walls } => {
                assert!((t - 2f64.sqrt()).abs() < 1e-15);
                assert_eq!(walls, (0, 1));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn next_event_rejects_outside_state() {
        let s = BilliardState::new(vec![-1.0, 1.0], vec![1.0, 0.0]).unwrap();
        assert!(matches!(next_event(&s, &orthant2()), Err(Error::InvalidState(_))));
        let s = BilliardState { q: vec![1.0, 1.0], v: vec![2.0, 0.0], t: 0.0 };
        assert!(matches!(next_event(&s, &orthant2()), Err(Error::InvalidState(_))));
    }

    #[test]
    fn grazing_is_not_a_collision() {
        let s = BilliardState::new(vec![1.0, 1.0], vec![1.0, -1e-13]).unwrap();
        assert_eq!(next_event(&s, &orthant2()).unwrap(), NextEvent::Escape);
    }

    #[test]
    fn run_two_collisions_then_escape() {
        let s = BilliardState::new(vec![1.0, 2.0], vec![-2.0, -1.0]).unwrap();
        let rec = run_default(&s, &orthant2()).unwrap();
        assert_eq!(rec.wall_sequence(), vec![0, 1]);
        assert_eq!(rec.terminal, Terminal::Escaped);
        // reflecting coordinates: |x(t)|, |y(t)| of the free line
        let r5 = 5f64.sqrt();
        assert!((rec.events[0].t - r5 / 2.0).abs() < 1e-14);
        assert!((rec.events[1].t - 2.0 * r5).abs() < 1e-14);
        let last = rec.velocities.last().unwrap();
        assert!((last[0] - 2.0 / r5).abs() < 1e-15 && (last[1] - 1.0 / r5).abs() < 1e-15);
    }

    #[test]
    fn inscribed_direction_escapes_immediately() {
        let c = make_cone(3, &[vec![1.0, 0.2, 0.0], vec![0.0, 1.0, 0.3], vec![0.1, -0.4, 1.0]]).unwrap();
        let e = inscribed_ball(&c).unwrap().e;
        let rec = run_default(&BilliardState::new(e.clone(), e).unwrap(), &c).unwrap();
        assert_eq!(rec.collisions(), 0);
        assert_eq!(rec.terminal, Terminal::Escaped);
        assert_eq!(zigzag_length(&rec), 0.0);
        assert!(audit(&rec, &bounds_report(&c).unwrap()).unwrap().pass);
    }

    #[test]
    fn step_limit_is_reported() {
        let s = BilliardState::new(vec![1.0, 2.0], vec![-2.0, -1.0]).unwrap();
        let rec = run(&s, &orthant2(), 1).unwrap();
        assert_eq!(rec.terminal, Terminal::StepLimit);
        assert_eq!(rec.collisions(), 1);
        let verdict = audit(&rec, &bounds_report(&orthant2()).unwrap()).unwrap();
        assert!(!verdict.pass);
        assert_eq!(verdict.failures().next().unwrap().name, "complete");
        assert!(run(&s, &orthant2(), 0).is_err());
    }

    #[test]
    fn head_on_reflection_zigzag() {
        let s = BilliardState::new(vec![1.0, 1.0], vec![-1.0, 0.0]).unwrap();
        let rec = run_default(&s, &orthant2()).unwrap();
        assert_eq!(rec.collisions(), 1);
        assert_eq!(zigzag_length(&rec), 2.0);
    }

    #[test]
    fn audit_detects_mismatch() {
        let s = BilliardState::new(vec![1.0, 1.0], vec![-1.0, 0.0]).unwrap();
        let rec = run_default(&s, &orthant2()).unwrap();
        let other = bounds_report(&make_cone(3, &linalg::identity(3)).unwrap()).unwrap();
        assert_eq!(audit(&rec, &other), Err(Error::ConeMismatch));
    }
}
