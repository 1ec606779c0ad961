//! Point masses on a line with elastic collisions, and their image as a
//! billiard in a cone under `y_i = sqrt(m_i) x_i`.

use serde::{Deserialize, Serialize};

use crate::cone::{make_cone, ConeSpec};
use crate::error::{Error, Result};
use crate::linalg::{self, norm};
use crate::simulator::{self, BilliardState, Terminal};

/// Conservation slack for momentum and energy across one collision.
pub const CONSERVATION_TOL: f64 = 1e-10;
/// Relative agreement required between ball and cone event times.
pub const CONJUGACY_TIME_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardBallSystem {
    pub masses: Vec<f64>,
    pub positions: Vec<f64>,
    pub velocities: Vec<f64>,
}

impl HardBallSystem {
    pub fn new(masses: Vec<f64>, positions: Vec<f64>, velocities: Vec<f64>) -> Result<Self> {
        let sys = HardBallSystem { masses, positions, velocities };
        sys.validate()?;
        Ok(sys)
    }

    fn validate(&self) -> Result<()> {
        let n = self.masses.len();
        if n < 2 {
            return Err(Error::TooFewBalls(n));
        }
        for v in [&self.positions, &self.velocities] {
            if v.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: v.len() });
            }
        }
        if let Some((index, &mass)) = self.masses.iter().enumerate().find(|(_, m)| !(**m > 0.0 && m.is_finite())) {
            return Err(Error::NonpositiveMass { index, mass });
        }
        if self.positions.windows(2).any(|w| w[0].partial_cmp(&w[1]).is_none_or(|o| o.is_gt())) {
            return Err(Error::InvalidState("ball positions must be nondecreasing".into()));
        }
        Ok(())
    }

    pub fn momentum(&self) -> f64 {
        self.masses.iter().zip(&self.velocities).map(|(m, v)| m * v).sum()
    }

    pub fn energy(&self) -> f64 {
        self.masses.iter().zip(&self.velocities).map(|(m, v)| 0.5 * m * v * v).sum()
    }
}

/// Collision of balls `pair` and `pair + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallEvent {
    pub t: f64,
    pub pair: usize,
    pub velocities_after: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallRun {
    pub events: Vec<BallEvent>,
    pub terminal: Terminal,
    pub final_state: HardBallSystem,
}

/// 1-D elastic update for masses `m1`, `m2` with velocities `u1`, `u2`.
pub fn elastic(m1: f64, m2: f64, u1: f64, u2: f64) -> (f64, f64) {
    let total = m1 + m2;
    (((m1 - m2) * u1 + 2.0 * m2 * u2) / total, ((m2 - m1) * u2 + 2.0 * m1 * u1) / total)
}

/// Event-driven simulation; neighbouring pairs collide when approaching.
/// Two collisions at the same time end the run as a corner hit, exactly as
/// the cone simulator does.
pub fn simulate_balls(system: &HardBallSystem, max_events: usize) -> Result<BallRun> {
    system.validate()?;
    let mut s = system.clone();
    let mut t = 0.0;
    let mut events = Vec::new();
    let terminal = loop {
        let mut hits: Vec<(f64, usize)> = (0..s.masses.len() - 1)
            .filter_map(|i| {
                let closing = s.velocities[i] - s.velocities[i + 1];
                (closing > 0.0).then(|| ((s.positions[i + 1] - s.positions[i]) / closing, i))
            })
            .collect();
        if hits.is_empty() {
            break Terminal::Escaped;
        }
        hits.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let (dt, pair) = hits[0];
        if let Some(&(dt2, _)) = hits.get(1) {
            if dt2 - dt < simulator::CORNER_TOL * (1.0 + dt) {
                break Terminal::CornerHit;
            }
        }
        if events.len() >= max_events {
            break Terminal::StepLimit;
        }
        for (x, v) in s.positions.iter_mut().zip(&s.velocities) {
            *x += v * dt;
        }
        t += dt;
        s.positions[pair + 1] = s.positions[pair];
        let (a, b) = elastic(s.masses[pair], s.masses[pair + 1], s.velocities[pair], s.velocities[pair + 1]);
        s.velocities[pair] = a;
        s.velocities[pair + 1] = b;
        events.push(BallEvent { t, pair, velocities_after: [a, b] });
    };
    Ok(BallRun { events, terminal, final_state: s })
}

/// Coordinate change between ball states and cone states.
#[derive(Debug, Clone, PartialEq)]
pub struct BallConeMap {
    sqrt_masses: Vec<f64>,
}

impl BallConeMap {
    /// `(q, v, speed)`: cone position, unit cone velocity and the factor
    /// `|sqrt(m) u| = sqrt(2E)` removed from the velocity.
    pub fn to_cone(&self, positions: &[f64], velocities: &[f64]) -> (Vec<f64>, Vec<f64>, f64) {
        let q = positions.iter().zip(&self.sqrt_masses).map(|(x, s)| x * s).collect();
        let w: Vec<f64> = velocities.iter().zip(&self.sqrt_masses).map(|(u, s)| u * s).collect();
        let speed = norm(&w);
        let v = if speed > 0.0 { linalg::scaled(&w, 1.0 / speed) } else { w };
        (q, v, speed)
    }

    /// Inverse of [`to_cone`](Self::to_cone).
    pub fn from_cone(&self, q: &[f64], v: &[f64], speed: f64) -> (Vec<f64>, Vec<f64>) {
        (
            q.iter().zip(&self.sqrt_masses).map(|(y, s)| y / s).collect(),
            v.iter().zip(&self.sqrt_masses).map(|(w, s)| speed * w / s).collect(),
        )
    }
}

/// Wall `i` is `x_{i+1} >= x_i`, i.e. normal proportional to
/// `-e_i / sqrt(m_i) + e_{i+1} / sqrt(m_{i+1})`.
pub fn balls_to_cone(masses: &[f64]) -> Result<(ConeSpec, BallConeMap)> {
    let n = masses.len();
    if n < 2 {
        return Err(Error::TooFewBalls(n));
    }
    if let Some((index, &mass)) = masses.iter().enumerate().find(|(_, m)| !(**m > 0.0 && m.is_finite())) {
        return Err(Error::NonpositiveMass { index, mass });
    }
    let sqrt_masses: Vec<f64> = masses.iter().map(|m| m.sqrt()).collect();
    let normals: Vec<Vec<f64>> = (0..n - 1)
        .map(|i| {
            let mut a = vec![0.0; n];
            a[i] = -1.0 / sqrt_masses[i];
            a[i + 1] = 1.0 / sqrt_masses[i + 1];
            a
        })
        .collect();
    Ok((make_cone(n, &normals)?, BallConeMap { sqrt_masses }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConjugacyReport {
    pub ball_events: usize,
    pub cone_events: usize,
    pub ball_terminal: Terminal,
    pub cone_terminal: Terminal,
    pub sequences_match: bool,
    pub max_time_error: f64,
    pub pass: bool,
}

/// Runs the balls directly and through the cone billiard and compares event
/// counts, the pair/wall sequences and the event times.
pub fn conjugacy_check(system: &HardBallSystem, horizon: usize) -> Result<ConjugacyReport> {
    let balls = simulate_balls(system, horizon)?;
    let (cone, map) = balls_to_cone(&system.masses)?;
    let (q, v, speed) = map.to_cone(&system.positions, &system.velocities);
    let ball_pairs: Vec<usize> = balls.events.iter().map(|e| e.pair).collect();
    if speed == 0.0 {
        let ok = balls.events.is_empty();
        return Ok(ConjugacyReport {
            ball_events: balls.events.len(),
            cone_events: 0,
            ball_terminal: balls.terminal,
            cone_terminal: Terminal::Escaped,
            sequences_match: ok,
            max_time_error: 0.0,
            pass: ok,
        });
    }
    let state = BilliardState { q, v, t: 0.0 };
    let record = simulator::run(&state, &cone, horizon.max(1))?;
    let walls = record.wall_sequence();
    let sequences_match = walls == ball_pairs;
    let max_time_error = record
        .events
        .iter()
        .zip(&balls.events)
        .map(|(c, b)| {
            let tc = c.t / speed;
            let scale = tc.abs().max(b.t.abs());
            if scale < 1e-300 {
                0.0
            } else {
                (tc - b.t).abs() / scale
            }
        })
        .fold(0.0, f64::max);
    let pass = sequences_match && record.terminal == balls.terminal && max_time_error <= CONJUGACY_TIME_TOL;
    Ok(ConjugacyReport {
        ball_events: balls.events.len(),
        cone_events: record.collisions(),
        ball_terminal: balls.terminal,
        cone_terminal: record.terminal,
        sequences_match,
        max_time_error,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::gram;
    use crate::wedge;
    use std::f64::consts::PI;

    #[test]
    fn two_equal_balls_cone() {
        let (c, _) = balls_to_cone(&[1.0, 1.0]).unwrap();
        assert_eq!(c.walls(), 1);
        let s = 0.5f64.sqrt();
        assert!((c.normal(0)[0] + s).abs() < 1e-15 && (c.normal(0)[1] - s).abs() < 1e-15);
    }

    #[test]
    fn three_ball_gram() {
        let (c, _) = balls_to_cone(&[1.0, 1.0, 1.0]).unwrap();
        let g = gram(&c);
        assert!((g.get(0, 1) + 0.5).abs() < 1e-15);
        assert!((wedge::angle_from_gram(&g) - PI / 3.0).abs() < 1e-15);

        let (c, _) = balls_to_cone(&[1.0, 2.0, 1.0]).unwrap();
        assert!((gram(&c).get(0, 1) + 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn balls_to_cone_errors() {
        assert_eq!(balls_to_cone(&[1.0]).unwrap_err(), Error::TooFewBalls(1));
        assert_eq!(balls_to_cone(&[1.0, 0.0]).unwrap_err(), Error::NonpositiveMass { index: 1, mass: 0.0 });
    }

    #[test]
    fn equal_mass_exchange() {
        let sys = HardBallSystem::new(vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]).unwrap();
        let run = simulate_balls(&sys, 10).unwrap();
        assert_eq!(run.events.len(), 1);
        assert_eq!(run.events[0].velocities_after, [0.0, 1.0]);
        assert_eq!(run.events[0].t, 1.0);
    }

    #[test]
    fn three_balls_three_collisions() {
        let sys = HardBallSystem::new(vec![1.0; 3], vec![0.0, 1.0, 2.5], vec![1.0, 0.0, -1.0]).unwrap();
        let run = simulate_balls(&sys, 10).unwrap();
        assert_eq!(run.events.len(), 3);
        assert_eq!(run.terminal, Terminal::Escaped);
        assert_eq!(run.final_state.velocities, vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn symmetric_start_is_a_corner() {
        // x = (0,1,2), v = (1,0,-1): both pairs meet at t = 1
        let sys = HardBallSystem::new(vec![1.0; 3], vec![0.0, 1.0, 2.0], vec![1.0, 0.0, -1.0]).unwrap();
        let run = simulate_balls(&sys, 10).unwrap();
        assert_eq!(run.terminal, Terminal::CornerHit);
        let rep = conjugacy_check(&sys, 10).unwrap();
        assert_eq!(rep.cone_terminal, Terminal::CornerHit);
        assert!(rep.pass);
    }

    #[test]
    fn heavy_wall_reverses_light_ball() {
        let sys = HardBallSystem::new(vec![1.0, 1e6], vec![0.0, 1.0], vec![1.0, -1.0]).unwrap();
        let run = simulate_balls(&sys, 10).unwrap();
        assert_eq!(run.events.len(), 1);
        let (a, b) = elastic(1.0, 1e6, 1.0, -1.0);
        assert_eq!(run.events[0].velocities_after, [a, b]);
        assert!((a + 3.0).abs() < 1e-5);
        assert!((b + 1.0).abs() < 1e-5);
        let after = &run.final_state;
        assert!((after.momentum() - sys.momentum()).abs() < 1e-10 * sys.momentum().abs().max(1.0));
        assert!((after.energy() - sys.energy()).abs() < 1e-10 * sys.energy());
    }

    #[test]
    fn map_round_trip() {
        let (_, map) = balls_to_cone(&[0.5, 2.0, 3.0]).unwrap();
        let (q, v, s) = map.to_cone(&[0.0, 1.0, 4.0], &[1.0, -2.0, 0.5]);
        let (x, u) = map.from_cone(&q, &v, s);
        for (a, b) in x.iter().zip([0.0, 1.0, 4.0]).chain(u.iter().zip([1.0, -2.0, 0.5])) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn conjugacy_small_cases() {
        let sys = HardBallSystem::new(vec![1.0, 3.0, 1.0], vec![-1.0, 0.2, 1.3], vec![0.9, 0.1, -0.7]).unwrap();
        let rep = conjugacy_check(&sys, 100).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!(rep.ball_events > 0);

        let sys = HardBallSystem::new(vec![1.0, 1.0], vec![0.0, 1.0], vec![-1.0, 1.0]).unwrap();
        let rep = conjugacy_check(&sys, 100).unwrap();
        assert!(rep.pass && rep.ball_events == 0);
    }

    #[test]
    fn invalid_systems() {
        assert!(HardBallSystem::new(vec![1.0, 1.0], vec![1.0, 0.0], vec![0.0, 0.0]).is_err());
        assert!(HardBallSystem::new(vec![1.0, -1.0], vec![0.0, 1.0], vec![0.0, 0.0]).is_err());
        assert!(HardBallSystem::new(vec![1.0, 1.0], vec![0.0], vec![0.0, 0.0]).is_err());
    }
}
