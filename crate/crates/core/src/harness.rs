//! Reproducible experiments: seeded random cones, trajectory ensembles with
//! audits, and an annealing search for trajectories with many collisions.
//!
//! All randomness comes from ChaCha8 (a counter-based generator) seeded
//! explicitly; Gaussians use the Box-Muller transform of two uniforms, so
//! output files are byte-stable across platforms.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cone::{self, gram, make_cone, min_eigenvalue, ConeSpec};
use crate::constants::{bounds_report_with, inscribed_ball, BoundsReport, EstimateOptions};
use crate::error::{Error, Result};
use crate::linalg;
use crate::simulator::{self, audit, BilliardState, TrajectoryRecord};
use crate::wedge::{self, WedgeSpec};

/// Sampled cones must have smallest singular value above this.
pub const SAMPLING_SIGMA_MIN: f64 = 1e-3;
pub const SAMPLING_ATTEMPTS: usize = 1000;
/// Radius of the ball around the inscribed direction used for start points.
pub const START_RADIUS: f64 = 0.1;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard normal via Box-Muller (cosine branch only).
pub fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn unit_vector<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..dim).map(|_| gaussian(rng)).collect();
        if let Some(u) = linalg::normalized(&g) {
            return u;
        }
    }
}

/// Uniform point of the closed unit ball.
pub fn in_unit_ball<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    let u = unit_vector(rng, dim);
    let r = rng.gen::<f64>().powf(1.0 / dim as f64);
    linalg::scaled(&u, r)
}

/// Seed of trial `index` derived from the experiment seed (splitmix64).
pub fn trial_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `n` normals uniform on the sphere of `R^dim`, resampled until the
/// arrangement is well conditioned.
pub fn random_cone(n: usize, dim: usize, seed: u64) -> Result<ConeSpec> {
    if n == 0 || n > dim {
        return Err(Error::WallCount { walls: n, dim });
    }
    let mut rng = rng(seed);
    for _ in 0..SAMPLING_ATTEMPTS {
        let normals: Vec<Vec<f64>> = (0..n).map(|_| unit_vector(&mut rng, dim)).collect();
        let Ok(c) = make_cone(dim, &normals) else { continue };
        if min_eigenvalue(&gram(&c)).value.sqrt() > SAMPLING_SIGMA_MIN {
            return Ok(c);
        }
    }
    Err(Error::DegenerateSampling { attempts: SAMPLING_ATTEMPTS })
}

/// The inscribed-ball direction `e` in the ambient space of `cone`.
pub fn inscribed_direction(cone: &ConeSpec) -> Result<(f64, Vec<f64>)> {
    if cone.is_square() {
        let b = inscribed_ball(cone)?;
        Ok((b.d, b.e))
    } else {
        let (reduced, basis) = cone::reduce(cone)?;
        let b = inscribed_ball(&reduced)?;
        Ok((b.d, basis.lift(&b.e)))
    }
}

/// `q = e + 0.1 u` with `u` uniform in the unit ball (rejected until strictly
/// inside `Q`) and `v` uniform on the sphere.
pub fn random_start<R: Rng>(rng: &mut R, cone: &ConeSpec, e: &[f64]) -> BilliardState {
    let dim = cone.dim();
    let q = loop {
        let q = linalg::axpy(e, START_RADIUS, &in_unit_ball(rng, dim));
        if cone.margins(&q).iter().all(|&m| m > 0.0) {
            break q;
        }
    };
    BilliardState { q, v: unit_vector(rng, dim), t: 0.0 }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    /// One JSON object per line.
    Structured,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n_walls: usize,
    pub dim: usize,
    /// Number of random cones.
    pub trials: usize,
    /// Random initial conditions simulated per cone.
    pub trajectories: usize,
    pub seed: u64,
    pub max_steps_override: Option<usize>,
    /// Simulations spent by the adversarial search per cone (0 disables it).
    pub search_budget: usize,
    pub output_path: String,
    pub format: OutputFormat,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.n_walls == 0 || self.n_walls > self.dim {
            return Err(Error::WallCount { walls: self.n_walls, dim: self.dim });
        }
        if self.max_steps_override == Some(0) {
            return Err(Error::Config("max steps must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRow {
    pub cone_id: usize,
    pub seed: u64,
    pub lambda_min: f64,
    pub d: f64,
    pub delta: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub phi: f64,
    pub bound_main: f64,
    pub bound_dd: f64,
    pub bound_sevryuk: f64,
    pub bound_bfk: f64,
    #[serde(rename = "max_observed_N")]
    pub max_observed_n: usize,
    #[serde(rename = "zigzag_max_L")]
    pub zigzag_max_l: f64,
    pub lemma1_ceiling: f64,
    pub all_checks_pass: bool,
}

pub const CSV_HEADER: &str = "cone_id,seed,lambda_min,d,delta,C,phi,bound_main,bound_dd,bound_sevryuk,bound_bfk,max_observed_N,zigzag_max_L,lemma1_ceiling,all_checks_pass";

impl EnsembleRow {
    pub fn csv_line(&self) -> String {
        let r = |x: f64| format!("{x:.16e}");
        [
            self.cone_id.to_string(),
            self.seed.to_string(),
            r(self.lambda_min),
            r(self.d),
            r(self.delta),
            r(self.c),
            r(self.phi),
            r(self.bound_main),
            r(self.bound_dd),
            r(self.bound_sevryuk),
            r(self.bound_bfk),
            self.max_observed_n.to_string(),
            r(self.zigzag_max_l),
            r(self.lemma1_ceiling),
            self.all_checks_pass.to_string(),
        ]
        .join(",")
    }

    pub fn write<W: Write>(&self, out: &mut W, format: OutputFormat) -> Result<()> {
        match format {
            OutputFormat::Csv => writeln!(out, "{}", self.csv_line())?,
            OutputFormat::Structured => {
                let line = serde_json::to_string(self).map_err(|e| Error::Io(e.to_string()))?;
                writeln!(out, "{line}")?
            }
        }
        Ok(())
    }
}

/// Everything observed on one cone.
#[derive(Debug, Clone)]
pub struct ConeTrial {
    pub row: EnsembleRow,
    pub report: BoundsReport,
    /// Collision count of every simulated trajectory, in order.
    pub collisions: Vec<usize>,
    /// Zigzag length of every simulated trajectory, in order.
    pub zigzag: Vec<f64>,
    pub failures: Vec<String>,
}

/// Bounds, `trajectories` random runs (plus an optional adversarial search)
/// and audits for a single cone.
pub fn evaluate_cone(cone_id: usize, seed: u64, cone: &ConeSpec, config: &ExperimentConfig) -> Result<ConeTrial> {
    let report = bounds_report_with(cone, &EstimateOptions::fast())?;
    let (_, e) = inscribed_direction(cone)?;
    let max_steps = config.max_steps_override.unwrap_or_else(|| report.default_max_steps());
    let mut rng = rng(seed);
    rng.set_stream(1);

    let mut collisions = Vec::with_capacity(config.trajectories);
    let mut zigzag = Vec::with_capacity(config.trajectories);
    let mut failures = Vec::new();
    let mut check = |record: &TrajectoryRecord, label: String| -> Result<()> {
        let verdict = audit(record, &report)?;
        for f in verdict.failures() {
            failures.push(format!("{label}: {} observed {} limit {}", f.name, f.observed, f.limit));
        }
        collisions.push(verdict.collisions);
        zigzag.push(verdict.zigzag_length);
        Ok(())
    };
    for k in 0..config.trajectories {
        let start = random_start(&mut rng, cone, &e);
        let record = simulator::run(&start, cone, max_steps)?;
        check(&record, format!("trajectory {k}"))?;
    }
    if config.search_budget > 0 {
        let found = adversarial_search(cone, config.search_budget, seed)?;
        check(&found.record, "adversarial search".into())?;
    }

    let row = EnsembleRow {
        cone_id,
        seed,
        lambda_min: report.lambda_min,
        d: report.d,
        delta: report.delta,
        c: report.bfk_c,
        phi: report.charge_phi,
        bound_main: report.bound_main,
        bound_dd: report.bound_dd,
        bound_sevryuk: report.bound_sevryuk,
        bound_bfk: report.bound_bfk,
        max_observed_n: collisions.iter().copied().max().unwrap_or(0),
        zigzag_max_l: zigzag.iter().copied().fold(0.0, f64::max),
        lemma1_ceiling: 2.0 / report.d,
        all_checks_pass: failures.is_empty(),
    };
    Ok(ConeTrial { row, report, collisions, zigzag, failures })
}

/// Runs every trial in index order, handing each result to `sink` as soon
/// as it is available.
pub fn ensemble_for_each<F>(config: &ExperimentConfig, mut sink: F) -> Result<()>
where
    F: FnMut(ConeTrial) -> Result<()>,
{
    config.validate()?;
    for k in 0..config.trials {
        let seed = trial_seed(config.seed, k as u64);
        let cone = random_cone(config.n_walls, config.dim, seed)?;
        sink(evaluate_cone(k, seed, &cone, config)?)?;
    }
    Ok(())
}

pub fn ensemble_run(config: &ExperimentConfig) -> Result<Vec<EnsembleRow>> {
    let mut rows = Vec::with_capacity(config.trials);
    ensemble_for_each(config, |t| {
        rows.push(t.row);
        Ok(())
    })?;
    Ok(rows)
}

/// Streams the ensemble to `config.output_path`; rows written before an
/// error stay on disk. Returns whether every audit passed.
pub fn ensemble_to_file(config: &ExperimentConfig) -> Result<bool> {
    let file = std::fs::File::create(&config.output_path)?;
    let mut out = std::io::BufWriter::new(file);
    if config.format == OutputFormat::Csv {
        writeln!(out, "{CSV_HEADER}")?;
    }
    let mut all_pass = true;
    let result = ensemble_for_each(config, |t| {
        all_pass &= t.row.all_checks_pass;
        t.row.write(&mut out, config.format)
    });
    out.flush()?;
    result.map(|_| all_pass)
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub best_collisions: usize,
    pub best_state: BilliardState,
    pub record: TrajectoryRecord,
    pub evaluations: usize,
}

/// Simulated annealing over initial states `(q, v)` maximizing the number of
/// collisions. Two-wall planar cones are additionally seeded with starts
/// aimed close to the apex.
pub fn adversarial_search(cone: &ConeSpec, budget: usize, seed: u64) -> Result<SearchOutcome> {
    if budget == 0 {
        return Err(Error::Config("search budget must be at least 1".into()));
    }
    let dim = cone.dim();
    let (_, e) = inscribed_direction(cone)?;
    let max_steps = simulator::default_max_steps(cone);
    let mut rng = rng(seed);
    rng.set_stream(2);
    let mut evaluations = 0usize;
    let simulate = |s: &BilliardState| -> Result<TrajectoryRecord> { simulator::run(s, cone, max_steps) };

    let mut seeds: Vec<BilliardState> = Vec::new();
    if cone.walls() == 2 && dim == 2 {
        let w = WedgeSpec::new(cone.clone())?;
        let per_axis = ((budget / 4) as f64 / 2.0).sqrt().floor().clamp(1.0, 16.0) as usize;
        seeds = wedge::probe_states(&w, per_axis);
    }
    let mut current = random_start(&mut rng, cone, &e);
    let mut current_record = simulate(&current)?;
    evaluations += 1;
    let mut best = (current.clone(), current_record.clone());
    for s in seeds {
        if evaluations >= budget {
            break;
        }
        let r = simulate(&s)?;
        evaluations += 1;
        if r.collisions() > best.1.collisions() {
            best = (s, r);
        }
    }
    if best.1.collisions() > current_record.collisions() {
        current = best.0.clone();
        current_record = best.1.clone();
    }

    let anneal = budget.saturating_sub(evaluations);
    let restart_every = (anneal / 8).max(1);
    for k in 0..anneal {
        let progress = k as f64 / anneal as f64;
        let temperature = 1.0 * (1.0 - progress) + 0.05;
        let sigma = 0.5 * (1.0 - progress) + 0.01;
        if k > 0 && k % restart_every == 0 {
            current = best.0.clone();
            current_record = best.1.clone();
        }
        let scale = linalg::norm(&current.q).max(1e-3);
        let q = linalg::axpy(&current.q, sigma * scale, &(0..dim).map(|_| gaussian(&mut rng)).collect::<Vec<_>>());
        let v = linalg::axpy(&current.v, sigma, &(0..dim).map(|_| gaussian(&mut rng)).collect::<Vec<_>>());
        let Some(v) = linalg::normalized(&v) else { continue };
        if cone.margins(&q).iter().any(|&m| m <= 0.0) {
            continue;
        }
        let proposal = BilliardState { q, v, t: 0.0 };
        let record = simulate(&proposal)?;
        evaluations += 1;
        let gain = record.collisions() as f64 - current_record.collisions() as f64;
        if gain >= 0.0 || rng.gen::<f64>() < (gain / temperature).exp() {
            if record.collisions() > best.1.collisions() {
                best = (proposal.clone(), record.clone());
            }
            current = proposal;
            current_record = record;
        }
    }
    Ok(SearchOutcome { best_collisions: best.1.collisions(), best_state: best.0, record: best.1, evaluations })
}
