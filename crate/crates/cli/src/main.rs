use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use polycone::cone::{gram, ConeFile, ConeSpec};
use polycone::constants::bounds_report;
use polycone::hardball::{conjugacy_check, simulate_balls, HardBallSystem};
use polycone::harness::{adversarial_search, ensemble_to_file, ExperimentConfig, OutputFormat};
use polycone::simulator::{self, audit, BilliardState};
use polycone::wedge::{self, WedgeSpec};
use polycone::{Error, Result};
use serde::Serialize;

/// Billiards in polyhedral cones: collision bounds, simulation and search.
#[derive(Parser)]
#[command(name = "polycone", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Text,
    Csv,
    Structured,
}

#[derive(Clone, Copy, ValueEnum)]
enum RowFormat {
    Csv,
    Structured,
}

#[derive(Subcommand)]
enum Command {
    /// Print the constants and collision bounds of a cone.
    Bounds {
        #[arg(long)]
        cone: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: ReportFormat,
    },
    /// Run one trajectory and print its record as JSON.
    Simulate {
        #[arg(long)]
        cone: PathBuf,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        q: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        v: Vec<f64>,
        #[arg(long)]
        max_steps: Option<usize>,
        /// Check the trajectory against every bound; exit 1 on a violation.
        #[arg(long)]
        audit: bool,
    },
    /// Random cones, random trajectories, audits; one row per cone.
    Ensemble {
        #[arg(long)]
        walls: usize,
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        trials: usize,
        #[arg(long, default_value_t = 100)]
        trajectories: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: RowFormat,
        #[arg(long)]
        max_steps: Option<usize>,
        #[arg(long, default_value_t = 0)]
        search_budget: usize,
    },
    /// Search for an initial state with many collisions.
    Search {
        #[arg(long)]
        cone: PathBuf,
        #[arg(long)]
        budget: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Planar wedge of opening angle theta.
    Wedge {
        #[arg(long)]
        theta: f64,
        #[arg(long)]
        search: bool,
        #[arg(long, default_value_t = 2000)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Elastic balls on a line.
    Hardball {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        masses: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        positions: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        velocities: Vec<f64>,
        #[arg(long, default_value_t = 10_000)]
        max_events: usize,
        /// Compare with the equivalent cone billiard; exit 1 on mismatch.
        #[arg(long)]
        conjugacy: bool,
    },
}

fn read_cone(path: &PathBuf) -> Result<ConeSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let file: ConeFile = serde_json::from_str(&text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    file.into_cone()
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let s = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    println!("{s}");
    Ok(())
}

fn execute(command: Command) -> Result<bool> {
    match command {
        Command::Bounds { cone, format } => {
            let cone = read_cone(&cone)?;
            if cone.was_renormalized() {
                eprintln!("note: normals were rescaled to unit length");
            }
            let report = bounds_report(&cone)?;
            match format {
                ReportFormat::Text => print!("{}", report.to_text()),
                ReportFormat::Csv => print!("{}", report.to_csv()),
                ReportFormat::Structured => print_json(&report)?,
            }
            Ok(true)
        }
        Command::Simulate { cone, q, v, max_steps, audit: check } => {
            let cone = read_cone(&cone)?;
            let start = BilliardState::new(q, v)?;
            let steps = max_steps.unwrap_or_else(|| simulator::default_max_steps(&cone));
            let record = simulator::run(&start, &cone, steps)?;
            print_json(&record)?;
            if !check {
                return Ok(true);
            }
            let verdict = audit(&record, &bounds_report(&cone)?)?;
            print_json(&verdict)?;
            Ok(verdict.pass)
        }
        Command::Ensemble { walls, dim, trials, trajectories, seed, out, format, max_steps, search_budget } => {
            let config = ExperimentConfig {
                n_walls: walls,
                dim,
                trials,
                trajectories,
                seed,
                max_steps_override: max_steps,
                search_budget,
                output_path: out.to_string_lossy().into_owned(),
                format: match format {
                    RowFormat::Csv => OutputFormat::Csv,
                    RowFormat::Structured => OutputFormat::Structured,
                },
            };
            let pass = ensemble_to_file(&config)?;
            if !pass {
                eprintln!("audit failures recorded in {}", out.display());
            }
            Ok(pass)
        }
        Command::Search { cone, budget, seed } => {
            let cone = read_cone(&cone)?;
            let found = adversarial_search(&cone, budget, seed)?;
            let verdict = audit(&found.record, &bounds_report(&cone)?)?;
            println!("best_collisions = {}", found.best_collisions);
            println!("evaluations = {}", found.evaluations);
            println!("q = {:?}", found.best_state.q);
            println!("v = {:?}", found.best_state.v);
            println!("audit = {}", if verdict.pass { "pass" } else { "fail" });
            Ok(verdict.pass)
        }
        Command::Wedge { theta, search, budget, seed } => {
            let w = WedgeSpec::from_angle(theta)?;
            let g = gram(&w.cone);
            println!("theta = {theta:.17e}");
            println!("gram_offdiagonal = {:.17e}", g.get(0, 1));
            println!("sharp_bound = {}", w.sharp_bound());
            if !search {
                return Ok(true);
            }
            let found = adversarial_search(&w.cone, budget, seed)?;
            println!("search_best = {}", found.best_collisions);
            let mut ok = found.best_collisions as u64 <= w.sharp_bound();
            if found.best_collisions >= 2 {
                let arcs = wedge::velocity_arc_check(&found.record, &w)?;
                let unfolded = wedge::unfold(&found.record, &w)?;
                println!("arc_max_angle_error = {:.3e}", arcs.max_angle_error);
                println!("unfolding_residual = {:.3e}", unfolded.residual);
                ok &= arcs.pass;
            }
            Ok(ok)
        }
        Command::Hardball { masses, positions, velocities, max_events, conjugacy } => {
            let system = HardBallSystem::new(masses, positions, velocities)?;
            if conjugacy {
                let report = conjugacy_check(&system, max_events)?;
                print_json(&report)?;
                Ok(report.pass)
            } else {
                print_json(&simulate_balls(&system, max_events)?)?;
                Ok(true)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
