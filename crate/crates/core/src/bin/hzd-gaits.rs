//! Command-line front end over [`hzd_gaits::pipeline`]. Each command prints
//! a JSON summary on stdout; failures print `{"error": .., "message": ..}`
//! on stderr and exit with status 1.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hzd_gaits::config::{Config, CONFIG_ENV};
use hzd_gaits::continuum::ContinuumOptions;
use hzd_gaits::pipeline::Pipeline;
use hzd_gaits::Result;
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "hzd-gaits",
    version,
    about = "Speed-indexed families of certified biped gaits and safe switching among them"
)]
struct Cli {
    /// TOML configuration; defaults are used when neither this nor the environment variable is set.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    /// Directory holding the artifacts read and written by each command.
    #[arg(long, global = true, env = "HZD_GAITS_OUT", default_value = "artifacts")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Design and certify the base gait (writes base_gait.json).
    DesignBase,
    /// Continue the base gait into a speed-indexed family (writes family.json, gaits.csv).
    Continuum {
        /// Lowest speed to reach (m/s).
        #[arg(long)]
        lo: Option<f64>,
        /// Highest speed to reach (m/s).
        #[arg(long)]
        hi: Option<f64>,
        /// Largest speed gap between neighboring gaits (m/s).
        #[arg(long)]
        gap: Option<f64>,
    },
    /// Check family invariants, uniform boundedness and random switching (writes analysis.json).
    Analyze {
        /// Number of random switching signals; 0 skips them.
        #[arg(long)]
        signals: Option<usize>,
        /// Steps per random signal.
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Simulate every ordered switch and build the transition graph (writes graph.json, edges.csv).
    Graph {
        /// Radius of the zeta ball ((kg m^2/s)^2).
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Minimum-dwell path between the gaits nearest two speeds (writes plan.json, path.csv).
    Plan {
        #[arg(long)]
        from_speed: f64,
        #[arg(long)]
        to_speed: f64,
    },
    /// Track a speed schedule with the supervisor (writes run.json, steps.csv, switches.csv, trajectory.csv).
    Run {
        /// Schedule such as "0:0.85,80:0.58,200:0.85" (step triggers) or "0s:0.85,30s:0.6".
        #[arg(long)]
        schedule: Option<String>,
        /// Total number of steps.
        #[arg(long)]
        steps: Option<usize>,
        /// Skip the dense trajectory CSV.
        #[arg(long)]
        no_trajectory: bool,
    },
    /// Write plot inputs (orbits.csv, gaits.csv and edges.csv when a graph exists).
    Export,
}

fn execute(cli: Cli) -> Result<serde_json::Value> {
    let mut config = Config::resolve(cli.config.as_deref())?;
    match &cli.command {
        Command::Analyze { signals, steps, seed } => {
            config.analyze.random_signals = signals.unwrap_or(config.analyze.random_signals);
            config.analyze.signal_steps = steps.unwrap_or(config.analyze.signal_steps);
            config.analyze.seed = seed.unwrap_or(config.analyze.seed);
        }
        Command::Graph { epsilon: Some(e) } => config.graph.epsilon = *e,
        Command::Run { schedule, steps, no_trajectory } => {
            if let Some(s) = schedule {
                config.run.schedule = s.clone();
            }
            config.run.total_steps = steps.unwrap_or(config.run.total_steps);
            config.run.record_trajectory &= !no_trajectory;
        }
        _ => {}
    }
    let p = Pipeline::new(config, &cli.out)?;
    Ok(match cli.command {
        Command::DesignBase => {
            let b = p.design_base()?;
            let r = &b.record;
            json!({
                "artifact": p.path(hzd_gaits::pipeline::BASE_GAIT_FILE),
                "speed": r.speed, "zeta_star": r.zeta_star, "delta_sq": r.delta_sq, "k_max": r.k_max,
                "fixed_point_residual": r.fixed_point_residual, "spectral_radius": r.spectrum.spectral_radius,
                "margins": r.margins,
            })
        }
        Command::Continuum { lo, hi, gap } => {
            let c = p.config.continuum;
            let opts = ContinuumOptions {
                speed_lo: lo.unwrap_or(c.speed_lo),
                speed_hi: hi.unwrap_or(c.speed_hi),
                max_gap: gap.unwrap_or(c.max_gap),
                ..c
            };
            let f = p.continuum(Some(opts))?;
            let (lo, hi) = f.speed_range();
            json!({ "artifact": p.path(hzd_gaits::pipeline::FAMILY_FILE), "gaits": f.len(), "speed_min": lo,
                    "speed_max": hi, "max_gap": f.max_gap(), "rejected_targets": f.rejected.len() })
        }
        Command::Analyze { .. } => serde_json::to_value(p.analyze()?)?,
        Command::Graph { .. } => {
            let g = p.graph()?;
            json!({ "artifact": p.path(hzd_gaits::pipeline::GRAPH_FILE), "nodes": g.len(), "edges": g.edges.len(),
                    "feasible_edges": g.feasible_edges().count(), "strongly_connected": g.is_strongly_connected(),
                    "components": g.components() })
        }
        Command::Plan { from_speed, to_speed } => serde_json::to_value(p.plan(from_speed, to_speed)?)?,
        Command::Run { .. } => serde_json::to_value(p.run()?.1)?,
        Command::Export => json!({ "written": p.export()? }),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(v) => {
            use std::io::Write;
            let text = serde_json::to_string_pretty(&v).expect("JSON values always serialize");
            // a closed stdout (e.g. piped into `head`) is not a pipeline failure
            let _ = writeln!(std::io::stdout(), "{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
