use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use satslam::harness::{
    aggregate, experiment_scene, failure_counts, figure_csvs, load_failures, load_records, plan_for,
    plan_reconnaissance, run_experiment, write_aggregates, write_text, AggregateTable, ExperimentConfig, Strategy,
};
use satslam::scene::scene_to_json;
use satslam::Result;

#[derive(Parser)]
#[command(name = "satslam", version, about = "Active factor-graph SLAM for spacecraft proximity operations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment configuration (JSON); missing fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Restricts the run to one planning horizon.
    #[arg(long)]
    horizon: Option<usize>,
    /// Restricts the run to the given strategies (repeatable).
    #[arg(long)]
    strategy: Vec<Strategy>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the reconnaissance orbit of one plan and save its graph.
    Recon {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        plan_id: usize,
    },
    /// Score candidate targets after reconnaissance and print the plan as JSON.
    Plan {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        plan_id: usize,
    },
    /// Run the full Monte-Carlo experiment and persist records and aggregates.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Recompute aggregate tables from stored records.
    Metrics {
        #[command(flatten)]
        common: Common,
    },
    /// Write per-figure CSV files from stored records.
    ExportPlot {
        #[command(flatten)]
        common: Common,
        /// Multiplies plotted errors (not uncertainties).
        #[arg(long, default_value_t = 1.0)]
        error_scale: f64,
    },
}

fn load_config(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.master_seed = s;
    }
    if let Some(d) = &c.output_dir {
        cfg.output_dir = d.clone();
    }
    if let Some(h) = c.horizon {
        cfg.horizons = vec![h];
    }
    if !c.strategy.is_empty() {
        cfg.strategies = c.strategy.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_json<T: Serialize>(v: &T) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn stored_tables(cfg: &ExperimentConfig) -> Result<Vec<AggregateTable>> {
    let records = load_records(&cfg.output_dir)?;
    let failures = load_failures(&cfg.output_dir)?;
    Ok(aggregate(&records, &failure_counts(&failures)))
}

fn summarize(tables: &[AggregateTable]) {
    println!("strategy  L   episodes failed  U_r(final)     e_r(final)     U_phi(final)   coverage(final)");
    for t in tables {
        let last = t.horizon - 1;
        println!(
            "{:<8} {:>3} {:>9} {:>6}  {:<14.6e} {:<14.6e} {:<14.6e} {:.4}",
            t.strategy.name(),
            t.horizon,
            t.episodes,
            t.failed,
            t.u_r[last],
            t.e_r[last],
            t.u_phi[last],
            t.coverage[last]
        );
    }
}

#[derive(Serialize)]
struct ReconSummary {
    plan_id: usize,
    poses: usize,
    mapped_landmarks: usize,
    measurements: usize,
    final_position: [f64; 3],
    final_velocity: [f64; 3],
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Recon { common, plan_id } => {
            let cfg = load_config(&common)?;
            let scene = experiment_scene(&cfg)?;
            let recon = plan_reconnaissance(&cfg, &scene, plan_id)?;
            let dir = cfg.output_dir.join(format!("recon_plan{plan_id:02}"));
            write_text(&dir.join("graph.json"), &recon.graph.to_json()?)?;
            write_text(&dir.join("scene.json"), &scene_to_json(&scene)?)?;
            let s = ReconSummary {
                plan_id,
                poses: recon.truth.poses.len(),
                mapped_landmarks: recon.map_ids.len(),
                measurements: recon.measurements.len(),
                final_position: recon.final_state.r.into(),
                final_velocity: recon.final_state.v.into(),
            };
            write_text(&dir.join("summary.json"), &serde_json::to_string_pretty(&s).expect("serializable"))?;
            print_json(&s);
            log::info!("wrote {}", dir.display());
        }
        Command::Plan { common, plan_id } => {
            let cfg = load_config(&common)?;
            let scene = experiment_scene(&cfg)?;
            let recon = plan_reconnaissance(&cfg, &scene, plan_id)?;
            #[derive(Serialize)]
            struct PlanReport {
                plan_id: usize,
                horizon: usize,
                target: [f64; 3],
                best_index: usize,
                rewards: Vec<f64>,
                candidates: Vec<[f64; 3]>,
            }
            let reports = cfg
                .horizons
                .iter()
                .map(|&horizon| {
                    let p = plan_for(&cfg, &recon, plan_id, horizon)?;
                    Ok(PlanReport {
                        plan_id,
                        horizon,
                        target: p.target.into(),
                        best_index: p.best_index,
                        rewards: p.rewards.clone(),
                        candidates: p.candidates.iter().map(|c| c.target.into()).collect(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            print_json(&reports);
        }
        Command::Run { common } => {
            let cfg = load_config(&common)?;
            let out = run_experiment(&cfg)?;
            summarize(&out.aggregates);
            if !out.failures.is_empty() {
                eprintln!("{} episodes failed; see metadata.json", out.failures.len());
            }
        }
        Command::Metrics { common } => {
            let cfg = load_config(&common)?;
            let tables = stored_tables(&cfg)?;
            write_aggregates(&cfg.output_dir, &tables)?;
            summarize(&tables);
        }
        Command::ExportPlot { common, error_scale } => {
            let cfg = load_config(&common)?;
            let tables = stored_tables(&cfg)?;
            let dir = cfg.output_dir.join("plots");
            for (name, csv) in figure_csvs(&tables, error_scale) {
                let path = dir.join(name);
                write_text(&path, &csv)?;
                println!("{}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
