use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Strategy};
use super::episode::{refine_reconnaissance, run_episode, EpisodeSpec, RunRecord};
use super::metrics::{aggregate, AggregateTable};
use crate::error::{Error, Result};
use crate::noise::{derive_seed, label_tag, rng_from_seed};
use crate::planner::{plan_active, PlanOutcome, PlannerConfig};
use crate::scene::{generate_scene, run_reconnaissance, ReconResult};
use crate::camera::Landmark;

/// Child seed for one named stream of the experiment.
pub fn stream_seed(master: u64, label: &str, path: &[u64]) -> u64 {
    let mut full = Vec::with_capacity(path.len() + 1);
    full.push(label_tag(label));
    full.extend_from_slice(path);
    derive_seed(master, &full)
}

pub fn experiment_scene(cfg: &ExperimentConfig) -> Result<Vec<Landmark>> {
    generate_scene(&cfg.scene, &mut rng_from_seed(stream_seed(cfg.master_seed, "scene", &[cfg.scene.seed])))
}

/// Reconnaissance orbit for one plan.
pub fn plan_reconnaissance(cfg: &ExperimentConfig, scene: &[Landmark], plan_id: usize) -> Result<ReconResult> {
    let mut rng = rng_from_seed(stream_seed(cfg.master_seed, "recon", &[plan_id as u64]));
    run_reconnaissance(
        scene,
        &cfg.orbit.params()?,
        &cfg.orbit.initial_state(),
        &cfg.camera,
        &cfg.recon_config(),
        &mut rng,
    )
}

/// Planner call for one plan and horizon, seeded from the master seed.
pub fn plan_for(cfg: &ExperimentConfig, recon: &ReconResult, plan_id: usize, horizon: usize) -> Result<PlanOutcome> {
    let orbit = cfg.orbit.params()?;
    let pcfg = PlannerConfig {
        horizon,
        seed: stream_seed(cfg.master_seed, "plan", &[plan_id as u64, horizon as u64]),
        ..cfg.planner.clone()
    };
    plan_active(&recon.graph, &recon.estimate, &recon.final_state, orbit.nu, orbit.dt, &pcfg, &cfg.camera)
}

pub fn episode_spec(
    cfg: &ExperimentConfig,
    plan_id: usize,
    run_id: usize,
    strategy: Strategy,
    horizon: usize,
    plan: Option<&PlanOutcome>,
) -> Result<EpisodeSpec> {
    let (target, rewards) = match (cfg.passive_target(strategy), plan) {
        (Some(t), _) => (t, None),
        (None, Some(p)) => (p.target, Some(p.rewards.clone())),
        (None, None) => return Err(Error::Config("active episode needs a plan".into())),
    };
    let ids = [plan_id as u64, horizon as u64, run_id as u64];
    let mut sensing = ids.to_vec();
    sensing.push(label_tag(strategy.name()));
    Ok(EpisodeSpec {
        plan_id,
        run_id,
        strategy,
        horizon,
        target,
        rewards,
        process_seed: stream_seed(cfg.master_seed, "process", &ids),
        sensing_seed: stream_seed(cfg.master_seed, "sensing", &sensing),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeFailure {
    pub plan_id: usize,
    pub run_id: usize,
    pub strategy: Strategy,
    pub horizon: usize,
    pub cause: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSummary {
    pub plan_id: usize,
    pub horizon: usize,
    pub target: Option<Vector3<f64>>,
    pub best_index: Option<usize>,
    pub rewards: Vec<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub records: Vec<RunRecord>,
    pub failures: Vec<EpisodeFailure>,
    pub plans: Vec<PlanSummary>,
    pub aggregates: Vec<AggregateTable>,
}

struct PlanResults {
    records: Vec<RunRecord>,
    failures: Vec<EpisodeFailure>,
    plans: Vec<PlanSummary>,
}

fn run_plan(cfg: &ExperimentConfig, scene: &[Landmark], plan_id: usize) -> Result<PlanResults> {
    let recon = plan_reconnaissance(cfg, scene, plan_id)?;
    let warm = refine_reconnaissance(cfg, &recon)?;
    let mut out = PlanResults {
        records: Vec::new(),
        failures: Vec::new(),
        plans: Vec::new(),
    };
    for &horizon in &cfg.horizons {
        let plan = if cfg.strategies.contains(&Strategy::Active) {
            let p = plan_for(cfg, &recon, plan_id, horizon);
            out.plans.push(match &p {
                Ok(p) => PlanSummary {
                    plan_id,
                    horizon,
                    target: Some(p.target),
                    best_index: Some(p.best_index),
                    rewards: p.rewards.clone(),
                    failure: None,
                },
                Err(e) => PlanSummary {
                    plan_id,
                    horizon,
                    target: None,
                    best_index: None,
                    rewards: Vec::new(),
                    failure: Some(e.to_string()),
                },
            });
            p.ok()
        } else {
            None
        };
        let jobs: Vec<(usize, Strategy)> = (0..cfg.num_runs_per_plan)
            .flat_map(|run| cfg.strategies.iter().map(move |s| (run, *s)))
            .collect();
        let results: Vec<(usize, Strategy, Result<RunRecord>)> = jobs
            .par_iter()
            .map(|&(run, strategy)| {
                let r = episode_spec(cfg, plan_id, run, strategy, horizon, plan.as_ref())
                    .and_then(|spec| run_episode(cfg, &recon, &warm, &spec));
                (run, strategy, r)
            })
            .collect();
        for (run_id, strategy, r) in results {
            match r {
                Ok(rec) => out.records.push(rec),
                Err(e) => {
                    log::warn!("plan {plan_id} run {run_id} {strategy} L={horizon}: episode failed: {e}");
                    out.failures.push(EpisodeFailure {
                        plan_id,
                        run_id,
                        strategy,
                        horizon,
                        cause: e.to_string(),
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Runs every plan, horizon, strategy and run and aggregates the records.
/// Nothing is written to disk.
pub fn simulate_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let scene = experiment_scene(cfg)?;
    let per_plan: Vec<Result<PlanResults>> = (0..cfg.num_plans)
        .into_par_iter()
        .map(|plan_id| run_plan(cfg, &scene, plan_id))
        .collect();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut plans = Vec::new();
    for r in per_plan {
        let r = r?;
        records.extend(r.records);
        failures.extend(r.failures);
        plans.extend(r.plans);
    }
    let aggregates = aggregate(&records, &failure_counts(&failures));
    Ok(ExperimentOutput {
        records,
        failures,
        plans,
        aggregates,
    })
}

pub fn failure_counts(failures: &[EpisodeFailure]) -> BTreeMap<(Strategy, usize), usize> {
    let mut m = BTreeMap::new();
    for f in failures {
        *m.entry((f.strategy, f.horizon)).or_default() += 1;
    }
    m
}

/// Runs the experiment and persists it under `cfg.output_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let out = simulate_experiment(cfg)?;
    write_experiment(cfg, &out)?;
    Ok(out)
}

/// Writes `contents` to `path`, creating parent directories.
pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn to_json<T: Serialize>(v: &T, what: &str) -> Result<String> {
    serde_json::to_string_pretty(v).map_err(|e| Error::json(what, e))
}

pub fn record_path(dir: &Path, r: &RunRecord) -> PathBuf {
    dir.join("records")
        .join(format!("L{}", r.horizon))
        .join(format!("plan{:02}_run{:02}_{}.json", r.plan_id, r.run_id, r.strategy))
}

pub fn aggregate_paths(dir: &Path, t: &AggregateTable) -> (PathBuf, PathBuf) {
    (
        dir.join(format!("aggregate_L{}_{}.csv", t.horizon, t.strategy)),
        dir.join(format!("aggregate_map_L{}_{}.csv", t.horizon, t.strategy)),
    )
}

pub fn write_aggregates(dir: &Path, tables: &[AggregateTable]) -> Result<()> {
    for t in tables {
        let (steps, map) = aggregate_paths(dir, t);
        write_text(&steps, &t.steps_csv())?;
        write_text(&map, &t.map_csv())?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Metadata<'a> {
    reconnaissance: &'static str,
    episodes: usize,
    failed_episodes: &'a [EpisodeFailure],
    plans: &'a [PlanSummary],
}

pub fn write_experiment(cfg: &ExperimentConfig, out: &ExperimentOutput) -> Result<()> {
    let dir = &cfg.output_dir;
    write_text(&dir.join("config.json"), &cfg.to_json()?)?;
    for r in &out.records {
        write_text(&record_path(dir, r), &to_json(r, "run record")?)?;
    }
    write_aggregates(dir, &out.aggregates)?;
    let meta = Metadata {
        reconnaissance: "regenerated per plan",
        episodes: out.records.len(),
        failed_episodes: &out.failures,
        plans: &out.plans,
    };
    write_text(&dir.join("metadata.json"), &to_json(&meta, "metadata")?)
}

/// Reads every persisted run record under `dir`, sorted by key.
pub fn load_records(dir: &Path) -> Result<Vec<RunRecord>> {
    let root = dir.join("records");
    let mut paths = Vec::new();
    let mut stack = vec![root.clone()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).map_err(|e| Error::io(&d, e))? {
            let p = entry.map_err(|e| Error::io(&d, e))?.path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|x| x == "json") {
                paths.push(p);
            }
        }
    }
    let mut records = paths
        .iter()
        .map(|p| {
            let s = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str::<RunRecord>(&s).map_err(|e| Error::json(p.display().to_string(), e))
        })
        .collect::<Result<Vec<_>>>()?;
    records.sort_by_key(|r| (r.strategy, r.horizon, r.plan_id, r.run_id));
    Ok(records)
}

/// Failure counts recorded next to persisted records, if any.
pub fn load_failures(dir: &Path) -> Result<Vec<EpisodeFailure>> {
    #[derive(Deserialize)]
    struct Meta {
        failed_episodes: Vec<EpisodeFailure>,
    }
    let path = dir.join("metadata.json");
    if !path.exists() {
        return Ok(Vec::new());
    }
    let s = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let m: Meta = serde_json::from_str(&s).map_err(|e| Error::json(path.display().to_string(), e))?;
    Ok(m.failed_episodes)
}
