use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Strategy};
use super::metrics::metric_coverage;
use crate::camera::{observe_scene, PixelMeasurement};
use crate::dynamics::cw_propagate_noisy;
use crate::error::{Error, Result};
use crate::graph::{optimize_map, Estimate, Marginals, ProjectionFactor, Value, VariableKey};
use crate::noise::rng_from_seed;
use crate::planner::predict_plan;
use crate::pose::{pointing_rotation, rotation_to_ypr, ypr_difference, Pose};
use crate::scene::{perturb_attitude, ReconResult};

/// What an episode executes and where its randomness comes from.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSpec {
    pub plan_id: usize,
    pub run_id: usize,
    pub strategy: Strategy,
    pub horizon: usize,
    pub target: Vector3<f64>,
    /// Candidate rewards behind an active target.
    pub rewards: Option<Vec<f64>>,
    /// Seeds the translational disturbance; shared across strategies so
    /// they fly the same true orbit.
    pub process_seed: u64,
    /// Seeds attitude-tracking and pixel noise.
    pub sensing_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub iterations: usize,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub converged: bool,
    pub skipped_factors: usize,
}

/// Ground truth, estimates and metric series of one simulated window.
/// Series are indexed by step `1..=horizon` after the reconnaissance orbit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub plan_id: usize,
    pub run_id: usize,
    pub strategy: Strategy,
    pub horizon: usize,
    pub target: Vector3<f64>,
    pub true_positions: Vec<Vector3<f64>>,
    pub estimated_positions: Vec<Vector3<f64>>,
    pub true_ypr: Vec<Vector3<f64>>,
    pub estimated_ypr: Vec<Vector3<f64>>,
    /// Trace of the position marginal covariance, m².
    pub u_r: Vec<f64>,
    /// Trace of the yaw-pitch-roll marginal covariance, rad².
    pub u_phi: Vec<f64>,
    pub e_r: Vec<f64>,
    pub e_phi: Vec<f64>,
    pub coverage: Vec<f64>,
    pub observations_per_step: Vec<usize>,
    /// Mean landmark marginal trace and mean landmark error over the map.
    pub u_m: f64,
    pub e_m: f64,
    pub map_size: usize,
    pub solver: SolverSummary,
    pub rewards: Option<Vec<f64>>,
}

/// MAP estimate of the reconnaissance graph alone. Every episode of a plan
/// solves a superset of this problem, so it is computed once and used as
/// their starting point.
pub fn refine_reconnaissance(cfg: &ExperimentConfig, recon: &ReconResult) -> Result<Estimate> {
    let report = optimize_map(&recon.graph, &recon.estimate, &cfg.solver)?;
    if !report.converged {
        log::warn!(
            "reconnaissance refinement stopped after {} iterations (cost {:.6e})",
            report.iterations,
            report.cost
        );
    }
    Ok(report.estimate)
}

/// Flies one window toward `spec.target`, appends the real measurements to
/// the reconnaissance graph, solves for the MAP estimate and evaluates it.
/// `warm_start` supplies initial values for the reconnaissance variables;
/// new poses start from the noise-free prediction of the commanded window.
pub fn run_episode(
    cfg: &ExperimentConfig,
    recon: &ReconResult,
    warm_start: &Estimate,
    spec: &EpisodeSpec,
) -> Result<RunRecord> {
    let orbit = cfg.orbit.params()?;
    let k = cfg.camera;
    let horizon = spec.horizon;
    if horizon == 0 {
        return Err(Error::Config("episode horizon must be at least 1".into()));
    }
    let mut process_rng = rng_from_seed(spec.process_seed);
    let mut sensing_rng = rng_from_seed(spec.sensing_seed);

    let states = cw_propagate_noisy(&recon.final_state, &orbit, horizon, &mut process_rng);
    let mut truth = Vec::with_capacity(horizon);
    for s in &states[1..] {
        let r = pointing_rotation(&s.r, &s.v, &spec.target)?;
        truth.push(Pose::new(perturb_attitude(&r, cfg.attitude_noise_sigma, &mut sensing_rng), s.r)?);
    }
    let map = recon.mapped_truth();
    let sim_k = k.with_simulated_noise_scale(cfg.pixel_noise_scale);
    let measurements: Vec<Vec<PixelMeasurement>> = truth
        .iter()
        .enumerate()
        .map(|(i, p)| observe_scene(p, i, &map, &sim_k, &mut sensing_rng))
        .collect();

    let predicted = predict_plan(&recon.final_state, orbit.nu, orbit.dt, horizon, &spec.target)?;
    let mut g = recon.graph.clone();
    let mut init = warm_start.clone();
    let first = g.pose_keys().map(|k| k.index + 1).max().unwrap_or(0);
    let keys: Vec<VariableKey> = predicted
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let key = g.insert_variable(VariableKey::pose(first + i), Value::Pose(*p))?;
            init.insert(key, Value::Pose(*p));
            Ok(key)
        })
        .collect::<Result<_>>()?;
    for z in measurements.iter().flatten() {
        g.add_projection(ProjectionFactor::with_camera_noise(
            keys[z.pose_index],
            VariableKey::landmark(z.landmark_id),
            z.uv,
            k,
        )?)?;
    }

    let report = optimize_map(&g, &init, &cfg.solver)?;
    let est = &report.estimate;
    let marginals = Marginals::new(&g, est)?;

    let mut rec = RunRecord {
        plan_id: spec.plan_id,
        run_id: spec.run_id,
        strategy: spec.strategy,
        horizon,
        target: spec.target,
        true_positions: Vec::with_capacity(horizon),
        estimated_positions: Vec::with_capacity(horizon),
        true_ypr: Vec::with_capacity(horizon),
        estimated_ypr: Vec::with_capacity(horizon),
        u_r: Vec::with_capacity(horizon),
        u_phi: Vec::with_capacity(horizon),
        e_r: Vec::with_capacity(horizon),
        e_phi: Vec::with_capacity(horizon),
        coverage: metric_coverage(
            &measurements
                .iter()
                .map(|zs| zs.iter().map(|z| z.landmark_id).collect())
                .collect::<Vec<_>>(),
            map.len(),
        )?,
        observations_per_step: measurements.iter().map(Vec::len).collect(),
        u_m: 0.0,
        e_m: 0.0,
        map_size: map.len(),
        solver: SolverSummary {
            iterations: report.iterations,
            initial_cost: report.initial_cost,
            final_cost: report.cost,
            converged: report.converged,
            skipped_factors: report.skipped_factors,
        },
        rewards: spec.rewards.clone(),
    };
    for (key, t) in keys.iter().zip(&truth) {
        let p = est.pose(key)?;
        let cov = marginals.covariance(key)?;
        let u_phi = match marginals.pose_covariance_ypr(key, p)? {
            Some(c) => c.fixed_view::<3, 3>(0, 0).trace(),
            None => {
                log::warn!("{key}: yaw-pitch-roll singular at the estimate; reporting tangent trace");
                (0..3).map(|i| cov[(i, i)]).sum()
            }
        };
        let (ypr_t, ypr_e) = (rotation_to_ypr(&t.rotation), rotation_to_ypr(&p.rotation));
        rec.true_positions.push(t.translation);
        rec.estimated_positions.push(p.translation);
        rec.u_r.push((3..6).map(|i| cov[(i, i)]).sum());
        rec.u_phi.push(u_phi);
        rec.e_r.push((t.translation - p.translation).norm());
        rec.e_phi.push(ypr_difference(&ypr_t, &ypr_e).norm());
        rec.true_ypr.push(ypr_t);
        rec.estimated_ypr.push(ypr_e);
    }
    let (mut u_m, mut e_m) = (0.0, 0.0);
    for l in &map {
        let key = VariableKey::landmark(l.id);
        u_m += marginals.covariance(&key)?.trace();
        e_m += (est.point(&key)? - l.position).norm();
    }
    rec.u_m = u_m / map.len() as f64;
    rec.e_m = e_m / map.len() as f64;
    Ok(rec)
}
