//! Belief-space planning of the camera pointing target.
//!
//! Every candidate target induces a pose trajectory (noise-free relative
//! orbit plus boresight pointing). The current graph is augmented with those
//! poses and the measurements they are predicted to make of already mapped
//! landmarks, and the candidate is scored by the entropy reduction of the
//! resulting Gaussian belief.

use std::f64::consts::{E, PI};

use nalgebra::Vector3;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::{project, visible, Intrinsics, Landmark, PixelMeasurement};
use crate::dynamics::{cw_closed_form, RelativeState};
use crate::error::{Error, Result};
use crate::graph::{
    information_matrix, linearize, optimize_map, Estimate, FactorGraph, ProjectionFactor,
    SolverSettings, Value, VariableKey,
};
use crate::graph::sparse::SparseCholesky;
use crate::noise::{derive_seed, psd_sqrt, rng_from_seed, sample_with_sqrt};
use crate::pose::{pointing_rotation, Pose};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub m_candidates: usize,
    pub box_lower: Vector3<f64>,
    pub box_upper: Vector3<f64>,
    pub horizon: usize,
    pub seed: u64,
    /// When set, each reward is averaged over this many noisy draws of the
    /// predicted measurements, each followed by a MAP solve of the augmented
    /// graph. `None` scores the noise-free predictions directly.
    pub num_measurement_samples: Option<usize>,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            m_candidates: 10,
            box_lower: Vector3::new(-1.2, -2.0, -2.0),
            box_upper: Vector3::new(2.5, 2.0, 5.0),
            horizon: 12,
            seed: 0,
            num_measurement_samples: None,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m_candidates == 0 {
            return Err(Error::Config("m_candidates must be at least 1".into()));
        }
        if self.horizon == 0 {
            return Err(Error::Config("planning horizon must be at least 1".into()));
        }
        if (0..3).any(|i| !(self.box_lower[i] <= self.box_upper[i])) {
            return Err(Error::Config("candidate box lower bound exceeds upper bound".into()));
        }
        if self.num_measurement_samples == Some(0) {
            return Err(Error::Config("num_measurement_samples must be positive when set".into()));
        }
        Ok(())
    }
}

/// `ln |Λ|` and tangent dimension of a belief.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeliefSummary {
    pub logdet_lambda: f64,
    pub tangent_dim: usize,
}

impl BeliefSummary {
    pub fn of(g: &FactorGraph, e: &Estimate) -> Result<Self> {
        let ls = linearize(g, e)?;
        let chol = SparseCholesky::factor(&information_matrix(&ls))?;
        Ok(Self {
            logdet_lambda: chol.log_det(),
            tangent_dim: ls.dim(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePlan {
    pub target: Vector3<f64>,
    pub poses: Vec<Pose>,
    /// Predicted measurements; `pose_index` counts from 0 within the plan.
    pub predicted: Vec<PixelMeasurement>,
    /// Information gain in nats, `-inf` when the candidate is infeasible.
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateDiagnostics {
    pub predicted_measurements: usize,
    pub skipped_factors: usize,
    /// Why the reward is `-inf`, if it is.
    pub infeasible: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanOutcome {
    pub target: Vector3<f64>,
    pub best_index: usize,
    pub rewards: Vec<f64>,
    pub candidates: Vec<CandidatePlan>,
    pub diagnostics: Vec<CandidateDiagnostics>,
    pub prior: BeliefSummary,
}

/// `m_candidates` targets drawn uniformly from the candidate box.
pub fn sample_targets<R: Rng + ?Sized>(cfg: &PlannerConfig, rng: &mut R) -> Vec<Vector3<f64>> {
    (0..cfg.m_candidates)
        .map(|_| {
            Vector3::from_fn(|i, _| {
                let (lo, hi) = (cfg.box_lower[i], cfg.box_upper[i]);
                if lo == hi {
                    lo
                } else {
                    rng.gen_range(lo..hi)
                }
            })
        })
        .collect()
}

/// Poses at `t_k + dt, …, t_k + L·dt` on the undisturbed relative orbit
/// from `s_k`, each pointing its boresight at `target`.
pub fn predict_plan(s_k: &RelativeState, nu: f64, dt: f64, horizon: usize, target: &Vector3<f64>) -> Result<Vec<Pose>> {
    if horizon == 0 {
        return Err(Error::Config("planning horizon must be at least 1".into()));
    }
    (1..=horizon)
        .map(|i| {
            let s = cw_closed_form(s_k, nu, i as f64 * dt);
            let rot = pointing_rotation(&s.r, &s.v, target).map_err(|e| Error::DegeneratePlanStep {
                step: i,
                reason: e.to_string(),
            })?;
            Ok(Pose::from_rotation_translation(rot, s.r))
        })
        .collect()
}

/// Noise-free projections of every map landmark visible from each pose.
pub fn predict_measurements(poses: &[Pose], map: &[Landmark], k: &Intrinsics) -> Vec<PixelMeasurement> {
    let mut out = Vec::new();
    for (i, p) in poses.iter().enumerate() {
        for lm in map {
            if visible(p, &lm.position, k) {
                out.push(PixelMeasurement {
                    pose_index: i,
                    landmark_id: lm.id,
                    uv: project(p, &lm.position, k).expect("visible landmark projects"),
                });
            }
        }
    }
    out
}

/// Landmark estimates of a graph, with ids equal to the variable indices.
pub fn map_from_estimate(g: &FactorGraph, e: &Estimate) -> Result<Vec<Landmark>> {
    g.landmark_keys()
        .map(|key| {
            Ok(Landmark {
                id: key.index,
                position: *e.point(&key)?,
            })
        })
        .collect()
}

/// Copies `base` and appends the plan's poses (initialized at the predicted
/// poses) and one projection factor per predicted measurement. No landmark
/// variables are added.
pub fn augment(
    base: &FactorGraph,
    plan: &CandidatePlan,
    base_estimate: &Estimate,
    k: &Intrinsics,
) -> Result<(FactorGraph, Estimate)> {
    let mut g = base.clone();
    let mut e = base_estimate.clone();
    let first = base.pose_keys().map(|k| k.index + 1).max().unwrap_or(0);
    let keys: Vec<VariableKey> = plan
        .poses
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let key = VariableKey::pose(first + i);
            g.insert_variable(key, Value::Pose(*p))?;
            e.insert(key, Value::Pose(*p));
            Ok(key)
        })
        .collect::<Result<_>>()?;
    for z in &plan.predicted {
        let lk = VariableKey::landmark(z.landmark_id);
        if !base.contains(&lk) {
            return Err(Error::Structural(format!("predicted measurement of unmapped landmark {lk}")));
        }
        let pk = *keys.get(z.pose_index).ok_or_else(|| {
            Error::Structural(format!("predicted measurement refers to plan step {} of {}", z.pose_index, keys.len()))
        })?;
        g.add_projection(ProjectionFactor::with_camera_noise(pk, lk, z.uv, *k)?)?;
    }
    Ok((g, e))
}

/// Entropy of an `dim`-dimensional Gaussian with covariance log-determinant
/// `logdet_sigma`.
pub fn entropy_gaussian(dim: usize, logdet_sigma: f64) -> f64 {
    0.5 * dim as f64 * (2.0 * PI * E).ln() + 0.5 * logdet_sigma
}

/// Prior entropy minus posterior entropy, from information log-determinants.
pub fn info_gain(prior: &BeliefSummary, post_logdet: f64, post_dim: usize) -> f64 {
    let n_new = post_dim as f64 - prior.tangent_dim as f64;
    -0.5 * n_new * (2.0 * PI * E).ln() + 0.5 * (post_logdet - prior.logdet_lambda)
}

struct Scored {
    plan: CandidatePlan,
    diag: CandidateDiagnostics,
}

fn infeasible(target: Vector3<f64>, poses: Vec<Pose>, predicted: Vec<PixelMeasurement>, skipped: usize, why: String) -> Scored {
    Scored {
        diag: CandidateDiagnostics {
            predicted_measurements: predicted.len(),
            skipped_factors: skipped,
            infeasible: Some(why),
        },
        plan: CandidatePlan {
            target,
            poses,
            predicted,
            reward: f64::NEG_INFINITY,
        },
    }
}

/// Reward of one augmented graph linearized at `e`.
fn posterior_logdet(g: &FactorGraph, e: &Estimate) -> Result<(f64, usize, usize)> {
    let ls = linearize(g, e)?;
    let skipped = ls.diagnostics.skipped_factors.len();
    let chol = SparseCholesky::factor(&information_matrix(&ls))?;
    Ok((chol.log_det(), ls.dim(), skipped))
}

#[allow(clippy::too_many_arguments)]
fn score_candidate(
    index: usize,
    target: Vector3<f64>,
    base: &FactorGraph,
    base_estimate: &Estimate,
    map: &[Landmark],
    prior: &BeliefSummary,
    s_k: &RelativeState,
    nu: f64,
    dt: f64,
    cfg: &PlannerConfig,
    k: &Intrinsics,
) -> Scored {
    let poses = match predict_plan(s_k, nu, dt, cfg.horizon, &target) {
        Ok(p) => p,
        Err(e) => return infeasible(target, Vec::new(), Vec::new(), 0, e.to_string()),
    };
    let predicted = predict_measurements(&poses, map, k);
    let mut plan = CandidatePlan {
        target,
        poses,
        predicted,
        reward: f64::NEG_INFINITY,
    };
    let (g, e) = match augment(base, &plan, base_estimate, k) {
        Ok(ge) => ge,
        Err(err) => return infeasible(target, plan.poses, plan.predicted, 0, err.to_string()),
    };
    let result = match cfg.num_measurement_samples {
        None => posterior_logdet(&g, &e).map(|(ld, dim, skipped)| (info_gain(prior, ld, dim), skipped)),
        Some(n) => sampled_reward(index, &plan, base, base_estimate, prior, cfg, k, n),
    };
    match result {
        Ok((reward, skipped)) => {
            plan.reward = reward;
            Scored {
                diag: CandidateDiagnostics {
                    predicted_measurements: plan.predicted.len(),
                    skipped_factors: skipped,
                    infeasible: None,
                },
                plan,
            }
        }
        Err(err) => infeasible(target, plan.poses, plan.predicted, 0, err.to_string()),
    }
}

/// Mean information gain over `n` noisy realizations of the predicted
/// measurements, each scored at the MAP estimate of its augmented graph.
#[allow(clippy::too_many_arguments)]
fn sampled_reward(
    index: usize,
    plan: &CandidatePlan,
    base: &FactorGraph,
    base_estimate: &Estimate,
    prior: &BeliefSummary,
    cfg: &PlannerConfig,
    k: &Intrinsics,
    n: usize,
) -> Result<(f64, usize)> {
    let sqrt_v = psd_sqrt(&k.sigma_v);
    let mut total = 0.0;
    let mut skipped = 0;
    for s in 0..n {
        let mut rng = rng_from_seed(derive_seed(cfg.seed, &[1, index as u64, s as u64]));
        let mut noisy = plan.clone();
        for z in &mut noisy.predicted {
            z.uv += sample_with_sqrt::<2, _>(&sqrt_v, &mut rng);
        }
        let (g, e) = augment(base, &noisy, base_estimate, k)?;
        let map = optimize_map(&g, &e, &SolverSettings::default())?;
        let (ld, dim, sk) = posterior_logdet(&g, &map.estimate)?;
        total += info_gain(prior, ld, dim);
        skipped += sk;
    }
    Ok((total / n as f64, skipped))
}

/// Scores the given targets in parallel and returns the best one. Ties go to
/// the lowest index.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_targets(
    base: &FactorGraph,
    base_estimate: &Estimate,
    s_k: &RelativeState,
    nu: f64,
    dt: f64,
    targets: &[Vector3<f64>],
    cfg: &PlannerConfig,
    k: &Intrinsics,
) -> Result<PlanOutcome> {
    cfg.validate()?;
    let prior = BeliefSummary::of(base, base_estimate)?;
    let map = map_from_estimate(base, base_estimate)?;
    let scored: Vec<Scored> = targets
        .par_iter()
        .enumerate()
        .map(|(i, t)| score_candidate(i, *t, base, base_estimate, &map, &prior, s_k, nu, dt, cfg, k))
        .collect();
    let mut best: Option<usize> = None;
    for (i, s) in scored.iter().enumerate() {
        let r = s.plan.reward;
        if r.is_finite() && best.is_none_or(|b| r > scored[b].plan.reward) {
            best = Some(i);
        }
    }
    for (i, s) in scored.iter().enumerate() {
        if let Some(why) = &s.diag.infeasible {
            log::debug!("candidate {i} infeasible: {why}");
        }
    }
    let best = best.ok_or(Error::NoInformativePlan {
        candidates: targets.len(),
    })?;
    let (candidates, diagnostics): (Vec<_>, Vec<_>) = scored.into_iter().map(|s| (s.plan, s.diag)).unzip();
    Ok(PlanOutcome {
        target: candidates[best].target,
        best_index: best,
        rewards: candidates.iter().map(|c| c.reward).collect(),
        candidates,
        diagnostics,
        prior,
    })
}

/// Samples candidate targets from `cfg.seed` and picks the one whose
/// predicted belief has the largest information gain over the current one.
pub fn plan_active(
    base: &FactorGraph,
    base_estimate: &Estimate,
    s_k: &RelativeState,
    nu: f64,
    dt: f64,
    cfg: &PlannerConfig,
    k: &Intrinsics,
) -> Result<PlanOutcome> {
    cfg.validate()?;
    let mut rng = rng_from_seed(derive_seed(cfg.seed, &[0]));
    let targets = sample_targets(cfg, &mut rng);
    evaluate_targets(base, base_estimate, s_k, nu, dt, &targets, cfg, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::PriorFactor;
    use nalgebra::{DMatrix, Matrix6};

    #[test]
    fn samples_stay_in_box() {
        let cfg = PlannerConfig {
            m_candidates: 1000,
            ..Default::default()
        };
        let mut rng = rng_from_seed(3);
        for t in sample_targets(&cfg, &mut rng) {
            for i in 0..3 {
                assert!(t[i] >= cfg.box_lower[i] && t[i] <= cfg.box_upper[i]);
            }
        }
    }

    #[test]
    fn degenerate_box_repeats_lower_bound() {
        let cfg = PlannerConfig {
            box_lower: Vector3::new(1.0, 2.0, 3.0),
            box_upper: Vector3::new(1.0, 2.0, 3.0),
            ..Default::default()
        };
        let mut rng = rng_from_seed(0);
        assert!(sample_targets(&cfg, &mut rng).iter().all(|t| *t == cfg.box_lower));
    }

    #[test]
    fn sample_mean_approaches_box_center() {
        let cfg = PlannerConfig {
            m_candidates: 100_000,
            ..Default::default()
        };
        let mut rng = rng_from_seed(11);
        let s = sample_targets(&cfg, &mut rng);
        let mean = s.iter().fold(Vector3::zeros(), |a, t| a + t) / s.len() as f64;
        let center = (cfg.box_lower + cfg.box_upper) / 2.0;
        let width = cfg.box_upper - cfg.box_lower;
        for i in 0..3 {
            assert!((mean[i] - center[i]).abs() < 0.01 * width[i]);
        }
    }

    fn chaser() -> RelativeState {
        RelativeState::new(Vector3::new(1.0, 6.0, 5.0), Vector3::new(0.0131, -0.0022, 0.0), 0.0)
    }

    const NU: f64 = 1.0948e-3;

    #[test]
    fn plan_boresights_pass_through_target() {
        let target = Vector3::new(0.3, -0.5, 1.0);
        let poses = predict_plan(&chaser(), NU, 95.6, 23, &target).unwrap();
        assert_eq!(poses.len(), 23);
        for p in &poses {
            assert!(p.boresight().cross(&(target - p.translation)).norm() < 1e-9);
        }
        assert_eq!(predict_plan(&chaser(), NU, 95.6, 1, &target).unwrap().len(), 1);
        assert!(predict_plan(&chaser(), NU, 95.6, 0, &target).is_err());
    }

    #[test]
    fn targets_on_one_ray_share_rotations() {
        let s = chaser();
        let near = Vector3::new(0.0, 0.0, 0.0);
        let a = predict_plan(&s, NU, 95.6, 1, &near).unwrap()[0];
        let r1 = cw_closed_form(&s, NU, 95.6).r;
        let far = r1 + (near - r1) * 2.5;
        let b = predict_plan(&s, NU, 95.6, 1, &far).unwrap()[0];
        assert!((a.rotation - b.rotation).norm() < 1e-12);
    }

    #[test]
    fn entropy_and_gain_constants() {
        assert!((entropy_gaussian(1, 0.0) - 1.418_938_533_204_672_7).abs() < 1e-12);
        assert_eq!(entropy_gaussian(0, 0.0), 0.0);
        let prior = BeliefSummary {
            logdet_lambda: 1.7,
            tangent_dim: 10,
        };
        assert_eq!(info_gain(&prior, 1.7, 10), 0.0);
        assert!((info_gain(&prior, 1.7, 16) + 3.0 * (2.0 * PI * E).ln()).abs() < 1e-12);
        assert!((info_gain(&prior, 1.7, 16) + 8.513_631_199_228_037).abs() < 1e-12);
        let unit = BeliefSummary {
            logdet_lambda: 0.0,
            tangent_dim: 1,
        };
        assert!((info_gain(&unit, 2.0, 1) - 1.0).abs() < 1e-15);
        // Σ = cI scales entropy by (n/2) ln c
        let c: f64 = 3.0;
        assert!((entropy_gaussian(4, 4.0 * c.ln()) - entropy_gaussian(4, 0.0) - 2.0 * c.ln()).abs() < 1e-12);
    }

    /// Two clusters of landmarks along ±x, seen by four prior-anchored poses,
    /// and a chaser at the origin moving along z so it can point either way.
    pub(super) struct TwoClusters {
        pub graph: FactorGraph,
        pub estimate: Estimate,
        pub a: Vector3<f64>,
        pub b: Vector3<f64>,
        pub s_k: RelativeState,
        pub k: Intrinsics,
    }

    pub(super) fn two_clusters(seed: u64, n_a: usize, n_b: usize) -> TwoClusters {
        let mut rng = rng_from_seed(seed);
        let k = Intrinsics::default();
        let a = Vector3::new(12.0, 0.0, 0.0);
        let b = Vector3::new(-12.0, 0.0, 0.0);
        let mut g = FactorGraph::new();
        let mut est = Estimate::new();
        let sp = Matrix6::identity() * 1e-6;
        let mut lm_id = 0;
        for (center, n) in [(a, n_a), (b, n_b)] {
            let lms: Vec<Vector3<f64>> = (0..n)
                .map(|_| center + Vector3::from_fn(|_, _| rng.gen_range(-0.8..0.8)))
                .collect();
            let poses: Vec<Pose> = [Vector3::new(0.0, -3.0, 1.0), Vector3::new(0.0, 3.0, -1.0)]
                .iter()
                .map(|r| Pose::from_rotation_translation(pointing_rotation(r, &Vector3::z(), &center).unwrap(), *r))
                .collect();
            let pkeys: Vec<_> = poses
                .iter()
                .map(|p| {
                    let key = g.add_pose_variable(*p);
                    est.insert(key, Value::Pose(*p));
                    g.add_prior(PriorFactor::new(key, *p, sp).unwrap()).unwrap();
                    key
                })
                .collect();
            for l in &lms {
                let lk = g.insert_variable(VariableKey::landmark(lm_id), Value::Point(*l)).unwrap();
                lm_id += 1;
                est.insert(lk, Value::Point(*l));
                for (pk, p) in pkeys.iter().zip(&poses) {
                    let z = project(p, l, &k).unwrap();
                    g.add_projection(ProjectionFactor::with_camera_noise(*pk, lk, z, k).unwrap()).unwrap();
                }
            }
        }
        let s_k = RelativeState::new(Vector3::zeros(), Vector3::new(0.0, 0.0, 0.001), 0.0);
        TwoClusters {
            graph: g,
            estimate: est,
            a,
            b,
            s_k,
            k,
        }
    }

    fn dense_logdet(g: &FactorGraph, e: &Estimate) -> Option<f64> {
        let ls = linearize(g, e).unwrap();
        let dense: DMatrix<f64> = information_matrix(&ls).to_dense();
        dense.cholesky().map(|c| 2.0 * c.l().diagonal().iter().map(|d| d.ln()).sum::<f64>())
    }

    #[test]
    fn richer_view_wins_against_dense_oracle() {
        let cfg = PlannerConfig {
            horizon: 2,
            ..Default::default()
        };
        let sc = two_clusters(5, 20, 4);
        let out = evaluate_targets(&sc.graph, &sc.estimate, &sc.s_k, NU, 10.0, &[sc.b, sc.a], &cfg, &sc.k).unwrap();
        assert_eq!(out.best_index, 1);
        assert_eq!(out.diagnostics[1].predicted_measurements, 40);
        assert_eq!(out.diagnostics[0].predicted_measurements, 8);
        let prior_dense = dense_logdet(&sc.graph, &sc.estimate).unwrap();
        assert!((prior_dense - out.prior.logdet_lambda).abs() < 1e-8 * prior_dense.abs().max(1.0));
        for (i, c) in out.candidates.iter().enumerate() {
            let (g, e) = augment(&sc.graph, c, &sc.estimate, &sc.k).unwrap();
            let post = dense_logdet(&g, &e).unwrap();
            let oracle = -0.5 * (6 * cfg.horizon) as f64 * (2.0 * PI * E).ln() + 0.5 * (post - prior_dense);
            assert!((oracle - out.rewards[i]).abs() < 1e-8 * oracle.abs().max(1.0), "{oracle} {}", out.rewards[i]);
        }
        assert!(out.rewards[1] > out.rewards[0]);
    }

    #[test]
    fn blind_candidate_is_infeasible_and_never_wins() {
        let cfg = PlannerConfig {
            horizon: 2,
            ..Default::default()
        };
        let sc = two_clusters(1, 20, 2);
        let out = evaluate_targets(&sc.graph, &sc.estimate, &sc.s_k, NU, 10.0, &[sc.b, sc.a], &cfg, &sc.k).unwrap();
        assert_eq!(out.best_index, 1);
        assert_eq!(out.rewards[0], f64::NEG_INFINITY);
        assert!(out.diagnostics[0].infeasible.is_some());
        let away = Vector3::new(0.0, 0.0, 50.0);
        let err = evaluate_targets(&sc.graph, &sc.estimate, &sc.s_k, NU, 10.0, &[away], &cfg, &sc.k);
        assert!(matches!(err, Err(Error::NoInformativePlan { candidates: 1 })));
    }

    #[test]
    fn duplicates_tie_to_lowest_index_and_base_is_untouched() {
        let cfg = PlannerConfig {
            horizon: 3,
            ..Default::default()
        };
        let sc = two_clusters(2, 12, 6);
        let before = sc.graph.to_json().unwrap();
        let out = evaluate_targets(&sc.graph, &sc.estimate, &sc.s_k, NU, 10.0, &[sc.b, sc.a, sc.a], &cfg, &sc.k).unwrap();
        assert_eq!(out.rewards[1], out.rewards[2]);
        assert_eq!(out.best_index, 1);
        assert_eq!(out.target, sc.a);
        let max = out.rewards.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(out.rewards[out.best_index], max);
        assert_eq!(sc.graph.to_json().unwrap(), before);
    }

    #[test]
    fn single_candidate_is_returned() {
        let cfg = PlannerConfig {
            horizon: 2,
            m_candidates: 1,
            ..Default::default()
        };
        let sc = two_clusters(4, 12, 6);
        let out = evaluate_targets(&sc.graph, &sc.estimate, &sc.s_k, NU, 10.0, &[sc.b], &cfg, &sc.k).unwrap();
        assert_eq!(out.target, sc.b);
    }

    #[test]
    fn augment_counts() {
        let sc = two_clusters(6, 10, 5);
        let poses = predict_plan(&sc.s_k, NU, 10.0, 3, &sc.a).unwrap();
        let map = map_from_estimate(&sc.graph, &sc.estimate).unwrap();
        let predicted = predict_measurements(&poses, &map, &sc.k);
        let brute: usize = poses
            .iter()
            .map(|p| map.iter().filter(|l| visible(p, &l.position, &sc.k)).count())
            .sum();
        assert_eq!(predicted.len(), brute);
        let plan = CandidatePlan {
            target: sc.a,
            poses,
            predicted,
            reward: 0.0,
        };
        let (g, _) = augment(&sc.graph, &plan, &sc.estimate, &sc.k).unwrap();
        assert_eq!(g.factor_count(), sc.graph.factor_count() + plan.predicted.len());
        assert_eq!(g.tangent_dim(), sc.graph.tangent_dim() + 18);
        assert!(predict_measurements(&plan.poses, &[], &sc.k).is_empty());

        let mut bad = plan.clone();
        bad.predicted[0].landmark_id = 999;
        assert!(matches!(augment(&sc.graph, &bad, &sc.estimate, &sc.k), Err(Error::Structural(_))));
    }

    #[test]
    fn gain_matches_entropy_difference() {
        let sc = two_clusters(8, 8, 4);
        let poses = predict_plan(&sc.s_k, NU, 10.0, 2, &sc.a).unwrap();
        let map = map_from_estimate(&sc.graph, &sc.estimate).unwrap();
        let plan = CandidatePlan {
            target: sc.a,
            predicted: predict_measurements(&poses, &map, &sc.k),
            poses,
            reward: 0.0,
        };
        let (g, e) = augment(&sc.graph, &plan, &sc.estimate, &sc.k).unwrap();
        let cov = |g: &FactorGraph, e: &Estimate| {
            let d = information_matrix(&linearize(g, e).unwrap()).to_dense();
            let s = d.try_inverse().unwrap();
            (s.nrows(), s.determinant().ln())
        };
        let (n0, ls0) = cov(&sc.graph, &sc.estimate);
        let (n1, ls1) = cov(&g, &e);
        let prior = BeliefSummary::of(&sc.graph, &sc.estimate).unwrap();
        let post = BeliefSummary::of(&g, &e).unwrap();
        let gain = info_gain(&prior, post.logdet_lambda, post.tangent_dim);
        let oracle = entropy_gaussian(n0, ls0) - entropy_gaussian(n1, ls1);
        assert!((gain - oracle).abs() < 1e-8 * oracle.abs().max(1.0), "{gain} {oracle}");
    }

    #[test]
    fn sampled_rewards_are_deterministic() {
        let cfg = PlannerConfig {
            horizon: 2,
            num_measurement_samples: Some(2),
            ..Default::default()
        };
        let sc = two_clusters(9, 12, 6);
        let run = || evaluate_targets(&sc.graph, &sc.estimate, &sc.s_k, NU, 10.0, &[sc.b, sc.a], &cfg, &sc.k).unwrap();
        let (x, y) = (run(), run());
        assert_eq!(x.rewards, y.rewards);
        assert_eq!(x.best_index, 1);
    }
}
