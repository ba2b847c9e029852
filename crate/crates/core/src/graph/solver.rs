use nalgebra::{DMatrix, Matrix6, Vector3};
use serde::{Deserialize, Serialize};

use super::linear::evaluate_cost;
use super::sparse::{minimum_degree_ordering, CscMatrix, SparseCholesky};
use super::{information_matrix, linearize, Estimate, FactorGraph, LinearSystem, Value, VariableKey};
use crate::error::{Error, Result};
use crate::pose::{se3_retract, ypr_jacobian, Pose, Tangent6};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    pub max_iterations: usize,
    /// Stop once an accepted step lowers the cost by less than this fraction.
    pub relative_decrease_tol: f64,
    pub step_norm_tol: f64,
    /// Damping is `λ · diag(Λ)`; λ follows the gain-ratio rule of
    /// Nielsen, shrinking after good steps and doubling its growth rate
    /// after each consecutive rejection.
    pub initial_lambda: f64,
    pub max_lambda: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            relative_decrease_tol: 1e-6,
            step_norm_tol: 1e-8,
            initial_lambda: 1e-4,
            max_lambda: 1e12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizationReport {
    pub estimate: Estimate,
    pub initial_cost: f64,
    pub cost: f64,
    pub iterations: usize,
    /// Costs after every accepted step, starting with the initial cost.
    pub cost_history: Vec<f64>,
    pub converged: bool,
    pub skipped_factors: usize,
}

fn apply_step(ls: &LinearSystem, e: &Estimate, delta: &[f64]) -> Estimate {
    let mut out = e.clone();
    for (i, key) in ls.column_order.iter().enumerate() {
        let c = ls.column_offsets[i];
        let v = match e.get(key).expect("linearized key") {
            Value::Pose(p) => Value::Pose(se3_retract(p, &Tangent6::from_fn(|r, _| delta[c + r]))),
            Value::Point(p) => Value::Point(p + Vector3::from_fn(|r, _| delta[c + r])),
        };
        out.insert(*key, v);
    }
    out
}

/// Number of eigenvalues of a symmetric PSD matrix below `rtol · λ_max`.
pub fn null_space_dimension(m: &CscMatrix, rtol: f64) -> usize {
    let eig = m.to_dense().symmetric_eigenvalues();
    let max = eig.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    eig.iter().filter(|&&l| l <= rtol * max).count()
}

/// Levenberg-Marquardt MAP estimation on the pose/landmark manifold.
///
/// The undamped information matrix at the initial point must be positive
/// definite; otherwise the gauge is under-constrained and a
/// [`Error::RankDeficient`] error reports the null-space dimension.
pub fn optimize_map(g: &FactorGraph, init: &Estimate, cfg: &SolverSettings) -> Result<OptimizationReport> {
    let mut estimate = init.clone();
    let mut ls = linearize(g, &estimate)?;
    let mut hessian = information_matrix(&ls);
    // The damped systems share the structure of the first one up to
    // factors dropping in and out, so a single ordering serves every step.
    let perm = minimum_degree_ordering(&hessian);
    if let Err(Error::SingularInformation { .. }) = SparseCholesky::factor_with_ordering(&hessian, perm.clone()) {
        return Err(Error::RankDeficient {
            null_space_dim: null_space_dimension(&hessian, 1e-9),
        });
    }
    let initial_cost = ls.cost();
    let mut cost = initial_cost;
    let mut history = vec![cost];
    let mut lambda = cfg.initial_lambda;
    let mut growth = 2.0;
    let mut iterations = 0;
    let mut converged = false;
    let mut grad = ls.gradient();
    let mut diag = hessian.diagonal();

    while iterations < cfg.max_iterations {
        if cost <= f64::MIN_POSITIVE {
            converged = true;
            break;
        }
        iterations += 1;
        let damping: Vec<f64> = diag.iter().map(|d| lambda * d.max(1e-12)).collect();
        let damped = hessian.add_diagonal(&damping);
        let Ok(chol) = SparseCholesky::factor_with_ordering(&damped, perm.clone()) else {
            lambda *= growth;
            growth *= 2.0;
            if lambda > cfg.max_lambda {
                break;
            }
            continue;
        };
        let delta: Vec<f64> = chol.solve(&grad).into_iter().map(|x| -x).collect();
        let step_norm = delta.iter().map(|x| x * x).sum::<f64>().sqrt();
        if step_norm < cfg.step_norm_tol {
            converged = true;
            break;
        }
        // decrease predicted by the damped quadratic model
        let predicted: f64 = delta
            .iter()
            .zip(&grad)
            .zip(&damping)
            .map(|((d, g), w)| 0.5 * d * (w * d - g))
            .sum();
        let candidate = apply_step(&ls, &estimate, &delta);
        // A step that pushes more points behind a camera only looks cheaper
        // because those residuals vanish; treat it as a failed step.
        let (new_cost, new_skipped) = evaluate_cost(g, &candidate)?;
        if new_cost < cost && new_skipped <= ls.diagnostics.skipped_factors.len() {
            let rel = (cost - new_cost) / cost;
            let rho = (cost - new_cost) / predicted.max(f64::MIN_POSITIVE);
            estimate = candidate;
            cost = new_cost;
            history.push(cost);
            lambda = (lambda * (1.0 / 3.0f64).max(1.0 - (2.0 * rho - 1.0).powi(3))).max(1e-12);
            growth = 2.0;
            ls = linearize(g, &estimate)?;
            hessian = information_matrix(&ls);
            grad = ls.gradient();
            diag = hessian.diagonal();
            if rel < cfg.relative_decrease_tol {
                converged = true;
                break;
            }
        } else {
            lambda *= growth;
            growth *= 2.0;
            if lambda > cfg.max_lambda {
                break;
            }
        }
    }
    Ok(OptimizationReport {
        estimate,
        initial_cost,
        cost,
        iterations,
        cost_history: history,
        converged,
        skipped_factors: ls.diagnostics.skipped_factors.len(),
    })
}

/// Factored information matrix of a graph at an estimate, for extracting
/// marginal covariance blocks.
pub struct Marginals {
    system: LinearSystem,
    chol: SparseCholesky,
}

impl Marginals {
    pub fn new(g: &FactorGraph, e: &Estimate) -> Result<Self> {
        let system = linearize(g, e)?;
        let chol = SparseCholesky::factor(&information_matrix(&system))?;
        Ok(Self { system, chol })
    }

    pub fn log_det(&self) -> f64 {
        self.chol.log_det()
    }

    /// Marginal covariance in tangent coordinates: 3×3 for landmarks, 6×6
    /// (rotation, then translation) for poses.
    pub fn covariance(&self, key: &VariableKey) -> Result<DMatrix<f64>> {
        let cols: Vec<usize> = self
            .system
            .columns_of(key)
            .ok_or(Error::UnknownVariable(*key))?
            .collect();
        Ok(self.chol.inverse_block(&cols))
    }

    /// Pose marginal with the rotation block mapped to yaw-pitch-roll
    /// coordinates at `pose`. `None` at pitch ±90°, where those angles are
    /// singular.
    pub fn pose_covariance_ypr(&self, key: &VariableKey, pose: &Pose) -> Result<Option<Matrix6<f64>>> {
        let c = self.covariance(key)?;
        if c.nrows() != 6 {
            return Err(Error::Structural(format!("{key} is not a pose")));
        }
        let Some(j) = ypr_jacobian(&pose.rotation) else {
            return Ok(None);
        };
        let mut full = Matrix6::identity();
        full.fixed_view_mut::<3, 3>(0, 0).copy_from(&j);
        let c6 = Matrix6::from_fn(|r, k| c[(r, k)]);
        Ok(Some(full * c6 * full.transpose()))
    }
}

pub fn marginal_covariance(g: &FactorGraph, e: &Estimate, key: &VariableKey) -> Result<DMatrix<f64>> {
    Marginals::new(g, e)?.covariance(key)
}
