use nalgebra::{DMatrix, Vector2};
use serde::{Deserialize, Serialize};

use super::sparse::{CscMatrix, SparseCholesky};
use super::{Estimate, Factor, FactorGraph, VarKind, VariableKey};
use crate::camera::{project, project_jacobians};
use crate::error::{Error, Result};
use crate::pose::{se3_local, so3_right_jacobian_inv};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearizationDiagnostics {
    /// Factor indices whose landmark was behind the camera; their rows are zero.
    pub skipped_factors: Vec<usize>,
    /// Landmarks constrained by fewer than two active projection factors.
    pub weak_landmarks: Vec<VariableKey>,
}

/// Whitened first-order model `r(e ⊞ δ) ≈ r + A δ` of a graph.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub jacobian: CscMatrix,
    pub residual: Vec<f64>,
    pub column_order: Vec<VariableKey>,
    /// First column of each variable in `column_order`, plus the total width.
    pub column_offsets: Vec<usize>,
    pub diagnostics: LinearizationDiagnostics,
}

impl LinearSystem {
    /// `½‖r‖²`.
    pub fn cost(&self) -> f64 {
        0.5 * self.residual.iter().map(|r| r * r).sum::<f64>()
    }

    pub fn dim(&self) -> usize {
        *self.column_offsets.last().unwrap_or(&0)
    }

    pub fn columns_of(&self, key: &VariableKey) -> Option<std::ops::Range<usize>> {
        let i = self.column_order.iter().position(|k| k == key)?;
        Some(self.column_offsets[i]..self.column_offsets[i + 1])
    }

    /// Gradient `Aᵀ r`.
    pub fn gradient(&self) -> Vec<f64> {
        self.jacobian.tr_mul_vec(&self.residual)
    }
}

/// Whitened residual of one factor and, if requested, its Jacobian blocks
/// (one per key, row-major `dim × tangent` matrices). `None` when the factor
/// is skipped at this linearization point.
pub(crate) struct FactorModel {
    pub residual: Vec<f64>,
    pub blocks: Vec<(VariableKey, DMatrix<f64>)>,
}

pub(crate) fn factor_model(f: &Factor, e: &Estimate, jacobians: bool) -> Result<Option<FactorModel>> {
    match f {
        Factor::Prior(p) => {
            let pose = e.pose(&p.key)?;
            let err = se3_local(&p.prior_pose, pose);
            let residual = p.sqrt_info * err;
            let blocks = if jacobians {
                let mut j = nalgebra::Matrix6::<f64>::identity();
                let w = err.fixed_rows::<3>(0).into_owned();
                j.fixed_view_mut::<3, 3>(0, 0).copy_from(&so3_right_jacobian_inv(&w));
                let wj = p.sqrt_info * j;
                vec![(p.key, DMatrix::from_fn(6, 6, |r, c| wj[(r, c)]))]
            } else {
                Vec::new()
            };
            Ok(Some(FactorModel {
                residual: residual.iter().copied().collect(),
                blocks,
            }))
        }
        Factor::Projection(p) => {
            let pose = e.pose(&p.pose_key)?;
            let lm = e.point(&p.landmark_key)?;
            let uv = match project(pose, lm, &p.intrinsics) {
                Ok(uv) => uv,
                Err(Error::BehindCamera { .. }) => return Ok(None),
                Err(other) => return Err(other),
            };
            let residual: Vector2<f64> = p.sqrt_info * (uv - p.z);
            let blocks = if jacobians {
                let (jp, jl) = project_jacobians(pose, lm, &p.intrinsics)?;
                let (jp, jl) = (p.sqrt_info * jp, p.sqrt_info * jl);
                vec![
                    (p.pose_key, DMatrix::from_fn(2, 6, |r, c| jp[(r, c)])),
                    (p.landmark_key, DMatrix::from_fn(2, 3, |r, c| jl[(r, c)])),
                ]
            } else {
                Vec::new()
            };
            Ok(Some(FactorModel {
                residual: residual.iter().copied().collect(),
                blocks,
            }))
        }
    }
}

/// Whitened cost `½ Σ‖r_f‖²` at `e` over the factors that can be evaluated,
/// and the number of behind-camera factors left out.
pub(crate) fn evaluate_cost(g: &FactorGraph, e: &Estimate) -> Result<(f64, usize)> {
    let mut cost = 0.0;
    let mut skipped = 0;
    for f in g.factors() {
        match factor_model(f, e, false)? {
            Some(m) => cost += 0.5 * m.residual.iter().map(|r| r * r).sum::<f64>(),
            None => skipped += 1,
        }
    }
    Ok((cost, skipped))
}

/// Stacks the whitened Jacobians and residuals of every factor, in factor
/// order, with columns in variable insertion order.
pub fn linearize(g: &FactorGraph, e: &Estimate) -> Result<LinearSystem> {
    for k in g.keys() {
        if !e.contains(k) {
            return Err(Error::UnknownVariable(*k));
        }
    }
    let column_order: Vec<VariableKey> = g.keys().copied().collect();
    let mut column_offsets = Vec::with_capacity(column_order.len() + 1);
    let mut acc = 0;
    for k in &column_order {
        column_offsets.push(acc);
        acc += k.tangent_dim();
    }
    column_offsets.push(acc);
    let offset_of = |k: &VariableKey| column_offsets[g.variables.get_index_of(k).expect("key in graph")];

    let rows = g.residual_dim();
    let mut triplets = Vec::with_capacity(g.factor_count() * 18);
    let mut residual = vec![0.0; rows];
    let mut diagnostics = LinearizationDiagnostics::default();
    let mut active_obs: std::collections::BTreeMap<VariableKey, usize> =
        g.landmark_keys().map(|k| (k, 0)).collect();
    let mut row = 0;
    for (fi, f) in g.factors().iter().enumerate() {
        let dim = f.residual_dim();
        match factor_model(f, e, true)? {
            None => diagnostics.skipped_factors.push(fi),
            Some(m) => {
                residual[row..row + dim].copy_from_slice(&m.residual);
                for (key, block) in &m.blocks {
                    let c0 = offset_of(key);
                    for c in 0..block.ncols() {
                        for r in 0..block.nrows() {
                            let v = block[(r, c)];
                            if v != 0.0 {
                                triplets.push((row + r, c0 + c, v));
                            }
                        }
                    }
                    if key.kind == VarKind::Landmark {
                        *active_obs.entry(*key).or_default() += 1;
                    }
                }
            }
        }
        row += dim;
    }
    diagnostics.weak_landmarks = active_obs
        .into_iter()
        .filter(|&(_, n)| n < 2)
        .map(|(k, _)| k)
        .collect();
    if !diagnostics.skipped_factors.is_empty() {
        log::debug!(
            "linearize: skipped {} behind-camera factors",
            diagnostics.skipped_factors.len()
        );
    }
    Ok(LinearSystem {
        jacobian: CscMatrix::from_triplets(rows, acc, &triplets),
        residual,
        column_order,
        column_offsets,
        diagnostics,
    })
}

/// Information matrix `Λ = AᵀA` of a linear system.
pub fn information_matrix(ls: &LinearSystem) -> CscMatrix {
    ls.jacobian.gram()
}

/// `ln |m|` of a symmetric positive-definite sparse matrix via its Cholesky
/// factor.
pub fn log_det(m: &CscMatrix) -> Result<f64> {
    Ok(SparseCholesky::factor(m)?.log_det())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::Intrinsics;
    use crate::graph::{PriorFactor, ProjectionFactor, Value};
    use crate::noise::rng_from_seed;
    use crate::pose::{pointing_rotation, se3_retract, Pose, Tangent6};
    use nalgebra::{Matrix6, Vector3};
    use rand::Rng;

    fn toy_graph(poses: usize, landmarks: usize, seed: u64) -> (FactorGraph, Estimate) {
        let mut rng = rng_from_seed(seed);
        let k = Intrinsics::default();
        let mut g = FactorGraph::new();
        let pts: Vec<Vector3<f64>> = (0..landmarks)
            .map(|_| Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let mut xs = Vec::new();
        for i in 0..poses {
            let a = i as f64 * 0.4;
            let r = Vector3::new(8.0 * a.cos(), 8.0 * a.sin(), 1.0);
            let rot = pointing_rotation(&r, &Vector3::new(0.0, 0.0, 1.0), &Vector3::zeros()).unwrap();
            xs.push(g.add_pose_variable(Pose::from_rotation_translation(rot, r)));
        }
        let ls: Vec<_> = pts.iter().map(|p| g.add_landmark_variable(*p)).collect();
        let sp = Matrix6::identity() * 1e-4;
        for &x in xs.iter().take(2) {
            let Value::Pose(p) = *g.initial_value(&x).unwrap() else { unreachable!() };
            g.add_prior(PriorFactor::new(x, p, sp).unwrap()).unwrap();
        }
        for &x in &xs {
            let Value::Pose(p) = *g.initial_value(&x).unwrap() else { unreachable!() };
            for (l, pt) in ls.iter().zip(&pts) {
                let z = project(&p, pt, &k).unwrap() + Vector2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
                g.add_projection(ProjectionFactor::with_camera_noise(x, *l, z, k).unwrap()).unwrap();
            }
        }
        let e = g.initial_estimate();
        (g, e)
    }

    #[test]
    fn prior_at_its_mean_has_zero_residual() {
        let mut g = FactorGraph::new();
        let p = Pose::from_rotation_translation(crate::pose::so3_exp(&Vector3::new(0.2, 0.1, -0.4)), Vector3::new(1.0, 2.0, 3.0));
        let x = g.add_pose_variable(p);
        let sigma = Matrix6::from_diagonal(&nalgebra::Vector6::new(1e-6, 4e-6, 1e-6, 1e-4, 1e-6, 9e-6));
        g.add_prior(PriorFactor::new(x, p, sigma).unwrap()).unwrap();
        let ls = linearize(&g, &g.initial_estimate()).unwrap();
        assert!(ls.residual.iter().all(|r| r.abs() < 1e-12));
        let expected = DMatrix::from_diagonal(&DMatrix::from_fn(6, 1, |r, _| 1.0 / sigma[(r, r)].sqrt()).column(0));
        assert!((ls.jacobian.to_dense() - expected).abs().max() < 1e-9);
    }

    #[test]
    fn scaling_pixel_covariance_by_four_halves_rows() {
        let (g, e) = toy_graph(3, 5, 1);
        let mut g4 = FactorGraph::new();
        for (k, v) in g.variables() {
            g4.insert_variable(*k, *v).unwrap();
        }
        for f in g.factors() {
            let f = match f {
                Factor::Projection(p) => Factor::Projection(
                    ProjectionFactor::new(p.pose_key, p.landmark_key, p.z, p.sigma_v * 4.0, p.intrinsics).unwrap(),
                ),
                other => other.clone(),
            };
            g4.add_factor(f).unwrap();
        }
        let a = linearize(&g, &e).unwrap();
        let b = linearize(&g4, &e).unwrap();
        let (da, db) = (a.jacobian.to_dense(), b.jacobian.to_dense());
        for r in 12..da.nrows() {
            assert!((db.row(r) * 2.0 - da.row(r)).abs().max() < 1e-12);
            assert!((b.residual[r] * 2.0 - a.residual[r]).abs() < 1e-12);
        }
    }

    #[test]
    fn information_matches_dense_accumulation() {
        let (g, e) = toy_graph(3, 5, 2);
        let ls = linearize(&g, &e).unwrap();
        let lambda = information_matrix(&ls).to_dense();
        // dense oracle: sum of per-factor JᵀΣ⁻¹J from unwhitened Jacobians
        let n = ls.dim();
        let mut oracle = DMatrix::<f64>::zeros(n, n);
        for f in g.factors() {
            let mut j = DMatrix::<f64>::zeros(f.residual_dim(), n);
            let info = match f {
                Factor::Prior(p) => {
                    let w = se3_local(&p.prior_pose, e.pose(&p.key).unwrap());
                    let mut jj = Matrix6::<f64>::identity();
                    jj.fixed_view_mut::<3, 3>(0, 0).copy_from(&so3_right_jacobian_inv(&w.fixed_rows::<3>(0).into_owned()));
                    let c = ls.columns_of(&p.key).unwrap().start;
                    j.view_mut((0, c), (6, 6)).copy_from(&jj);
                    DMatrix::from_fn(6, 6, |r, c| p.sigma_p[(r, c)]).try_inverse().unwrap()
                }
                Factor::Projection(p) => {
                    let (jp, jl) = project_jacobians(e.pose(&p.pose_key).unwrap(), e.point(&p.landmark_key).unwrap(), &p.intrinsics).unwrap();
                    let cp = ls.columns_of(&p.pose_key).unwrap().start;
                    let cl = ls.columns_of(&p.landmark_key).unwrap().start;
                    j.view_mut((0, cp), (2, 6)).copy_from(&jp);
                    j.view_mut((0, cl), (2, 3)).copy_from(&jl);
                    DMatrix::from_fn(2, 2, |r, c| p.sigma_v[(r, c)]).try_inverse().unwrap()
                }
            };
            oracle += j.transpose() * info * &j;
        }
        let scale = oracle.abs().max();
        assert!((lambda - &oracle).abs().max() <= 1e-12 * scale);
    }

    #[test]
    fn linearization_is_first_order_accurate() {
        let (g, e) = toy_graph(3, 6, 3);
        let ls = linearize(&g, &e).unwrap();
        let mut rng = rng_from_seed(9);
        let n = ls.dim();
        let xi: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0) * 1e-3).collect();
        let err_at = |scale: f64| -> f64 {
            let mut moved = Estimate::new();
            for (i, k) in ls.column_order.iter().enumerate() {
                let c = ls.column_offsets[i];
                let v = match e.get(k).unwrap() {
                    Value::Pose(p) => Value::Pose(se3_retract(p, &Tangent6::from_fn(|r, _| xi[c + r] * scale))),
                    Value::Point(p) => Value::Point(p + Vector3::from_fn(|r, _| xi[c + r] * scale)),
                };
                moved.insert(*k, v);
            }
            let moved_ls = linearize(&g, &moved).unwrap();
            let scaled: Vec<f64> = xi.iter().map(|x| x * scale).collect();
            let pred = ls.jacobian.mul_vec(&scaled);
            moved_ls
                .residual
                .iter()
                .zip(&ls.residual)
                .zip(&pred)
                .map(|((m, r), p)| (m - r - p).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        let e1 = err_at(1.0);
        let e2 = err_at(0.5);
        let ratio = e1 / e2;
        assert!(e1 > 0.0 && (ratio - 4.0).abs() < 0.5, "ratio {ratio}");
    }

    #[test]
    fn behind_camera_factors_are_skipped() {
        let mut g = FactorGraph::new();
        let x = g.add_pose_variable(Pose::identity());
        let l = g.add_landmark_variable(Vector3::new(0.0, 0.0, -3.0));
        let k = Intrinsics::default();
        g.add_projection(ProjectionFactor::with_camera_noise(x, l, Vector2::new(256.0, 256.0), k).unwrap()).unwrap();
        let ls = linearize(&g, &g.initial_estimate()).unwrap();
        assert_eq!(ls.diagnostics.skipped_factors, vec![0]);
        assert_eq!(ls.jacobian.nnz(), 0);
        assert_eq!(ls.diagnostics.weak_landmarks, vec![l]);
    }

    #[test]
    fn missing_estimate_entry_is_an_error() {
        let (g, _) = toy_graph(2, 3, 4);
        assert!(matches!(linearize(&g, &Estimate::new()), Err(Error::UnknownVariable(_))));
    }

    #[test]
    fn log_det_examples() {
        assert_eq!(log_det(&CscMatrix::identity(7)).unwrap(), 0.0);
        let d = CscMatrix::from_dense(&DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 8.0])));
        assert!((log_det(&d).unwrap() - 16f64.ln()).abs() < 1e-14);
        let sing = CscMatrix::from_dense(&DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 0.0])));
        assert!(matches!(log_det(&sing), Err(Error::SingularInformation { .. })));
    }
}
