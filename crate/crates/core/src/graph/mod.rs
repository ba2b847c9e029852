//! Factor graph over camera poses and landmark positions.
//!
//! Variables are either poses (6 tangent dimensions) or landmarks (3).
//! Factors are pose priors and pinhole projection measurements; the product
//! of their Gaussian densities is the belief over the joint state, and the
//! MAP estimate is the minimizer of half the summed squared whitened errors.

mod io;
mod linear;
mod solver;
pub mod sparse;

use std::collections::BTreeMap;
use std::fmt;

use indexmap::IndexMap;
use nalgebra::{DMatrix, Matrix2, Matrix6, SMatrix, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::camera::Intrinsics;
use crate::error::{Error, Result};
use crate::pose::Pose;

pub use io::{GraphDocument, GRAPH_SCHEMA_VERSION};
pub use linear::{information_matrix, linearize, log_det, LinearSystem, LinearizationDiagnostics};
pub use solver::{
    marginal_covariance, null_space_dimension, optimize_map, Marginals, OptimizationReport,
    SolverSettings,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    Pose,
    Landmark,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VariableKey {
    pub kind: VarKind,
    pub index: usize,
}

impl VariableKey {
    pub fn pose(index: usize) -> Self {
        Self { kind: VarKind::Pose, index }
    }

    pub fn landmark(index: usize) -> Self {
        Self {
            kind: VarKind::Landmark,
            index,
        }
    }

    pub fn tangent_dim(&self) -> usize {
        match self.kind {
            VarKind::Pose => 6,
            VarKind::Landmark => 3,
        }
    }
}

impl fmt::Display for VariableKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            VarKind::Pose => write!(f, "x{}", self.index),
            VarKind::Landmark => write!(f, "l{}", self.index),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Value {
    Pose(Pose),
    Point(Vector3<f64>),
}

impl Value {
    fn matches(&self, key: &VariableKey) -> bool {
        matches!(
            (self, key.kind),
            (Value::Pose(_), VarKind::Pose) | (Value::Point(_), VarKind::Landmark)
        )
    }
}

/// Symmetric inverse square root `Σ^{-1/2}` of a positive-definite matrix.
pub(crate) fn whitener<const N: usize>(sigma: &SMatrix<f64, N, N>) -> Result<SMatrix<f64, N, N>> {
    let sym = DMatrix::from_fn(N, N, |i, j| 0.5 * (sigma[(i, j)] + sigma[(j, i)]));
    if (sigma - sigma.transpose()).abs().max() > 1e-12 * (1.0 + sigma.abs().max()) {
        return Err(Error::Structural("factor covariance is not symmetric".into()));
    }
    let eig = sym.symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
        return Err(Error::Structural("factor covariance is not positive definite".into()));
    }
    let mut scaled = eig.eigenvectors.clone();
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        scaled.column_mut(k).scale_mut(1.0 / l.sqrt());
    }
    let w = scaled * eig.eigenvectors.transpose();
    Ok(SMatrix::from_fn(|i, j| w[(i, j)]))
}

/// Gaussian prior on a pose, `e = local(prior_pose, T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorFactor {
    pub key: VariableKey,
    pub prior_pose: Pose,
    pub sigma_p: Matrix6<f64>,
    pub(crate) sqrt_info: Matrix6<f64>,
}

impl PriorFactor {
    pub fn new(key: VariableKey, prior_pose: Pose, sigma_p: Matrix6<f64>) -> Result<Self> {
        if key.kind != VarKind::Pose {
            return Err(Error::Structural(format!("prior factors attach to poses, got {key}")));
        }
        Ok(Self {
            key,
            prior_pose,
            sigma_p,
            sqrt_info: whitener(&sigma_p)?,
        })
    }
}

/// Pixel measurement `z` of a landmark from a pose, `e = π(T, l) − z`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionFactor {
    pub pose_key: VariableKey,
    pub landmark_key: VariableKey,
    pub z: Vector2<f64>,
    pub sigma_v: Matrix2<f64>,
    pub intrinsics: Intrinsics,
    pub(crate) sqrt_info: Matrix2<f64>,
}

impl ProjectionFactor {
    pub fn new(
        pose_key: VariableKey,
        landmark_key: VariableKey,
        z: Vector2<f64>,
        sigma_v: Matrix2<f64>,
        intrinsics: Intrinsics,
    ) -> Result<Self> {
        if pose_key.kind != VarKind::Pose || landmark_key.kind != VarKind::Landmark {
            return Err(Error::Structural(format!(
                "projection factor needs (pose, landmark) keys, got ({pose_key}, {landmark_key})"
            )));
        }
        Ok(Self {
            pose_key,
            landmark_key,
            z,
            sigma_v,
            intrinsics,
            sqrt_info: whitener(&sigma_v)?,
        })
    }

    /// Uses the camera's own measurement covariance.
    pub fn with_camera_noise(
        pose_key: VariableKey,
        landmark_key: VariableKey,
        z: Vector2<f64>,
        intrinsics: Intrinsics,
    ) -> Result<Self> {
        Self::new(pose_key, landmark_key, z, intrinsics.sigma_v, intrinsics)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Factor {
    Prior(PriorFactor),
    Projection(ProjectionFactor),
}

impl Factor {
    pub fn residual_dim(&self) -> usize {
        match self {
            Factor::Prior(_) => 6,
            Factor::Projection(_) => 2,
        }
    }

    pub fn keys(&self) -> Vec<VariableKey> {
        match self {
            Factor::Prior(p) => vec![p.key],
            Factor::Projection(p) => vec![p.pose_key, p.landmark_key],
        }
    }
}

/// Values for (a superset of) the variables of a graph.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    values: BTreeMap<VariableKey, Value>,
}

impl Estimate {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, key: VariableKey, value: Value) {
        self.values.insert(key, value);
    }

    pub fn get(&self, key: &VariableKey) -> Option<&Value> {
        self.values.get(key)
    }

    pub fn contains(&self, key: &VariableKey) -> bool {
        self.values.contains_key(key)
    }

    pub fn pose(&self, key: &VariableKey) -> Result<&Pose> {
        match self.values.get(key) {
            Some(Value::Pose(p)) => Ok(p),
            _ => Err(Error::UnknownVariable(*key)),
        }
    }

    pub fn point(&self, key: &VariableKey) -> Result<&Vector3<f64>> {
        match self.values.get(key) {
            Some(Value::Point(p)) => Ok(p),
            _ => Err(Error::UnknownVariable(*key)),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&VariableKey, &Value)> {
        self.values.iter()
    }

    pub fn covers(&self, g: &FactorGraph) -> bool {
        g.keys().all(|k| self.get(k).is_some_and(|v| v.matches(k)))
    }
}

/// Bipartite store of variables (with initial values) and factors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FactorGraph {
    variables: IndexMap<VariableKey, Value>,
    factors: Vec<Factor>,
    next_pose: usize,
    next_landmark: usize,
}

impl FactorGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a pose with the next unused pose index.
    pub fn add_pose_variable(&mut self, init: Pose) -> VariableKey {
        let key = VariableKey::pose(self.next_pose);
        self.insert_variable(key, Value::Pose(init))
            .expect("fresh pose index is unused");
        key
    }

    /// Adds a landmark with the next unused landmark index.
    pub fn add_landmark_variable(&mut self, init: Vector3<f64>) -> VariableKey {
        let key = VariableKey::landmark(self.next_landmark);
        self.insert_variable(key, Value::Point(init))
            .expect("fresh landmark index is unused");
        key
    }

    /// Adds a variable under an explicit key.
    pub fn insert_variable(&mut self, key: VariableKey, init: Value) -> Result<VariableKey> {
        if !init.matches(&key) {
            return Err(Error::Structural(format!("value kind does not match key {key}")));
        }
        if self.variables.contains_key(&key) {
            return Err(Error::Structural(format!("variable {key} already exists")));
        }
        match key.kind {
            VarKind::Pose => self.next_pose = self.next_pose.max(key.index + 1),
            VarKind::Landmark => self.next_landmark = self.next_landmark.max(key.index + 1),
        }
        self.variables.insert(key, init);
        Ok(key)
    }

    fn require(&self, key: &VariableKey) -> Result<()> {
        if self.variables.contains_key(key) {
            Ok(())
        } else {
            Err(Error::UnknownVariable(*key))
        }
    }

    pub fn add_prior(&mut self, f: PriorFactor) -> Result<()> {
        self.require(&f.key)?;
        self.factors.push(Factor::Prior(f));
        Ok(())
    }

    pub fn add_projection(&mut self, f: ProjectionFactor) -> Result<()> {
        self.require(&f.pose_key)?;
        self.require(&f.landmark_key)?;
        self.factors.push(Factor::Projection(f));
        Ok(())
    }

    pub fn add_factor(&mut self, f: Factor) -> Result<()> {
        match f {
            Factor::Prior(p) => self.add_prior(p),
            Factor::Projection(p) => self.add_projection(p),
        }
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn factor_count(&self) -> usize {
        self.factors.len()
    }

    pub fn variable_count(&self) -> usize {
        self.variables.len()
    }

    pub fn contains(&self, key: &VariableKey) -> bool {
        self.variables.contains_key(key)
    }

    /// Variable keys in insertion order.
    pub fn keys(&self) -> impl Iterator<Item = &VariableKey> {
        self.variables.keys()
    }

    pub fn variables(&self) -> impl Iterator<Item = (&VariableKey, &Value)> {
        self.variables.iter()
    }

    pub fn pose_keys(&self) -> impl Iterator<Item = VariableKey> + '_ {
        self.keys().copied().filter(|k| k.kind == VarKind::Pose)
    }

    pub fn landmark_keys(&self) -> impl Iterator<Item = VariableKey> + '_ {
        self.keys().copied().filter(|k| k.kind == VarKind::Landmark)
    }

    pub fn tangent_dim(&self) -> usize {
        self.keys().map(VariableKey::tangent_dim).sum()
    }

    pub fn residual_dim(&self) -> usize {
        self.factors.iter().map(Factor::residual_dim).sum()
    }

    pub fn initial_value(&self, key: &VariableKey) -> Option<&Value> {
        self.variables.get(key)
    }

    /// Estimate holding every variable's initial value.
    pub fn initial_estimate(&self) -> Estimate {
        let mut e = Estimate::new();
        for (k, v) in &self.variables {
            e.insert(*k, *v);
        }
        e
    }

    /// Number of projection factors per landmark.
    pub fn landmark_observation_counts(&self) -> BTreeMap<VariableKey, usize> {
        let mut counts: BTreeMap<VariableKey, usize> =
            self.landmark_keys().map(|k| (k, 0)).collect();
        for f in &self.factors {
            if let Factor::Projection(p) = f {
                *counts.entry(p.landmark_key).or_default() += 1;
            }
        }
        counts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimensions_accumulate() {
        let mut g = FactorGraph::new();
        g.add_pose_variable(Pose::identity());
        assert_eq!(g.tangent_dim(), 6);
        g.add_pose_variable(Pose::identity());
        for _ in 0..3 {
            g.add_landmark_variable(Vector3::zeros());
        }
        assert_eq!(g.tangent_dim(), 21);
    }

    #[test]
    fn keys_are_unique() {
        let mut g = FactorGraph::new();
        let mut keys = std::collections::HashSet::new();
        for i in 0..10_000 {
            let k = if i % 2 == 0 {
                g.add_pose_variable(Pose::identity())
            } else {
                g.add_landmark_variable(Vector3::zeros())
            };
            assert!(keys.insert(k));
        }
        assert!(g.insert_variable(VariableKey::pose(3), Value::Pose(Pose::identity())).is_err());
        assert!(g.insert_variable(VariableKey::pose(99_999), Value::Point(Vector3::zeros())).is_err());
    }

    #[test]
    fn factors_need_existing_keys() {
        let mut g = FactorGraph::new();
        let prior = PriorFactor::new(VariableKey::pose(0), Pose::identity(), Matrix6::identity()).unwrap();
        assert!(matches!(g.add_prior(prior.clone()), Err(Error::UnknownVariable(_))));
        let x0 = g.add_pose_variable(Pose::identity());
        let x1 = g.add_pose_variable(Pose::identity());
        g.add_prior(prior).unwrap();
        g.add_prior(PriorFactor::new(x1, Pose::identity(), Matrix6::identity()).unwrap()).unwrap();
        let l = g.add_landmark_variable(Vector3::new(0.0, 0.0, 5.0));
        let k = Intrinsics::default();
        for _ in 0..5 {
            g.add_projection(ProjectionFactor::with_camera_noise(x0, l, Vector2::new(256.0, 256.0), k).unwrap())
                .unwrap();
        }
        assert_eq!(g.factor_count(), 7);
        assert_eq!(g.residual_dim(), 2 * 6 + 5 * 2);
        let bad = ProjectionFactor::with_camera_noise(x0, VariableKey::landmark(7), Vector2::zeros(), k).unwrap();
        assert!(g.add_projection(bad).is_err());
        assert!(ProjectionFactor::with_camera_noise(l, x0, Vector2::zeros(), k).is_err());
    }

    #[test]
    fn covariances_must_be_positive_definite() {
        let k = Intrinsics::default();
        let r = ProjectionFactor::new(VariableKey::pose(0), VariableKey::landmark(0), Vector2::zeros(), Matrix2::zeros(), k);
        assert!(r.is_err());
        let mut s = Matrix6::identity();
        s[(0, 1)] = 0.5;
        assert!(PriorFactor::new(VariableKey::pose(0), Pose::identity(), s).is_err());
    }

    #[test]
    fn whitener_is_inverse_square_root() {
        let s = Matrix2::new(4.0, 1.0, 1.0, 3.0);
        let w = whitener(&s).unwrap();
        assert!((w * s * w.transpose() - Matrix2::identity()).norm() < 1e-12);
    }
}
