use nalgebra::{Matrix2, Matrix6, Vector2};
use serde::{Deserialize, Serialize};

use super::{Factor, FactorGraph, PriorFactor, ProjectionFactor, Value, VariableKey};
use crate::camera::Intrinsics;
use crate::error::{Error, Result};
use crate::pose::Pose;

pub const GRAPH_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableRecord {
    pub key: VariableKey,
    pub value: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FactorRecord {
    Prior {
        key: VariableKey,
        prior_pose: Pose,
        sigma_p: Matrix6<f64>,
    },
    Projection {
        pose_key: VariableKey,
        landmark_key: VariableKey,
        z: Vector2<f64>,
        sigma_v: Matrix2<f64>,
        intrinsics: Intrinsics,
    },
}

/// Plain-data snapshot of a graph: variables with their initial values, in
/// insertion order, and factors with their parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDocument {
    pub schema: u32,
    pub variables: Vec<VariableRecord>,
    pub factors: Vec<FactorRecord>,
}

impl GraphDocument {
    pub fn from_graph(g: &FactorGraph) -> Self {
        let variables = g
            .variables()
            .map(|(k, v)| VariableRecord { key: *k, value: *v })
            .collect();
        let factors = g
            .factors()
            .iter()
            .map(|f| match f {
                Factor::Prior(p) => FactorRecord::Prior {
                    key: p.key,
                    prior_pose: p.prior_pose,
                    sigma_p: p.sigma_p,
                },
                Factor::Projection(p) => FactorRecord::Projection {
                    pose_key: p.pose_key,
                    landmark_key: p.landmark_key,
                    z: p.z,
                    sigma_v: p.sigma_v,
                    intrinsics: p.intrinsics,
                },
            })
            .collect();
        Self {
            schema: GRAPH_SCHEMA_VERSION,
            variables,
            factors,
        }
    }

    pub fn to_graph(&self) -> Result<FactorGraph> {
        if self.schema != GRAPH_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported graph schema {} (expected {GRAPH_SCHEMA_VERSION})",
                self.schema
            )));
        }
        let mut g = FactorGraph::new();
        for v in &self.variables {
            let value = match v.value {
                Value::Pose(p) => Value::Pose(Pose::new(p.rotation, p.translation)?),
                point => point,
            };
            g.insert_variable(v.key, value)?;
        }
        for f in &self.factors {
            let factor = match f {
                FactorRecord::Prior { key, prior_pose, sigma_p } => {
                    let pose = Pose::new(prior_pose.rotation, prior_pose.translation)?;
                    Factor::Prior(PriorFactor::new(*key, pose, *sigma_p)?)
                }
                FactorRecord::Projection {
                    pose_key,
                    landmark_key,
                    z,
                    sigma_v,
                    intrinsics,
                } => {
                    intrinsics.validate()?;
                    Factor::Projection(ProjectionFactor::new(*pose_key, *landmark_key, *z, *sigma_v, *intrinsics)?)
                }
            };
            g.add_factor(factor)?;
        }
        Ok(g)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::json("graph document", e))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::json("graph document", e))
    }
}

impl FactorGraph {
    pub fn to_json(&self) -> Result<String> {
        GraphDocument::from_graph(self).to_json()
    }

    pub fn from_json(s: &str) -> Result<Self> {
        GraphDocument::from_json(s)?.to_graph()
    }
}
