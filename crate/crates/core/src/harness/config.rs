use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::{Matrix3, Matrix6, Vector3};
use serde::{Deserialize, Serialize};

use crate::camera::Intrinsics;
use crate::dynamics::{OrbitParams, RelativeState};
use crate::error::{Error, Result};
use crate::graph::SolverSettings;
use crate::planner::PlannerConfig;
use crate::scene::{ReconConfig, SceneConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Passive pointing at a fixed point near the scene center.
    Tau1,
    /// Passive pointing at the target-frame origin.
    Tau2,
    /// Pointing at the planner's most informative target.
    Active,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Tau1, Strategy::Tau2, Strategy::Active];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Tau1 => "tau1",
            Strategy::Tau2 => "tau2",
            Strategy::Active => "active",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tau1" => Ok(Strategy::Tau1),
            "tau2" => Ok(Strategy::Tau2),
            "active" => Ok(Strategy::Active),
            other => Err(Error::Config(format!("unknown strategy '{other}' (expected tau1, tau2 or active)"))),
        }
    }
}

/// Orbit of the target and initial relative state of the chaser.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OrbitConfig {
    pub altitude: f64,
    /// Disturbance acceleration covariance, (m/s²)².
    pub sigma_w: Matrix3<f64>,
    pub r0: Vector3<f64>,
    pub v0: Vector3<f64>,
}

impl Default for OrbitConfig {
    fn default() -> Self {
        Self {
            altitude: 550e3,
            sigma_w: Matrix3::identity() * 1e-10,
            r0: Vector3::new(1.0, 6.0, 5.0),
            v0: Vector3::new(0.0131, -0.0022, 0.0),
        }
    }
}

impl OrbitConfig {
    pub fn params(&self) -> Result<OrbitParams> {
        OrbitParams::from_altitude(self.altitude, self.sigma_w)
    }

    pub fn initial_state(&self) -> RelativeState {
        RelativeState::new(self.r0, self.v0, 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub orbit: OrbitConfig,
    pub camera: Intrinsics,
    pub scene: SceneConfig,
    pub planner: PlannerConfig,
    pub solver: SolverSettings,
    pub horizons: Vec<usize>,
    pub strategies: Vec<Strategy>,
    pub num_plans: usize,
    pub num_runs_per_plan: usize,
    /// Yaw, pitch and roll tracking error standard deviation, rad.
    pub attitude_noise_sigma: f64,
    /// Scales simulated pixel noise; the factor model keeps the camera's
    /// covariance.
    pub pixel_noise_scale: f64,
    pub prior_sigma: Matrix6<f64>,
    pub recon_target: Vector3<f64>,
    pub tau1_target: Vector3<f64>,
    pub tau2_target: Vector3<f64>,
    pub master_seed: u64,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            orbit: OrbitConfig::default(),
            camera: Intrinsics::default(),
            scene: SceneConfig::default(),
            planner: PlannerConfig::default(),
            solver: SolverSettings::default(),
            horizons: vec![12, 23],
            strategies: Strategy::ALL.to_vec(),
            num_plans: 10,
            num_runs_per_plan: 10,
            attitude_noise_sigma: 0.1_f64.to_radians(),
            pixel_noise_scale: 1.0,
            prior_sigma: Matrix6::identity() * 1e-6,
            recon_target: Vector3::new(0.0, 0.0, 1.5),
            tau1_target: Vector3::new(0.0, 0.0, 2.0),
            tau2_target: Vector3::zeros(),
            master_seed: 0,
            output_dir: PathBuf::from("results"),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return Err(Error::Config("horizons must be a nonempty list of positive counts".into()));
        }
        if self.strategies.is_empty() {
            return Err(Error::Config("at least one strategy is required".into()));
        }
        if self.num_plans == 0 || self.num_runs_per_plan == 0 {
            return Err(Error::Config("num_plans and num_runs_per_plan must be at least 1".into()));
        }
        if !(self.attitude_noise_sigma >= 0.0 && self.attitude_noise_sigma.is_finite()) {
            return Err(Error::Config("attitude_noise_sigma must be non-negative".into()));
        }
        if !(self.pixel_noise_scale >= 0.0 && self.pixel_noise_scale.is_finite()) {
            return Err(Error::Config("pixel_noise_scale must be non-negative".into()));
        }
        self.orbit.params()?;
        self.camera.validate()?;
        self.scene.validate()?;
        self.planner.validate()?;
        Ok(())
    }

    pub fn recon_config(&self) -> ReconConfig {
        ReconConfig {
            target: self.recon_target,
            attitude_noise_sigma: self.attitude_noise_sigma,
            prior_sigma: self.prior_sigma,
            pixel_noise_scale: self.pixel_noise_scale,
            ..ReconConfig::default()
        }
    }

    pub fn passive_target(&self, s: Strategy) -> Option<Vector3<f64>> {
        match s {
            Strategy::Tau1 => Some(self.tau1_target),
            Strategy::Tau2 => Some(self.tau2_target),
            Strategy::Active => None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&s).map_err(|e| Error::json(path.display().to_string(), e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::json("experiment config", e))
    }
}
