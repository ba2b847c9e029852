//! Synthetic landmark scene and the reconnaissance orbit that builds the
//! initial graph and coarse map.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{Matrix3, Matrix6, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::camera::{back_project, observe_scene, world_to_camera, Intrinsics, Landmark, PixelMeasurement};
use crate::dynamics::{cw_nominal, cw_propagate_noisy, OrbitParams, RelativeState, STEPS_PER_ORBIT};
use crate::error::{Error, Result};
use crate::graph::{Estimate, FactorGraph, PriorFactor, ProjectionFactor, Value, VariableKey};
use crate::noise::rng_from_seed;
use crate::pose::{pointing_rotation, rotation_to_ypr, ypr_to_rotation, Pose};

pub const MIN_LANDMARKS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneGeometry {
    EllipsoidShell,
    BoxSurface,
}

/// `extents` are semi-axes for the ellipsoid and half-widths for the box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub num_landmarks: usize,
    pub geometry: SceneGeometry,
    pub extents: Vector3<f64>,
    pub center: Vector3<f64>,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            num_landmarks: 200,
            geometry: SceneGeometry::EllipsoidShell,
            extents: Vector3::new(1.5, 1.5, 3.0),
            center: Vector3::new(0.0, 0.0, 1.5),
            seed: 0,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_landmarks < MIN_LANDMARKS {
            return Err(Error::Config(format!(
                "scene needs at least {MIN_LANDMARKS} landmarks, got {}",
                self.num_landmarks
            )));
        }
        if self.extents.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return Err(Error::Config("scene extents must be positive".into()));
        }
        if self.center.iter().any(|c| !c.is_finite()) {
            return Err(Error::Config("scene center must be finite".into()));
        }
        Ok(())
    }
}

fn unit_sphere<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    loop {
        let v = Vector3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-6 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Area-uniform point on an axis-aligned ellipsoid: a uniform sphere sample
/// is stretched and accepted in proportion to the local area scale.
fn ellipsoid_point<R: Rng + ?Sized>(axes: &Vector3<f64>, rng: &mut R) -> Vector3<f64> {
    let (a, b, c) = (axes.x, axes.y, axes.z);
    let scale_max = (b * c).max(a * c).max(a * b);
    loop {
        let u = unit_sphere(rng);
        let scale = ((b * c * u.x).powi(2) + (a * c * u.y).powi(2) + (a * b * u.z).powi(2)).sqrt();
        if rng.gen::<f64>() * scale_max <= scale {
            return Vector3::new(a * u.x, b * u.y, c * u.z);
        }
    }
}

fn box_point<R: Rng + ?Sized>(half: &Vector3<f64>, rng: &mut R) -> Vector3<f64> {
    // faces normal to x, y, z come in pairs with areas 4·h_j·h_k
    let areas = [half.y * half.z, half.x * half.z, half.x * half.y];
    let total: f64 = areas.iter().sum();
    let mut pick = rng.gen::<f64>() * total;
    let mut axis = 2;
    for (i, a) in areas.iter().enumerate() {
        if pick < *a {
            axis = i;
            break;
        }
        pick -= a;
    }
    let mut p = Vector3::from_fn(|i, _| rng.gen_range(-half[i]..=half[i]));
    p[axis] = if rng.gen::<bool>() { half[axis] } else { -half[axis] };
    p
}

/// Landmarks spread uniformly over the configured surface, ids `0..N`.
pub fn generate_scene<R: Rng + ?Sized>(cfg: &SceneConfig, rng: &mut R) -> Result<Vec<Landmark>> {
    cfg.validate()?;
    Ok((0..cfg.num_landmarks)
        .map(|id| {
            let local = match cfg.geometry {
                SceneGeometry::EllipsoidShell => ellipsoid_point(&cfg.extents, rng),
                SceneGeometry::BoxSurface => box_point(&cfg.extents, rng),
            };
            Landmark {
                id,
                position: cfg.center + local,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SceneEntry {
    id: usize,
    xyz: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SceneDocument {
    landmarks: Vec<SceneEntry>,
}

pub fn scene_to_json(scene: &[Landmark]) -> Result<String> {
    let doc = SceneDocument {
        landmarks: scene
            .iter()
            .map(|l| SceneEntry {
                id: l.id,
                xyz: [l.position.x, l.position.y, l.position.z],
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).map_err(|e| Error::json("scene", e))
}

pub fn scene_from_json(s: &str) -> Result<Vec<Landmark>> {
    let doc: SceneDocument = serde_json::from_str(s).map_err(|e| Error::json("scene", e))?;
    let mut seen = std::collections::BTreeSet::new();
    doc.landmarks
        .into_iter()
        .map(|e| {
            if !seen.insert(e.id) {
                return Err(Error::Config(format!("duplicate landmark id {}", e.id)));
            }
            if e.xyz.iter().any(|x| !x.is_finite()) {
                return Err(Error::Config(format!("landmark {} has non-finite coordinates", e.id)));
            }
            Ok(Landmark {
                id: e.id,
                position: Vector3::from(e.xyz),
            })
        })
        .collect()
}

pub fn save_scene(scene: &[Landmark], path: &Path) -> Result<()> {
    std::fs::write(path, scene_to_json(scene)?).map_err(|e| Error::io(path, e))
}

pub fn load_scene(path: &Path) -> Result<Vec<Landmark>> {
    let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    scene_from_json(&s)
}

/// Knobs of the reconnaissance orbit besides the orbit and camera.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReconConfig {
    pub target: Vector3<f64>,
    pub steps: usize,
    /// Standard deviation of the yaw, pitch and roll tracking errors, rad.
    pub attitude_noise_sigma: f64,
    pub prior_sigma: Matrix6<f64>,
    /// Scales the simulated pixel noise without changing the factor model.
    pub pixel_noise_scale: f64,
}

impl Default for ReconConfig {
    fn default() -> Self {
        Self {
            target: Vector3::new(0.0, 0.0, 1.5),
            steps: STEPS_PER_ORBIT,
            attitude_noise_sigma: 0.1_f64.to_radians(),
            prior_sigma: Matrix6::identity() * 1e-6,
            pixel_noise_scale: 1.0,
        }
    }
}

/// True chaser states and camera poses along a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<RelativeState>,
    pub poses: Vec<Pose>,
}

#[derive(Debug, Clone)]
pub struct ReconResult {
    pub graph: FactorGraph,
    /// Initial values of every graph variable; no optimization is run.
    pub estimate: Estimate,
    /// True chaser state at the end of the orbit.
    pub final_state: RelativeState,
    /// Noise-free prediction of the same state.
    pub nominal_final_state: RelativeState,
    pub truth: Trajectory,
    pub scene: Vec<Landmark>,
    pub measurements: Vec<PixelMeasurement>,
    /// Ids of the landmarks seen at least once, ascending.
    pub map_ids: Vec<usize>,
}

impl ReconResult {
    /// Ground-truth positions of the mapped landmarks.
    pub fn mapped_truth(&self) -> Vec<Landmark> {
        let by_id: BTreeMap<usize, &Landmark> = self.scene.iter().map(|l| (l.id, l)).collect();
        self.map_ids.iter().map(|id| *by_id[id]).collect()
    }
}

/// Perturbs a rotation by independent yaw, pitch and roll errors.
pub fn perturb_attitude<R: Rng + ?Sized>(r: &nalgebra::Matrix3<f64>, sigma: f64, rng: &mut R) -> Matrix3<f64> {
    if sigma == 0.0 {
        return *r;
    }
    let noise = crate::noise::standard_normal::<3, R>(rng) * sigma;
    ypr_to_rotation(&(rotation_to_ypr(r) + noise))
}

/// Simulates one relative orbit observing `scene` and assembles the initial
/// graph: pose initials from the noise-free orbit, landmark initials from
/// their first noisy sighting, priors on the first two true poses.
pub fn run_reconnaissance<R: Rng + ?Sized>(
    scene: &[Landmark],
    orbit: &OrbitParams,
    s0: &RelativeState,
    k: &Intrinsics,
    cfg: &ReconConfig,
    rng: &mut R,
) -> Result<ReconResult> {
    orbit.validate()?;
    k.validate()?;
    if cfg.steps < 1 {
        return Err(Error::Config("reconnaissance needs at least one step".into()));
    }
    let mut process_rng = rng_from_seed(rng.gen());
    let mut attitude_rng = rng_from_seed(rng.gen());
    let mut pixel_rng = rng_from_seed(rng.gen());

    let states = cw_propagate_noisy(s0, orbit, cfg.steps, &mut process_rng);
    let nominal = cw_nominal(s0, orbit.nu, orbit.dt, cfg.steps);
    let mut poses = Vec::with_capacity(states.len());
    for s in &states {
        let r = pointing_rotation(&s.r, &s.v, &cfg.target)?;
        poses.push(Pose::new(perturb_attitude(&r, cfg.attitude_noise_sigma, &mut attitude_rng), s.r)?);
    }

    let sim_k = k.with_simulated_noise_scale(cfg.pixel_noise_scale);
    let mut measurements = Vec::new();
    for (i, p) in poses.iter().enumerate() {
        measurements.extend(observe_scene(p, i, scene, &sim_k, &mut pixel_rng));
    }

    let by_id: BTreeMap<usize, &Landmark> = scene.iter().map(|l| (l.id, l)).collect();
    let mut first_sighting: BTreeMap<usize, PixelMeasurement> = BTreeMap::new();
    for z in &measurements {
        first_sighting.entry(z.landmark_id).or_insert(*z);
    }
    if first_sighting.len() < MIN_LANDMARKS {
        return Err(Error::DegenerateScene {
            observed: first_sighting.len(),
            required: MIN_LANDMARKS,
        });
    }

    let mut g = FactorGraph::new();
    let mut pose_keys = Vec::with_capacity(nominal.len());
    for s in &nominal {
        let r = pointing_rotation(&s.r, &s.v, &cfg.target)?;
        pose_keys.push(g.add_pose_variable(Pose::new(r, s.r)?));
    }
    for (&id, z) in &first_sighting {
        let truth_pose = &poses[z.pose_index];
        let depth = world_to_camera(truth_pose, &by_id[&id].position).z;
        let init = back_project(&z.uv, depth, truth_pose, k)?;
        g.insert_variable(VariableKey::landmark(id), Value::Point(init))?;
    }
    for key in pose_keys.iter().take(2) {
        g.add_prior(PriorFactor::new(*key, poses[key.index], cfg.prior_sigma)?)?;
    }
    for z in &measurements {
        g.add_projection(ProjectionFactor::with_camera_noise(
            pose_keys[z.pose_index],
            VariableKey::landmark(z.landmark_id),
            z.uv,
            *k,
        )?)?;
    }

    Ok(ReconResult {
        estimate: g.initial_estimate(),
        graph: g,
        final_state: *states.last().expect("at least one state"),
        nominal_final_state: *nominal.last().expect("at least one state"),
        truth: Trajectory { states, poses },
        scene: scene.to_vec(),
        measurements,
        map_ids: first_sighting.keys().copied().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::visible;
    use crate::graph::Factor;

    fn table2() -> (OrbitParams, RelativeState) {
        (
            OrbitParams::from_altitude(550e3, Matrix3::identity() * 1e-10).unwrap(),
            RelativeState::new(Vector3::new(1.0, 6.0, 5.0), Vector3::new(0.0131, -0.0022, 0.0), 0.0),
        )
    }

    #[test]
    fn ellipsoid_points_lie_on_surface() {
        let cfg = SceneConfig {
            center: Vector3::zeros(),
            ..Default::default()
        };
        let scene = generate_scene(&cfg, &mut rng_from_seed(1)).unwrap();
        assert_eq!(scene.len(), 200);
        for (i, l) in scene.iter().enumerate() {
            assert_eq!(l.id, i);
            let p = l.position.component_div(&cfg.extents);
            assert!((p.norm_squared() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn box_points_lie_on_faces() {
        let cfg = SceneConfig {
            geometry: SceneGeometry::BoxSurface,
            num_landmarks: 500,
            ..Default::default()
        };
        for l in generate_scene(&cfg, &mut rng_from_seed(2)).unwrap() {
            let d = (l.position - cfg.center).abs();
            let on_face = (0..3).any(|i| (d[i] - cfg.extents[i]).abs() < 1e-12);
            assert!(on_face && (0..3).all(|i| d[i] <= cfg.extents[i] + 1e-12));
        }
    }

    #[test]
    fn scene_size_and_containment() {
        let cfg = SceneConfig {
            num_landmarks: 8,
            ..Default::default()
        };
        assert_eq!(generate_scene(&cfg, &mut rng_from_seed(0)).unwrap().len(), 8);
        let lo = Vector3::new(-2.2, -3.0, -3.0);
        let hi = Vector3::new(3.5, 3.0, 6.0);
        for l in generate_scene(&SceneConfig::default(), &mut rng_from_seed(0)).unwrap() {
            assert!((0..3).all(|i| l.position[i] >= lo[i] && l.position[i] <= hi[i]));
        }
        let small = SceneConfig {
            num_landmarks: 7,
            ..Default::default()
        };
        assert!(generate_scene(&small, &mut rng_from_seed(0)).is_err());
    }

    #[test]
    fn ellipsoid_samples_center_on_the_center() {
        let cfg = SceneConfig {
            num_landmarks: 20_000,
            ..Default::default()
        };
        let scene = generate_scene(&cfg, &mut rng_from_seed(4)).unwrap();
        let n = scene.len() as f64;
        let mean = scene.iter().fold(Vector3::zeros(), |a, l| a + l.position) / n;
        for i in 0..3 {
            // per-axis spread on the shell is below the semi-axis
            let sigma = cfg.extents[i] / n.sqrt();
            assert!((mean[i] - cfg.center[i]).abs() < 3.0 * sigma);
        }
    }

    #[test]
    fn scene_json_round_trip() {
        let scene = generate_scene(&SceneConfig::default(), &mut rng_from_seed(9)).unwrap();
        let back = scene_from_json(&scene_to_json(&scene).unwrap()).unwrap();
        assert_eq!(back, scene);
        let dup = r#"{"landmarks":[{"id":1,"xyz":[0,0,0]},{"id":1,"xyz":[1,0,0]}]}"#;
        assert!(scene_from_json(dup).is_err());
    }

    #[test]
    fn noiseless_reconnaissance_initializes_map_exactly() {
        let (mut orbit, s0) = table2();
        orbit.sigma_w = Matrix3::zeros();
        let k = Intrinsics::default();
        let cfg = ReconConfig {
            attitude_noise_sigma: 0.0,
            pixel_noise_scale: 0.0,
            ..Default::default()
        };
        let scene = generate_scene(&SceneConfig::default(), &mut rng_from_seed(0)).unwrap();
        let recon = run_reconnaissance(&scene, &orbit, &s0, &k, &cfg, &mut rng_from_seed(5)).unwrap();
        for l in recon.mapped_truth() {
            let est = recon.estimate.point(&VariableKey::landmark(l.id)).unwrap();
            assert!((est - l.position).norm() < 1e-9);
        }
        assert_eq!(recon.graph.pose_keys().count(), 61);
        assert_eq!(recon.graph.variable_count(), 61 + recon.map_ids.len());
        assert!((recon.final_state.r - recon.nominal_final_state.r).norm() < 1e-9);
    }

    #[test]
    fn reconnaissance_structure_and_noise_level() {
        let (orbit, s0) = table2();
        let k = Intrinsics::default();
        let scene = generate_scene(&SceneConfig::default(), &mut rng_from_seed(0)).unwrap();
        let recon = run_reconnaissance(&scene, &orbit, &s0, &k, &ReconConfig::default(), &mut rng_from_seed(7)).unwrap();
        let g = &recon.graph;
        let priors: Vec<_> = g
            .factors()
            .iter()
            .filter_map(|f| match f {
                Factor::Prior(p) => Some(p.key.index),
                _ => None,
            })
            .collect();
        assert_eq!(priors, vec![0, 1]);
        assert!(recon.estimate.covers(g));
        for (key, n) in g.landmark_observation_counts() {
            assert!(n >= 1, "{key}");
        }
        let truth: BTreeMap<usize, Vector3<f64>> = scene.iter().map(|l| (l.id, l.position)).collect();
        for f in g.factors() {
            if let Factor::Projection(p) = f {
                assert!(visible(&recon.truth.poses[p.pose_key.index], &truth[&p.landmark_key.index], &k));
            }
        }
        let errs: Vec<f64> = recon
            .map_ids
            .iter()
            .map(|id| (recon.estimate.point(&VariableKey::landmark(*id)).unwrap() - truth[id]).norm())
            .collect();
        let mean = errs.iter().sum::<f64>() / errs.len() as f64;
        assert!(mean > 0.0 && mean < 0.3, "{mean}");
    }

    #[test]
    fn reconnaissance_is_deterministic() {
        let (orbit, s0) = table2();
        let k = Intrinsics::default();
        let scene = generate_scene(&SceneConfig::default(), &mut rng_from_seed(0)).unwrap();
        let run = || {
            run_reconnaissance(&scene, &orbit, &s0, &k, &ReconConfig::default(), &mut rng_from_seed(3))
                .unwrap()
                .graph
                .to_json()
                .unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn unseen_scene_is_degenerate() {
        let (orbit, s0) = table2();
        let far: Vec<Landmark> = (0..20)
            .map(|id| Landmark {
                id,
                position: Vector3::new(0.0, 0.0, -1e4),
            })
            .collect();
        let r = run_reconnaissance(&far, &orbit, &s0, &Intrinsics::default(), &ReconConfig::default(), &mut rng_from_seed(0));
        assert!(matches!(r, Err(Error::DegenerateScene { .. })));
    }
}
