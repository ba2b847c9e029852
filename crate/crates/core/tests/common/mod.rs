#![allow(dead_code)]

use nalgebra::{DMatrix, Matrix6, Vector2, Vector3};
use rand::Rng;
use satslam::camera::{project, visible, Intrinsics};
use satslam::graph::{information_matrix, linearize, Estimate, FactorGraph, PriorFactor, ProjectionFactor, Value, VariableKey};
use satslam::noise::{rng_from_seed, standard_normal};
use satslam::pose::{pointing_rotation, se3_retract, Pose, Tangent6};

pub struct Toy {
    pub graph: FactorGraph,
    pub estimate: Estimate,
    pub poses: Vec<Pose>,
    pub points: Vec<Vector3<f64>>,
    pub k: Intrinsics,
}

/// Random viewing geometry around the origin: poses on a shell of radius
/// 7–11 m looking at a jittered point near the origin, landmarks in a 3 m
/// cube, one noisy projection per visible pair and priors on the first two
/// poses. Landmarks seen fewer than twice are dropped.
pub fn random_toy(n_poses: usize, n_landmarks: usize, seed: u64) -> Toy {
    let mut rng = rng_from_seed(seed);
    let k = Intrinsics::default();
    let poses: Vec<Pose> = (0..n_poses)
        .map(|_| loop {
            let dir = standard_normal::<3, _>(&mut rng).normalize();
            let r = dir * rng.gen_range(7.0..11.0);
            let look = Vector3::from_fn(|_, _| rng.gen_range(-0.3..0.3));
            let up = standard_normal::<3, _>(&mut rng);
            if let Ok(rot) = pointing_rotation(&r, &up, &look) {
                break Pose::from_rotation_translation(rot, r);
            }
        })
        .collect();
    let candidates: Vec<Vector3<f64>> = (0..n_landmarks)
        .map(|_| Vector3::from_fn(|_, _| rng.gen_range(-1.5..1.5)))
        .collect();
    let points: Vec<Vector3<f64>> = candidates
        .into_iter()
        .filter(|l| poses.iter().filter(|p| visible(p, l, &k)).count() >= 2)
        .collect();

    let mut g = FactorGraph::new();
    let mut e = Estimate::new();
    let xs: Vec<VariableKey> = poses
        .iter()
        .map(|p| {
            let key = g.add_pose_variable(*p);
            e.insert(key, Value::Pose(*p));
            key
        })
        .collect();
    let ls: Vec<VariableKey> = points
        .iter()
        .map(|l| {
            let key = g.add_landmark_variable(*l);
            e.insert(key, Value::Point(*l));
            key
        })
        .collect();
    for (x, p) in xs.iter().zip(&poses).take(2) {
        g.add_prior(PriorFactor::new(*x, *p, Matrix6::identity() * 1e-4).unwrap()).unwrap();
    }
    for (x, p) in xs.iter().zip(&poses) {
        for (l, pt) in ls.iter().zip(&points) {
            if visible(p, pt, &k) {
                let z = project(p, pt, &k).unwrap() + Vector2::from_fn(|_, _| rng.gen_range(-2.0..2.0));
                g.add_projection(ProjectionFactor::with_camera_noise(*x, *l, z, k).unwrap()).unwrap();
            }
        }
    }
    Toy {
        graph: g,
        estimate: e,
        poses,
        points,
        k,
    }
}

/// Estimate moved by tangent vector `xi`, laid out in linearization column order.
pub fn retract_all(e: &Estimate, order: &[VariableKey], offsets: &[usize], xi: &[f64]) -> Estimate {
    let mut out = Estimate::new();
    for (i, key) in order.iter().enumerate() {
        let c = offsets[i];
        let v = match e.get(key).unwrap() {
            Value::Pose(p) => Value::Pose(se3_retract(p, &Tangent6::from_fn(|r, _| xi[c + r]))),
            Value::Point(p) => Value::Point(p + Vector3::from_fn(|r, _| xi[c + r])),
        };
        out.insert(*key, v);
    }
    out
}

/// Dense information matrix and its Cholesky log-determinant, or `None` when
/// the dense factorization fails.
pub fn dense_information(g: &FactorGraph, e: &Estimate) -> DMatrix<f64> {
    information_matrix(&linearize(g, e).unwrap()).to_dense()
}

pub fn dense_logdet(m: &DMatrix<f64>) -> Option<f64> {
    m.clone().cholesky().map(|c| 2.0 * c.l().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

pub fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max() / b.abs().max().max(f64::MIN_POSITIVE)
}
