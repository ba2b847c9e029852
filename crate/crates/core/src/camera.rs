//! Pinhole camera model, its Jacobians and synthetic measurement generation.

use nalgebra::{Matrix2, Matrix2x3, Matrix3, SMatrix, Vector2, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{psd_sqrt, sample_with_sqrt};
use crate::pose::{skew, Pose};

/// Minimum camera-frame depth for a point to count as in front of the camera.
pub const Z_MIN: f64 = 0.01;

pub type Matrix2x6 = SMatrix<f64, 2, 6>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: f64,
    pub height: f64,
    /// Pixel measurement covariance, px².
    pub sigma_v: Matrix2<f64>,
}

impl Default for Intrinsics {
    /// 512×512 camera with 256 px focal lengths, centered principal point and
    /// 2 px isotropic noise.
    fn default() -> Self {
        Self {
            fx: 256.0,
            fy: 256.0,
            cx: 256.0,
            cy: 256.0,
            width: 512.0,
            height: 512.0,
            sigma_v: Matrix2::identity() * 4.0,
        }
    }
}

impl Intrinsics {
    pub fn with_noise_sigma(mut self, sigma: f64) -> Self {
        self.sigma_v = Matrix2::identity() * (sigma * sigma);
        self
    }

    /// Copy whose measurement covariance is scaled by `scale²`, for
    /// simulating observations with more or less noise than is modeled.
    pub fn with_simulated_noise_scale(mut self, scale: f64) -> Self {
        self.sigma_v *= scale * scale;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && (0.0..=self.width).contains(&self.cx)
            && (0.0..=self.height).contains(&self.cy)
            && crate::noise::is_symmetric_psd(&self.sigma_v, 1e-12);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid camera intrinsics {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    pub id: usize,
    pub position: Vector3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelMeasurement {
    pub pose_index: usize,
    pub landmark_id: usize,
    pub uv: Vector2<f64>,
}

/// Expresses a target-frame point in camera axes: `Rᵀ (l − r)`.
pub fn world_to_camera(p: &Pose, l: &Vector3<f64>) -> Vector3<f64> {
    p.rotation.transpose() * (l - p.translation)
}

fn pixel_of(lc: &Vector3<f64>, k: &Intrinsics) -> Vector2<f64> {
    Vector2::new(k.fx * lc.x / lc.z + k.cx, k.fy * lc.y / lc.z + k.cy)
}

pub fn project(p: &Pose, l: &Vector3<f64>, k: &Intrinsics) -> Result<Vector2<f64>> {
    let lc = world_to_camera(p, l);
    if !(lc.z > Z_MIN) {
        return Err(Error::BehindCamera { depth: lc.z });
    }
    Ok(pixel_of(&lc, k))
}

/// Jacobians of [`project`] with respect to the pose tangent (ordered as
/// [`crate::pose::Tangent6`]) and to the landmark position.
pub fn project_jacobians(
    p: &Pose,
    l: &Vector3<f64>,
    k: &Intrinsics,
) -> Result<(Matrix2x6, Matrix2x3<f64>)> {
    let lc = world_to_camera(p, l);
    if !(lc.z > Z_MIN) {
        return Err(Error::BehindCamera { depth: lc.z });
    }
    let inv_z = 1.0 / lc.z;
    let d_pix = Matrix2x3::new(
        k.fx * inv_z,
        0.0,
        -k.fx * lc.x * inv_z * inv_z,
        0.0,
        k.fy * inv_z,
        -k.fy * lc.y * inv_z * inv_z,
    );
    let rt: Matrix3<f64> = p.rotation.transpose();
    let mut j_pose = Matrix2x6::zeros();
    j_pose.fixed_columns_mut::<3>(0).copy_from(&(d_pix * skew(&lc)));
    j_pose.fixed_columns_mut::<3>(3).copy_from(&(-d_pix * rt));
    Ok((j_pose, d_pix * rt))
}

/// In front of the camera and projecting inside the image.
pub fn visible(p: &Pose, l: &Vector3<f64>, k: &Intrinsics) -> bool {
    let lc = world_to_camera(p, l);
    if !(lc.z > Z_MIN) {
        return false;
    }
    let uv = pixel_of(&lc, k);
    (0.0..=k.width).contains(&uv.x) && (0.0..=k.height).contains(&uv.y)
}

/// Noisy measurements of every visible landmark, in scene order.
pub fn observe_scene<R: Rng + ?Sized>(
    p: &Pose,
    pose_index: usize,
    scene: &[Landmark],
    k: &Intrinsics,
    rng: &mut R,
) -> Vec<PixelMeasurement> {
    let sqrt_v = psd_sqrt(&k.sigma_v);
    scene
        .iter()
        .filter(|lm| visible(p, &lm.position, k))
        .map(|lm| {
            let uv = project(p, &lm.position, k).expect("visible landmark projects");
            PixelMeasurement {
                pose_index,
                landmark_id: lm.id,
                uv: uv + sample_with_sqrt(&sqrt_v, rng),
            }
        })
        .collect()
}

/// Target-frame point at camera depth `depth` along the ray through `uv`.
pub fn back_project(uv: &Vector2<f64>, depth: f64, p: &Pose, k: &Intrinsics) -> Result<Vector3<f64>> {
    if !(depth > Z_MIN) {
        return Err(Error::Domain(format!("back-projection depth must exceed {Z_MIN} m, got {depth}")));
    }
    let lc = Vector3::new(depth * (uv.x - k.cx) / k.fx, depth * (uv.y - k.cy) / k.fy, depth);
    Ok(p.rotation * lc + p.translation)
}
