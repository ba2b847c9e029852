//! Camera poses in the target frame and their local coordinates.
//!
//! A [`Pose`] stores the camera-to-target rotation `R` (columns are the
//! camera axes expressed in the target frame) and the camera position `r`.
//! Perturbations use a right-multiplied rotation and an additive translation
//! in the target frame:
//!
//! ```text
//! retract((R, r), (ω, ρ)) = (R · Exp(ω), r + ρ)
//! ```
//!
//! so the translation block of any covariance in tangent coordinates is the
//! position covariance in meters, expressed in the target frame.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Local coordinates `(ω, ρ)`: rotation (rad) first, then translation (m).
pub type Tangent6 = Vector6<f64>;

const ORTHO_TOL: f64 = 1e-9;

pub const POINTING_EPS_POS: f64 = 1e-9;
pub const POINTING_EPS_CROSS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Pose {
    /// Builds a pose, projecting `rotation` back onto SO(3) when it has
    /// drifted by more than 1e-9 in Frobenius norm.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        if rotation.iter().chain(translation.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Domain("pose has non-finite entries".into()));
        }
        if rotation.determinant() <= 0.0 {
            return Err(Error::Domain("pose rotation must have positive determinant".into()));
        }
        Ok(Self {
            rotation: reorthonormalize(&rotation),
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_rotation_translation(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn orthonormality_error(&self) -> f64 {
        (self.rotation.transpose() * self.rotation - Matrix3::identity()).norm()
    }

    /// Unit boresight (third camera axis) in the target frame.
    pub fn boresight(&self) -> Vector3<f64> {
        self.rotation.column(2).into_owned()
    }
}

/// Projects a nearly orthonormal matrix onto SO(3) via SVD when needed.
pub fn reorthonormalize(m: &Matrix3<f64>) -> Matrix3<f64> {
    if (m.transpose() * m - Matrix3::identity()).norm() <= ORTHO_TOL {
        return *m;
    }
    let svd = m.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut r = u * vt;
    if r.determinant() < 0.0 {
        let mut u = u;
        u.column_mut(2).neg_mut();
        r = u * vt;
    }
    r
}

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rotation matrix exponential of `skew(w)`.
pub fn so3_exp(w: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = w.norm_squared();
    let k = skew(w);
    let (a, b) = if theta2 < 1e-12 {
        (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0)
    } else {
        let theta = theta2.sqrt();
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    Matrix3::identity() + k * a + k * k * b
}

/// Rotation vector of `r` (inverse of [`so3_exp`] for angles below π).
pub fn so3_log(r: &Matrix3<f64>) -> Vector3<f64> {
    let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*r));
    q.scaled_axis()
}

/// Inverse of the right Jacobian of SO(3) at `w`.
pub fn so3_right_jacobian_inv(w: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = w.norm_squared();
    let k = skew(w);
    let c = if theta2 < 1e-10 {
        1.0 / 12.0 + theta2 / 720.0
    } else {
        let theta = theta2.sqrt();
        1.0 / theta2 - (1.0 + theta.cos()) / (2.0 * theta * theta.sin())
    };
    Matrix3::identity() + k * 0.5 + k * k * c
}

pub fn se3_retract(p: &Pose, xi: &Tangent6) -> Pose {
    let w = xi.fixed_rows::<3>(0).into_owned();
    let rho = xi.fixed_rows::<3>(3).into_owned();
    Pose {
        rotation: reorthonormalize(&(p.rotation * so3_exp(&w))),
        translation: p.translation + rho,
    }
}

/// Tangent `ξ` with `se3_retract(p, ξ) = q`.
pub fn se3_local(p: &Pose, q: &Pose) -> Tangent6 {
    let w = so3_log(&(p.rotation.transpose() * q.rotation));
    let rho = q.translation - p.translation;
    Tangent6::new(w.x, w.y, w.z, rho.x, rho.y, rho.z)
}

/// Camera attitude whose boresight points from `r_ct` at `r_o`, with the
/// second axis normal to the plane of the velocity and the boresight.
pub fn pointing_rotation(
    r_ct: &Vector3<f64>,
    v_ct: &Vector3<f64>,
    r_o: &Vector3<f64>,
) -> Result<Matrix3<f64>> {
    let r_oc = r_o - r_ct;
    let dist = r_oc.norm();
    if !(dist > POINTING_EPS_POS) {
        return Err(Error::DegenerateGeometry(format!(
            "observation target coincides with the chaser (distance {dist:.3e} m)"
        )));
    }
    let cross = v_ct.cross(&r_oc);
    let cross_norm = cross.norm();
    if !(cross_norm > POINTING_EPS_CROSS) {
        return Err(Error::DegenerateGeometry(format!(
            "velocity is parallel to the boresight (|v x r_oc| = {cross_norm:.3e})"
        )));
    }
    let c3 = r_oc / dist;
    let c2 = cross / cross_norm;
    let c1 = c2.cross(&c3);
    Ok(Matrix3::from_columns(&[c1, c2, c3]))
}

/// Yaw-pitch-roll angles `[ψ, θ, φ]` of the Z-Y-X sequence
/// `R = Rz(ψ) Ry(θ) Rx(φ)`.
pub fn rotation_to_ypr(r: &Matrix3<f64>) -> Vector3<f64> {
    let yaw = r[(1, 0)].atan2(r[(0, 0)]);
    let pitch = -r[(2, 0)].clamp(-1.0, 1.0).asin();
    let roll = r[(2, 1)].atan2(r[(2, 2)]);
    Vector3::new(yaw, pitch, roll)
}

pub fn ypr_to_rotation(ypr: &Vector3<f64>) -> Matrix3<f64> {
    let (sy, cy) = ypr[0].sin_cos();
    let (sp, cp) = ypr[1].sin_cos();
    let (sr, cr) = ypr[2].sin_cos();
    let rz = Matrix3::new(cy, -sy, 0.0, sy, cy, 0.0, 0.0, 0.0, 1.0);
    let ry = Matrix3::new(cp, 0.0, sp, 0.0, 1.0, 0.0, -sp, 0.0, cp);
    let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, cr, -sr, 0.0, sr, cr);
    rz * ry * rx
}

/// `∂ypr / ∂ω` for the right perturbation `R · Exp(ω)`.
///
/// Singular at pitch = ±90°; returns `None` there.
pub fn ypr_jacobian(r: &Matrix3<f64>) -> Option<Matrix3<f64>> {
    let ypr = rotation_to_ypr(r);
    let (sp, cp) = ypr[1].sin_cos();
    let (sr, cr) = ypr[2].sin_cos();
    // body rates from [ψ̇ θ̇ φ̇]
    let rates = Matrix3::new(-sp, 0.0, 1.0, cp * sr, cr, 0.0, cp * cr, -sr, 0.0);
    if cp.abs() < 1e-9 {
        return None;
    }
    rates.try_inverse()
}

/// Wraps an angle to `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut x = a.rem_euclid(two_pi);
    if x > std::f64::consts::PI {
        x -= two_pi;
    }
    x
}

/// Componentwise wrapped difference of two yaw-pitch-roll triples.
pub fn ypr_difference(a: &Vector3<f64>, b: &Vector3<f64>) -> Vector3<f64> {
    (a - b).map(wrap_angle)
}
