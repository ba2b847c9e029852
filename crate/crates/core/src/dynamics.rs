//! Relative orbital motion of the chaser in the rotating target frame.
//!
//! Axes follow the usual Hill convention: `x` radial, `y` along-track and
//! `z` along the orbit normal. The undisturbed motion is propagated with the
//! closed-form Clohessy-Wiltshire state transition; process noise enters as a
//! piecewise-constant disturbance acceleration held over each step.

use std::ops::AddAssign;

use nalgebra::{Matrix3, Matrix6, Vector3, Vector6};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{psd_sqrt, sample_with_sqrt};

/// Earth gravitational parameter, m³/s².
pub const EARTH_MU: f64 = 3.986_004_418e14;
/// Earth equatorial radius, m.
pub const EARTH_RADIUS: f64 = 6_378_137.0;
/// Number of simulation steps in one relative orbit.
pub const STEPS_PER_ORBIT: usize = 60;

/// Chaser position and velocity relative to the target, expressed in the
/// target frame, at epoch `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativeState {
    pub r: Vector3<f64>,
    pub v: Vector3<f64>,
    pub t: f64,
}

impl RelativeState {
    pub fn new(r: Vector3<f64>, v: Vector3<f64>, t: f64) -> Self {
        Self { r, v, t }
    }

    pub fn is_finite(&self) -> bool {
        self.r.iter().chain(self.v.iter()).all(|x| x.is_finite()) && self.t.is_finite()
    }

    pub fn as_vector(&self) -> Vector6<f64> {
        Vector6::new(self.r.x, self.r.y, self.r.z, self.v.x, self.v.y, self.v.z)
    }

    pub fn from_vector(x: &Vector6<f64>, t: f64) -> Self {
        Self {
            r: Vector3::new(x[0], x[1], x[2]),
            v: Vector3::new(x[3], x[4], x[5]),
            t,
        }
    }
}

/// Target mean motion, process noise and simulation step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitParams {
    pub nu: f64,
    pub sigma_w: Matrix3<f64>,
    pub dt: f64,
}

impl OrbitParams {
    pub fn new(nu: f64, sigma_w: Matrix3<f64>, dt: f64) -> Result<Self> {
        let p = Self { nu, sigma_w, dt };
        p.validate()?;
        Ok(p)
    }

    /// Parameters for a circular orbit at `altitude` with one relative orbit
    /// split into [`STEPS_PER_ORBIT`] steps.
    pub fn from_altitude(altitude: f64, sigma_w: Matrix3<f64>) -> Result<Self> {
        let nu = mean_motion(altitude, EARTH_MU, EARTH_RADIUS)?;
        Self::new(nu, sigma_w, orbit_period(nu) / STEPS_PER_ORBIT as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::Domain(format!("mean motion must be positive, got {}", self.nu)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Domain(format!("time step must be positive, got {}", self.dt)));
        }
        if !crate::noise::is_symmetric_psd(&self.sigma_w, 1e-12) {
            return Err(Error::Domain("process-noise covariance must be symmetric PSD".into()));
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        orbit_period(self.nu)
    }
}

pub fn orbit_period(nu: f64) -> f64 {
    2.0 * std::f64::consts::PI / nu
}

/// Mean motion of a circular orbit `altitude` meters above a body of radius
/// `body_radius` and gravitational parameter `mu`.
pub fn mean_motion(altitude: f64, mu: f64, body_radius: f64) -> Result<f64> {
    if !(altitude >= 0.0 && mu > 0.0 && body_radius > 0.0) {
        return Err(Error::Domain(format!(
            "mean_motion needs non-negative altitude and positive mu/radius (altitude {altitude}, mu {mu}, radius {body_radius})"
        )));
    }
    let a = body_radius + altitude;
    Ok((mu / (a * a * a)).sqrt())
}

/// Along-track velocity that closes the relative orbit for radial offset `x0`.
pub fn closed_orbit_vy(x0: f64, nu: f64) -> f64 {
    -2.0 * nu * x0
}

/// Closed-form CW state-transition matrix over `t` seconds, acting on
/// `[x y z vx vy vz]`.
pub fn cw_transition(nu: f64, t: f64) -> Matrix6<f64> {
    let nt = nu * t;
    let (s, c) = nt.sin_cos();
    #[rustfmt::skip]
    let phi = Matrix6::new(
        4.0 - 3.0 * c,         0.0, 0.0, s / nu,             2.0 * (1.0 - c) / nu,       0.0,
        6.0 * (s - nt),        1.0, 0.0, 2.0 * (c - 1.0) / nu, (4.0 * s - 3.0 * nt) / nu, 0.0,
        0.0,                   0.0, c,   0.0,                0.0,                        s / nu,
        3.0 * nu * s,          0.0, 0.0, c,                  2.0 * s,                    0.0,
        6.0 * nu * (c - 1.0),  0.0, 0.0, -2.0 * s,           4.0 * c - 3.0,              0.0,
        0.0,                   0.0, -nu * s, 0.0,            0.0,                        c,
    );
    phi
}

/// Undisturbed CW propagation of `s0` by `t` seconds.
pub fn cw_closed_form(s0: &RelativeState, nu: f64, t: f64) -> RelativeState {
    let x = cw_transition(nu, t) * s0.as_vector();
    RelativeState::from_vector(&x, s0.t + t)
}

/// Time derivative of the undisturbed CW state.
pub fn cw_derivative(x: &Vector6<f64>, nu: f64) -> Vector6<f64> {
    let n2 = nu * nu;
    Vector6::new(
        x[3],
        x[4],
        x[5],
        3.0 * n2 * x[0] + 2.0 * nu * x[4],
        -2.0 * nu * x[3],
        -n2 * x[2],
    )
}

/// Propagates `steps` steps of `p.dt` with a zero-order-hold disturbance
/// acceleration drawn from `N(0, Σ_W)` at every step. Returns `steps + 1`
/// states starting with `s0`.
pub fn cw_propagate_noisy<R: Rng + ?Sized>(
    s0: &RelativeState,
    p: &OrbitParams,
    steps: usize,
    rng: &mut R,
) -> Vec<RelativeState> {
    let phi = cw_transition(p.nu, p.dt);
    let sqrt_w = psd_sqrt(&p.sigma_w);
    let mut out = Vec::with_capacity(steps + 1);
    out.push(*s0);
    let mut x = s0.as_vector();
    let mut t = s0.t;
    for _ in 0..steps {
        let w = sample_with_sqrt(&sqrt_w, rng);
        x = phi * x;
        let dr = w * (0.5 * p.dt * p.dt);
        let dv = w * p.dt;
        x.fixed_rows_mut::<3>(0).add_assign(&dr);
        x.fixed_rows_mut::<3>(3).add_assign(&dv);
        t += p.dt;
        out.push(RelativeState::from_vector(&x, t));
    }
    out
}

/// Noise-free states at `s0.t + i·dt` for `i = 0..=steps`.
pub fn cw_nominal(s0: &RelativeState, nu: f64, dt: f64, steps: usize) -> Vec<RelativeState> {
    (0..=steps)
        .map(|i| cw_closed_form(s0, nu, i as f64 * dt))
        .collect()
}
