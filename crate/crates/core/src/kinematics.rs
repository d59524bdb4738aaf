//! Three-wheel omni-directional base: wheel/body velocity maps and the robot
//! pose read off the keyframe transform chain.
//!
//! Wheel speeds are signed rim speeds. Heading `θ = 0` looks along the
//! camera's optical axis (+z), and `θ` grows with rotation about +y.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::{wrap_angle, SE3Transform};

const SQRT3: f64 = 1.732_050_807_568_877_2;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum KinematicsError {
    #[error("wheel-centre radius must be positive, got {0}")]
    InvalidRadius(f64),
    #[error("optical axis is nearly perpendicular to the motion plane (planar norm {0:e})")]
    DegenerateHeading(f64),
}

/// Command or measurement in the robot frame: `vz` forward, `vx` lateral.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BodyVelocity {
    pub vx: f64,
    pub vz: f64,
    pub omega: f64,
}

impl BodyVelocity {
    pub const ZERO: BodyVelocity = BodyVelocity {
        vx: 0.0,
        vz: 0.0,
        omega: 0.0,
    };

    pub fn new(vx: f64, vz: f64, omega: f64) -> Self {
        BodyVelocity { vx, vz, omega }
    }

    pub fn speed(&self) -> f64 {
        self.vx.hypot(self.vz)
    }

    pub fn is_finite(&self) -> bool {
        self.vx.is_finite() && self.vz.is_finite() && self.omega.is_finite()
    }

    /// Planar world-frame velocity `(ẋ, ż)` for heading `theta`.
    pub fn to_world(&self, theta: f64) -> (f64, f64) {
        let (s, c) = theta.sin_cos();
        (self.vx * c + self.vz * s, -self.vx * s + self.vz * c)
    }

    /// Inverse of [`BodyVelocity::to_world`].
    pub fn from_world(dx: f64, dz: f64, omega: f64, theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        BodyVelocity {
            vx: dx * c - dz * s,
            vz: dx * s + dz * c,
            omega,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct WheelSpeeds {
    pub v1: f64,
    pub v2: f64,
    pub v3: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RobotPose {
    pub x: f64,
    pub z: f64,
    /// In `(−π, π]`.
    pub theta: f64,
}

impl RobotPose {
    pub fn new(x: f64, z: f64, theta: f64) -> Self {
        RobotPose {
            x,
            z,
            theta: wrap_angle(theta),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.z.is_finite() && self.theta.is_finite()
    }

    pub fn distance_to(&self, x: f64, z: f64) -> f64 {
        (self.x - x).hypot(self.z - z)
    }
}

/// Maps `(vx, vz, ω)` to wheel rim speeds.
pub fn kinematic_matrix(l: f64) -> Matrix3<f64> {
    Matrix3::new(
        -0.5, SQRT3 / 2.0, l, //
        -0.5, -SQRT3 / 2.0, l, //
        1.0, 0.0, l,
    )
}

pub fn wheel_speeds(v: &BodyVelocity, l: f64) -> Result<WheelSpeeds, KinematicsError> {
    check_radius(l)?;
    let w = kinematic_matrix(l) * Vector3::new(v.vx, v.vz, v.omega);
    Ok(WheelSpeeds {
        v1: w.x,
        v2: w.y,
        v3: w.z,
    })
}

/// Closed-form inverse of [`kinematic_matrix`].
pub fn body_velocity_from_wheels(w: &WheelSpeeds, l: f64) -> Result<BodyVelocity, KinematicsError> {
    check_radius(l)?;
    Ok(BodyVelocity {
        vx: (2.0 * w.v3 - w.v1 - w.v2) / 3.0,
        vz: (w.v1 - w.v2) / SQRT3,
        omega: (w.v1 + w.v2 + w.v3) / (3.0 * l),
    })
}

fn check_radius(l: f64) -> Result<(), KinematicsError> {
    if l > 0.0 && l.is_finite() {
        Ok(())
    } else {
        Err(KinematicsError::InvalidRadius(l))
    }
}

/// Camera pose in the world frame: `T₀₁⁻¹ T₁₂⁻¹ … T_mn⁻¹`.
pub fn camera_world_pose(chain: &[SE3Transform], current: &SE3Transform) -> SE3Transform {
    chain
        .iter()
        .fold(SE3Transform::identity(), |acc, t| acc.compose(&t.inverse()))
        .compose(&current.inverse())
}

/// Planar pose from the keyframe chain and the current frame's transform
/// relative to the newest keyframe.
pub fn robot_pose_from_transforms(
    chain: &[SE3Transform],
    current: &SE3Transform,
) -> Result<RobotPose, KinematicsError> {
    pose_from_camera(&camera_world_pose(chain, current))
}

/// Planar pose of a camera whose world pose is `camera_to_world`.
pub fn pose_from_camera(camera_to_world: &SE3Transform) -> Result<RobotPose, KinematicsError> {
    let origin = camera_to_world.translation;
    let axis = camera_to_world.rotation * Vector3::z();
    let planar = axis.x.hypot(axis.z);
    if planar < 1e-9 {
        return Err(KinematicsError::DegenerateHeading(planar));
    }
    Ok(RobotPose::new(origin.x, origin.z, axis.x.atan2(axis.z)))
}
