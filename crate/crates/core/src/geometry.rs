//! Rigid-body transforms in SE(3) and their tangent space se(3).
//!
//! Rotations are stored as plain 3×3 matrices. Twists are ordered
//! `[ρ (translation), ω (rotation)]`, with ω in radians.

use nalgebra::{Matrix3, Vector3, Vector6};
use std::f64::consts::PI;
use std::fmt;
use std::ops::Mul;

/// Below this rotation angle the exponential and logarithm switch to Taylor
/// expansions of their coefficients.
pub const SMALL_ANGLE: f64 = 1e-8;

/// Angles closer than this to π make the logarithm's axis sign ambiguous.
const PI_DEGENERACY: f64 = 1e-9;

/// Rotation angles above `π - NEAR_PI` recover the axis from the symmetric
/// part of R rather than from `R - Rᵀ`.
const NEAR_PI: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("rotation angle {0} is at π; the logarithm axis sign is ambiguous")]
    DegenerateRotation(f64),
}

/// Element of se(3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Twist(pub Vector6<f64>);

impl Twist {
    pub fn zero() -> Self {
        Twist(Vector6::zeros())
    }

    pub fn new(translation: Vector3<f64>, rotation: Vector3<f64>) -> Self {
        Twist(Vector6::new(
            translation.x,
            translation.y,
            translation.z,
            rotation.x,
            rotation.y,
            rotation.z,
        ))
    }

    pub fn from_slice(v: &[f64; 6]) -> Self {
        Twist(Vector6::from_row_slice(v))
    }

    pub fn translation(&self) -> Vector3<f64> {
        self.0.fixed_rows::<3>(0).into_owned()
    }

    pub fn rotation(&self) -> Vector3<f64> {
        self.0.fixed_rows::<3>(3).into_owned()
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }
}

/// Rigid-body transform acting as `p ↦ R·p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SE3Transform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for SE3Transform {
    fn default() -> Self {
        Self::identity()
    }
}

impl fmt::Display for SE3Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = &self.translation;
        write!(
            f,
            "SE3(t: [{:.6}, {:.6}, {:.6}], angle: {:.6})",
            t.x,
            t.y,
            t.z,
            rotation_angle(&self.rotation)
        )
    }
}

/// Skew-symmetric matrix `[v]×` such that `[v]× w = v × w`.
pub fn hat(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
}

impl SE3Transform {
    pub fn identity() -> Self {
        SE3Transform {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        SE3Transform {
            rotation,
            translation,
        }
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        SE3Transform {
            rotation: Matrix3::identity(),
            translation: t,
        }
    }

    /// Rotation by `angle` radians about the camera y axis, which is the
    /// normal of the robot's motion plane.
    pub fn rotation_y(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        SE3Transform {
            rotation: Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c),
            translation: Vector3::zeros(),
        }
    }

    /// Closed-form exponential map (Rodrigues rotation and left Jacobian V).
    pub fn exp(twist: &Twist) -> Self {
        let rho = twist.translation();
        let omega = twist.rotation();
        let theta_sq = omega.norm_squared();
        let theta = theta_sq.sqrt();
        let (a, b, c) = if theta < SMALL_ANGLE {
            (
                1.0 - theta_sq / 6.0,
                0.5 - theta_sq / 24.0,
                1.0 / 6.0 - theta_sq / 120.0,
            )
        } else {
            let (s, co) = theta.sin_cos();
            (
                s / theta,
                (1.0 - co) / theta_sq,
                (theta - s) / (theta_sq * theta),
            )
        };
        let w = hat(&omega);
        let w2 = w * w;
        let rotation = Matrix3::identity() + w * a + w2 * b;
        let v = Matrix3::identity() + w * b + w2 * c;
        SE3Transform {
            rotation,
            translation: v * rho,
        }
    }

    /// Inverse of [`SE3Transform::exp`] for rotation angles below π.
    pub fn log(&self) -> Result<Twist, GeometryError> {
        let r = &self.rotation;
        let theta = rotation_angle(r);
        if PI - theta < PI_DEGENERACY {
            return Err(GeometryError::DegenerateRotation(theta));
        }
        let omega = if theta < SMALL_ANGLE {
            vee(&(r - r.transpose())) * 0.5
        } else if PI - theta < NEAR_PI {
            near_pi_axis(r, theta) * theta
        } else {
            vee(&(r - r.transpose())) * (theta / (2.0 * theta.sin()))
        };
        let w = hat(&omega);
        let theta_sq = theta * theta;
        let coeff = if theta < SMALL_ANGLE {
            1.0 / 12.0 + theta_sq / 720.0
        } else {
            let (s, c) = theta.sin_cos();
            (1.0 - theta * s / (2.0 * (1.0 - c))) / theta_sq
        };
        let v_inv = Matrix3::identity() - w * 0.5 + w * w * coeff;
        Ok(Twist::new(v_inv * self.translation, omega))
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        SE3Transform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &SE3Transform) -> Self {
        SE3Transform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// Largest deviation of `RᵀR` from identity and of `det R` from one.
    pub fn orthonormality_error(&self) -> f64 {
        let r = &self.rotation;
        let gram = (r.transpose() * r - Matrix3::identity()).abs().max();
        gram.max((r.determinant() - 1.0).abs())
    }

    /// Frobenius distance of rotations plus Euclidean distance of translations.
    pub fn distance(&self, other: &SE3Transform) -> f64 {
        (self.rotation - other.rotation).norm() + (self.translation - other.translation).norm()
    }
}

fn near_pi_axis(r: &Matrix3<f64>, theta: f64) -> Vector3<f64> {
    // (R + Rᵀ)/2 - cosθ·I = (1 - cosθ)·a·aᵀ
    let sym = (r + r.transpose()) * 0.5 - Matrix3::identity() * theta.cos();
    let mut best = 0;
    for i in 1..3 {
        if sym[(i, i)] > sym[(best, best)] {
            best = i;
        }
    }
    let mut axis = sym.column(best).into_owned();
    axis /= axis.norm();
    let sin_axis = vee(&(r - r.transpose()));
    if sin_axis.dot(&axis) < 0.0 {
        axis = -axis;
    }
    axis
}

impl Mul for SE3Transform {
    type Output = SE3Transform;
    fn mul(self, rhs: SE3Transform) -> SE3Transform {
        self.compose(&rhs)
    }
}

impl Mul<&SE3Transform> for &SE3Transform {
    type Output = SE3Transform;
    fn mul(self, rhs: &SE3Transform) -> SE3Transform {
        self.compose(rhs)
    }
}

pub fn exp_twist(twist: &Twist) -> SE3Transform {
    SE3Transform::exp(twist)
}

pub fn log_transform(t: &SE3Transform) -> Result<Twist, GeometryError> {
    t.log()
}

pub fn invert(t: &SE3Transform) -> SE3Transform {
    t.inverse()
}

pub fn compose(a: &SE3Transform, b: &SE3Transform) -> SE3Transform {
    a.compose(b)
}

pub fn transform_point(t: &SE3Transform, p: &Vector3<f64>) -> Vector3<f64> {
    t.transform_point(p)
}

/// Wraps an angle into (-π, π].
pub fn wrap_angle(angle: f64) -> f64 {
    let mut a = angle % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Truncated power series of the 4×4 homogeneous matrix exponential.
    fn series_exp(twist: &Twist) -> nalgebra::Matrix4<f64> {
        let mut xi = nalgebra::Matrix4::zeros();
        xi.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&hat(&twist.rotation()));
        xi.fixed_view_mut::<3, 1>(0, 3)
            .copy_from(&twist.translation());
        let mut term = nalgebra::Matrix4::identity();
        let mut sum = nalgebra::Matrix4::identity();
        for k in 1..60 {
            term = term * xi / k as f64;
            sum += term;
        }
        sum
    }

    fn arb_twist(max_angle: f64) -> impl Strategy<Value = Twist> {
        (
            prop::array::uniform3(-3.0..3.0f64),
            prop::array::uniform3(-1.0..1.0f64),
            0.0..max_angle,
        )
            .prop_map(|(t, axis, angle)| {
                let a = Vector3::from(axis);
                let a = if a.norm() < 1e-6 {
                    Vector3::x()
                } else {
                    a.normalize()
                };
                Twist::new(Vector3::from(t), a * angle)
            })
    }

    #[test]
    fn exp_of_zero_is_identity() {
        assert_eq!(SE3Transform::exp(&Twist::zero()), SE3Transform::identity());
    }

    #[test]
    fn exp_of_pure_translation() {
        let t = SE3Transform::exp(&Twist::from_slice(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]));
        assert_eq!(t.rotation, Matrix3::identity());
        assert_relative_eq!(t.translation, Vector3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn exp_quarter_turn_about_y_matches_series() {
        let twist = Twist::from_slice(&[0.0, 0.0, 0.0, 0.0, PI / 2.0, 0.0]);
        let t = SE3Transform::exp(&twist);
        let oracle = series_exp(&twist);
        for i in 0..3 {
            for j in 0..3 {
                assert!((t.rotation[(i, j)] - oracle[(i, j)]).abs() < 1e-12);
            }
            assert!((t.translation[i] - oracle[(i, 3)]).abs() < 1e-12);
        }
        // z maps to x under +90° about y
        assert_relative_eq!(
            t.transform_vector(&Vector3::z()),
            Vector3::x(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn log_of_identity_and_translation() {
        assert_eq!(SE3Transform::identity().log().unwrap(), Twist::zero());
        let t = SE3Transform::from_translation(Vector3::new(2.0, 0.0, 0.0));
        assert_relative_eq!(
            t.log().unwrap().0,
            Vector6::new(2.0, 0.0, 0.0, 0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn log_at_pi_is_degenerate() {
        let t = SE3Transform::rotation_y(PI);
        assert!(matches!(t.log(), Err(GeometryError::DegenerateRotation(_))));
    }

    #[test]
    fn log_near_pi_round_trips() {
        let twist = Twist::new(
            Vector3::new(0.3, -0.2, 0.1),
            Vector3::new(1.0, 2.0, -0.5).normalize() * (PI - 5e-4),
        );
        let t = SE3Transform::exp(&twist);
        let back = SE3Transform::exp(&t.log().unwrap());
        assert!(back.distance(&t) < 1e-9);
    }

    #[test]
    fn invert_examples() {
        assert_eq!(
            SE3Transform::identity().inverse(),
            SE3Transform::identity()
        );
        let t = SE3Transform::from_translation(Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(t.inverse().translation, Vector3::new(-1.0, -2.0, -3.0));
        assert_eq!(t.inverse().rotation, Matrix3::identity());
    }

    #[test]
    fn compose_translations() {
        let a = SE3Transform::from_translation(Vector3::new(1.0, 0.0, 0.0));
        let b = SE3Transform::from_translation(Vector3::new(0.0, 1.0, 0.0));
        assert_eq!((a * b).translation, Vector3::new(1.0, 1.0, 0.0));
        assert_eq!(SE3Transform::identity() * a, a);
    }

    #[test]
    fn transform_point_examples() {
        let p = Vector3::new(1.0, 2.0, 3.0);
        assert_eq!(SE3Transform::identity().transform_point(&p), p);
        let t = SE3Transform::from_translation(Vector3::new(5.0, 0.0, 0.0));
        assert_eq!(
            t.transform_point(&Vector3::zeros()),
            Vector3::new(5.0, 0.0, 0.0)
        );
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert_relative_eq!(wrap_angle(-PI), PI);
        assert_relative_eq!(wrap_angle(3.0 * PI / 2.0), -PI / 2.0);
        assert_relative_eq!(wrap_angle(-7.0 * PI / 2.0), PI / 2.0, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn exp_log_round_trip(twist in arb_twist(PI - 1e-3)) {
            let t = SE3Transform::exp(&twist);
            prop_assert!(t.orthonormality_error() < 1e-9);
            let back = SE3Transform::exp(&t.log().unwrap());
            prop_assert!(back.distance(&t) < 1e-9);
        }

        #[test]
        fn small_twist_log_recovers_twist(twist in arb_twist(0.5)) {
            let recovered = SE3Transform::exp(&twist).log().unwrap();
            prop_assert!((recovered.0 - twist.0).norm() < 1e-9);
        }

        #[test]
        fn inverse_cancels(twist in arb_twist(PI)) {
            let t = SE3Transform::exp(&twist);
            prop_assert!((t * t.inverse()).distance(&SE3Transform::identity()) < 1e-9);
            prop_assert!(t.inverse().orthonormality_error() < 1e-9);
        }

        #[test]
        fn compose_applies_right_then_left(
            a in arb_twist(PI), b in arb_twist(PI), p in prop::array::uniform3(-5.0..5.0f64)
        ) {
            let (ta, tb) = (SE3Transform::exp(&a), SE3Transform::exp(&b));
            let p = Vector3::from(p);
            let lhs = (ta * tb).transform_point(&p);
            let rhs = ta.transform_point(&tb.transform_point(&p));
            prop_assert!((lhs - rhs).norm() < 1e-9);
        }

        #[test]
        fn transform_is_isometry(
            a in arb_twist(PI),
            p in prop::array::uniform3(-5.0..5.0f64),
            q in prop::array::uniform3(-5.0..5.0f64),
        ) {
            let t = SE3Transform::exp(&a);
            let (p, q) = (Vector3::from(p), Vector3::from(q));
            let d = (t.transform_point(&p) - t.transform_point(&q)).norm();
            prop_assert!((d - (p - q).norm()).abs() < 1e-9);
        }
    }
}
