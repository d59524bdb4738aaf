use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::VisionError;
use crate::geometry::{SE3Transform, Twist};

/// Points closer than this to the image plane are treated as behind the camera.
const MIN_DEPTH: f64 = 1e-9;

/// Pinhole intrinsics (pixels).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self, VisionError> {
        if !(fx > 0.0 && fy > 0.0) || !cx.is_finite() || !cy.is_finite() {
            return Err(VisionError::InvalidIntrinsics { fx, fy });
        }
        Ok(CameraIntrinsics { fx, fy, cx, cy })
    }

    /// `P = d⁻¹ · C⁻¹ · [u, v, 1]ᵀ`.
    pub fn backproject(&self, pixel: Vector2<f64>, inv_depth: f64) -> Result<Vector3<f64>, VisionError> {
        if !(inv_depth > 0.0) {
            return Err(VisionError::InvalidDepth(inv_depth));
        }
        let z = 1.0 / inv_depth;
        Ok(Vector3::new(
            (pixel.x - self.cx) / self.fx * z,
            (pixel.y - self.cy) / self.fy * z,
            z,
        ))
    }

    /// Pinhole projection; `None` for points at or behind the camera.
    #[inline]
    pub fn project(&self, p: &Vector3<f64>) -> Option<Vector2<f64>> {
        if p.z <= MIN_DEPTH {
            return None;
        }
        Some(Vector2::new(
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
        ))
    }
}

pub fn backproject(
    pixel: Vector2<f64>,
    inv_depth: f64,
    camera: &CameraIntrinsics,
) -> Result<Vector3<f64>, VisionError> {
    camera.backproject(pixel, inv_depth)
}

/// Moves a keyframe pixel with inverse depth `inv_depth` into a frame whose
/// coordinates are `motion · P_keyframe`. `None` marks a point that lands
/// behind the camera.
#[inline]
pub fn warp_with_transform(
    pixel: Vector2<f64>,
    inv_depth: f64,
    motion: &SE3Transform,
    camera: &CameraIntrinsics,
) -> Option<Vector2<f64>> {
    let p = camera.backproject(pixel, inv_depth).ok()?;
    camera.project(&motion.transform_point(&p))
}

pub fn warp_pixel(
    pixel: Vector2<f64>,
    inv_depth: f64,
    twist: &Twist,
    camera: &CameraIntrinsics,
) -> Option<Vector2<f64>> {
    warp_with_transform(pixel, inv_depth, &SE3Transform::exp(twist), camera)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cam() -> CameraIntrinsics {
        CameraIntrinsics::new(60.0, 55.0, 31.5, 23.5).unwrap()
    }

    #[test]
    fn rejects_bad_focal_length() {
        assert!(CameraIntrinsics::new(0.0, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn backproject_principal_point() {
        let c = cam();
        let pp = Vector2::new(c.cx, c.cy);
        assert_eq!(c.backproject(pp, 1.0).unwrap(), Vector3::new(0.0, 0.0, 1.0));
        assert_eq!(c.backproject(pp, 0.5).unwrap(), Vector3::new(0.0, 0.0, 2.0));
        assert!(matches!(
            c.backproject(pp, 0.0),
            Err(VisionError::InvalidDepth(_))
        ));
        assert!(c.backproject(pp, -1.0).is_err());
    }

    #[test]
    fn warp_zero_twist_is_identity() {
        let p = Vector2::new(12.0, 40.0);
        let w = warp_pixel(p, 0.7, &Twist::zero(), &cam()).unwrap();
        assert!((w - p).norm() < 1e-12);
    }

    #[test]
    fn warp_x_translation_shifts_by_fx_t_over_z() {
        let c = cam();
        let (tx, z) = (0.05, 2.0);
        let p = Vector2::new(20.0, 10.0);
        let t = Twist::from_slice(&[tx, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let w = warp_pixel(p, 1.0 / z, &t, &c).unwrap();
        assert!((w.x - p.x - c.fx * tx / z).abs() < 1e-12);
        assert!((w.y - p.y).abs() < 1e-12);
    }

    #[test]
    fn warp_behind_camera_is_out_of_view() {
        let t = Twist::from_slice(&[0.0, 0.0, -2.0, 0.0, 0.0, 0.0]);
        assert!(warp_pixel(Vector2::new(31.5, 23.5), 1.0, &t, &cam()).is_none());
    }

    proptest! {
        #[test]
        fn project_backproject_round_trip(u in 0.0..64.0f64, v in 0.0..48.0f64, d in 0.05..20.0f64) {
            let c = cam();
            let p = Vector2::new(u, v);
            let back = c.project(&c.backproject(p, d).unwrap()).unwrap();
            prop_assert!((back - p).norm() < 1e-9);
        }

        #[test]
        fn warp_then_inverse_warp_returns(
            u in 10.0..54.0f64, v in 10.0..38.0f64, d in 0.3..2.0f64,
            tw in prop::array::uniform6(-0.05..0.05f64),
        ) {
            let c = cam();
            let motion = SE3Transform::exp(&Twist::from_slice(&tw));
            let p = Vector2::new(u, v);
            let moved = motion.transform_point(&c.backproject(p, d).unwrap());
            let q = c.project(&moved).unwrap();
            let back = warp_with_transform(q, 1.0 / moved.z, &motion.inverse(), &c).unwrap();
            prop_assert!((back - p).norm() < 1e-6);
        }
    }
}
