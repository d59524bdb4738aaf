use nalgebra::Vector2;

use crate::geometry::SE3Transform;

use super::VisionError;

/// Gaussian belief `N(mean, variance)` over a pixel's inverse depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseDepthEstimate {
    pub mean: f64,
    pub variance: f64,
}

impl InverseDepthEstimate {
    pub fn new(mean: f64, variance: f64) -> Result<Self, VisionError> {
        if !(variance > 0.0) || !mean.is_finite() {
            return Err(VisionError::InvalidEstimate { mean, variance });
        }
        Ok(InverseDepthEstimate { mean, variance })
    }

    /// Product of the two Gaussians, renormalized.
    pub fn fuse(&self, obs: &InverseDepthEstimate) -> Result<Self, VisionError> {
        fuse_inverse_depth(self, obs)
    }
}

pub fn fuse_inverse_depth(
    prior: &InverseDepthEstimate,
    obs: &InverseDepthEstimate,
) -> Result<InverseDepthEstimate, VisionError> {
    for e in [prior, obs] {
        if !(e.variance > 0.0) {
            return Err(VisionError::InvalidEstimate {
                mean: e.mean,
                variance: e.variance,
            });
        }
    }
    let (sp, so) = (prior.variance, obs.variance);
    let sum = sp + so;
    Ok(InverseDepthEstimate {
        mean: (sp * obs.mean + so * prior.mean) / sum,
        variance: sp * so / sum,
    })
}

/// Source of inverse-depth observations for keyframe pixels.
///
/// Stereo matching along epipolar lines would live behind this trait; the
/// simulator plugs in ground truth plus noise.
pub trait DepthObserver {
    /// Observation for `pixel` of the keyframe at `keyframe_index`, whose
    /// current world-pose estimate is `keyframe_pose`. `None` when the pixel
    /// cannot be observed.
    fn observe(
        &mut self,
        keyframe_index: usize,
        keyframe_pose: &SE3Transform,
        pixel: Vector2<f64>,
    ) -> Option<InverseDepthEstimate>;
}
