//! Direct-method visual localization: gradient pixel selection, weighted
//! photometric Levenberg-Marquardt alignment, inverse-depth fusion and the
//! keyframe chain.

mod camera;
mod depth;
mod image;
mod keyframe;
mod tracking;

pub use camera::{backproject, warp_pixel, warp_with_transform, CameraIntrinsics};
pub use depth::{fuse_inverse_depth, DepthObserver, InverseDepthEstimate};
pub use image::GrayImage;
pub use keyframe::{advance_keyframe, KeyFrame, KeyframeChain, TrackedPixel};
pub use tracking::{
    photometric_residual, track_frame, Residuals, TrackingOutcome, VisualOdometry,
    MIN_OVERLAP_FRACTION,
};

use serde::{Deserialize, Serialize};

use crate::geometry::GeometryError;

#[derive(Debug, thiserror::Error)]
pub enum VisionError {
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("PGM: {0}")]
    Pgm(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("focal lengths must be positive (fx = {fx}, fy = {fy})")]
    InvalidIntrinsics { fx: f64, fy: f64 },
    #[error("inverse depth must be positive, got {0}")]
    InvalidDepth(f64),
    #[error("inverse-depth estimate needs positive variance (mean {mean}, variance {variance})")]
    InvalidEstimate { mean: f64, variance: f64 },
    #[error("no keyframe pixel lands inside the frame")]
    NoOverlap,
    #[error("tracking lost: {in_view} of {selected} pixels in view")]
    TrackingLost { in_view: usize, selected: usize },
    #[error("keyframe chain is empty")]
    EmptyChain,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrontendConfig {
    /// Minimum central-difference gradient magnitude (intensity/pixel).
    pub gradient_threshold: f64,
    /// Camera translation that triggers a new keyframe (camera units).
    pub keyframe_distance: f64,
    /// Image intensity noise variance σ_I².
    pub image_noise: f64,
    /// Variance assigned to freshly initialized inverse depths.
    pub initial_depth_variance: f64,
    pub lm_max_iters: usize,
    pub lm_init_lambda: f64,
    /// Stop once the LM step norm drops below this.
    pub convergence_tol: f64,
}

impl Default for FrontendConfig {
    fn default() -> Self {
        FrontendConfig {
            gradient_threshold: 0.05,
            keyframe_distance: 0.1,
            image_noise: 1e-4,
            initial_depth_variance: 1.0,
            lm_max_iters: 50,
            lm_init_lambda: 1e-3,
            convergence_tol: 1e-10,
        }
    }
}

/// Interior pixels whose central-difference gradient magnitude exceeds
/// `threshold`, in row-major order.
pub fn select_pixels(img: &GrayImage, threshold: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for v in 1..img.height() - 1 {
        for u in 1..img.width() - 1 {
            let (gx, gy) = img.gradient(u, v);
            if (gx * gx + gy * gy).sqrt() > threshold {
                out.push((u, v));
            }
        }
    }
    out
}
