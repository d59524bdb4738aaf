use nalgebra::Vector2;

use super::{select_pixels, DepthObserver, FrontendConfig, GrayImage, InverseDepthEstimate, VisionError};
use crate::geometry::{SE3Transform, Twist};

/// Selected keyframe pixel with its inverse-depth belief.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackedPixel {
    pub pixel: Vector2<f64>,
    pub depth: InverseDepthEstimate,
}

#[derive(Debug, Clone)]
pub struct KeyFrame {
    pub image: GrayImage,
    pub pixels: Vec<TrackedPixel>,
    /// Transform taking this keyframe's camera coordinates into the next
    /// keyframe's. Absent on the newest keyframe.
    pub to_next: Option<SE3Transform>,
    /// Maps this keyframe's camera coordinates into the world (first keyframe)
    /// frame.
    pub world_pose: SE3Transform,
}

impl KeyFrame {
    /// Selects high-gradient pixels and initializes their inverse depth to 1.
    pub fn new(image: GrayImage, world_pose: SE3Transform, cfg: &FrontendConfig) -> Self {
        let prior = InverseDepthEstimate {
            mean: 1.0,
            variance: cfg.initial_depth_variance,
        };
        let pixels = select_pixels(&image, cfg.gradient_threshold)
            .into_iter()
            .map(|(u, v)| TrackedPixel {
                pixel: Vector2::new(u as f64, v as f64),
                depth: prior,
            })
            .collect();
        KeyFrame {
            image,
            pixels,
            to_next: None,
            world_pose,
        }
    }

    pub fn with_pixels(image: GrayImage, pixels: Vec<TrackedPixel>, world_pose: SE3Transform) -> Self {
        KeyFrame {
            image,
            pixels,
            to_next: None,
            world_pose,
        }
    }

    pub fn is_frozen(&self) -> bool {
        self.to_next.is_some()
    }

    /// Fuses one observation per pixel into the depth beliefs. Frozen
    /// keyframes are left untouched. Returns the number of fused pixels.
    pub fn fuse_observations(
        &mut self,
        keyframe_index: usize,
        observer: &mut dyn DepthObserver,
    ) -> Result<usize, VisionError> {
        if self.is_frozen() {
            return Ok(0);
        }
        let mut fused = 0;
        let pose = self.world_pose;
        for px in &mut self.pixels {
            if let Some(obs) = observer.observe(keyframe_index, &pose, px.pixel) {
                px.depth = px.depth.fuse(&obs)?;
                fused += 1;
            }
        }
        Ok(fused)
    }
}

/// Ordered keyframes `K₀, K₁, …`; `K₀` defines the world frame.
#[derive(Debug, Clone, Default)]
pub struct KeyframeChain {
    frames: Vec<KeyFrame>,
}

impl KeyframeChain {
    pub fn new(first: KeyFrame) -> Self {
        KeyframeChain {
            frames: vec![first],
        }
    }

    pub fn from_frames(frames: Vec<KeyFrame>) -> Self {
        KeyframeChain { frames }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> &[KeyFrame] {
        &self.frames
    }

    pub fn newest(&self) -> Option<&KeyFrame> {
        self.frames.last()
    }

    pub fn newest_mut(&mut self) -> Option<&mut KeyFrame> {
        self.frames.last_mut()
    }

    /// `T₀₁, T₁₂, …` for every frozen keyframe.
    pub fn transforms(&self) -> Vec<SE3Transform> {
        self.frames.iter().filter_map(|k| k.to_next).collect()
    }

    /// Appends a keyframe reached from the newest one by `to_next`, freezing
    /// the previous newest keyframe.
    pub fn push(&mut self, to_next: SE3Transform, mut next: KeyFrame) -> Result<(), VisionError> {
        let last = self.frames.last_mut().ok_or(VisionError::EmptyChain)?;
        last.to_next = Some(to_next);
        next.world_pose = last.world_pose.compose(&to_next.inverse());
        next.to_next = None;
        self.frames.push(next);
        Ok(())
    }
}

/// Starts a new keyframe from `frame` once the camera has translated at least
/// `keyframe_distance` from the newest keyframe. Returns whether it did.
pub fn advance_keyframe(
    chain: &mut KeyframeChain,
    motion: &Twist,
    frame: &GrayImage,
    cfg: &FrontendConfig,
) -> Result<bool, VisionError> {
    if chain.is_empty() {
        return Err(VisionError::EmptyChain);
    }
    let transform = SE3Transform::exp(motion);
    if transform.translation.norm() < cfg.keyframe_distance {
        return Ok(false);
    }
    let next = KeyFrame::new(frame.clone(), SE3Transform::identity(), cfg);
    chain.push(transform, next)?;
    Ok(true)
}
