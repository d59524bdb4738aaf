//! Ray-cast renderer for a textured box room, used as ground truth for the
//! visual front end.

use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::geometry::SE3Transform;
use crate::vision::{CameraIntrinsics, DepthObserver, GrayImage, InverseDepthEstimate};

/// Smooth solid texture: a sum of plane waves in 3D.
#[derive(Debug, Clone, PartialEq)]
pub struct SolidTexture {
    pub waves: Vec<(Vector3<f64>, f64, f64)>,
    pub base: f64,
}

impl SolidTexture {
    /// `n` waves with random directions, spatial frequency in `freq` (rad per
    /// unit) and amplitudes summing to at most `0.4`.
    pub fn random(n: usize, freq: (f64, f64), seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let waves = (0..n)
            .map(|_| {
                let dir = loop {
                    let d = Vector3::new(normal.sample(&mut rng), normal.sample(&mut rng), normal.sample(&mut rng));
                    if d.norm() > 1e-3 {
                        break d.normalize();
                    }
                };
                let k = rng.random_range(freq.0..freq.1);
                (dir * k, rng.random_range(0.0..std::f64::consts::TAU), 0.4 / n as f64)
            })
            .collect();
        SolidTexture { waves, base: 0.5 }
    }

    pub fn intensity(&self, p: &Vector3<f64>) -> f64 {
        self.base
            + self
                .waves
                .iter()
                .map(|(k, phase, amp)| amp * (k.dot(p) + phase).sin())
                .sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub camera: CameraIntrinsics,
    /// Axis-aligned room corners in world coordinates; cameras sit inside.
    pub room_min: Vector3<f64>,
    pub room_max: Vector3<f64>,
    pub texture: SolidTexture,
}

impl SceneSpec {
    /// 288 × 216 camera looking down +z in a 3 × 2 × 3.5 room. The texture
    /// is smooth at this resolution, so bilinear sampling is accurate to well
    /// under the intensity step between pixels.
    pub fn box_room(seed: u64) -> Self {
        SceneSpec {
            width: 288,
            height: 216,
            camera: CameraIntrinsics::new(210.0, 210.0, 143.5, 107.5).expect("valid intrinsics"),
            room_min: Vector3::new(-1.5, -1.0, -1.0),
            room_max: Vector3::new(1.5, 1.0, 2.5),
            texture: SolidTexture::random(4, (3.0, 6.0), seed),
        }
    }

    /// World hit point of the ray through `pixel` from a camera whose world
    /// pose is `camera_to_world`, and its camera-frame depth.
    pub fn cast(&self, camera_to_world: &SE3Transform, pixel: Vector2<f64>) -> Option<(Vector3<f64>, f64)> {
        let c = &self.camera;
        let ray_cam = Vector3::new((pixel.x - c.cx) / c.fx, (pixel.y - c.cy) / c.fy, 1.0);
        let origin = camera_to_world.translation;
        let dir = camera_to_world.rotation * ray_cam;
        let mut best = f64::INFINITY;
        for axis in 0..3 {
            if dir[axis].abs() < 1e-12 {
                continue;
            }
            for bound in [self.room_min[axis], self.room_max[axis]] {
                let t = (bound - origin[axis]) / dir[axis];
                if t > 1e-9 && t < best {
                    best = t;
                }
            }
        }
        // Inside a convex box the nearest forward plane is the wall hit; since
        // the ray's z component in the camera frame is 1, t is the depth.
        best.is_finite().then(|| (origin + dir * best, best))
    }

    /// Rendered image and per-pixel inverse depth, row-major.
    pub fn render(&self, camera_to_world: &SE3Transform) -> (GrayImage, Vec<f64>) {
        let mut inv_depth = Vec::with_capacity(self.width * self.height);
        let mut data = Vec::with_capacity(self.width * self.height);
        for v in 0..self.height {
            for u in 0..self.width {
                let (p, depth) = self
                    .cast(camera_to_world, Vector2::new(u as f64, v as f64))
                    .expect("camera inside the room");
                data.push(self.texture.intensity(&p));
                inv_depth.push(1.0 / depth);
            }
        }
        (GrayImage::new(self.width, self.height, data).expect("finite render"), inv_depth)
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub frames: Vec<GrayImage>,
    /// Camera-to-world pose of each frame.
    pub poses: Vec<SE3Transform>,
    pub inverse_depths: Vec<Vec<f64>>,
}

/// Renders one frame per trajectory pose.
pub fn generate_synthetic_scene(spec: &SceneSpec, trajectory: &[SE3Transform]) -> SyntheticScene {
    let mut scene = SyntheticScene {
        frames: Vec::with_capacity(trajectory.len()),
        poses: trajectory.to_vec(),
        inverse_depths: Vec::with_capacity(trajectory.len()),
    };
    for pose in trajectory {
        let (img, d) = spec.render(pose);
        scene.frames.push(img);
        scene.inverse_depths.push(d);
    }
    scene
}

/// Ray-cast inverse depth with optional Gaussian noise of std-dev `sigma`.
/// Observations are taken from the keyframe pose the observer is given.
#[derive(Debug, Clone)]
pub struct GroundTruthDepth {
    spec: SceneSpec,
    sigma: f64,
    rng: ChaCha8Rng,
}

impl GroundTruthDepth {
    pub fn new(spec: SceneSpec, sigma: f64, seed: u64) -> Self {
        GroundTruthDepth {
            spec,
            sigma,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl DepthObserver for GroundTruthDepth {
    fn observe(
        &mut self,
        _keyframe_index: usize,
        keyframe_pose: &SE3Transform,
        pixel: Vector2<f64>,
    ) -> Option<InverseDepthEstimate> {
        let (_, depth) = self.spec.cast(keyframe_pose, pixel)?;
        let noise = if self.sigma > 0.0 {
            Normal::new(0.0, self.sigma).ok()?.sample(&mut self.rng)
        } else {
            0.0
        };
        InverseDepthEstimate::new(1.0 / depth + noise, self.sigma.max(1e-6).powi(2)).ok()
    }
}
