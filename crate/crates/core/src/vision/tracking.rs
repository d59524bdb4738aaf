use nalgebra::{Matrix6, Vector2, Vector3, Vector6};

use super::{
    advance_keyframe, CameraIntrinsics, DepthObserver, FrontendConfig, GrayImage, KeyFrame,
    KeyframeChain, VisionError,
};
use crate::geometry::{SE3Transform, Twist};

/// Tracking needs at least this fraction of the keyframe's pixels in view.
pub const MIN_OVERLAP_FRACTION: f64 = 0.25;

/// Step on the inverse-depth mean for the ∂r/∂μ finite difference.
const DEPTH_DERIVATIVE_STEP: f64 = 1e-4;

/// Damping ceiling; past it no acceptable step exists.
const MAX_LAMBDA: f64 = 1e16;

/// Weighted photometric residuals of one keyframe against one frame.
#[derive(Debug, Clone, Default)]
pub struct Residuals {
    /// Keyframe pixel index of each in-view residual.
    pub indices: Vec<usize>,
    pub residuals: Vec<f64>,
    pub weights: Vec<f64>,
    /// `Σ W·r²` over in-view pixels.
    pub energy: f64,
}

#[derive(Debug, Clone)]
pub struct TrackingOutcome {
    pub twist: Twist,
    pub transform: SE3Transform,
    pub initial_energy: f64,
    pub final_energy: f64,
    /// Energy after the initial evaluation and after every accepted step.
    pub energies: Vec<f64>,
    pub iterations: usize,
    pub accepted_steps: usize,
}

struct Evaluation {
    residuals: Residuals,
    /// ∂r/∂ξ for left perturbations `exp(ξ)·T`; empty unless requested.
    jacobians: Vec<Vector6<f64>>,
}

#[inline]
fn lookup(
    frame: &GrayImage,
    pixel: Vector2<f64>,
    inv_depth: f64,
    motion: &SE3Transform,
    camera: &CameraIntrinsics,
) -> Option<(f64, Vector3<f64>, Vector2<f64>)> {
    let p = camera.backproject(pixel, inv_depth).ok()?;
    let moved = motion.transform_point(&p);
    let q = camera.project(&moved)?;
    let intensity = frame.sample(q.x, q.y)?;
    Some((intensity, moved, q))
}

fn evaluate(
    kf: &KeyFrame,
    frame: &GrayImage,
    motion: &SE3Transform,
    camera: &CameraIntrinsics,
    image_noise: f64,
    with_jacobians: bool,
) -> Evaluation {
    let mut out = Residuals::default();
    let mut jacobians = Vec::new();
    for (idx, px) in kf.pixels.iter().enumerate() {
        let reference = kf.image.sample(px.pixel.x, px.pixel.y);
        let Some(reference) = reference else { continue };
        let mu = px.depth.mean;
        let Some((warped, moved, q)) = lookup(frame, px.pixel, mu, motion, camera) else {
            continue;
        };
        let r = reference - warped;

        let h = DEPTH_DERIVATIVE_STEP;
        let plus = lookup(frame, px.pixel, mu + h, motion, camera).map(|s| s.0);
        let minus = lookup(frame, px.pixel, mu - h, motion, camera).map(|s| s.0);
        // r = I_ref − I(warp(μ)), so ∂r/∂μ = −∂I/∂μ.
        let dr_dmu = match (plus, minus) {
            (Some(p), Some(m)) => -(p - m) / (2.0 * h),
            (Some(p), None) => -(p - warped) / h,
            (None, Some(m)) => -(warped - m) / h,
            (None, None) => 0.0,
        };
        let w = 1.0 / (2.0 * image_noise + dr_dmu * dr_dmu * px.depth.variance);

        if with_jacobians {
            let Some((gx, gy)) = frame.sample_gradient(q.x, q.y) else {
                continue;
            };
            let inv_z = 1.0 / moved.z;
            let (x, y) = (moved.x * inv_z, moved.y * inv_z);
            // ∇I · ∂π/∂P'
            let a = gx * camera.fx * inv_z;
            let b = gy * camera.fy * inv_z;
            let c = -(a * x + b * y);
            let d_point = Vector3::new(a, b, c);
            // ∂P'/∂ξ = [I | −[P']×]; d_point · (−[P']×) = P' × d_point
            let d_rot = moved.cross(&d_point);
            jacobians.push(-Vector6::new(
                d_point.x, d_point.y, d_point.z, d_rot.x, d_rot.y, d_rot.z,
            ));
        }
        out.indices.push(idx);
        out.residuals.push(r);
        out.weights.push(w);
        out.energy += w * r * r;
    }
    Evaluation {
        residuals: out,
        jacobians,
    }
}

/// Residuals `r_p = I_kf(p) − I_frame(warp(p, μ_p, δ))` with weights
/// `(2σ_I² + (∂r_p/∂μ_p)² σ_p²)⁻¹`.
pub fn photometric_residual(
    kf: &KeyFrame,
    frame: &GrayImage,
    twist: &Twist,
    camera: &CameraIntrinsics,
    cfg: &FrontendConfig,
) -> Result<Residuals, VisionError> {
    let motion = SE3Transform::exp(twist);
    let eval = evaluate(kf, frame, &motion, camera, cfg.image_noise, false);
    if eval.residuals.indices.is_empty() {
        return Err(VisionError::NoOverlap);
    }
    Ok(eval.residuals)
}

fn overlap_ok(in_view: usize, selected: usize) -> bool {
    in_view > 0 && in_view as f64 >= MIN_OVERLAP_FRACTION * selected as f64
}

/// Weighted Levenberg-Marquardt minimization of the photometric energy over
/// the keyframe-to-frame motion, starting from `initial`.
pub fn track_frame(
    kf: &KeyFrame,
    frame: &GrayImage,
    initial: &Twist,
    camera: &CameraIntrinsics,
    cfg: &FrontendConfig,
) -> Result<TrackingOutcome, VisionError> {
    let selected = kf.pixels.len();
    let mut motion = SE3Transform::exp(initial);
    let mut current = evaluate(kf, frame, &motion, camera, cfg.image_noise, true);
    let in_view = current.residuals.indices.len();
    if !overlap_ok(in_view, selected) {
        return Err(VisionError::TrackingLost { in_view, selected });
    }
    let initial_energy = current.residuals.energy;
    let mut energies = vec![initial_energy];
    let mut lambda = cfg.lm_init_lambda;
    let mut iterations = 0;
    let mut accepted_steps = 0;

    let mut normal = normal_equations(&current);
    while iterations < cfg.lm_max_iters {
        iterations += 1;
        let (hessian, gradient) = &normal;
        let mut damped = *hessian;
        for i in 0..6 {
            damped[(i, i)] += lambda * hessian[(i, i)].max(1e-12);
        }
        let Some(chol) = damped.cholesky() else {
            lambda *= 10.0;
            if lambda > MAX_LAMBDA {
                break;
            }
            continue;
        };
        let step = -chol.solve(gradient);
        if step.norm() < cfg.convergence_tol {
            break;
        }
        let candidate = SE3Transform::exp(&Twist(step)).compose(&motion);
        let trial = evaluate(kf, frame, &candidate, camera, cfg.image_noise, true);
        let trial_in_view = trial.residuals.indices.len();
        if overlap_ok(trial_in_view, selected) && trial.residuals.energy < current.residuals.energy {
            motion = candidate;
            current = trial;
            normal = normal_equations(&current);
            energies.push(current.residuals.energy);
            accepted_steps += 1;
            lambda /= 10.0;
        } else {
            lambda *= 10.0;
            if lambda > MAX_LAMBDA {
                break;
            }
        }
    }

    let twist = if accepted_steps == 0 {
        *initial
    } else {
        motion.log()?
    };
    Ok(TrackingOutcome {
        twist,
        transform: motion,
        initial_energy,
        final_energy: current.residuals.energy,
        energies,
        iterations,
        accepted_steps,
    })
}

fn normal_equations(eval: &Evaluation) -> (Matrix6<f64>, Vector6<f64>) {
    let mut h = Matrix6::zeros();
    let mut g = Vector6::zeros();
    for ((j, &r), &w) in eval
        .jacobians
        .iter()
        .zip(&eval.residuals.residuals)
        .zip(&eval.residuals.weights)
    {
        h += j * j.transpose() * w;
        g += j * (w * r);
    }
    (h, g)
}

/// Localization stage: tracks frames against the newest keyframe, fuses depth
/// observations into it and starts new keyframes as the camera travels.
#[derive(Debug, Clone)]
pub struct VisualOdometry {
    chain: KeyframeChain,
    camera: CameraIntrinsics,
    cfg: FrontendConfig,
    /// Motion from the newest keyframe to the latest tracked frame.
    current: Twist,
    frame_index: usize,
}

impl VisualOdometry {
    pub fn new(first: KeyFrame, camera: CameraIntrinsics, cfg: FrontendConfig) -> Self {
        VisualOdometry {
            chain: KeyframeChain::new(first),
            camera,
            cfg,
            current: Twist::zero(),
            frame_index: 0,
        }
    }

    pub fn frames_processed(&self) -> usize {
        self.frame_index
    }

    pub fn chain(&self) -> &KeyframeChain {
        &self.chain
    }

    /// Motion `T_mn` from the newest keyframe to the latest frame.
    pub fn current_motion(&self) -> SE3Transform {
        SE3Transform::exp(&self.current)
    }

    /// Pose of the latest frame in the world frame.
    pub fn world_pose(&self) -> SE3Transform {
        let newest = self.chain.newest().expect("chain is never empty");
        newest.world_pose.compose(&self.current_motion().inverse())
    }

    pub fn process_frame(
        &mut self,
        frame: &GrayImage,
        observer: &mut dyn DepthObserver,
    ) -> Result<TrackingOutcome, VisionError> {
        self.frame_index += 1;
        let kf = self.chain.newest().ok_or(VisionError::EmptyChain)?;
        let outcome = track_frame(kf, frame, &self.current, &self.camera, &self.cfg)?;
        self.current = outcome.twist;
        let kf_index = self.chain.len() - 1;
        if let Some(kf) = self.chain.newest_mut() {
            kf.fuse_observations(kf_index, observer)?;
        }
        if advance_keyframe(&mut self.chain, &self.current, frame, &self.cfg)? {
            self.current = Twist::zero();
            // Observe the new keyframe's depths before anything is tracked
            // against its unit prior.
            let kf_index = self.chain.len() - 1;
            if let Some(kf) = self.chain.newest_mut() {
                kf.fuse_observations(kf_index, observer)?;
            }
        }
        Ok(outcome)
    }
}
