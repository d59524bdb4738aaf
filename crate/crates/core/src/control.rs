//! Waypoint tracking over grid-cell centres.
//!
//! `Far` drives at constant speed toward the current centre while turning
//! toward it. Entering the arrival circle switches to `Aligning`, which
//! rotates in place toward the next centre. The last centre ends in `Done`.

use serde::{Deserialize, Serialize};

use crate::geometry::wrap_angle;
use crate::kinematics::{BodyVelocity, RobotPose};
use crate::mapping::GridCell;
use crate::planner::PlannedPath;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum ControlError {
    #[error("no path to track")]
    NoPath,
    #[error("pose estimate is not finite")]
    InvalidEstimate,
    #[error("waypoint index {index} out of range for a path of {len} cells")]
    BadStatus { index: usize, len: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    /// Translational speed in `Far`.
    pub k_p1: f64,
    /// Heading gain, 1/s.
    pub k_p2: f64,
    /// Arrival radius.
    pub r: f64,
    /// Heading tolerance when aligning, rad.
    pub beta: f64,
}

impl ControllerConfig {
    /// Default gains with the arrival radius set to half the smaller cell side.
    pub fn for_cells(cell_h: f64, cell_v: f64) -> Self {
        ControllerConfig {
            k_p1: 0.05,
            k_p2: 1.5,
            r: 0.5 * cell_h.min(cell_v),
            beta: 0.1,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.k_p1 > 0.0
            && self.k_p2 > 0.0
            && self.r > 0.0
            && self.beta > 0.0
            && self.beta < std::f64::consts::FRAC_PI_2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Phase {
    Far,
    Aligning,
    Done,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Far => "FAR",
            Phase::Aligning => "ALIGNING",
            Phase::Done => "DONE",
        }
    }
}

impl std::str::FromStr for Phase {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "FAR" => Ok(Phase::Far),
            "ALIGNING" => Ok(Phase::Aligning),
            "DONE" => Ok(Phase::Done),
            other => Err(format!("unknown phase {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackingStatus {
    pub phase: Phase,
    pub waypoint_index: usize,
    /// `(e_x, e_z, e_θ)`: offset to the current centre and heading error.
    pub error: [f64; 3],
}

impl Default for TrackingStatus {
    fn default() -> Self {
        TrackingStatus {
            phase: Phase::Far,
            waypoint_index: 0,
            error: [0.0; 3],
        }
    }
}

/// World-plane centre `((h + ½)·H, (v + ½)·V)` of a cell.
pub fn grid_center(cell: GridCell, cell_h: f64, cell_v: f64) -> [f64; 2] {
    [(cell.h as f64 + 0.5) * cell_h, (cell.v as f64 + 0.5) * cell_v]
}

/// Inclusive at `r`.
pub fn waypoint_reached(pose: &RobotPose, center: [f64; 2], r: f64) -> bool {
    pose.distance_to(center[0], center[1]) <= r
}

/// Heading that points from `from` to `to`; zero along +z.
pub fn bearing(from: [f64; 2], to: [f64; 2]) -> f64 {
    (to[0] - from[0]).atan2(to[1] - from[1])
}

pub fn control_step(
    pose: &RobotPose,
    path: &PlannedPath,
    cell_size: (f64, f64),
    status: &TrackingStatus,
    cfg: &ControllerConfig,
) -> Result<(BodyVelocity, TrackingStatus), ControlError> {
    let centers: Vec<[f64; 2]> = path
        .cells
        .iter()
        .map(|&c| grid_center(c, cell_size.0, cell_size.1))
        .collect();
    control_step_centers(pose, &centers, status, cfg)
}

/// [`control_step`] over precomputed centres.
pub fn control_step_centers(
    pose: &RobotPose,
    centers: &[[f64; 2]],
    status: &TrackingStatus,
    cfg: &ControllerConfig,
) -> Result<(BodyVelocity, TrackingStatus), ControlError> {
    if centers.is_empty() {
        return Err(ControlError::NoPath);
    }
    if !pose.is_finite() {
        return Err(ControlError::InvalidEstimate);
    }
    if status.waypoint_index >= centers.len() {
        return Err(ControlError::BadStatus {
            index: status.waypoint_index,
            len: centers.len(),
        });
    }
    let here = [pose.x, pose.z];
    let mut s = *status;
    // Each pass either returns or moves forward through the phases, so the
    // loop is bounded by twice the path length.
    for _ in 0..=2 * centers.len() {
        let i = s.waypoint_index;
        let target = centers[i];
        let (ex, ez) = (target[0] - here[0], target[1] - here[1]);
        match s.phase {
            Phase::Done => {
                s.error = [ex, ez, 0.0];
                return Ok((BodyVelocity::ZERO, s));
            }
            Phase::Far => {
                if waypoint_reached(pose, target, cfg.r) {
                    s.phase = if i + 1 == centers.len() { Phase::Done } else { Phase::Aligning };
                    continue;
                }
                let e_theta = wrap_angle(bearing(here, target) - pose.theta);
                let dist = ex.hypot(ez);
                let (ux, uz) = (cfg.k_p1 * ex / dist, cfg.k_p1 * ez / dist);
                s.error = [ex, ez, e_theta];
                let cmd = BodyVelocity::from_world(ux, uz, cfg.k_p2 * e_theta, pose.theta);
                return Ok((cmd, s));
            }
            Phase::Aligning => {
                let e_theta = wrap_angle(bearing(here, centers[i + 1]) - pose.theta);
                if e_theta.abs() <= cfg.beta {
                    s.waypoint_index = i + 1;
                    s.phase = Phase::Far;
                    continue;
                }
                s.error = [ex, ez, e_theta];
                return Ok((BodyVelocity::new(0.0, 0.0, cfg.k_p2 * e_theta), s));
            }
        }
    }
    unreachable!("phase machine advanced past the end of the path")
}

/// Expected position: the robot's projection onto the segment between the
/// previous and current centres (or the current centre at the path start).
pub fn expected_position(pose: &RobotPose, centers: &[[f64; 2]], waypoint_index: usize) -> [f64; 2] {
    let b = centers[waypoint_index];
    if waypoint_index == 0 {
        return b;
    }
    let a = centers[waypoint_index - 1];
    let (dx, dz) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dz * dz;
    if len2 == 0.0 {
        return b;
    }
    let t = (((pose.x - a[0]) * dx + (pose.z - a[1]) * dz) / len2).clamp(0.0, 1.0);
    [a[0] + t * dx, a[1] + t * dz]
}

/// Owns a path and the controller state across ticks.
#[derive(Debug, Clone)]
pub struct PathTracker {
    path: PlannedPath,
    centers: Vec<[f64; 2]>,
    cfg: ControllerConfig,
    status: TrackingStatus,
}

impl PathTracker {
    pub fn new(path: PlannedPath, cell_h: f64, cell_v: f64, cfg: ControllerConfig) -> Result<Self, ControlError> {
        if path.cells.is_empty() {
            return Err(ControlError::NoPath);
        }
        let centers = path.cells.iter().map(|&c| grid_center(c, cell_h, cell_v)).collect();
        Ok(PathTracker {
            path,
            centers,
            cfg,
            status: TrackingStatus::default(),
        })
    }

    pub fn path(&self) -> &PlannedPath {
        &self.path
    }

    pub fn centers(&self) -> &[[f64; 2]] {
        &self.centers
    }

    pub fn status(&self) -> &TrackingStatus {
        &self.status
    }

    pub fn is_done(&self) -> bool {
        self.status.phase == Phase::Done
    }

    pub fn step(&mut self, pose: &RobotPose) -> Result<BodyVelocity, ControlError> {
        let (cmd, status) = control_step_centers(pose, &self.centers, &self.status, &self.cfg)?;
        self.status = status;
        Ok(cmd)
    }

    pub fn expected_position(&self, pose: &RobotPose) -> [f64; 2] {
        expected_position(pose, &self.centers, self.status.waypoint_index)
    }
}
