//! Navigation stack for omni-wheeled warehouse robots driven by a single
//! camera: direct visual odometry, occupancy mapping, grid planning, state
//! estimation and waypoint tracking, plus a closed-loop simulator.

pub mod config;
pub mod control;
pub mod estimation;
pub mod geometry;
pub mod kinematics;
pub mod mapping;
pub mod planner;
pub mod sim;
pub mod vision;

pub use config::RunConfig;
pub use control::{ControllerConfig, Phase, TrackingStatus};
pub use estimation::{FilterState, KalmanFilter, NoiseConfig};
pub use geometry::{SE3Transform, Twist};
pub use kinematics::{BodyVelocity, RobotPose, WheelSpeeds};
pub use mapping::{GridCell, GridWindow, OccupancyGridMap};
pub use planner::{astar_search, dijkstra_search, OpenSetKind, PlannedPath};
pub use sim::{EpisodeConfig, EpisodeLog, ScaleCalibration};
pub use vision::{CameraIntrinsics, FrontendConfig, GrayImage};
