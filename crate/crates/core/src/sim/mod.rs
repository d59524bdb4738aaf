//! Closed-loop kinematic simulation, scale calibration, error metrics and
//! synthetic data for the rest of the stack.

mod episode;
mod maps;
mod metrics;
mod scene;
mod world;

pub use episode::{run_episode, run_on_path, Episode, EpisodeConfig, EpisodeLog, EpisodeRecord, EPISODE_CSV_HEADER};
pub use maps::{
    corridor_map, room_cloud, room_map, warehouse_layout, warehouse_scenario, CellRect, RoomLayout,
    WarehouseScenario, SYNTHETIC_THRESHOLD,
};
pub use metrics::{calibrate_scale, read_calibration_pairs, rmse, rmse_of, RmseTriple, ScaleCalibration};
pub use scene::{generate_synthetic_scene, GroundTruthDepth, SceneSpec, SolidTexture, SyntheticScene};
pub use world::{step_world, NoiseModel, SimWorld};

use crate::control::ControlError;
use crate::estimation::EstimationError;
use crate::planner::PlanError;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error("tick budget exhausted after {} ticks", .0.records.len())]
    Timeout(Box<EpisodeLog>),
    #[error("episode log is empty")]
    EmptyLog,
    #[error("calibration: {0}")]
    Calibration(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
