//! One simulated robot per session. [`SessionCore`] is the synchronous state
//! machine; [`SessionHandle`] runs it on a task, applies queued goals between
//! ticks and publishes snapshots on a watch channel.

use std::sync::Arc;
use std::time::Duration;

use nalgebra::{Matrix6, Vector6};
use omninav::control::grid_center;
use omninav::estimation::FilterState;
use omninav::kinematics::RobotPose;
use omninav::mapping::{GridWindow, OccupancyGridMap};
use omninav::planner::{astar_search, OpenSetKind, PlanError};
use omninav::sim::{rmse, rmse_of, Episode, RmseTriple, SimWorld};
use omninav::{EpisodeConfig, GridCell, Phase, PlannedPath, ScaleCalibration};
use serde::{Deserialize, Serialize};
use tokio::sync::{mpsc, oneshot, watch};
use tokio::task::JoinHandle;
use tokio::time::MissedTickBehavior;

use crate::document::{encode, MapDocument};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RunState {
    Idle,
    Tracking,
    Done,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// A control tick while tracking.
    State,
    /// Repeat of the latest state, sent while nothing changes.
    Heartbeat,
    /// The goal was reached; carries the final RMSE.
    Done,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmseReport {
    /// Camera units.
    pub camera: RmseTriple,
    /// Metres, after the per-axis scale conversion.
    pub metric: RmseTriple,
}

/// One message on the state stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateEvent {
    pub kind: EventKind,
    /// Session clock, seconds of simulated time.
    pub t: f64,
    pub run_state: RunState,
    pub x_r: f64,
    pub z_r: f64,
    pub theta: f64,
    pub phase: Option<Phase>,
    pub waypoint_index: Option<usize>,
    /// Expected position on the current path.
    pub expected: Option<[f64; 2]>,
    pub map_version: u64,
    pub rmse: Option<RmseReport>,
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSummary {
    pub start: [i64; 2],
    pub goal: [i64; 2],
    pub path: Vec<[i64; 2]>,
    pub cost: usize,
    pub run_state: RunState,
}

/// Full session view for `GET /session/{id}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSnapshot {
    pub id: u64,
    pub map_version: u64,
    pub run_state: RunState,
    pub path: Option<Vec<[i64; 2]>>,
    pub filter_mean: [f64; 6],
    /// Row-major 6 × 6.
    pub filter_covariance: Vec<f64>,
    pub event: StateEvent,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GoalError {
    #[error("cell {0} is outside the map")]
    OutsideMap(GridCell),
    #[error("cell {0} is unreachable")]
    Unreachable(GridCell),
    #[error("robot estimate ({x:.4}, {z:.4}) is not on a reachable cell")]
    NotLocalized { x: f64, z: f64 },
    #[error("planner: {0}")]
    Plan(#[from] PlanError),
    #[error("session closed")]
    Closed,
}

impl GoalError {
    pub fn code(&self) -> &'static str {
        match self {
            GoalError::OutsideMap(_) => "outside_map",
            GoalError::Unreachable(_) => "unreachable_goal",
            GoalError::NotLocalized { .. } => "not_localized",
            GoalError::Plan(_) => "no_path",
            GoalError::Closed => "session_closed",
        }
    }
}

fn cell_pair(c: GridCell) -> [i64; 2] {
    [c.h, c.v]
}

pub struct SessionCore {
    id: u64,
    world: SimWorld,
    window: GridWindow,
    cfg: EpisodeConfig,
    scale: ScaleCalibration,
    map_version: u64,
    run_state: RunState,
    episode: Option<Episode>,
    path: Option<PlannedPath>,
    filter: FilterState,
    ticks: u64,
    expected: Option<[f64; 2]>,
    rmse: Option<RmseReport>,
    message: Option<String>,
}

impl SessionCore {
    pub fn new(id: u64, map: OccupancyGridMap, start: GridCell, cfg: EpisodeConfig, scale: ScaleCalibration) -> Self {
        let [x, z] = grid_center(start, map.cell_h, map.cell_v);
        let window = map.window(cfg.inflation);
        let mut world = SimWorld::new(RobotPose::new(x, z, 0.0), map, cfg.dt, cfg.noise, cfg.seed.wrapping_add(id));
        world.substeps = cfg.substeps;
        world.wheel_radius = cfg.wheel_radius;
        let filter = FilterState::new(
            Vector6::new(x, 0.0, z, 0.0, 0.0, 0.0),
            Matrix6::from_diagonal(&cfg.filter_noise(&world).measurement_covariance().diagonal()),
        );
        SessionCore {
            id,
            world,
            window,
            cfg,
            scale,
            map_version: 1,
            run_state: RunState::Idle,
            episode: None,
            path: None,
            filter,
            ticks: 0,
            expected: None,
            rmse: None,
            message: None,
        }
    }

    pub fn run_state(&self) -> RunState {
        self.run_state
    }

    pub fn map_document(&self) -> MapDocument {
        encode(self.map_version, self.world.map.cell_h, self.world.map.cell_v, &self.window)
    }

    fn estimate(&self) -> RobotPose {
        RobotPose::new(self.filter.x(), self.filter.z(), self.filter.theta())
    }

    /// Plans from the robot's estimated cell and starts tracking. On error
    /// nothing changes.
    pub fn set_goal(&mut self, goal: GridCell) -> Result<PlanSummary, GoalError> {
        if self.window.index(goal).is_none() {
            return Err(GoalError::OutsideMap(goal));
        }
        if !self.window.is_free(goal) {
            return Err(GoalError::Unreachable(goal));
        }
        let est = self.estimate();
        let start = self.world.map.cell_of(est.x, est.z);
        if !self.window.is_free(start) {
            return Err(GoalError::NotLocalized { x: est.x, z: est.z });
        }
        let path = astar_search(start, goal, &self.window, OpenSetKind::BinaryHeap)?;
        let summary_path = path.cells.iter().copied().map(cell_pair).collect();
        let cost = path.cost();
        if path.cells.len() == 1 {
            // Already there: no motion, the error is the offset from the centre.
            let center = grid_center(goal, self.world.map.cell_h, self.world.map.cell_v);
            let camera = rmse_of([([self.world.pose.x, self.world.pose.z], center)]).expect("one sample");
            self.finish(camera);
            self.message = None;
            self.expected = Some(center);
            self.episode = None;
        } else {
            let episode = Episode::new(&self.world, path.clone(), &self.cfg).map_err(|_| GoalError::NotLocalized {
                x: est.x,
                z: est.z,
            })?;
            self.expected = Some(episode.tracker().expected_position(&self.world.pose));
            self.episode = Some(episode);
            self.message = None;
            self.run_state = RunState::Tracking;
            self.rmse = None;
        }
        self.path = Some(path);
        Ok(PlanSummary {
            start: cell_pair(start),
            goal: cell_pair(goal),
            path: summary_path,
            cost,
            run_state: self.run_state,
        })
    }

    fn finish(&mut self, camera: RmseTriple) {
        self.rmse = Some(RmseReport {
            camera,
            metric: camera.to_metric(&self.scale),
        });
        self.run_state = RunState::Done;
    }

    fn fail(&mut self, msg: String) {
        self.run_state = RunState::Error;
        self.message = Some(msg);
        self.episode = None;
        self.path = None;
    }

    /// Runs up to `n` control ticks while tracking.
    pub fn advance(&mut self, n: usize) {
        for _ in 0..n {
            if self.run_state != RunState::Tracking {
                return;
            }
            let Some(episode) = self.episode.as_mut() else {
                return;
            };
            match episode.tick(&mut self.world) {
                Ok(rec) => {
                    self.ticks += 1;
                    self.expected = Some([rec.x_e, rec.z_e]);
                    self.filter = *episode.filter().state();
                }
                Err(e) => {
                    self.fail(e.to_string());
                    return;
                }
            }
            if episode.is_done() {
                match rmse(episode.log()) {
                    Ok(camera) => self.finish(camera),
                    Err(e) => self.fail(e.to_string()),
                }
            } else if episode.log().records.len() >= self.cfg.tick_budget {
                self.fail(format!("tick budget of {} exhausted", self.cfg.tick_budget));
            }
        }
    }

    pub fn event(&self) -> StateEvent {
        let kind = match self.run_state {
            RunState::Idle => EventKind::Heartbeat,
            RunState::Tracking => EventKind::State,
            RunState::Done => EventKind::Done,
            RunState::Error => EventKind::Error,
        };
        let status = self.episode.as_ref().map(|e| *e.tracker().status());
        let (phase, waypoint_index) = match (self.run_state, status) {
            (RunState::Tracking | RunState::Done, Some(s)) => (Some(s.phase), Some(s.waypoint_index)),
            (RunState::Done, None) => (Some(Phase::Done), Some(0)),
            _ => (None, None),
        };
        StateEvent {
            kind,
            t: self.ticks as f64 * self.cfg.dt,
            run_state: self.run_state,
            x_r: self.world.pose.x,
            z_r: self.world.pose.z,
            theta: self.world.pose.theta,
            phase,
            waypoint_index,
            expected: self.expected,
            map_version: self.map_version,
            rmse: self.rmse,
            message: self.message.clone(),
        }
    }

    pub fn snapshot(&self) -> SessionSnapshot {
        SessionSnapshot {
            id: self.id,
            map_version: self.map_version,
            run_state: self.run_state,
            path: self
                .path
                .as_ref()
                .map(|p| p.cells.iter().copied().map(cell_pair).collect()),
            filter_mean: self.filter.mean.into(),
            filter_covariance: self.filter.covariance.transpose().as_slice().to_vec(),
            event: self.event(),
        }
    }
}

enum Command {
    Goal {
        cell: GridCell,
        reply: oneshot::Sender<Result<PlanSummary, GoalError>>,
    },
    Snapshot {
        reply: oneshot::Sender<SessionSnapshot>,
    },
}

#[derive(Debug, Clone, Copy)]
pub struct Timing {
    pub tick_period: Duration,
    pub ticks_per_wakeup: usize,
}

/// Client side of a running session. Dropping the last handle stops the
/// task, which closes every open stream.
#[derive(Debug)]
pub struct SessionHandle {
    commands: mpsc::Sender<Command>,
    events: watch::Receiver<StateEvent>,
    map_json: Arc<String>,
    task: JoinHandle<()>,
}

impl SessionHandle {
    pub fn spawn(core: SessionCore, timing: Timing) -> Self {
        let map_json = Arc::new(serde_json::to_string(&core.map_document()).expect("map document serializes"));
        let (commands, rx) = mpsc::channel(32);
        let (tx, events) = watch::channel(core.event());
        let task = tokio::spawn(run(core, rx, tx, timing));
        SessionHandle {
            commands,
            events,
            map_json,
            task,
        }
    }

    pub fn map_json(&self) -> Arc<String> {
        self.map_json.clone()
    }

    pub fn subscribe(&self) -> watch::Receiver<StateEvent> {
        self.events.clone()
    }

    pub async fn set_goal(&self, cell: GridCell) -> Result<PlanSummary, GoalError> {
        let (reply, rx) = oneshot::channel();
        self.commands
            .send(Command::Goal { cell, reply })
            .await
            .map_err(|_| GoalError::Closed)?;
        rx.await.map_err(|_| GoalError::Closed)?
    }

    pub async fn snapshot(&self) -> Option<SessionSnapshot> {
        let (reply, rx) = oneshot::channel();
        self.commands.send(Command::Snapshot { reply }).await.ok()?;
        rx.await.ok()
    }

    /// Stops the loop and waits for it to exit.
    pub async fn close(self) {
        drop(self.commands);
        let _ = self.task.await;
    }
}

async fn run(
    mut core: SessionCore,
    mut commands: mpsc::Receiver<Command>,
    events: watch::Sender<StateEvent>,
    timing: Timing,
) {
    let mut interval = tokio::time::interval(timing.tick_period);
    interval.set_missed_tick_behavior(MissedTickBehavior::Delay);
    loop {
        tokio::select! {
            cmd = commands.recv() => match cmd {
                None => break,
                Some(Command::Goal { cell, reply }) => {
                    let result = core.set_goal(cell);
                    if result.is_ok() {
                        events.send_replace(core.event());
                    }
                    let _ = reply.send(result);
                }
                Some(Command::Snapshot { reply }) => {
                    let _ = reply.send(core.snapshot());
                }
            },
            _ = interval.tick(), if core.run_state() == RunState::Tracking => {
                core.advance(timing.ticks_per_wakeup);
                events.send_replace(core.event());
            }
        }
    }
}
