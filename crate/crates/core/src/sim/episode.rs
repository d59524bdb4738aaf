use std::io::{self, BufRead, Write};

use nalgebra::{Matrix6, Vector6};
use serde::{Deserialize, Serialize};

use super::{NoiseModel, SimError, SimWorld};
use crate::control::{grid_center, ControllerConfig, PathTracker, Phase};
use crate::estimation::{FilterState, KalmanFilter, Measurement, NoiseConfig};
use crate::kinematics::{BodyVelocity, RobotPose};
use crate::mapping::{GridCell, OccupancyGridMap};
use crate::planner::{astar_search, OpenSetKind, PlannedPath};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeConfig {
    pub dt: f64,
    /// Encoder samples per tick (1000 Hz against a 60 Hz camera).
    pub substeps: usize,
    pub wheel_radius: f64,
    pub noise: NoiseModel,
    /// Acceleration std-devs of the filter's motion model.
    pub accel_sigma: [f64; 3],
    /// Replaces the arrival radius and gains derived from the cell size.
    pub controller: Option<ControllerConfig>,
    /// Obstacle inflation for planning, camera units.
    pub inflation: f64,
    pub tick_budget: usize,
    pub seed: u64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            dt: 1.0 / 60.0,
            substeps: 17,
            wheel_radius: 0.1,
            noise: NoiseModel::default(),
            accel_sigma: [1.0, 1.0, 10.0],
            controller: None,
            inflation: 0.0,
            tick_budget: 20_000,
            seed: 0,
        }
    }
}

impl EpisodeConfig {
    pub fn noise_free() -> Self {
        EpisodeConfig {
            noise: NoiseModel::OFF,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.dt > 0.0) || self.substeps == 0 || !(self.wheel_radius > 0.0) {
            return Err(SimError::InvalidConfig("dt, substeps and wheel_radius must be positive".into()));
        }
        if !self.noise.is_valid() {
            return Err(SimError::InvalidConfig("noise std-devs must be finite and non-negative".into()));
        }
        if self.controller.is_some_and(|c| !c.is_valid()) {
            return Err(SimError::InvalidConfig("controller gains out of range".into()));
        }
        Ok(())
    }

    pub fn controller_for(&self, map: &OccupancyGridMap) -> ControllerConfig {
        self.controller
            .unwrap_or_else(|| ControllerConfig::for_cells(map.cell_h, map.cell_v))
    }

    /// Filter noise matched to the simulated sensors, floored so the
    /// innovation stays invertible with noise off.
    pub fn filter_noise(&self, world: &SimWorld) -> NoiseConfig {
        let [svx, svz, sw] = world.odometry_sigmas();
        let floor = |s: f64| s.max(1e-6);
        let n = &self.noise;
        NoiseConfig {
            k1: self.accel_sigma[0],
            k2: self.accel_sigma[1],
            k3: self.accel_sigma[2],
            dt: self.dt,
            ..NoiseConfig::default()
        }
        .with_measurement_sigmas([
            floor(n.pose),
            floor(svx.max(svz)),
            floor(n.pose),
            floor(svx.max(svz)),
            floor(n.theta),
            floor(sw),
        ])
    }
}

/// One control tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeRecord {
    pub t: f64,
    pub phase: Phase,
    pub waypoint: usize,
    /// Expected position on the planned path.
    pub x_e: f64,
    pub z_e: f64,
    /// True position and heading.
    pub x_r: f64,
    pub z_r: f64,
    pub theta: f64,
    pub cmd: BodyVelocity,
    /// Filter estimate of `(x, z, θ)`.
    pub est: [f64; 3],
}

pub const EPISODE_CSV_HEADER: &str =
    "t,phase,waypoint,x_e,z_e,x_r,z_r,theta,cmd_vx,cmd_vz,cmd_w,est_x,est_z,est_theta";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodeLog {
    pub path: Vec<GridCell>,
    pub records: Vec<EpisodeRecord>,
}

impl EpisodeLog {
    pub fn final_phase(&self) -> Option<Phase> {
        self.records.last().map(|r| r.phase)
    }

    pub fn is_done(&self) -> bool {
        self.final_phase() == Some(Phase::Done)
    }

    /// Floats are written in shortest round-trip form, so reading the CSV
    /// back gives bit-identical values.
    pub fn write_csv(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "{EPISODE_CSV_HEADER}")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.t,
                r.phase.as_str(),
                r.waypoint,
                r.x_e,
                r.z_e,
                r.x_r,
                r.z_r,
                r.theta,
                r.cmd.vx,
                r.cmd.vz,
                r.cmd.omega,
                r.est[0],
                r.est[1],
                r.est[2]
            )?;
        }
        Ok(())
    }

    /// Reads records written by [`EpisodeLog::write_csv`]. Only the first
    /// eight columns are required.
    pub fn read_csv(reader: impl BufRead) -> Result<Self, SimError> {
        let mut lines = reader.lines().enumerate();
        let header = match lines.next() {
            Some((_, l)) => l?,
            None => return Err(SimError::EmptyLog),
        };
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        let want = ["t", "phase", "waypoint", "x_e", "z_e", "x_r", "z_r", "theta"];
        if cols.len() < want.len() || cols[..want.len()] != want {
            return Err(SimError::Parse {
                line: 1,
                msg: format!("unexpected header {header:?}"),
            });
        }
        let mut records = Vec::new();
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let err = |msg: String| SimError::Parse { line: i + 1, msg };
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != cols.len() {
                return Err(err(format!("expected {} fields, got {}", cols.len(), f.len())));
            }
            let num = |k: usize| f[k].parse::<f64>().map_err(|e| err(format!("column {}: {e}", cols[k])));
            let opt = |k: usize| if k < f.len() { num(k) } else { Ok(0.0) };
            records.push(EpisodeRecord {
                t: num(0)?,
                phase: f[1].parse().map_err(err)?,
                waypoint: f[2].parse().map_err(|e| err(format!("waypoint: {e}")))?,
                x_e: num(3)?,
                z_e: num(4)?,
                x_r: num(5)?,
                z_r: num(6)?,
                theta: num(7)?,
                cmd: BodyVelocity::new(opt(8)?, opt(9)?, opt(10)?),
                est: [opt(11)?, opt(12)?, opt(13)?],
            });
        }
        Ok(EpisodeLog {
            path: Vec::new(),
            records,
        })
    }
}

/// Plans from `start` to `goal` on `map` and runs the closed loop at the
/// camera rate until the controller reports `Done` or the budget runs out.
pub fn run_episode(
    map: &OccupancyGridMap,
    start: GridCell,
    goal: GridCell,
    cfg: &EpisodeConfig,
) -> Result<EpisodeLog, SimError> {
    cfg.validate()?;
    let window = map.window(cfg.inflation);
    let path = astar_search(start, goal, &window, OpenSetKind::BinaryHeap)?;
    let [x0, z0] = grid_center(start, map.cell_h, map.cell_v);
    let mut world = SimWorld::new(RobotPose::new(x0, z0, 0.0), map.clone(), cfg.dt, cfg.noise, cfg.seed);
    world.substeps = cfg.substeps;
    world.wheel_radius = cfg.wheel_radius;
    run_on_path(&mut world, path, cfg)
}

/// Tracks an already planned path from the world's current pose.
pub fn run_on_path(world: &mut SimWorld, path: PlannedPath, cfg: &EpisodeConfig) -> Result<EpisodeLog, SimError> {
    let mut episode = Episode::new(world, path, cfg)?;
    for _ in 0..cfg.tick_budget {
        episode.tick(world)?;
        if episode.is_done() {
            return Ok(episode.into_log());
        }
    }
    Err(SimError::Timeout(Box::new(episode.into_log())))
}

/// Tick-by-tick closed loop: measure, filter, control, then move the world.
#[derive(Debug, Clone)]
pub struct Episode {
    tracker: PathTracker,
    filter: KalmanFilter,
    log: EpisodeLog,
    odometry: Option<BodyVelocity>,
    tick: usize,
    dt: f64,
}

impl Episode {
    pub fn new(world: &SimWorld, path: PlannedPath, cfg: &EpisodeConfig) -> Result<Self, SimError> {
        let noise = cfg.filter_noise(world);
        let initial = FilterState::new(
            Vector6::new(world.pose.x, 0.0, world.pose.z, 0.0, world.pose.theta, 0.0),
            Matrix6::from_diagonal(&noise.measurement_covariance().diagonal()),
        );
        let filter = KalmanFilter::new(initial, &noise)?;
        let cells = path.cells.clone();
        let tracker = PathTracker::new(path, world.map.cell_h, world.map.cell_v, cfg.controller_for(&world.map))?;
        Ok(Episode {
            tracker,
            filter,
            log: EpisodeLog {
                path: cells,
                records: Vec::new(),
            },
            odometry: None,
            tick: 0,
            dt: cfg.dt,
        })
    }

    pub fn tracker(&self) -> &PathTracker {
        &self.tracker
    }

    pub fn filter(&self) -> &KalmanFilter {
        &self.filter
    }

    pub fn log(&self) -> &EpisodeLog {
        &self.log
    }

    pub fn into_log(self) -> EpisodeLog {
        self.log
    }

    pub fn is_done(&self) -> bool {
        self.tracker.is_done()
    }

    pub fn estimate(&self) -> RobotPose {
        let s = self.filter.state();
        RobotPose::new(s.x(), s.z(), s.theta())
    }

    /// Runs one control period and returns the record it appended.
    pub fn tick(&mut self, world: &mut SimWorld) -> Result<EpisodeRecord, SimError> {
        let pose = world.measure_pose();
        let theta_hint = self.filter.state().theta();
        let velocity = self.odometry.map(|v| {
            let (dx, dz) = v.to_world(theta_hint);
            [dx, dz, v.omega]
        });
        let m = Measurement::from_parts(Some(pose), velocity);
        if self.tick == 0 {
            self.filter.update(&m)?;
        } else {
            self.filter.step(&m)?;
        }
        let est = self.estimate();
        let cmd = self.tracker.step(&est)?;
        let status = *self.tracker.status();
        let expected = self.tracker.expected_position(&world.pose);
        let record = EpisodeRecord {
            t: self.tick as f64 * self.dt,
            phase: status.phase,
            waypoint: status.waypoint_index,
            x_e: expected[0],
            z_e: expected[1],
            x_r: world.pose.x,
            z_r: world.pose.z,
            theta: world.pose.theta,
            cmd,
            est: [est.x, est.z, est.theta],
        };
        self.log.records.push(record);
        self.odometry = Some(world.step(&cmd));
        self.tick += 1;
        Ok(record)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{corridor_map, rmse};

    #[test]
    fn start_equals_goal_is_done_immediately() {
        let map = corridor_map(10, 0.02, 1);
        let log = run_episode(&map, GridCell::new(3, 0), GridCell::new(3, 0), &EpisodeConfig::noise_free()).unwrap();
        assert_eq!(log.records.len(), 1);
        assert!(log.is_done());
        let r = rmse(&log).unwrap();
        assert_eq!((r.x, r.z, r.track), (0.0, 0.0, 0.0));
    }

    #[test]
    fn noise_free_corridor_stays_close() {
        let map = corridor_map(10, 0.02, 1);
        let log = run_episode(&map, GridCell::new(0, 0), GridCell::new(9, 0), &EpisodeConfig::noise_free()).unwrap();
        assert!(log.is_done());
        assert_eq!(log.path.len(), 10);
        let r = rmse(&log).unwrap();
        assert!(r.track < 0.5 * 0.02, "{r:?}");
        // Waypoint index never decreases and timestamps increase.
        assert!(log.records.windows(2).all(|w| w[1].waypoint >= w[0].waypoint && w[1].t > w[0].t));
    }

    #[test]
    fn unreachable_goal_propagates() {
        let map = corridor_map(10, 0.02, 1);
        let err = run_episode(&map, GridCell::new(0, 0), GridCell::new(0, 1), &EpisodeConfig::default()).unwrap_err();
        assert!(matches!(err, SimError::Plan(_)));
    }

    #[test]
    fn tiny_budget_times_out_with_partial_log() {
        let map = corridor_map(10, 0.02, 1);
        let cfg = EpisodeConfig {
            tick_budget: 5,
            ..EpisodeConfig::noise_free()
        };
        match run_episode(&map, GridCell::new(0, 0), GridCell::new(9, 0), &cfg) {
            Err(SimError::Timeout(log)) => assert_eq!(log.records.len(), 5),
            other => panic!("expected timeout, got {other:?}"),
        }
    }

    #[test]
    fn same_seed_is_bit_identical_and_csv_round_trips() {
        let map = corridor_map(6, 0.02, 1);
        let cfg = EpisodeConfig {
            seed: 42,
            ..Default::default()
        };
        let a = run_episode(&map, GridCell::new(0, 0), GridCell::new(5, 0), &cfg).unwrap();
        let b = run_episode(&map, GridCell::new(0, 0), GridCell::new(5, 0), &cfg).unwrap();
        assert_eq!(a, b);
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        let back = EpisodeLog::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.records, a.records);
    }

    #[test]
    fn rejects_bad_config() {
        let map = corridor_map(4, 0.02, 1);
        let cfg = EpisodeConfig {
            dt: 0.0,
            ..Default::default()
        };
        assert!(matches!(
            run_episode(&map, GridCell::new(0, 0), GridCell::new(1, 0), &cfg),
            Err(SimError::InvalidConfig(_))
        ));
    }
}
