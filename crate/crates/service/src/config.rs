//! Service settings. The sim parameters come from the same TOML file the CLI
//! reads; service-only knobs live in a `[service]` table.

use std::path::{Path, PathBuf};
use std::time::Duration;

use omninav::mapping::OccupancyGridMap;
use omninav::sim::{corridor_map, warehouse_scenario};
use omninav::{GridCell, RunConfig};
use serde::{Deserialize, Serialize};

pub const BIND_ENV: &str = "OMNINAV_BIND";
pub const CONFIG_ENV: &str = "OMNINAV_CONFIG";
pub const DEFAULT_BIND: &str = "127.0.0.1:8080";

#[derive(Debug, thiserror::Error)]
pub enum SettingsError {
    #[error(transparent)]
    Config(#[from] omninav::config::ConfigError),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
    #[error("loading map {path}: {msg}")]
    Map { path: PathBuf, msg: String },
    #[error("a map file needs an explicit `start` cell")]
    MissingStart,
    #[error("start cell {0} is not reachable on the map")]
    BadStart(GridCell),
    #[error("invalid service setting: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MapSource {
    Warehouse { seed: u64 },
    Corridor { length: usize, cell: f64 },
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    /// Control loop wake-ups per wall-clock second.
    pub tick_hz: f64,
    /// Simulation ticks run per wake-up; above 1 the loop runs faster than
    /// real time.
    pub ticks_per_wakeup: usize,
    /// Idle interval after which a stream repeats the latest state.
    pub heartbeat_ms: u64,
    pub map: MapSource,
    /// Initial robot cell `[h, v]`.
    pub start: Option<[i64; 2]>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            tick_hz: 60.0,
            ticks_per_wakeup: 1,
            heartbeat_ms: 500,
            map: MapSource::Warehouse { seed: 1 },
            start: None,
        }
    }
}

impl ServiceConfig {
    pub fn tick_period(&self) -> Duration {
        Duration::from_secs_f64(1.0 / self.tick_hz)
    }

    pub fn heartbeat(&self) -> Duration {
        Duration::from_millis(self.heartbeat_ms)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    pub run: RunConfig,
    pub service: ServiceConfig,
}

#[derive(Deserialize, Default)]
#[serde(default)]
struct ServiceTable {
    service: ServiceConfig,
}

impl Settings {
    pub fn from_toml(text: &str) -> Result<Self, SettingsError> {
        let run = RunConfig::from_toml(text)?;
        let ServiceTable { service } = toml::from_str(text)?;
        let s = Settings { run, service };
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SettingsError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| SettingsError::Map {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        Self::from_toml(&text)
    }

    /// Reads the file named by `OMNINAV_CONFIG`, or defaults when unset.
    pub fn from_env() -> Result<Self, SettingsError> {
        match std::env::var_os(CONFIG_ENV) {
            Some(p) => Self::load(p),
            None => Ok(Settings::default()),
        }
    }

    pub fn validate(&self) -> Result<(), SettingsError> {
        let s = &self.service;
        if !(s.tick_hz > 0.0 && s.tick_hz.is_finite()) || s.ticks_per_wakeup == 0 || s.heartbeat_ms == 0 {
            return Err(SettingsError::Invalid(
                "tick_hz, ticks_per_wakeup and heartbeat_ms must be positive".into(),
            ));
        }
        self.run
            .episode
            .validate()
            .map_err(|e| SettingsError::Invalid(e.to_string()))
    }

    /// The session map and the robot's starting cell.
    pub fn build_map(&self) -> Result<(OccupancyGridMap, GridCell), SettingsError> {
        let explicit = self.service.start.map(|[h, v]| GridCell::new(h, v));
        let (map, default_start) = match &self.service.map {
            MapSource::Warehouse { seed } => {
                let s = warehouse_scenario(*seed);
                (s.map, Some(s.start))
            }
            MapSource::Corridor { length, cell } => (corridor_map(*length, *cell, 0), Some(GridCell::new(0, 0))),
            MapSource::File { path } => {
                let file = std::fs::File::open(path).map_err(|e| SettingsError::Map {
                    path: path.clone(),
                    msg: e.to_string(),
                })?;
                let map = OccupancyGridMap::read_text(std::io::BufReader::new(file)).map_err(|e| SettingsError::Map {
                    path: path.clone(),
                    msg: e.to_string(),
                })?;
                (map, None)
            }
        };
        let start = explicit.or(default_start).ok_or(SettingsError::MissingStart)?;
        if !map.window(self.run.episode.inflation).is_free(start) {
            return Err(SettingsError::BadStart(start));
        }
        Ok((map, start))
    }
}

/// Bind address from `OMNINAV_BIND`, falling back to localhost:8080.
pub fn bind_addr_from_env() -> String {
    std::env::var(BIND_ENV).unwrap_or_else(|_| DEFAULT_BIND.to_string())
}
