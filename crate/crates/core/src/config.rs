//! TOML run configuration shared by the CLI and the service.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::sim::{EpisodeConfig, ScaleCalibration};
use crate::vision::FrontendConfig;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MapConfig {
    pub cell_h: f64,
    pub cell_v: f64,
    /// Cells with more points than this are unreachable.
    pub threshold: u32,
}

impl Default for MapConfig {
    fn default() -> Self {
        MapConfig {
            cell_h: 0.02,
            cell_v: 0.02,
            threshold: 5,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub frontend: FrontendConfig,
    pub map: MapConfig,
    pub episode: EpisodeConfig,
    pub scale: ScaleCalibration,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn partial_sections_override_fields() {
        let cfg = RunConfig::from_toml(
            r#"
            [map]
            threshold = 9

            [episode]
            seed = 17
            noise = { pose = 0.0 }

            [scale]
            k_sh = 0.3
            k_sv = 0.25
            "#,
        )
        .unwrap();
        assert_eq!(cfg.map.threshold, 9);
        assert_eq!(cfg.map.cell_h, 0.02);
        assert_eq!(cfg.episode.seed, 17);
        assert_eq!(cfg.episode.noise.pose, 0.0);
        assert_eq!(cfg.episode.noise.theta, 0.01);
        assert_eq!(cfg.scale.k_sh, 0.3);
    }

    #[test]
    fn unknown_types_are_rejected() {
        assert!(RunConfig::from_toml("[map]\nthreshold = \"many\"").is_err());
    }
}
