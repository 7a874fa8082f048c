//! Run configuration. Relative paths resolve against the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::areas::DEFAULT_D_MAX;
use crate::llm::{BackendConfig, BackendKind};
use crate::path::DEFAULT_CELL;
use crate::placement::AnnealSchedule;
use crate::views::ViewConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("config {path} is invalid JSON: {source}")]
    Parse { path: String, source: serde_json::Error },
    #[error("config field {field}: {reason}")]
    Invalid { field: &'static str, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub views: u64,
    pub placement: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds { views: 7, placement: 11 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ActivityRequest {
    pub character_count: Option<usize>,
    pub roles: Vec<String>,
    pub keyframe_count: usize,
}

impl Default for ActivityRequest {
    fn default() -> Self {
        ActivityRequest {
            character_count: None,
            roles: Vec::new(),
            keyframe_count: 3,
        }
    }
}

fn default_kpq() -> usize {
    2
}

fn default_d_max() -> f64 {
    DEFAULT_D_MAX
}

fn default_cell() -> f64 {
    DEFAULT_CELL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub scene: PathBuf,
    pub backend: BackendConfig,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default = "default_d_max")]
    pub d_max: f64,
    #[serde(default)]
    pub views: ViewConfig,
    #[serde(default)]
    pub anneal: AnnealSchedule,
    #[serde(default = "default_kpq")]
    pub keyframes_per_query: usize,
    #[serde(default)]
    pub activity: ActivityRequest,
    /// Verb table replacing the built-in one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verbs: Option<PathBuf>,
    /// Ask the backend once per verb missing from the table.
    #[serde(default)]
    pub resolve_unknown_verbs: bool,
    #[serde(default = "default_cell")]
    pub grid_cell: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn rebase(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl RunConfig {
    pub fn new(scene: impl Into<PathBuf>, backend: BackendConfig) -> Self {
        RunConfig {
            scene: scene.into(),
            backend,
            seeds: Seeds::default(),
            d_max: DEFAULT_D_MAX,
            views: ViewConfig::default(),
            anneal: AnnealSchedule::default(),
            keyframes_per_query: default_kpq(),
            activity: ActivityRequest::default(),
            verbs: None,
            resolve_unknown_verbs: false,
            grid_cell: DEFAULT_CELL,
            output_dir: None,
        }
    }

    pub fn from_json_str(text: &str, base: &Path) -> Result<RunConfig, ConfigError> {
        let mut cfg: RunConfig = serde_json::from_str(text).map_err(|source| ConfigError::Parse {
            path: base.display().to_string(),
            source,
        })?;
        rebase(base, &mut cfg.scene);
        if let Some(p) = cfg.backend.script_path.as_mut() {
            rebase(base, p);
        }
        if let Some(p) = cfg.verbs.as_mut() {
            rebase(base, p);
        }
        if let Some(p) = cfg.output_dir.as_mut() {
            rebase(base, p);
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<RunConfig, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        RunConfig::from_json_str(&text, base).map_err(|e| match e {
            ConfigError::Parse { source, .. } => ConfigError::Parse {
                path: path.display().to_string(),
                source,
            },
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |field, reason: String| Err(ConfigError::Invalid { field, reason });
        if !self.scene.is_file() {
            return invalid("scene", format!("{} does not exist", self.scene.display()));
        }
        if let Err(e) = self.backend.validate() {
            return invalid("backend", e.to_string());
        }
        if self.backend.kind == BackendKind::Mock {
            let p = self.backend.script_path.as_ref().expect("validated");
            if !p.is_file() {
                return invalid("backend.script_path", format!("{} does not exist", p.display()));
            }
        }
        if let Some(v) = &self.verbs {
            if !v.is_file() {
                return invalid("verbs", format!("{} does not exist", v.display()));
            }
        }
        if !(self.d_max > 0.0) {
            return invalid("d_max", format!("must be positive, got {}", self.d_max));
        }
        if !(self.grid_cell > 0.0) {
            return invalid("grid_cell", format!("must be positive, got {}", self.grid_cell));
        }
        if self.keyframes_per_query == 0 {
            return invalid("keyframes_per_query", "must be at least 1".into());
        }
        if self.activity.keyframe_count == 0 {
            return invalid("activity.keyframe_count", "must be at least 1".into());
        }
        if self.views.candidates == 0 {
            return invalid("views.candidates", "must be at least 1".into());
        }
        let f = self.views.filter;
        for (name, v) in [("min_area_fraction", f.min_area_fraction), ("max_out_of_view", f.max_out_of_view), ("max_occluded", f.max_occluded)] {
            if !(0.0..=1.0).contains(&v) {
                return invalid("views.filter", format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if !(f.max_distance > 0.0) {
            return invalid("views.filter", format!("max_distance must be positive, got {}", f.max_distance));
        }
        if let Err(e) = self.anneal.validate() {
            return invalid("anneal", e.to_string());
        }
        Ok(())
    }
}
