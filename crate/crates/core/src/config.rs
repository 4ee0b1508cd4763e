//! TOML run configuration shared by every CLI command.
//!
//! ```toml
//! [window]
//! window_size_frames = 120
//! fps = 2.0
//! stride_frames = 120
//!
//! [tree]
//! max_gap_frames = 20
//!
//! [radio]
//! P0_mode = -60.0
//! ```
//!
//! Every section and key is optional; missing ones take their defaults.
//! Errors carry the line of the offending key.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::FilterConfig;
use crate::geom::Rect;
use crate::radio::PriorConfig;
use crate::search::{SearchConfig, TrackerConfig};
use crate::sim::SceneConfig;
use crate::tracklet::TrackletGenConfig;
use crate::tree::TreeConfig;
use crate::types::WindowConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindowSection {
    pub window_size_frames: usize,
    pub fps: f64,
    /// Frames between consecutive window starts.
    pub stride_frames: usize,
}

impl Default for WindowSection {
    fn default() -> Self {
        Self {
            window_size_frames: 120,
            fps: 2.0,
            stride_frames: 120,
        }
    }
}

impl WindowSection {
    pub fn window_config(&self) -> Result<WindowConfig<f64>> {
        WindowConfig::new(self.window_size_frames, self.fps)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub window: WindowSection,
    /// Tracker field of view; falls back to `scene.fov` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fov: Option<Rect<f64>>,
    pub tracklet: TrackletGenConfig<f64>,
    pub tree: TreeConfig<f64>,
    pub filter: FilterConfig<f64>,
    pub radio: PriorConfig<f64>,
    pub search: SearchConfig,
    pub scene: SceneConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            window: WindowSection::default(),
            fov: None,
            tracklet: TrackletGenConfig::default(),
            tree: TreeConfig::default(),
            filter: FilterConfig::default(),
            radio: PriorConfig::default(),
            search: SearchConfig::default(),
            scene: SceneConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn tracker(&self) -> TrackerConfig<f64> {
        TrackerConfig {
            fov: self.fov.unwrap_or(self.scene.fov),
            tracklet: self.tracklet,
            tree: self.tree,
            filter: self.filter,
            prior: self.radio,
            search: self.search,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.window.window_config()?;
        if self.window.stride_frames == 0 {
            return Err(Error::config("window.stride_frames", "must be >= 1"));
        }
        self.tracker().validate()?;
        self.scene.validate()
    }

    /// Parses and validates TOML text; `origin` names the source in errors.
    pub fn from_toml(text: &str, origin: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(0, |s| line_of(text, s.start));
            Error::Parse {
                path: origin.into(),
                line,
                message: e.message().to_string(),
            }
        })?;
        cfg.validate().map_err(|e| match e {
            Error::InvalidConfig { key, message } => Error::Parse {
                path: origin.into(),
                line: key_line(text, &key).unwrap_or(0),
                message: format!("invalid `{key}`: {message}"),
            },
            other => other,
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text, &path.display().to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `section.key` in TOML text, or of the section header when the
/// key itself is absent (a default was rejected).
fn key_line(text: &str, dotted: &str) -> Option<usize> {
    let (section, key) = dotted.rsplit_once('.').unwrap_or(("", dotted));
    let mut current = String::new();
    let mut header = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_string();
            if current == section {
                header = Some(i + 1);
            }
            continue;
        }
        let Some((k, _)) = line.split_once('=') else {
            continue;
        };
        if current == section && k.trim().trim_matches('"') == key {
            return Some(i + 1);
        }
    }
    header
}
