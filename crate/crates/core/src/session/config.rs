use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::SessionError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DisplayMode {
    #[default]
    Simultaneous,
    Sequential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RenderingMode {
    #[default]
    Points,
    Surfaces,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Background {
    #[default]
    Dark,
    Light,
    Custom([u8; 3]),
}

impl Background {
    pub fn rgb(self) -> [u8; 3] {
        match self {
            Background::Dark => [18, 18, 18],
            Background::Light => [235, 235, 235],
            Background::Custom(c) => c,
        }
    }
}

/// Every experimenter-facing setting of one session. Absent JSON fields take
/// their defaults; `display_order_seed` defaults to a hash of the
/// participant name so each participant gets a distinct but reproducible
/// order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub participant_name: String,
    #[serde(default = "default_result_path")]
    pub result_path: PathBuf,
    #[serde(default = "default_viewing_time")]
    pub viewing_time_s: f64,
    #[serde(default = "default_categories")]
    pub rating_categories: u32,
    #[serde(default)]
    pub display_mode: DisplayMode,
    #[serde(default)]
    pub rendering_mode: RenderingMode,
    #[serde(default = "one")]
    pub model_scale: f64,
    #[serde(default = "default_point_size")]
    pub point_size_px: f64,
    #[serde(default)]
    pub display_order_seed: Option<u64>,
    #[serde(default)]
    pub background: Background,
    #[serde(default = "default_traps")]
    pub traps_per_source: u32,
    /// Explicit trap stimulus ids, overriding the extreme-quality default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trap_stimuli: Option<Vec<String>>,
}

fn default_result_path() -> PathBuf {
    PathBuf::from("results")
}
fn default_viewing_time() -> f64 {
    20.0
}
fn default_categories() -> u32 {
    5
}
fn one() -> f64 {
    1.0
}
fn default_point_size() -> f64 {
    2.0
}
fn default_traps() -> u32 {
    2
}

pub const MAX_RATING_CATEGORIES: u32 = 100;

impl ExperimentConfig {
    pub fn new(participant_name: impl Into<String>) -> Self {
        ExperimentConfig {
            participant_name: participant_name.into(),
            result_path: default_result_path(),
            viewing_time_s: default_viewing_time(),
            rating_categories: default_categories(),
            display_mode: DisplayMode::default(),
            rendering_mode: RenderingMode::default(),
            model_scale: 1.0,
            point_size_px: default_point_size(),
            display_order_seed: None,
            background: Background::default(),
            traps_per_source: default_traps(),
            trap_stimuli: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self, SessionError> {
        let text = std::fs::read_to_string(path).map_err(|e| SessionError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, SessionError> {
        serde_json::from_str(text).map_err(|e| SessionError::Schema(vec![format!("config: {e}")]))
    }

    /// The effective shuffle seed.
    pub fn seed(&self) -> u64 {
        self.display_order_seed.unwrap_or_else(|| {
            let digest = Sha256::digest(self.participant_name.as_bytes());
            u64::from_le_bytes(digest[..8].try_into().unwrap())
        })
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.participant_name.trim().is_empty() {
            out.push("participant_name must not be empty".to_string());
        }
        if !(self.viewing_time_s.is_finite() && self.viewing_time_s > 0.0) {
            out.push(format!("viewing_time_s must be positive, got {}", self.viewing_time_s));
        }
        if !(2..=MAX_RATING_CATEGORIES).contains(&self.rating_categories) {
            out.push(format!(
                "rating_categories must be in [2, {MAX_RATING_CATEGORIES}], got {}",
                self.rating_categories
            ));
        }
        if !(self.model_scale.is_finite() && self.model_scale > 0.0) {
            out.push(format!("model_scale must be positive, got {}", self.model_scale));
        }
        if !(self.point_size_px.is_finite() && self.point_size_px > 0.0) {
            out.push(format!("point_size_px must be positive, got {}", self.point_size_px));
        }
        out
    }

    pub fn validate(&self) -> Result<(), SessionError> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(SessionError::Schema(v))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_absent_fields() {
        let c = ExperimentConfig::from_json(r#"{"participant_name":"p01"}"#).unwrap();
        assert_eq!(c.viewing_time_s, 20.0);
        assert_eq!(c.rating_categories, 5);
        assert_eq!(c.traps_per_source, 2);
        assert_eq!(c.display_mode, DisplayMode::Simultaneous);
        assert_eq!(c.background, Background::Dark);
        assert!(c.violations().is_empty());
    }

    #[test]
    fn background_forms() {
        let c = ExperimentConfig::from_json(
            r#"{"participant_name":"p","background":{"custom":[1,2,3]}}"#,
        )
        .unwrap();
        assert_eq!(c.background.rgb(), [1, 2, 3]);
        let c = ExperimentConfig::from_json(r#"{"participant_name":"p","background":"light"}"#).unwrap();
        assert_eq!(c.background.rgb(), [235, 235, 235]);
    }

    #[test]
    fn range_violations() {
        let mut c = ExperimentConfig::new("p");
        c.rating_categories = 1;
        c.viewing_time_s = 0.0;
        c.point_size_px = -1.0;
        assert_eq!(c.violations().len(), 3);
        assert!(ExperimentConfig::from_json(r#"{"participant_name":"p","bogus":1}"#).is_err());
    }

    #[test]
    fn seed_defaults_per_participant() {
        let a = ExperimentConfig::new("alice");
        let b = ExperimentConfig::new("bob");
        assert_ne!(a.seed(), b.seed());
        assert_eq!(a.seed(), ExperimentConfig::new("alice").seed());
        let mut c = a.clone();
        c.display_order_seed = Some(7);
        assert_eq!(c.seed(), 7);
    }
}
