//! Key-value configuration with sections.
//!
//! All defaults live in `config/reference.toml`, which is compiled into the
//! library. A user config is overlaid on the reference key by key, so it only
//! needs to name what it changes; it must however always name `run.seed`.

use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const REFERENCE_TOML: &str = include_str!("../config/reference.toml");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("config must set `run.seed` explicitly")]
    MissingSeed,
    #[error("invalid config value: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GelSection {
    pub hardness_shore00: f64,
    pub thickness_mm: f64,
    pub sensing_width_mm: f64,
    pub sensing_height_mm: f64,
    pub marker_pitch_mm: f64,
    pub image_width_px: usize,
    pub image_height_px: usize,
    pub smoothing_width_mm: f64,
    pub flat_footprint_radius_mm: f64,
    pub tip_rounding_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialsSection {
    pub shore_a_slope: f64,
    pub shore_a_offset: f64,
    pub poisson_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TextureSection {
    pub enabled: bool,
    pub amplitude_mm: f64,
    pub wavelength_mm: f64,
    /// Groove direction is drawn uniformly within this much of `orientation_rad`.
    pub orientation_rad: f64,
    pub orientation_jitter_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderSection {
    pub ambient: [f64; 3],
    pub light_gain: f64,
    pub light_elevation_deg: f64,
    pub light_azimuths_deg: [f64; 3],
    pub marker_dot_radius_mm: f64,
    pub marker_beta: f64,
    pub markers_enabled: bool,
    pub noise_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HumanSection {
    pub min_frames: usize,
    pub max_frames: usize,
    pub speed_jitter: f64,
    pub max_lead_in_frames: usize,
    pub min_force_n: f64,
    pub max_force_n: f64,
    pub max_tilt_rad: f64,
    pub max_drift_mm_per_s: f64,
    pub max_center_offset_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotSection {
    pub min_speed_mm_per_s: f64,
    pub max_speed_mm_per_s: f64,
    pub min_threshold_n: f64,
    pub max_threshold_n: f64,
    pub max_frames: usize,
    pub max_center_offset_mm: f64,
    pub max_lead_in_frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BadContactSection {
    pub min_tilt_rad: f64,
    pub max_tilt_rad: f64,
    pub min_drift_mm_per_s: f64,
    pub max_drift_mm_per_s: f64,
    pub min_off_center_mm: f64,
    pub max_off_center_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub hardness_min: f64,
    pub hardness_max: f64,
    pub hardness_levels: usize,
    pub radii_mm: Vec<f64>,
    pub basic_human_per_level: usize,
    pub bad_contact_per_level: usize,
    pub complex_per_level: usize,
    pub robot_per_level: usize,
    pub complex_holdout_per_level: usize,
    pub simple_shape_per_level: usize,
    pub edge_min_dihedral_deg: f64,
    pub edge_max_dihedral_deg: f64,
    pub corner_min_solid_angle_sr: f64,
    pub corner_max_solid_angle_sr: f64,
    pub ridge_min_amplitude_mm: f64,
    pub ridge_max_amplitude_mm: f64,
    pub ridge_min_wavelength_mm: f64,
    pub ridge_max_wavelength_mm: f64,
    pub ridge_min_sharpness: f64,
    pub ridge_max_sharpness: f64,
    pub holdout_ridge_min_sharpness: f64,
    pub holdout_ridge_max_sharpness: f64,
    pub holdout_ridge_min_amplitude_mm: f64,
    pub holdout_ridge_max_amplitude_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineSection {
    pub tau_noise_multiple: f64,
    pub tau_floor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub input_pool: usize,
    pub conv_channels: Vec<usize>,
    pub feature_dim: usize,
    pub input_scale: f64,
    pub hidden_dim: usize,
    pub huber_kappa: f64,
    pub label_scale: f64,
    pub forget_bias: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSection {
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub iterations: usize,
    pub lr_step: usize,
    pub lr_decay: f64,
    pub batch_size: usize,
    pub momentum: f64,
    pub grad_clip: f64,
    /// Decoupled L2 shrinkage applied every step, relative to the learning rate.
    pub weight_decay: f64,
    /// Largest random translation of a training clip, in pixels.
    pub max_shift_px: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitsSection {
    pub holdout_level_stride: usize,
    pub holdout_level_offset: usize,
    pub holdout_radius_indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub run: RunSection,
    pub gel: GelSection,
    pub materials: MaterialsSection,
    pub texture: TextureSection,
    pub render: RenderSection,
    pub human: HumanSection,
    pub robot: RobotSection,
    pub bad_contact: BadContactSection,
    pub dataset: DatasetSection,
    pub pipeline: PipelineSection,
    pub network: NetworkSection,
    pub training: TrainingSection,
    pub splits: SplitsSection,
}

fn reference_value() -> toml::Table {
    REFERENCE_TOML
        .parse::<toml::Table>()
        .expect("reference config is valid TOML")
}

fn merge(base: &mut toml::Table, overlay: toml::Table) -> Result<(), ConfigError> {
    for (key, value) in overlay {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o)?,
            (Some(slot), v) => *slot = v,
            (None, _) => return Err(ConfigError::Parse(format!("unknown key `{key}`"))),
        }
    }
    Ok(())
}

impl Config {
    /// The checked-in reference configuration.
    pub fn reference() -> &'static Config {
        static REFERENCE: OnceLock<Config> = OnceLock::new();
        REFERENCE.get_or_init(|| {
            reference_value()
                .try_into()
                .expect("reference config matches the schema")
        })
    }

    /// Parses a user config and overlays it on the reference.
    pub fn from_toml_str(text: &str) -> Result<Config, ConfigError> {
        let overlay: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        let has_seed = overlay
            .get("run")
            .and_then(|r| r.as_table())
            .is_some_and(|r| r.contains_key("seed"));
        if !has_seed {
            return Err(ConfigError::MissingSeed);
        }
        let mut base = reference_value();
        merge(&mut base, overlay)?;
        let config: Config = base
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Config::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.gel.thickness_mm <= 0.0 || self.gel.image_width_px == 0 || self.gel.image_height_px == 0 {
            return bad("gel geometry must be positive");
        }
        if self.dataset.hardness_levels == 0 && self.total_per_level() > 0 {
            return bad("hardness_levels must be positive");
        }
        if self.dataset.radii_mm.iter().any(|r| *r <= 0.0) {
            return bad("radii must be positive");
        }
        if self.human.min_frames == 0 || self.human.min_frames > self.human.max_frames {
            return bad("human frame range is empty");
        }
        if !(0.0..=0.35).contains(&self.human.max_tilt_rad)
            || !(0.0..=0.35).contains(&self.bad_contact.max_tilt_rad)
        {
            return bad("tilt must lie in [0, 0.35] rad");
        }
        let t = &self.training;
        if t.learning_rate < 0.0 || t.iterations == 0 || t.lr_step == 0 || t.batch_size == 0 {
            return bad("training parameters must be positive");
        }
        if !(t.lr_decay > 0.0 && t.lr_decay <= 1.0) {
            return bad("lr_decay must lie in (0, 1]");
        }
        if self.network.conv_channels.is_empty() || self.network.input_pool == 0 {
            return bad("network needs at least one conv block and a positive input pool");
        }
        if self.splits.holdout_level_stride == 0 {
            return bad("holdout_level_stride must be positive");
        }
        Ok(())
    }

    pub fn total_per_level(&self) -> usize {
        let d = &self.dataset;
        d.basic_human_per_level
            + d.bad_contact_per_level
            + d.complex_per_level
            + d.robot_per_level
            + d.complex_holdout_per_level
            + d.simple_shape_per_level
    }

    /// Hardness grid, evenly spaced between the configured bounds.
    pub fn hardness_grid(&self) -> Vec<f64> {
        let d = &self.dataset;
        match d.hardness_levels {
            0 => Vec::new(),
            1 => vec![d.hardness_min],
            n => (0..n)
                .map(|k| d.hardness_min + (d.hardness_max - d.hardness_min) * k as f64 / (n - 1) as f64)
                .collect(),
        }
    }
}
