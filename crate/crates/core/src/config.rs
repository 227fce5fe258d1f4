//! Flat run configuration shared by the library entry points and the CLI.
//!
//! Every key is optional in the JSON file and falls back to its default;
//! unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::encoder::EncoderConfig;
use crate::error::{Error, Result};
use crate::templates::StoreConfig;
use crate::tracker::{MotionModel, TrackerConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Initial number of positive templates.
    pub positives: usize,
    pub negatives: usize,
    pub max_positives: usize,
    pub neighbor_counts: Vec<usize>,
    pub lambda: f64,
    pub beta: f64,
    pub iterations: usize,
    /// Confidence normalization factor.
    pub alpha: f64,
    pub n_particles: usize,
    /// `[lx, ly, theta, s, alpha, phi]` standard deviations.
    pub motion_sigmas: [f64; 6],
    pub update_interval: usize,
    pub pos_error_threshold: f64,
    pub use_threshold: f64,
    pub inner_radius_factor: f64,
    pub outer_radius_factor: f64,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let tracker = TrackerConfig::default();
        Self {
            positives: tracker.store.positives,
            negatives: tracker.store.negatives,
            max_positives: tracker.store.max_positives,
            neighbor_counts: tracker.encoder.neighbor_counts,
            lambda: tracker.encoder.lambda,
            beta: tracker.encoder.beta,
            iterations: tracker.encoder.iterations,
            alpha: tracker.alpha,
            n_particles: tracker.n_particles,
            motion_sigmas: tracker.motion.sigmas,
            update_interval: tracker.store.update_interval,
            pos_error_threshold: tracker.store.pos_error_threshold,
            use_threshold: tracker.use_threshold,
            inner_radius_factor: tracker.store.inner_radius_factor,
            outer_radius_factor: tracker.store.outer_radius_factor,
            seed: tracker.seed,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.tracker_config().map(|_| ())
    }

    /// Validated nested configuration for the tracker.
    pub fn tracker_config(&self) -> Result<TrackerConfig> {
        let config = TrackerConfig {
            encoder: EncoderConfig {
                neighbor_counts: self.neighbor_counts.clone(),
                lambda: self.lambda,
                beta: self.beta,
                iterations: self.iterations,
            },
            store: StoreConfig {
                positives: self.positives,
                negatives: self.negatives,
                max_positives: self.max_positives,
                update_interval: self.update_interval,
                pos_error_threshold: self.pos_error_threshold,
                inner_radius_factor: self.inner_radius_factor,
                outer_radius_factor: self.outer_radius_factor,
            },
            motion: MotionModel {
                sigmas: self.motion_sigmas,
            },
            n_particles: self.n_particles,
            alpha: self.alpha,
            use_threshold: self.use_threshold,
            seed: self.seed,
        };
        config.validate()?;
        Ok(config)
    }
}

/// Command-line values that take precedence over the configuration file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigOverrides {
    pub seed: Option<u64>,
    pub lambda: Option<f64>,
    pub beta: Option<f64>,
    pub n_particles: Option<usize>,
}

impl ConfigOverrides {
    pub fn apply(&self, config: &mut RunConfig) {
        if let Some(v) = self.seed {
            config.seed = v;
        }
        if let Some(v) = self.lambda {
            config.lambda = v;
        }
        if let Some(v) = self.beta {
            config.beta = v;
        }
        if let Some(v) = self.n_particles {
            config.n_particles = v;
        }
    }
}

/// Built-in defaults, then the file (if any), then `overrides`.
pub fn resolve(file: Option<&Path>, overrides: &ConfigOverrides) -> Result<RunConfig> {
    let mut config = match file {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    overrides.apply(&mut config);
    config.validate()?;
    Ok(config)
}
