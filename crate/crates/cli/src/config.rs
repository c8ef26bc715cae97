use std::path::Path;

use serde::{Deserialize, Serialize};

use foresight_core::forward_model::TrainConfig;
use foresight_core::planner::PlannerConfig;
use foresight_core::recognition::RecognitionConfig;
use foresight_core::{Error, Result};

pub const RESOLUTIONS: [usize; 3] = [16, 32, 64];

/// Every tunable of a run. Loaded from defaults, then a JSON file, then
/// command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub resolution: usize,
    /// Side of the square table in metres; the micro-world only supports 1.
    pub world_extent: f64,
    pub cutoff: f64,
    pub nms_dist: f64,
    pub nms_angle_deg: f64,
    pub tau_pos: f64,
    pub tau_neg: f64,
    pub n_max: usize,
    pub seed: u64,
    /// Sequences generated by `gen-data`.
    pub sequences: usize,
    /// Scenes scored by `eval recognition`.
    pub recognition_scenes: usize,
    /// First scene seed of `eval recognition`.
    pub recognition_seed: u64,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            resolution: 32,
            world_extent: 1.0,
            cutoff: 0.9,
            nms_dist: 0.025,
            nms_angle_deg: 10.0,
            tau_pos: 0.01,
            tau_neg: 0.02,
            n_max: 4,
            seed: 0,
            sequences: 2000,
            recognition_scenes: 100,
            recognition_seed: 10_000,
            train: TrainConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&s)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !RESOLUTIONS.contains(&self.resolution) {
            return bad(format!(
                "resolution must be one of {RESOLUTIONS:?}, got {}",
                self.resolution
            ));
        }
        if self.world_extent != 1.0 {
            return bad("the table is 1 m square; world_extent must be 1.0".into());
        }
        if !(0.0..=1.0).contains(&self.cutoff) {
            return bad(format!("cutoff {} outside [0, 1]", self.cutoff));
        }
        if !(self.nms_dist >= 0.0 && self.nms_dist <= 0.5) {
            return bad(format!("nms_dist {} outside [0, 0.5] m", self.nms_dist));
        }
        if !(0.0..=180.0).contains(&self.nms_angle_deg) {
            return bad(format!(
                "nms_angle_deg {} outside [0, 180]",
                self.nms_angle_deg
            ));
        }
        if !(0.0..=1.0).contains(&self.tau_pos) || !(0.0..=1.0).contains(&self.tau_neg) {
            return bad("tau_pos and tau_neg must lie in [0, 1]".into());
        }
        if !(1..=8).contains(&self.n_max) {
            return bad(format!("n_max {} outside 1..=8", self.n_max));
        }
        if self.sequences < 3 {
            return bad("at least 3 sequences are needed for the splits".into());
        }
        if self.train.net.resolution != self.resolution {
            return bad(format!(
                "network resolution {} differs from resolution {}",
                self.train.net.resolution, self.resolution
            ));
        }
        self.train.net.validate()
    }

    pub fn recognition(&self) -> RecognitionConfig {
        let mut r = RecognitionConfig::new(self.resolution);
        r.cutoff = self.cutoff;
        r.nms_dist = self.nms_dist;
        r.nms_angle_deg = self.nms_angle_deg;
        r
    }

    pub fn planner(&self) -> PlannerConfig {
        PlannerConfig {
            n_max: self.n_max,
            recognition: self.recognition(),
            tau_pos: self.tau_pos,
            tau_neg: self.tau_neg,
        }
    }
}
