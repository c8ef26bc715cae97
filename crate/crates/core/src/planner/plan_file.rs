use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::affordance::ParametrizedAffordance;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalRecord {
    pub path: String,
    pub polarity: String,
    pub channels: String,
}

/// On-disk plan: the goal it was made for, the steps, the residual loss and
/// the predicted frame files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanFile {
    pub goal: GoalRecord,
    pub steps: Vec<ParametrizedAffordance>,
    pub residual_loss: f64,
    pub frames: Vec<String>,
}

impl PlanFile {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plan serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&s)?)
    }
}
