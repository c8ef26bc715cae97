//! Affordance records shared by the world model, the recognizer and the
//! planner.

use serde::{Deserialize, Serialize};

use crate::geometry::{angle_diff_deg, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AffordanceKind {
    Grasp,
    Place,
    Turn,
}

impl AffordanceKind {
    pub const ALL: [AffordanceKind; 3] = [
        AffordanceKind::Grasp,
        AffordanceKind::Place,
        AffordanceKind::Turn,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            AffordanceKind::Grasp => "grasp",
            AffordanceKind::Place => "place",
            AffordanceKind::Turn => "turn",
        }
    }
}

/// 3-D point in metres; `z` is the height of the surface acted on.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn xy(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn dist(&self, o: &Point3) -> f64 {
        ((self.x - o.x).powi(2) + (self.y - o.y).powi(2) + (self.z - o.z).powi(2)).sqrt()
    }
}

/// A recognized opportunity to commence an action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub kind: AffordanceKind,
    #[serde(flatten)]
    pub position: Point3,
    /// Gripper angle in degrees, `[0, 360)`.
    pub angle: f64,
    /// Above 0.5 when gripper angles are interchangeable.
    pub symmetry: f64,
    pub confidence: f64,
}

impl Detection {
    pub fn is_symmetric(&self) -> bool {
        self.symmetry > 0.5
    }

    /// Angle difference using a 180 degree period when either side is
    /// symmetric.
    pub fn angle_error(&self, other: &Detection) -> f64 {
        let period = if self.is_symmetric() || other.is_symmetric() {
            180.0
        } else {
            360.0
        };
        angle_diff_deg(self.angle, other.angle, period)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TurnDirection {
    #[serde(rename = "+90")]
    Ccw,
    #[serde(rename = "-90")]
    Cw,
}

impl TurnDirection {
    pub fn degrees(self) -> f64 {
        match self {
            TurnDirection::Ccw => 90.0,
            TurnDirection::Cw => -90.0,
        }
    }

    pub fn sign(self) -> f64 {
        self.degrees().signum()
    }

    pub fn reversed(self) -> Self {
        match self {
            TurnDirection::Ccw => TurnDirection::Cw,
            TurnDirection::Cw => TurnDirection::Ccw,
        }
    }
}

/// A detection with every execution parameter filled in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParametrizedAffordance {
    #[serde(flatten)]
    pub detection: Detection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub turn: Option<TurnDirection>,
}

impl ParametrizedAffordance {
    /// Grasp/place with no extra parameter.
    pub fn plain(detection: Detection) -> Self {
        debug_assert!(detection.kind != AffordanceKind::Turn);
        Self {
            detection,
            turn: None,
        }
    }

    pub fn turn(detection: Detection, dir: TurnDirection) -> Self {
        debug_assert!(detection.kind == AffordanceKind::Turn);
        Self {
            detection,
            turn: Some(dir),
        }
    }

    pub fn kind(&self) -> AffordanceKind {
        self.detection.kind
    }

    /// Turn parameter present iff the kind is a turn.
    pub fn is_well_formed(&self) -> bool {
        (self.detection.kind == AffordanceKind::Turn) == self.turn.is_some()
    }

    pub fn describe(&self) -> String {
        let d = &self.detection;
        let turn = self
            .turn
            .map(|t| format!(" {:+}", t.degrees()))
            .unwrap_or_default();
        format!(
            "{}({:.3},{:.3},{:.3}) @{:.0}{}",
            d.kind.name(),
            d.position.x,
            d.position.y,
            d.position.z,
            d.angle,
            turn
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_shape_is_flat() {
        let d = Detection {
            kind: AffordanceKind::Turn,
            position: Point3::new(0.5, 0.25, 0.0),
            angle: 90.0,
            symmetry: 0.0,
            confidence: 1.0,
        };
        let p = ParametrizedAffordance::turn(d, TurnDirection::Cw);
        let v: serde_json::Value = serde_json::to_value(p).unwrap();
        assert_eq!(v["kind"], "turn");
        assert_eq!(v["x"], 0.5);
        assert_eq!(v["turn"], "-90");
        let back: ParametrizedAffordance = serde_json::from_value(v).unwrap();
        assert_eq!(back, p);
        assert!(back.is_well_formed());
    }
}
