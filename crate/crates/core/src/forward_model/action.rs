//! Numeric action inputs for the predictor modules.

use serde::{Deserialize, Serialize};

use crate::affordance::{AffordanceKind, ParametrizedAffordance};
use crate::geometry::TABLE;
use crate::microworld::LEVEL_HEIGHT;
use crate::nn::ACTION_INPUTS;
use crate::raster::{PixelSample, Projection, RasterState};

/// Highest surface the gripper acts on, used to normalize `z`.
pub const Z_RANGE: f64 = 4.0 * LEVEL_HEIGHT;
/// Turn amount input for a +90 degree turn (a quarter revolution).
pub const TURN_INPUT: f32 = 0.25;

/// The nine numeric inputs of one action plus the module selector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionInput {
    pub kind: AffordanceKind,
    pub x: f32,
    pub y: f32,
    pub z: f32,
    /// Gripper angle as a fraction of a revolution, `[0, 1)`.
    pub gripper_angle: f32,
    /// `±0.25` for turns, 0 otherwise.
    pub turn_amount: f32,
    pub pixel: PixelSample,
}

impl ActionInput {
    pub fn to_array(&self) -> [f32; ACTION_INPUTS] {
        let p = self.pixel.to_array();
        [
            self.x,
            self.y,
            self.z,
            self.gripper_angle,
            self.turn_amount,
            p[0],
            p[1],
            p[2],
            p[3],
        ]
    }
}

/// An action's geometric inputs and the pixel its sample is read from.
///
/// The pixel stays fixed under input noise; augmentation moves it together
/// with the frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionCode {
    pub kind: AffordanceKind,
    /// x, y, z, gripper angle, turn amount.
    pub values: [f32; 5],
    pub pixel: (usize, usize),
    pub symmetric: bool,
}

impl ActionCode {
    pub fn new(a: &ParametrizedAffordance, resolution: usize) -> Self {
        let d = &a.detection;
        let projection = Projection::new(TABLE, resolution, resolution).expect("table extent");
        let turn = a.turn.map_or(0.0, |t| t.sign() as f32 * TURN_INPUT);
        Self {
            kind: d.kind,
            values: [
                ((d.position.x - TABLE.min.x) / TABLE.width()) as f32,
                ((d.position.y - TABLE.min.y) / TABLE.height()) as f32,
                (d.position.z / Z_RANGE).clamp(0.0, 1.0) as f32,
                (d.angle / 360.0).rem_euclid(1.0) as f32,
                turn,
            ],
            pixel: projection.project(d.position.xy()),
            symmetric: d.is_symmetric(),
        }
    }

    /// Full input with the pixel read from `state`.
    pub fn input(&self, state: &RasterState) -> ActionInput {
        let v = state.pixel(self.pixel.0, self.pixel.1);
        ActionInput {
            kind: self.kind,
            x: self.values[0],
            y: self.values[1],
            z: self.values[2],
            gripper_angle: self.values[3],
            turn_amount: self.values[4],
            pixel: PixelSample {
                r: v[0],
                g: v[1],
                b: v[2],
                d: v[3],
            },
        }
    }
}
