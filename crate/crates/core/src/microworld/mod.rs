//! Deterministic tabletop micro-world.
//!
//! Objects live on a 1 m x 1 m table with discrete height levels. One long
//! two-tone block can rest on the table or on a support block and offers
//! three slots on its top face; support blocks offer one slot each. Actions
//! (grasp, place, turn) have canonical effects plus side effects: toppling,
//! rolling, tipping and sweeping.

mod affordances;
mod dynamics;
mod render;
mod scene;

pub use affordances::{enumerate_affordances, ground_affordances, GroundAffordance, Target};
pub use dynamics::{resolve_stability, step, MATCH_ANGLE_DEG, MATCH_DIST};
pub use render::{depth_of_level, render, strip_rows, Palette, SPRITE_CENTRE_PX};
pub use scene::{random_scene, SceneFile, RANDOM_MIN_GAP};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Extent, Footprint, Vec2, REACH};

pub const BLOCK_HALF_LEN: f64 = 0.14;
pub const BLOCK_HALF_WID: f64 = 0.035;
pub const SUPPORT_HALF: f64 = 0.05;
pub const CUP_RADIUS: f64 = 0.04;
pub const BALL_RADIUS: f64 = 0.035;
pub const TOPPLED_HALF_LEN: f64 = 0.07;
pub const TOPPLED_HALF_WID: f64 = 0.035;
/// Slot offsets along the block's long axis.
pub const SLOT_OFFSETS: [f64; 3] = [-0.1, 0.0, 0.1];
/// Free space the gripper needs around the grasped cross-section.
pub const GRIPPER_GAP: f64 = 0.04;
/// Height of one level, in metres.
pub const LEVEL_HEIGHT: f64 = 0.05;
pub const ROLL_DISTANCE: f64 = 0.15;
pub const SWEEP_PAD: f64 = 0.02;

pub const MAX_CUPS: usize = 3;
pub const MAX_BALLS: usize = 3;
pub const MAX_SUPPORTS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectKind {
    ColouredBlock,
    SupportBlock,
    Cup,
    Ball,
}

impl ObjectKind {
    pub fn mass(self) -> f64 {
        match self {
            ObjectKind::ColouredBlock => 2.0,
            _ => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pose {
    #[default]
    Upright,
    Toppled,
}

pub type ObjectId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SlotId {
    pub host: ObjectId,
    pub index: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub id: ObjectId,
    pub kind: ObjectKind,
    /// Footprint centre in metres.
    pub position: Vec2,
    /// Degrees, one of 0/90/180/270. Meaningful for blocks and toppled cups.
    pub orientation: i32,
    pub height_level: u8,
    pub pose: Pose,
    pub on_slot: Option<SlotId>,
}

/// Exact unit vector for a multiple of 90 degrees.
pub fn axis_of(orientation: i32) -> Vec2 {
    match orientation.rem_euclid(360) {
        0 => Vec2::new(1.0, 0.0),
        90 => Vec2::new(0.0, 1.0),
        180 => Vec2::new(-1.0, 0.0),
        270 => Vec2::new(0.0, -1.0),
        other => panic!("orientation {other} is not a multiple of 90"),
    }
}

pub fn normalize_orientation(deg: i32) -> i32 {
    deg.rem_euclid(360)
}

/// Orientation (multiple of 90) closest to a direction.
pub fn orientation_of(dir: Vec2) -> i32 {
    let s = dir.snap_axis();
    match (s.x as i32, s.y as i32) {
        (1, _) => 0,
        (_, 1) => 90,
        (-1, _) => 180,
        _ => 270,
    }
}

impl ObjectInstance {
    pub fn new(id: ObjectId, kind: ObjectKind, position: Vec2) -> Self {
        Self {
            id,
            kind,
            position,
            orientation: 0,
            height_level: 0,
            pose: Pose::Upright,
            on_slot: None,
        }
    }

    pub fn axis(&self) -> Vec2 {
        axis_of(self.orientation)
    }

    pub fn footprint(&self) -> Footprint {
        self.footprint_at(self.position, self.orientation)
    }

    pub fn footprint_at(&self, centre: Vec2, orientation: i32) -> Footprint {
        let along_x = orientation.rem_euclid(180) == 0;
        let oriented = |l: f64, w: f64| Footprint::Box {
            centre,
            half: if along_x {
                Vec2::new(l, w)
            } else {
                Vec2::new(w, l)
            },
        };
        match (self.kind, self.pose) {
            (ObjectKind::ColouredBlock, _) => oriented(BLOCK_HALF_LEN, BLOCK_HALF_WID),
            (ObjectKind::SupportBlock, _) => Footprint::Box {
                centre,
                half: Vec2::new(SUPPORT_HALF, SUPPORT_HALF),
            },
            (ObjectKind::Cup, Pose::Upright) => Footprint::Disc {
                centre,
                radius: CUP_RADIUS,
            },
            (ObjectKind::Cup, Pose::Toppled) => oriented(TOPPLED_HALF_LEN, TOPPLED_HALF_WID),
            (ObjectKind::Ball, _) => Footprint::Disc {
                centre,
                radius: BALL_RADIUS,
            },
        }
    }

    /// Half-width of the section the gripper closes on.
    pub fn cross_radius(&self) -> f64 {
        match (self.kind, self.pose) {
            (ObjectKind::ColouredBlock, _) => BLOCK_HALF_WID,
            (ObjectKind::SupportBlock, _) => SUPPORT_HALF,
            (ObjectKind::Cup, Pose::Upright) => CUP_RADIUS,
            (ObjectKind::Cup, Pose::Toppled) => TOPPLED_HALF_WID,
            (ObjectKind::Ball, _) => BALL_RADIUS,
        }
    }

    /// Gripper angles that give qualitatively identical results.
    pub fn is_symmetric(&self) -> bool {
        matches!(
            (self.kind, self.pose),
            (ObjectKind::Cup, Pose::Upright) | (ObjectKind::Ball, _)
        )
    }

    pub fn slot_count(&self) -> usize {
        match self.kind {
            ObjectKind::ColouredBlock => 3,
            ObjectKind::SupportBlock => 1,
            _ => 0,
        }
    }

    /// Centre of slot `index` on this host.
    pub fn slot_position(&self, index: u8) -> Vec2 {
        match self.kind {
            ObjectKind::ColouredBlock => self.position + self.axis() * SLOT_OFFSETS[index as usize],
            _ => self.position,
        }
    }

    pub fn z(&self) -> f64 {
        self.height_level as f64 * LEVEL_HEIGHT
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    /// Objects on the table (including stacked ones), ordered by id.
    pub objects: Vec<ObjectInstance>,
    pub holding: Option<ObjectInstance>,
    pub reach: Extent,
    /// Seed the scene was sampled from; never read by the dynamics.
    pub seed: u64,
    /// Objects that left the reachable area, in removal order.
    pub removed: Vec<ObjectId>,
}

impl WorldState {
    pub fn empty() -> Self {
        Self {
            objects: Vec::new(),
            holding: None,
            reach: REACH,
            seed: 0,
            removed: Vec::new(),
        }
    }

    pub fn object(&self, id: ObjectId) -> Option<&ObjectInstance> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub(crate) fn object_mut(&mut self, id: ObjectId) -> Option<&mut ObjectInstance> {
        self.objects.iter_mut().find(|o| o.id == id)
    }

    pub fn block(&self) -> Option<&ObjectInstance> {
        self.objects
            .iter()
            .find(|o| o.kind == ObjectKind::ColouredBlock)
    }

    pub fn supports(&self) -> impl Iterator<Item = &ObjectInstance> {
        self.objects
            .iter()
            .filter(|o| o.kind == ObjectKind::SupportBlock)
    }

    /// Objects sitting on a slot of `host`, by slot index.
    pub fn resting_on(&self, host: ObjectId) -> Vec<&ObjectInstance> {
        let mut v: Vec<_> = self
            .objects
            .iter()
            .filter(|o| o.on_slot.map(|s| s.host) == Some(host))
            .collect();
        v.sort_by_key(|o| o.on_slot.map(|s| s.index));
        v
    }

    pub fn slot_occupant(&self, slot: SlotId) -> Option<&ObjectInstance> {
        self.objects.iter().find(|o| o.on_slot == Some(slot))
    }

    /// Supports whose footprint lies under the block's footprint.
    pub fn supports_under(&self, block: &ObjectInstance) -> Vec<&ObjectInstance> {
        if block.height_level == 0 {
            return Vec::new();
        }
        let fp = block.footprint();
        self.supports()
            .filter(|s| s.footprint().overlaps(&fp))
            .collect()
    }

    pub fn next_id(&self) -> ObjectId {
        self.objects
            .iter()
            .chain(self.holding.iter())
            .map(|o| o.id + 1)
            .chain(self.removed.iter().map(|&id| id + 1))
            .max()
            .unwrap_or(0)
    }

    pub fn all_ids(&self) -> Vec<ObjectId> {
        let mut ids: Vec<_> = self
            .objects
            .iter()
            .chain(self.holding.iter())
            .map(|o| o.id)
            .collect();
        ids.sort_unstable();
        ids
    }

    pub(crate) fn sort_objects(&mut self) {
        self.objects.sort_by_key(|o| o.id);
    }

    /// Check every scene invariant.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidWorld(m));
        let all: Vec<&ObjectInstance> = self.objects.iter().chain(self.holding.iter()).collect();
        let count = |k: ObjectKind| all.iter().filter(|o| o.kind == k).count();
        if count(ObjectKind::ColouredBlock) > 1 {
            return bad("more than one coloured block".into());
        }
        if count(ObjectKind::SupportBlock) > MAX_SUPPORTS {
            return bad("too many support blocks".into());
        }
        if count(ObjectKind::Cup) > MAX_CUPS {
            return bad("too many cups".into());
        }
        if count(ObjectKind::Ball) > MAX_BALLS {
            return bad("too many balls".into());
        }
        let mut ids: Vec<_> = all.iter().map(|o| o.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return bad("duplicate object id".into());
        }
        if let Some(h) = &self.holding {
            if h.kind == ObjectKind::SupportBlock {
                return bad("support blocks cannot be held".into());
            }
        }
        for o in &all {
            if o.orientation.rem_euclid(90) != 0 || !(0..360).contains(&o.orientation) {
                return bad(format!(
                    "object {} orientation {} invalid",
                    o.id, o.orientation
                ));
            }
            if o.pose == Pose::Toppled && o.kind != ObjectKind::Cup {
                return bad(format!("object {} cannot be toppled", o.id));
            }
        }
        for o in &self.objects {
            if !o.position.x.is_finite() || !o.position.y.is_finite() {
                return bad(format!("object {} has a non-finite position", o.id));
            }
            if o.height_level > 2 {
                return bad(format!("object {} height level {}", o.id, o.height_level));
            }
            match o.on_slot {
                None if o.height_level > 0 => {
                    return bad(format!("object {} floats without a slot", o.id))
                }
                None => {}
                Some(slot) => {
                    let Some(host) = self.object(slot.host) else {
                        return bad(format!("object {} rests on missing host", o.id));
                    };
                    if slot.index as usize >= host.slot_count() {
                        return bad(format!("object {} uses invalid slot", o.id));
                    }
                    if o.height_level != host.height_level + 1 {
                        return bad(format!("object {} height does not match host", o.id));
                    }
                    match (o.kind, host.kind) {
                        (ObjectKind::SupportBlock, _) => {
                            return bad("support blocks stay on the table".into())
                        }
                        (ObjectKind::ColouredBlock, ObjectKind::SupportBlock) => {
                            if !host.footprint().overlaps(&o.footprint()) {
                                return bad("block does not rest on its support".into());
                            }
                        }
                        (ObjectKind::ColouredBlock, _) => {
                            return bad("block must rest on a support".into())
                        }
                        _ => {
                            if o.position.dist(host.slot_position(slot.index)) > 1e-9 {
                                return bad(format!("object {} is off its slot centre", o.id));
                            }
                        }
                    }
                    if self
                        .objects
                        .iter()
                        .any(|p| p.id != o.id && p.on_slot == Some(slot))
                    {
                        return bad(format!("slot of object {} is shared", o.id));
                    }
                }
            }
        }
        for (i, a) in self.objects.iter().enumerate() {
            for b in &self.objects[i + 1..] {
                if a.height_level == b.height_level && a.footprint().overlaps(&b.footprint()) {
                    return bad(format!("objects {} and {} overlap", a.id, b.id));
                }
            }
        }
        if self.objects.windows(2).any(|w| w[0].id >= w[1].id) {
            return bad("objects must be ordered by id".into());
        }
        if resolve_stability(self) != *self {
            return bad("arrangement is not stable".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_is_exact() {
        assert_eq!(axis_of(90), Vec2::new(0.0, 1.0));
        assert_eq!(axis_of(-90), Vec2::new(0.0, -1.0));
        assert_eq!(orientation_of(Vec2::new(-0.2, 0.9)), 90);
        assert_eq!(orientation_of(Vec2::new(-0.9, 0.2)), 180);
    }

    #[test]
    fn footprints_follow_orientation() {
        let mut b = ObjectInstance::new(0, ObjectKind::ColouredBlock, Vec2::new(0.5, 0.5));
        b.orientation = 90;
        match b.footprint() {
            Footprint::Box { half, .. } => assert_eq!(half, Vec2::new(0.035, 0.14)),
            _ => panic!(),
        }
        assert_eq!(b.slot_position(2), Vec2::new(0.5, 0.6));
    }

    #[test]
    fn validate_catches_overlap_and_counts() {
        let mut w = WorldState::empty();
        w.objects
            .push(ObjectInstance::new(0, ObjectKind::Cup, Vec2::new(0.5, 0.5)));
        w.objects.push(ObjectInstance::new(
            1,
            ObjectKind::Ball,
            Vec2::new(0.55, 0.5),
        ));
        assert!(w.validate().is_err());
        w.objects[1].position = Vec2::new(0.7, 0.5);
        w.validate().unwrap();
        for id in 2..5 {
            w.objects.push(ObjectInstance::new(
                id,
                ObjectKind::Cup,
                Vec2::new(0.2, 0.1 * id as f64),
            ));
        }
        assert!(w.validate().is_err());
    }
}
