//! Random scene sampling and the JSON scene file.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    ObjectId, ObjectInstance, ObjectKind, Pose, SlotId, WorldState, MAX_BALLS, MAX_CUPS,
    MAX_SUPPORTS,
};
use crate::error::{Error, Result};
use crate::geometry::{Footprint, Vec2, REACH};

/// Minimum free space between sampled objects.
pub const RANDOM_MIN_GAP: f64 = 0.06;
const MAX_REJECTIONS: usize = 1000;

/// Gap between two outlines (negative when a disc overlaps).
fn clearance(a: &Footprint, b: &Footprint) -> f64 {
    match (*a, *b) {
        (
            Footprint::Box {
                centre: ca,
                half: ha,
            },
            Footprint::Box {
                centre: cb,
                half: hb,
            },
        ) => {
            let dx = ((ca.x - cb.x).abs() - ha.x - hb.x).max(0.0);
            let dy = ((ca.y - cb.y).abs() - ha.y - hb.y).max(0.0);
            (dx * dx + dy * dy).sqrt()
        }
        (Footprint::Disc { centre, radius }, other)
        | (other, Footprint::Disc { centre, radius }) => other.distance_to(centre) - radius,
    }
}

/// Sample a scene: one coloured block plus uniformly many supports, cups and
/// balls, all on the table inside the reach extent.
pub fn random_scene(seed: u64) -> WorldState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_supports = rng.gen_range(0..=MAX_SUPPORTS);
    let n_cups = rng.gen_range(0..=MAX_CUPS);
    let n_balls = rng.gen_range(0..=MAX_BALLS);
    let mut kinds = vec![ObjectKind::ColouredBlock];
    kinds.extend(std::iter::repeat_n(ObjectKind::SupportBlock, n_supports));
    kinds.extend(std::iter::repeat_n(ObjectKind::Cup, n_cups));
    kinds.extend(std::iter::repeat_n(ObjectKind::Ball, n_balls));

    let mut world = WorldState::empty();
    world.seed = seed;
    let mut next_id: ObjectId = 0;
    for kind in kinds {
        let mut placed = false;
        for _ in 0..MAX_REJECTIONS {
            let mut o = ObjectInstance::new(next_id, kind, Vec2::default());
            if kind == ObjectKind::ColouredBlock {
                o.orientation = 90 * rng.gen_range(0..4);
            }
            let half = match o.footprint_at(Vec2::default(), o.orientation) {
                Footprint::Disc { radius, .. } => Vec2::new(radius, radius),
                Footprint::Box { half, .. } => half,
            };
            o.position = Vec2::new(
                rng.gen_range(REACH.min.x + half.x..=REACH.max.x - half.x),
                rng.gen_range(REACH.min.y + half.y..=REACH.max.y - half.y),
            );
            let fp = o.footprint();
            if world
                .objects
                .iter()
                .all(|p| clearance(&p.footprint(), &fp) >= RANDOM_MIN_GAP)
            {
                world.objects.push(o);
                placed = true;
                break;
            }
        }
        if placed {
            next_id += 1;
        }
    }
    world
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRef {
    /// Index of the host in the scene's object list.
    pub host: usize,
    pub index: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectRecord {
    pub kind: ObjectKind,
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub orientation: i32,
    #[serde(default)]
    pub height_level: u8,
    #[serde(default)]
    pub pose: Pose,
    #[serde(default)]
    pub on_slot: Option<SlotRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeldRecord {
    pub kind: ObjectKind,
    #[serde(default)]
    pub pose: Pose,
    #[serde(default)]
    pub orientation: i32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GripperRecord {
    pub holding: Option<HeldRecord>,
}

/// On-disk scene. Object ids are list positions; the held object takes the
/// next id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneFile {
    pub objects: Vec<ObjectRecord>,
    #[serde(default)]
    pub gripper: GripperRecord,
    #[serde(default)]
    pub seed: u64,
}

impl SceneFile {
    pub fn from_world(world: &WorldState) -> Self {
        let index_of = |id: ObjectId| world.objects.iter().position(|o| o.id == id);
        let objects = world
            .objects
            .iter()
            .map(|o| ObjectRecord {
                kind: o.kind,
                x: o.position.x,
                y: o.position.y,
                orientation: o.orientation,
                height_level: o.height_level,
                pose: o.pose,
                on_slot: o.on_slot.and_then(|s| {
                    index_of(s.host).map(|host| SlotRef {
                        host,
                        index: s.index,
                    })
                }),
            })
            .collect();
        Self {
            objects,
            gripper: GripperRecord {
                holding: world.holding.map(|h| HeldRecord {
                    kind: h.kind,
                    pose: h.pose,
                    orientation: h.orientation,
                }),
            },
            seed: world.seed,
        }
    }

    /// Build and validate the world.
    pub fn to_world(&self) -> Result<WorldState> {
        let mut w = WorldState::empty();
        w.seed = self.seed;
        for (i, r) in self.objects.iter().enumerate() {
            let on_slot = match &r.on_slot {
                None => None,
                Some(s) if s.host < self.objects.len() && s.host != i => Some(SlotId {
                    host: s.host as ObjectId,
                    index: s.index,
                }),
                Some(_) => {
                    return Err(Error::InvalidWorld(format!(
                        "object {i} refers to an invalid host"
                    )))
                }
            };
            w.objects.push(ObjectInstance {
                id: i as ObjectId,
                kind: r.kind,
                position: Vec2::new(r.x, r.y),
                orientation: r.orientation,
                height_level: r.height_level,
                pose: r.pose,
                on_slot,
            });
        }
        if let Some(h) = &self.gripper.holding {
            let mut o =
                ObjectInstance::new(self.objects.len() as ObjectId, h.kind, Vec2::default());
            o.pose = h.pose;
            o.orientation = h.orientation;
            w.holding = Some(o);
        }
        w.validate()?;
        Ok(w)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

impl WorldState {
    pub fn to_json(&self) -> String {
        SceneFile::from_world(self).to_json()
    }

    pub fn from_json(s: &str) -> Result<Self> {
        SceneFile::from_json(s)?.to_world()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}
