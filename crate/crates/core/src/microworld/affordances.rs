//! Ground-truth affordance enumeration.

use super::{
    ObjectId, ObjectInstance, ObjectKind, Pose, SlotId, WorldState, GRIPPER_GAP, LEVEL_HEIGHT,
};
use crate::affordance::{AffordanceKind, Detection, Point3};
use crate::geometry::Vec2;

/// What an affordance acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Object(ObjectId),
    Slot(SlotId),
}

/// A detection tied to the world element it refers to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundAffordance {
    pub detection: Detection,
    pub target: Target,
}

fn detection(kind: AffordanceKind, p: Vec2, level: u8, angle: f64, symmetric: bool) -> Detection {
    Detection {
        kind,
        position: Point3::new(p.x, p.y, level as f64 * LEVEL_HEIGHT),
        angle,
        symmetry: if symmetric { 1.0 } else { 0.0 },
        confidence: 1.0,
    }
}

/// No object at `min_level` or above, other than the excluded ones, reaches
/// into the gripper disc.
fn probe_clear(
    world: &WorldState,
    centre: Vec2,
    radius: f64,
    min_level: u8,
    excluded: impl Fn(&ObjectInstance) -> bool,
) -> bool {
    world
        .objects
        .iter()
        .filter(|o| o.height_level >= min_level && !excluded(o))
        .all(|o| !o.footprint().intersects_disc(centre, radius))
}

fn grasp_clear(world: &WorldState, t: &ObjectInstance) -> bool {
    let host = t.on_slot.map(|s| s.host);
    probe_clear(
        world,
        t.position,
        t.cross_radius() + GRIPPER_GAP,
        t.height_level,
        |o| {
            o.id == t.id
                || o.on_slot.map(|s| s.host) == Some(t.id)
                || (host.is_some() && o.on_slot.map(|s| s.host) == host)
        },
    )
}

/// Gripper angle for grasping `o`, and whether it is symmetric.
pub(crate) fn grasp_angle(o: &ObjectInstance) -> (f64, bool) {
    match (o.kind, o.pose) {
        (ObjectKind::ColouredBlock, _) => (o.orientation as f64, false),
        (ObjectKind::Cup, Pose::Toppled) => (o.orientation.rem_euclid(180) as f64, false),
        _ => (0.0, true),
    }
}

/// Gripper angles offered when placing `held`, and whether they are
/// symmetric.
pub(crate) fn place_angles(held: &ObjectInstance) -> (&'static [i32], bool) {
    match (held.kind, held.pose) {
        (ObjectKind::ColouredBlock, _) => (&[0, 90, 180, 270], false),
        (ObjectKind::Cup, Pose::Toppled) => (&[0, 90], false),
        _ => (&[0], true),
    }
}

/// Held object as it would rest on `slot` with gripper angle `angle`.
pub(crate) fn placed_instance(
    world: &WorldState,
    held: &ObjectInstance,
    slot: SlotId,
    angle: i32,
) -> Option<ObjectInstance> {
    let host = world.object(slot.host)?;
    let mut o = *held;
    o.height_level = host.height_level + 1;
    o.on_slot = Some(slot);
    o.position = host.slot_position(slot.index);
    if o.kind == ObjectKind::ColouredBlock || o.pose == Pose::Toppled {
        o.orientation = angle;
    }
    Some(o)
}

/// Ground-truth affordances with their targets.
pub fn ground_affordances(world: &WorldState) -> Vec<GroundAffordance> {
    let mut out = Vec::new();
    let reach = world.reach;
    match &world.holding {
        None => {
            for o in &world.objects {
                if o.kind == ObjectKind::SupportBlock
                    || !reach.contains(o.position)
                    || !grasp_clear(world, o)
                {
                    continue;
                }
                let (angle, sym) = grasp_angle(o);
                out.push(GroundAffordance {
                    detection: detection(
                        AffordanceKind::Grasp,
                        o.position,
                        o.height_level,
                        angle,
                        sym,
                    ),
                    target: Target::Object(o.id),
                });
            }
            if let Some(b) = world.block() {
                if reach.contains(b.position) && grasp_clear(world, b) {
                    out.push(GroundAffordance {
                        detection: detection(
                            AffordanceKind::Turn,
                            b.position,
                            b.height_level,
                            b.orientation as f64,
                            false,
                        ),
                        target: Target::Object(b.id),
                    });
                }
            }
        }
        Some(held) => {
            let (angles, sym) = place_angles(held);
            for host in &world.objects {
                let usable = match host.kind {
                    ObjectKind::SupportBlock => true,
                    ObjectKind::ColouredBlock => held.kind != ObjectKind::ColouredBlock,
                    _ => false,
                };
                if !usable {
                    continue;
                }
                for index in 0..host.slot_count() as u8 {
                    let slot = SlotId {
                        host: host.id,
                        index,
                    };
                    let p = host.slot_position(index);
                    let level = host.height_level + 1;
                    if world.slot_occupant(slot).is_some() || !reach.contains(p) {
                        continue;
                    }
                    let clear =
                        probe_clear(world, p, held.cross_radius() + GRIPPER_GAP, level, |o| {
                            o.id == host.id || o.on_slot.map(|s| s.host) == Some(host.id)
                        });
                    if !clear {
                        continue;
                    }
                    for &angle in angles {
                        let Some(placed) = placed_instance(world, held, slot, angle) else {
                            continue;
                        };
                        let fp = placed.footprint();
                        let fits = world
                            .objects
                            .iter()
                            .filter(|o| o.height_level >= level && o.id != host.id)
                            .all(|o| !o.footprint().overlaps(&fp));
                        if fits {
                            out.push(GroundAffordance {
                                detection: detection(
                                    AffordanceKind::Place,
                                    p,
                                    level,
                                    angle as f64,
                                    sym,
                                ),
                                target: Target::Slot(slot),
                            });
                        }
                    }
                }
            }
        }
    }
    out
}

/// Ground-truth affordance list in the recognizer's output format.
pub fn enumerate_affordances(world: &WorldState) -> Vec<Detection> {
    ground_affordances(world)
        .into_iter()
        .map(|g| g.detection)
        .collect()
}
