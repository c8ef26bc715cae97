//! Action effects and stability resolution.

use super::affordances::{ground_affordances, placed_instance, GroundAffordance, Target};
use super::{
    axis_of, normalize_orientation, orientation_of, ObjectId, ObjectKind, Pose, SlotId, WorldState,
    BLOCK_HALF_LEN, ROLL_DISTANCE, SLOT_OFFSETS, SUPPORT_HALF, SWEEP_PAD, TOPPLED_HALF_LEN,
};
use crate::affordance::{AffordanceKind, ParametrizedAffordance, TurnDirection};
use crate::error::{Error, Result};
use crate::geometry::{angle_diff_deg, OrientedRect, Vec2};

/// Largest position error at which an action still matches an affordance.
pub const MATCH_DIST: f64 = 0.025;
/// Largest gripper-angle error for asymmetric affordances.
pub const MATCH_ANGLE_DEG: f64 = 5.0;

const SETTLE_STEP: f64 = 0.01;
const SETTLE_LIMIT: usize = 200;
/// How far a cup falling from a lifted block lands from its slot.
const LIFT_FALL_DISTANCE: f64 = 0.1;

fn matching_affordance(
    world: &WorldState,
    action: &ParametrizedAffordance,
) -> Option<GroundAffordance> {
    let d = &action.detection;
    ground_affordances(world)
        .into_iter()
        .filter(|g| {
            let gd = &g.detection;
            gd.kind == d.kind
                && gd.position.dist(&d.position) <= MATCH_DIST
                && (gd.is_symmetric() || angle_diff_deg(gd.angle, d.angle, 360.0) < MATCH_ANGLE_DEG)
        })
        .min_by(|a, b| {
            let da = a.detection.position.dist(&d.position);
            let db = b.detection.position.dist(&d.position);
            da.total_cmp(&db)
        })
}

/// Execute one affordance. Fails when the action is not afforded in `world`.
pub fn step(world: &WorldState, action: &ParametrizedAffordance) -> Result<WorldState> {
    if !action.is_well_formed() {
        return Err(Error::RejectedInput(
            "turn direction must be set exactly for turn actions".into(),
        ));
    }
    let Some(g) = matching_affordance(world, action) else {
        return Err(Error::Precondition(format!(
            "{} is not afforded",
            action.describe()
        )));
    };
    let mut w = world.clone();
    match (g.target, action.kind()) {
        (Target::Object(id), AffordanceKind::Grasp) => grasp(&mut w, id),
        (Target::Object(id), AffordanceKind::Turn) => {
            turn(&mut w, id, action.turn.expect("checked by is_well_formed"))
        }
        (Target::Slot(slot), AffordanceKind::Place) => {
            place(&mut w, slot, g.detection.angle as i32)
        }
        _ => unreachable!("ground affordance target does not match its kind"),
    }
    Ok(resolve_stability(&w))
}

/// Drop `id` onto the table at `start + dir * dist`, then slide it along
/// `dir` until it no longer overlaps anything on the table. Objects that end
/// up outside the reach extent leave the scene.
fn displace(w: &mut WorldState, id: ObjectId, start: Vec2, dir: Vec2, dist: f64) {
    let Some(i) = w.objects.iter().position(|o| o.id == id) else {
        return;
    };
    let mut o = w.objects[i];
    o.height_level = 0;
    o.on_slot = None;
    o.position = start + dir * dist;
    for _ in 0..SETTLE_LIMIT {
        let fp = o.footprint();
        let blocked = w
            .objects
            .iter()
            .any(|p| p.id != id && p.height_level == 0 && p.footprint().overlaps(&fp));
        if !blocked {
            break;
        }
        o.position = o.position + dir * SETTLE_STEP;
    }
    if w.reach.contains(o.position) {
        w.objects[i] = o;
    } else {
        w.objects.remove(i);
        w.removed.push(id);
    }
}

fn topple(w: &mut WorldState, id: ObjectId, dir: Vec2) {
    if let Some(o) = w.object_mut(id) {
        if o.kind == ObjectKind::Cup && o.pose == Pose::Upright {
            o.pose = Pose::Toppled;
            o.orientation = orientation_of(dir);
        }
    }
}

/// Direction away from the block centre for an object leaving slot `index`.
fn away_from_block(axis: Vec2, index: u8) -> Vec2 {
    let off = SLOT_OFFSETS[index as usize];
    if off == 0.0 {
        axis.perp()
    } else {
        axis * off.signum()
    }
}

fn grasp(w: &mut WorldState, id: ObjectId) {
    let i = w
        .objects
        .iter()
        .position(|o| o.id == id)
        .expect("grasp target exists");
    let mut held = w.objects.remove(i);
    if held.kind == ObjectKind::ColouredBlock {
        let riders: Vec<_> = w
            .resting_on(id)
            .iter()
            .map(|o| (o.id, o.kind, o.on_slot))
            .collect();
        for (rid, kind, slot) in riders {
            let index = slot.expect("rider has a slot").index;
            let start = held.slot_position(index);
            let dir = away_from_block(held.axis(), index);
            if kind == ObjectKind::Ball {
                displace(w, rid, start, dir, ROLL_DISTANCE);
            } else {
                topple(w, rid, dir);
                displace(w, rid, start, dir, LIFT_FALL_DISTANCE);
            }
        }
    }
    held.height_level = 0;
    held.on_slot = None;
    w.holding = Some(held);
}

fn place(w: &mut WorldState, slot: SlotId, angle: i32) {
    let held = w.holding.take().expect("place requires a held object");
    let placed = placed_instance(w, &held, slot, angle).expect("place host exists");
    w.objects.push(placed);
    w.sort_objects();
}

/// Unit tangent of a rotation about `centre` at `p`, in the turn direction.
fn tangent(centre: Vec2, p: Vec2, fallback_axis: Vec2, sign: f64) -> Vec2 {
    let r = p - centre;
    let t = if r.norm() < 1e-9 {
        fallback_axis.perp()
    } else {
        r.perp().normalized()
    };
    t * sign
}

fn turn(w: &mut WorldState, id: ObjectId, dir: TurnDirection) {
    let block = *w.object(id).expect("turn target exists");
    let sign = dir.sign();
    let delta = if sign > 0.0 { 90 } else { -90 };
    let new_orientation = normalize_orientation(block.orientation + delta);
    let new_fp = block.footprint_at(block.position, new_orientation);

    // A support in the way, or losing the support underneath, stalls the turn.
    let supports: Vec<_> = w.supports().copied().collect();
    if supports
        .iter()
        .any(|s| s.height_level == block.height_level && s.footprint().overlaps(&new_fp))
    {
        return;
    }
    if block.height_level > 0 && !supports.iter().any(|s| s.footprint().overlaps(&new_fp)) {
        return;
    }

    let old_axis = block.axis();
    let sweep: Vec<OrientedRect> = (1..=90)
        .map(|k| OrientedRect {
            centre: block.position,
            angle_deg: block.orientation as f64 + sign * k as f64,
            half_len: BLOCK_HALF_LEN + SWEEP_PAD,
            half_wid: super::BLOCK_HALF_WID + SWEEP_PAD,
        })
        .collect();
    let swept: Vec<ObjectId> = w
        .objects
        .iter()
        .filter(|o| {
            o.id != id
                && o.kind != ObjectKind::SupportBlock
                && o.height_level == block.height_level
                && o.on_slot.map(|s| s.host) != Some(id)
        })
        .filter(|o| {
            let r = o.footprint().bounding_radius();
            sweep.iter().any(|rect| rect.distance_to(o.position) < r)
        })
        .map(|o| o.id)
        .collect();

    let riders: Vec<_> = w.resting_on(id).iter().map(|o| **o).collect();
    w.object_mut(id).expect("block").orientation = new_orientation;
    let new_axis = axis_of(new_orientation);

    for r in riders {
        let index = r.on_slot.expect("rider has a slot").index;
        let old_pos = r.position;
        if r.kind == ObjectKind::Ball {
            let t = tangent(block.position, old_pos, old_axis, sign);
            displace(w, r.id, old_pos, t, ROLL_DISTANCE);
        } else {
            let o = w.object_mut(r.id).expect("rider");
            o.position = block.position + new_axis * SLOT_OFFSETS[index as usize];
            if o.pose == Pose::Toppled {
                o.orientation = normalize_orientation(o.orientation + delta);
            }
        }
    }

    for sid in swept {
        let Some(o) = w.object(sid).copied() else {
            continue;
        };
        let t = tangent(block.position, o.position, old_axis, sign);
        if o.kind == ObjectKind::Ball {
            displace(w, sid, o.position, t, ROLL_DISTANCE);
        } else {
            topple(w, sid, t);
            displace(w, sid, o.position, t, 0.0);
        }
    }
}

/// Tip objects off an overloaded block until its centre of mass lies over
/// the single support it rests on.
pub fn resolve_stability(world: &WorldState) -> WorldState {
    let mut w = world.clone();
    while let Some(block) = w.block().copied() {
        let supports = w.supports_under(&block);
        if supports.len() != 1 {
            break;
        }
        let axis = block.axis();
        let rel = (supports[0].position - block.position).dot(axis);
        let (lo, hi) = (rel - SUPPORT_HALF, rel + SUPPORT_HALF);
        let riders: Vec<_> = w
            .resting_on(block.id)
            .iter()
            .map(|o| {
                (
                    o.id,
                    o.kind,
                    SLOT_OFFSETS[o.on_slot.expect("rider slot").index as usize],
                )
            })
            .collect();
        let total: f64 = block.kind.mass() + riders.iter().map(|r| r.1.mass()).sum::<f64>();
        let com = riders.iter().map(|r| r.1.mass() * r.2).sum::<f64>() / total;
        if com >= lo - 1e-12 && com <= hi + 1e-12 {
            break;
        }
        let side = if com > hi { 1.0 } else { -1.0 };
        let Some(&(vid, vkind, off)) = riders
            .iter()
            .filter(|r| r.2 * side > 0.0)
            .max_by(|a, b| (a.2 * side).total_cmp(&(b.2 * side)))
        else {
            break;
        };
        let dir = axis * side;
        let start = block.position + axis * off;
        let to_end = BLOCK_HALF_LEN - off * side;
        if vkind == ObjectKind::Ball {
            displace(&mut w, vid, start, dir, to_end + ROLL_DISTANCE);
        } else {
            topple(&mut w, vid, dir);
            displace(&mut w, vid, start, dir, to_end + TOPPLED_HALF_LEN);
        }
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affordance::{Detection, Point3};
    use crate::microworld::{enumerate_affordances, ObjectInstance, LEVEL_HEIGHT};

    fn obj(id: ObjectId, kind: ObjectKind, x: f64, y: f64) -> ObjectInstance {
        ObjectInstance::new(id, kind, Vec2::new(x, y))
    }

    fn on(mut o: ObjectInstance, host: &ObjectInstance, index: u8) -> ObjectInstance {
        o.position = host.slot_position(index);
        o.height_level = host.height_level + 1;
        o.on_slot = Some(SlotId {
            host: host.id,
            index,
        });
        o
    }

    fn act(kind: AffordanceKind, x: f64, y: f64, level: u8, angle: f64) -> ParametrizedAffordance {
        let d = Detection {
            kind,
            position: Point3::new(x, y, level as f64 * LEVEL_HEIGHT),
            angle,
            symmetry: 0.0,
            confidence: 1.0,
        };
        ParametrizedAffordance {
            detection: d,
            turn: None,
        }
    }

    fn turn_act(
        x: f64,
        y: f64,
        level: u8,
        angle: f64,
        dir: TurnDirection,
    ) -> ParametrizedAffordance {
        let mut a = act(AffordanceKind::Turn, x, y, level, angle);
        a.turn = Some(dir);
        a
    }

    #[test]
    fn turn_topples_cup_in_sweep() {
        let mut w = WorldState::empty();
        w.objects.push(obj(0, ObjectKind::ColouredBlock, 0.5, 0.5));
        // Beside the +x end, on the side a counter-clockwise turn sweeps into.
        w.objects.push(obj(1, ObjectKind::Cup, 0.6, 0.6));
        w.validate().unwrap();
        let next = step(&w, &turn_act(0.5, 0.5, 0, 0.0, TurnDirection::Ccw)).unwrap();
        let b = next.object(0).unwrap();
        assert_eq!(b.orientation, 90);
        let cups: Vec<_> = next
            .objects
            .iter()
            .filter(|o| o.kind == ObjectKind::Cup)
            .collect();
        assert!(cups.is_empty() || cups[0].pose == Pose::Toppled);
        next.validate().unwrap();
    }

    #[test]
    fn cup_on_slot_turns_with_block() {
        let mut w = WorldState::empty();
        let b = obj(0, ObjectKind::ColouredBlock, 0.5, 0.5);
        w.objects.push(b);
        w.objects.push(on(obj(1, ObjectKind::Cup, 0.0, 0.0), &b, 2));
        w.validate().unwrap();
        let next = step(&w, &turn_act(0.5, 0.5, 0, 0.0, TurnDirection::Ccw)).unwrap();
        let cup = next.object(1).unwrap();
        assert_eq!(cup.pose, Pose::Upright);
        assert_eq!(cup.on_slot.unwrap().index, 2);
        assert!(cup.position.dist(Vec2::new(0.5, 0.6)) < 1e-12);
    }

    #[test]
    fn lifting_block_drops_ball_which_rolls_away() {
        let mut w = WorldState::empty();
        let b = obj(0, ObjectKind::ColouredBlock, 0.5, 0.5);
        w.objects.push(b);
        w.objects
            .push(on(obj(1, ObjectKind::Ball, 0.0, 0.0), &b, 2));
        let next = step(&w, &act(AffordanceKind::Grasp, 0.5, 0.5, 0, 0.0)).unwrap();
        assert_eq!(next.holding.unwrap().id, 0);
        let ball = next.object(1).unwrap();
        assert_eq!(ball.height_level, 0);
        assert!(ball.position.dist(Vec2::new(0.75, 0.5)) < 1e-12);

        // Near the edge the same roll leaves the reachable area.
        let mut w2 = w.clone();
        w2.objects[0].position = Vec2::new(0.75, 0.5);
        w2.objects[1].position = w2.objects[0].slot_position(2);
        let next = step(&w2, &act(AffordanceKind::Grasp, 0.75, 0.5, 0, 0.0)).unwrap();
        assert!(next.object(1).is_none());
        assert_eq!(next.removed, vec![1]);
    }

    #[test]
    fn unafforded_action_is_a_precondition_error() {
        let w = WorldState::empty();
        let e = step(&w, &act(AffordanceKind::Grasp, 0.5, 0.5, 0, 0.0)).unwrap_err();
        assert!(matches!(e, Error::Precondition(_)));
    }

    fn block_on_support(support_offset: f64) -> (WorldState, ObjectInstance) {
        let mut w = WorldState::empty();
        let mut b = obj(0, ObjectKind::ColouredBlock, 0.5, 0.5);
        w.objects.push(b);
        let s = obj(1, ObjectKind::SupportBlock, 0.5 + support_offset, 0.5);
        w.objects.push(s);
        b = on(b, &s, 0);
        b.position = Vec2::new(0.5, 0.5);
        w.objects[0] = b;
        (w, b)
    }

    #[test]
    fn centred_support_with_centre_cup_is_stable() {
        let (mut w, b) = block_on_support(0.0);
        w.objects.push(on(obj(2, ObjectKind::Cup, 0.0, 0.0), &b, 1));
        assert_eq!(resolve_stability(&w), w);
    }

    #[test]
    fn far_end_cup_tips_off_offset_support() {
        // Support spans [-0.095, 0.005] along the axis. Block alone: CoM 0.
        // With a cup at +0.1: CoM = 0.1 / 3 = 0.0333 > 0.005, so it tips.
        let (mut w, b) = block_on_support(-0.045);
        w.objects.push(on(obj(2, ObjectKind::Cup, 0.0, 0.0), &b, 2));
        let r = resolve_stability(&w);
        let cup = r.object(2).unwrap();
        assert_eq!(cup.pose, Pose::Toppled);
        assert_eq!(cup.height_level, 0);
        assert!(cup.position.x > 0.5 + BLOCK_HALF_LEN);
        assert_eq!(r.object(0).unwrap().height_level, 1);
        r.validate().unwrap();
    }

    #[test]
    fn counterbalance_is_stable() {
        // Central support at +0.04: span [-0.01, 0.09]. Ball at -0.1 and cup
        // at +0.1 give CoM 0, inside the span.
        let (mut w, b) = block_on_support(0.04);
        w.objects
            .push(on(obj(2, ObjectKind::Ball, 0.0, 0.0), &b, 0));
        w.objects.push(on(obj(3, ObjectKind::Cup, 0.0, 0.0), &b, 2));
        assert_eq!(resolve_stability(&w), w);
        // The ball alone would tip: CoM -0.1/3 < -0.01.
        w.objects.pop();
        let r = resolve_stability(&w);
        assert_eq!(r.object(2).unwrap().height_level, 0);
    }

    #[test]
    fn step_is_bit_exact_and_conserves_objects() {
        let (mut w, b) = block_on_support(0.0);
        w.objects.push(on(obj(2, ObjectKind::Cup, 0.0, 0.0), &b, 0));
        w.objects.push(obj(3, ObjectKind::Ball, 0.25, 0.25));
        w.validate().unwrap();
        for a in enumerate_affordances(&w) {
            let pa = if a.kind == AffordanceKind::Turn {
                ParametrizedAffordance::turn(a, TurnDirection::Cw)
            } else {
                ParametrizedAffordance::plain(a)
            };
            let n1 = step(&w, &pa).unwrap();
            let n2 = step(&w, &pa).unwrap();
            assert_eq!(n1, n2);
            let mut ids = n1.all_ids();
            ids.extend(&n1.removed);
            ids.sort_unstable();
            assert_eq!(ids, vec![0, 1, 2, 3]);
            n1.validate().unwrap();
        }
    }
}
