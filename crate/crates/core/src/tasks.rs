//! The ten-task suite: hand-built scenes with image goals covering order
//! dependence, blocked access, counterbalancing, turning and three goals to
//! avoid.
//!
//! Positive goals are crops of the render reached by a reference plan;
//! negative goals are crops of the initial render around the object to get
//! rid of.

use crate::affordance::{AffordanceKind, ParametrizedAffordance, Point3, TurnDirection};
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::microworld::{
    ground_affordances, render, step, ObjectInstance, ObjectKind, SlotId, WorldState, LEVEL_HEIGHT,
};
use crate::raster::{GoalSpec, Polarity, Raster};

pub const TASK_RESOLUTION: usize = 32;
pub const TASK_COUNT: usize = 10;

#[derive(Debug, Clone)]
pub struct Task {
    /// 1-based.
    pub id: usize,
    pub name: &'static str,
    pub description: &'static str,
    pub world: WorldState,
    pub goal: GoalSpec,
    pub n_max: usize,
    /// Plan used to draw a positive goal; empty for negative goals.
    pub reference: Vec<ParametrizedAffordance>,
}

impl Task {
    pub fn file_stem(&self) -> String {
        format!("task{:02}", self.id)
    }
}

/// One step of a reference plan: the ground-truth affordance of `kind`
/// nearest to `(x, y)` at height `level`, optionally with a given gripper
/// angle.
#[derive(Debug, Clone, Copy)]
struct Ref {
    kind: AffordanceKind,
    at: (f64, f64),
    level: u8,
    angle: Option<f64>,
    turn: Option<TurnDirection>,
}

fn grasp(x: f64, y: f64, level: u8) -> Ref {
    Ref {
        kind: AffordanceKind::Grasp,
        at: (x, y),
        level,
        angle: None,
        turn: None,
    }
}

fn place(x: f64, y: f64, level: u8) -> Ref {
    Ref {
        kind: AffordanceKind::Place,
        at: (x, y),
        level,
        angle: None,
        turn: None,
    }
}

fn place_at(x: f64, y: f64, level: u8, angle: f64) -> Ref {
    Ref {
        angle: Some(angle),
        ..place(x, y, level)
    }
}

fn turn(x: f64, y: f64, level: u8, dir: TurnDirection) -> Ref {
    Ref {
        kind: AffordanceKind::Turn,
        at: (x, y),
        level,
        angle: None,
        turn: Some(dir),
    }
}

fn resolve(world: &WorldState, r: Ref) -> Result<ParametrizedAffordance> {
    let target = Point3::new(r.at.0, r.at.1, r.level as f64 * LEVEL_HEIGHT);
    let d = ground_affordances(world)
        .into_iter()
        .map(|g| g.detection)
        .filter(|d| d.kind == r.kind && r.angle.is_none_or(|a| d.angle == a))
        .min_by(|a, b| {
            a.position
                .dist(&target)
                .total_cmp(&b.position.dist(&target))
        })
        .ok_or_else(|| Error::Precondition(format!("no {} near {:?}", r.kind.name(), r.at)))?;
    Ok(match r.turn {
        Some(dir) => ParametrizedAffordance::turn(d, dir),
        None => ParametrizedAffordance::plain(d),
    })
}

/// Pixel rectangle covering a world rectangle, clamped to the image.
fn crop(world: &WorldState, centre: (f64, f64), half: (f64, f64)) -> Result<Raster> {
    let n = TASK_RESOLUTION as f64;
    let x0 = ((centre.0 - half.0) * n).floor().max(0.0) as usize;
    let y0 = ((centre.1 - half.1) * n).floor().max(0.0) as usize;
    let x1 = (((centre.0 + half.0) * n).ceil() as usize).min(TASK_RESOLUTION);
    let y1 = (((centre.1 + half.1) * n).ceil() as usize).min(TASK_RESOLUTION);
    render(world, TASK_RESOLUTION)
        .raster()
        .crop(x0, y0, x1 - x0, y1 - y0)
}

fn obj(id: u32, kind: ObjectKind, x: f64, y: f64) -> ObjectInstance {
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

/// Block resting on `support`, offset from the support centre by `offset`
/// along +x.
fn block_on(id: u32, support: &ObjectInstance, offset: f64) -> ObjectInstance {
    let mut b = obj(
        id,
        ObjectKind::ColouredBlock,
        support.position.x - offset,
        support.position.y,
    );
    b.height_level = 1;
    b.on_slot = Some(SlotId {
        host: support.id,
        index: 0,
    });
    b
}

fn world(objects: Vec<ObjectInstance>) -> Result<WorldState> {
    let mut w = WorldState::empty();
    w.objects = objects;
    w.validate()?;
    Ok(w)
}

struct Spec {
    name: &'static str,
    description: &'static str,
    world: WorldState,
    polarity: Polarity,
    n_max: usize,
    plan: Vec<Ref>,
    centre: (f64, f64),
    half: (f64, f64),
}

fn build(id: usize, s: Spec) -> Result<Task> {
    let mut reference = Vec::new();
    let mut cur = s.world.clone();
    for r in &s.plan {
        let a = resolve(&cur, *r)?;
        cur = step(&cur, &a)?;
        reference.push(a);
    }
    let goal = crop(&cur, s.centre, s.half)?;
    Ok(Task {
        id,
        name: s.name,
        description: s.description,
        world: s.world,
        goal: GoalSpec::with_default_mask(goal, s.polarity)?,
        n_max: s.n_max,
        reference,
    })
}

/// Scenes sharing one layout: a block on a support that sits `offset` to the
/// block's +x side, so riders on the far side tip the block.
fn counterbalance(offset: f64, ball_on_block: bool) -> Result<WorldState> {
    let support = obj(0, ObjectKind::SupportBlock, 0.5 + offset, 0.5);
    let block = block_on(1, &support, offset);
    let ball = if ball_on_block {
        on(obj(2, ObjectKind::Ball, 0.0, 0.0), &block, 1)
    } else {
        obj(2, ObjectKind::Ball, 0.3, 0.25)
    };
    let cup = obj(3, ObjectKind::Cup, 0.7, 0.25);
    world(vec![support, block, ball, cup])
}

/// Build all ten tasks.
pub fn task_suite() -> Result<Vec<Task>> {
    use ObjectKind::*;
    use TurnDirection::*;
    let block_area = |x: f64, y: f64| ((x, y), (0.16, 0.06));

    let t1 = {
        let block = obj(0, ColouredBlock, 0.45, 0.55);
        let ball = on(obj(1, Ball, 0.0, 0.0), &block, 2);
        world(vec![
            block,
            ball,
            obj(2, Cup, 0.3, 0.3),
            obj(3, SupportBlock, 0.7, 0.3),
        ])?
    };
    let (c1, h1) = block_area(0.45, 0.55);
    let t2 = world(vec![
        obj(0, ColouredBlock, 0.4, 0.6),
        obj(1, Cup, 0.5, 0.69),
        obj(2, SupportBlock, 0.7, 0.35),
    ])?;
    let (c2, h2) = block_area(0.7, 0.35);
    let (c3, h3) = block_area(0.5, 0.5);

    let t6 = {
        let block = obj(0, ColouredBlock, 0.5, 0.5);
        let cup = on(obj(1, Cup, 0.0, 0.0), &block, 2);
        world(vec![block, cup])?
    };
    let t7 = world(vec![
        obj(0, ColouredBlock, 0.5, 0.5),
        obj(1, Ball, 0.59, 0.59),
    ])?;
    let t8 = {
        let support = obj(0, SupportBlock, 0.68, 0.5);
        let block = block_on(1, &support, -0.04);
        let ball = on(obj(2, Ball, 0.0, 0.0), &block, 2);
        let cup = on(obj(3, Cup, 0.0, 0.0), &block, 0);
        world(vec![support, block, ball, cup])?
    };
    let t9 = t6.clone();
    let t10 = world(vec![
        obj(0, SupportBlock, 0.5, 0.5),
        obj(1, Ball, 0.6, 0.5),
        obj(2, ColouredBlock, 0.5, 0.25),
    ])?;
    let small = (0.06, 0.06);

    let specs = vec![
        Spec {
            name: "order dependence",
            description: "a ball occupies the slot the cup should go to; park the ball on the support first",
            world: t1,
            polarity: Polarity::Positive,
            n_max: 4,
            plan: vec![grasp(0.55, 0.55, 1), place(0.7, 0.3, 1), grasp(0.3, 0.3, 0), place(0.55, 0.55, 1)],
            centre: c1,
            half: h1,
        },
        Spec {
            name: "blocked access",
            description: "the cup stands too close to the block to be grasped; move the block onto the support, then stack the cup on it",
            world: t2,
            polarity: Polarity::Positive,
            n_max: 4,
            plan: vec![grasp(0.4, 0.6, 0), place_at(0.7, 0.35, 1, 0.0), grasp(0.5, 0.69, 0), place(0.7, 0.35, 2)],
            centre: c2,
            half: h2,
        },
        Spec {
            name: "unstable direct placement",
            description: "placing the cup straight onto the overhanging end tips it off; move the ball to the other end first",
            world: counterbalance(0.04, true)?,
            polarity: Polarity::Positive,
            n_max: 4,
            plan: vec![grasp(0.5, 0.5, 2), place(0.6, 0.5, 2), grasp(0.7, 0.25, 0), place(0.4, 0.5, 2)],
            centre: c3,
            half: h3,
        },
        Spec {
            name: "counterbalance, ball first",
            description: "ball on the left end, cup on the right; the support sits left of centre so the ball must go first",
            world: counterbalance(-0.04, false)?,
            polarity: Polarity::Positive,
            n_max: 4,
            plan: vec![grasp(0.3, 0.25, 0), place(0.4, 0.5, 2), grasp(0.7, 0.25, 0), place(0.6, 0.5, 2)],
            centre: c3,
            half: h3,
        },
        Spec {
            name: "counterbalance, cup first",
            description: "same goal with the support right of centre, so the cup must go first",
            world: counterbalance(0.04, false)?,
            polarity: Polarity::Positive,
            n_max: 4,
            plan: vec![grasp(0.7, 0.25, 0), place(0.6, 0.5, 2), grasp(0.3, 0.25, 0), place(0.4, 0.5, 2)],
            centre: c3,
            half: h3,
        },
        Spec {
            name: "turn with cup on top",
            description: "rotate the block a quarter turn counter-clockwise; the cup rides along",
            world: t6,
            polarity: Polarity::Positive,
            n_max: 2,
            plan: vec![turn(0.5, 0.5, 0, Ccw)],
            centre: (0.5, 0.5),
            half: (0.16, 0.16),
        },
        Spec {
            name: "turn to push ball",
            description: "the ball is too close to the block to grasp; a counter-clockwise turn sweeps it to the goal spot",
            world: t7,
            polarity: Polarity::Positive,
            n_max: 2,
            plan: vec![turn(0.5, 0.5, 0, Ccw)],
            centre: (0.5, 0.6),
            half: (0.1, 0.13),
        },
        Spec {
            name: "roll ball off",
            description: "get rid of the ball resting on the overhanging end of a balanced block",
            world: t8,
            polarity: Polarity::Negative,
            n_max: 2,
            plan: vec![],
            centre: (0.82, 0.5),
            half: small,
        },
        Spec {
            name: "fling cup",
            description: "get rid of the upright cup standing on the block",
            world: t9,
            polarity: Polarity::Negative,
            n_max: 2,
            plan: vec![],
            centre: (0.6, 0.5),
            half: small,
        },
        Spec {
            name: "cover ball",
            description: "get rid of a ball that cannot be grasped; the block can be placed over it",
            world: t10,
            polarity: Polarity::Negative,
            n_max: 2,
            plan: vec![],
            centre: (0.6, 0.5),
            half: small,
        },
    ];
    specs
        .into_iter()
        .enumerate()
        .map(|(i, s)| build(i + 1, s))
        .collect()
}
