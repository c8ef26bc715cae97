//! Affordance recognition from a raster alone.
//!
//! The detector parses the image into object hypotheses (one outline fit per
//! connected colour component), rebuilds an estimated world from them and
//! applies the commencement rules to that estimate. It never sees a
//! `WorldState`, so it runs equally on rendered and predicted states.

mod filter;
mod parse;
mod recall;

pub use filter::{dedup_symmetric, nms_proximity, prune_confidence, recognize, RecognitionConfig};
pub use recall::{
    eval_recall, read_detections, write_detections, RecallReport, RECALL_ANGLE_DEG, RECALL_DIST,
};

use std::collections::HashMap;

use parse::{components, fit, AreaTable, Fit, Members, Parsed, PixelClass};

use crate::affordance::Detection;
use crate::geometry::{Extent, Vec2, REACH};
use crate::microworld::{
    ground_affordances, ObjectId, ObjectInstance, ObjectKind, Pose, SlotId, Target, WorldState,
};
use crate::raster::RasterState;

/// Smallest number of coloured strip pixels read as a held object.
const MIN_STRIP_PIXELS: usize = 2;
/// Strip width (pixels at 32x32) from which a held cup reads as toppled.
const TOPPLED_STRIP_WIDTH: usize = 4;
/// Furthest an on-slot object may sit from the slot it is assigned to.
const SLOT_SNAP: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct DetectorConfig {
    pub resolution: usize,
    /// Per-channel colour tolerance.
    pub colour_tol: f32,
    /// Depth tolerance around each height level's encoding.
    pub depth_tol: f32,
    pub reach: Extent,
    areas: AreaTable,
}

impl DetectorConfig {
    pub fn new(resolution: usize) -> Self {
        Self {
            resolution,
            colour_tol: 0.1,
            depth_tol: 0.1,
            reach: REACH,
            areas: AreaTable::new(resolution),
        }
    }
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self::new(crate::raster::DEFAULT_RESOLUTION)
    }
}

/// An object hypothesis read from the image.
#[derive(Debug, Clone, Copy)]
pub struct ObjectEstimate {
    pub object: ObjectInstance,
    pub confidence: f64,
}

/// Everything the detector reads from one image.
#[derive(Debug, Clone)]
pub struct SceneEstimate {
    pub objects: Vec<ObjectEstimate>,
    pub holding: Option<ObjectInstance>,
}

fn read_strip(p: &Parsed) -> Option<ObjectInstance> {
    let mut counts: HashMap<PixelClass, Vec<usize>> = HashMap::new();
    for i in 0..p.strip * p.n {
        if matches!(
            p.class[i],
            PixelClass::Block | PixelClass::Cup | PixelClass::Ball
        ) {
            counts.entry(p.class[i]).or_default().push(i);
        }
    }
    let (class, pixels) = [PixelClass::Block, PixelClass::Cup, PixelClass::Ball]
        .into_iter()
        .filter_map(|c| counts.remove(&c).map(|v| (c, v)))
        .max_by_key(|(_, v)| v.len())?;
    if pixels.len() < MIN_STRIP_PIXELS {
        return None;
    }
    let kind = match class {
        PixelClass::Block => ObjectKind::ColouredBlock,
        PixelClass::Cup => ObjectKind::Cup,
        _ => ObjectKind::Ball,
    };
    let mut o = ObjectInstance::new(0, kind, Vec2::default());
    if kind == ObjectKind::Cup {
        let xs = pixels.iter().map(|i| i % p.n);
        let width = xs.clone().max().unwrap() - xs.min().unwrap() + 1;
        if width * 32 >= TOPPLED_STRIP_WIDTH * p.n {
            o.pose = Pose::Toppled;
        }
    }
    Some(o)
}

fn proto(kind: ObjectKind, level: u8) -> ObjectInstance {
    let mut o = ObjectInstance::new(0, kind, Vec2::default());
    o.height_level = level;
    o
}

fn confidence(cfg: &DetectorConfig, f: &Fit) -> f64 {
    let s = f.score;
    let quality = s.matched as f64 / (s.matched + s.mismatched).max(1) as f64;
    let coverage = (s.matched + s.occluded) as f64 / cfg.areas.expected(&f.object) as f64;
    (quality * coverage.min(1.0)).clamp(0.0, 1.0)
}

fn best_fit(
    p: &Parsed,
    protos: &[ObjectInstance],
    start: Vec2,
    radius_px: f64,
    members: &Members,
) -> Fit {
    protos
        .iter()
        .map(|&o| fit(p, o, start, radius_px, members))
        .reduce(|a, b| {
            let ka = (a.score.mismatched, usize::MAX - a.score.matched);
            let kb = (b.score.mismatched, usize::MAX - b.score.matched);
            if kb < ka {
                b
            } else {
                a
            }
        })
        .expect("at least one prototype")
}

/// Parse a state into object hypotheses and the gripper contents.
pub fn parse_scene(state: &RasterState, cfg: &DetectorConfig) -> SceneEstimate {
    let p = Parsed::new(state, cfg.colour_tol, cfg.depth_tol);
    let holding = read_strip(&p);
    let comps = components(&p);
    let mut objects = Vec::new();

    // There is at most one coloured block: fit it to all block pixels on the
    // best-populated level, since objects on top can split it apart.
    let mut block_levels: HashMap<u8, Vec<usize>> = HashMap::new();
    for c in comps.iter().filter(|c| c.class == PixelClass::Block) {
        block_levels.entry(c.level).or_default().extend(&c.pixels);
    }
    let block_level = block_levels
        .iter()
        .max_by_key(|(l, v)| (v.len(), std::cmp::Reverse(**l)))
        .map(|(l, _)| *l);
    if let (Some(level), None) = (
        block_level,
        holding.filter(|h| h.kind == ObjectKind::ColouredBlock),
    ) {
        let mut pixels = block_levels.remove(&level).unwrap();
        pixels.sort_unstable();
        let members = Members::new(p.n, &pixels);
        let centroid = parse::Component {
            class: PixelClass::Block,
            level,
            pixels: pixels.clone(),
        }
        .centroid(&p);
        let protos: Vec<_> = [0, 90, 180, 270]
            .into_iter()
            .map(|orientation| {
                let mut o = proto(ObjectKind::ColouredBlock, level);
                o.orientation = orientation;
                o
            })
            .collect();
        let f = best_fit(&p, &protos, centroid, 3.0, &members);
        objects.push(ObjectEstimate {
            object: f.object,
            confidence: confidence(cfg, &f),
        });
    }

    for c in &comps {
        let protos: Vec<ObjectInstance> = match c.class {
            PixelClass::Support => vec![proto(ObjectKind::SupportBlock, c.level)],
            PixelClass::Ball => vec![proto(ObjectKind::Ball, c.level)],
            PixelClass::Cup => {
                let upright = proto(ObjectKind::Cup, c.level);
                let mut toppled = upright;
                toppled.pose = Pose::Toppled;
                let mut across = toppled;
                across.orientation = 90;
                vec![upright, toppled, across]
            }
            _ => continue,
        };
        let members = Members::new(p.n, &c.pixels);
        let radius = if c.class == PixelClass::Support {
            2.0
        } else {
            1.5
        };
        let f = best_fit(&p, &protos, c.centroid(&p), radius, &members);
        objects.push(ObjectEstimate {
            object: f.object,
            confidence: confidence(cfg, &f),
        });
    }
    SceneEstimate { objects, holding }
}

impl SceneEstimate {
    /// Estimated world, with slot relations inferred from positions and
    /// heights. Also returns each object's confidence by id.
    pub fn to_world(&self, reach: Extent) -> (WorldState, Vec<f64>) {
        let mut order: Vec<&ObjectEstimate> = self.objects.iter().collect();
        order.sort_by(|a, b| {
            (a.object.kind, a.object.height_level)
                .cmp(&(b.object.kind, b.object.height_level))
                .then(a.object.position.x.total_cmp(&b.object.position.x))
                .then(a.object.position.y.total_cmp(&b.object.position.y))
        });
        let mut w = WorldState::empty();
        w.reach = reach;
        let mut conf = Vec::new();
        for (i, e) in order.iter().enumerate() {
            let mut o = e.object;
            o.id = i as ObjectId;
            o.on_slot = None;
            w.objects.push(o);
            conf.push(e.confidence);
        }
        let snapshot = w.objects.clone();
        for o in w.objects.iter_mut().filter(|o| o.height_level > 0) {
            let host = if o.kind == ObjectKind::ColouredBlock {
                let fp = o.footprint();
                snapshot
                    .iter()
                    .filter(|s| s.kind == ObjectKind::SupportBlock && s.footprint().overlaps(&fp))
                    .min_by(|a, b| {
                        a.position
                            .dist(o.position)
                            .total_cmp(&b.position.dist(o.position))
                    })
                    .map(|s| SlotId {
                        host: s.id,
                        index: 0,
                    })
            } else {
                snapshot
                    .iter()
                    .filter(|h| h.height_level + 1 == o.height_level)
                    .flat_map(|h| {
                        (0..h.slot_count() as u8).map(move |index| {
                            (SlotId { host: h.id, index }, h.slot_position(index))
                        })
                    })
                    .filter(|(_, sp)| sp.dist(o.position) < SLOT_SNAP)
                    .min_by(|a, b| a.1.dist(o.position).total_cmp(&b.1.dist(o.position)))
                    .map(|(s, _)| s)
            };
            o.on_slot = host;
        }
        if let Some(mut h) = self.holding {
            h.id = w.objects.len() as ObjectId;
            w.holding = Some(h);
        }
        (w, conf)
    }
}

/// Raw detections (before pruning) for one state.
pub fn detect(state: &RasterState, cfg: &DetectorConfig) -> Vec<Detection> {
    if state.resolution() != cfg.resolution {
        return Vec::new();
    }
    let scene = parse_scene(state, cfg);
    let (world, conf) = scene.to_world(cfg.reach);
    ground_affordances(&world)
        .into_iter()
        .map(|g| {
            let id = match g.target {
                Target::Object(id) => id,
                Target::Slot(s) => s.host,
            };
            let mut d = g.detection;
            d.confidence = conf[id as usize];
            d
        })
        .collect()
}
