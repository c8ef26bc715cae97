//! Raster-to-scene parsing: pixel classification, connected components and
//! occlusion-aware outline fitting.

use std::collections::HashMap;

use crate::geometry::{Vec2, TABLE};
use crate::microworld::{depth_of_level, strip_rows, ObjectInstance, ObjectKind, Palette, Pose};
use crate::raster::{Projection, RasterState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub(crate) enum PixelClass {
    Table,
    Support,
    Block,
    Cup,
    Ball,
    Unknown,
}

fn close(a: &[f32], b: &[f32; 3], tol: f32) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

fn classify(rgb: &[f32], tol: f32) -> PixelClass {
    if close(rgb, &Palette::TABLE, tol) {
        PixelClass::Table
    } else if close(rgb, &Palette::SUPPORT, tol) {
        PixelClass::Support
    } else if close(rgb, &Palette::BLOCK_FRONT, tol) || close(rgb, &Palette::BLOCK_BACK, tol) {
        PixelClass::Block
    } else if close(rgb, &Palette::CUP, tol) {
        PixelClass::Cup
    } else if close(rgb, &Palette::BALL, tol) {
        PixelClass::Ball
    } else {
        PixelClass::Unknown
    }
}

fn level_of(d: f32, tol: f32) -> Option<u8> {
    let l = (d * 4.0).round();
    ((0.0..=4.0).contains(&l) && (d - depth_of_level(l as u8)).abs() <= tol).then_some(l as u8)
}

/// Per-pixel view of a state.
pub(crate) struct Parsed<'a> {
    pub state: &'a RasterState,
    pub n: usize,
    pub strip: usize,
    pub class: Vec<PixelClass>,
    pub level: Vec<Option<u8>>,
    pub projection: Projection,
    pub tol: f32,
}

impl<'a> Parsed<'a> {
    pub fn new(state: &'a RasterState, colour_tol: f32, depth_tol: f32) -> Self {
        let n = state.resolution();
        let mut class = Vec::with_capacity(n * n);
        let mut level = Vec::with_capacity(n * n);
        for px in state.data().chunks_exact(4) {
            class.push(classify(&px[..3], colour_tol));
            level.push(level_of(px[3], depth_tol));
        }
        Self {
            state,
            n,
            strip: strip_rows(n),
            class,
            level,
            projection: Projection::new(TABLE, n, n).expect("table extent"),
            tol: colour_tol,
        }
    }

    fn rgb(&self, i: usize) -> &[f32] {
        &self.state.data()[i * 4..i * 4 + 3]
    }

    pub fn pixel_of(&self, p: Vec2) -> (f64, f64) {
        self.projection.to_pixel_f(p)
    }
}

/// Connected pixels sharing a class and height level.
pub(crate) struct Component {
    pub class: PixelClass,
    pub level: u8,
    pub pixels: Vec<usize>,
}

impl Component {
    /// Centroid in world coordinates.
    pub fn centroid(&self, p: &Parsed) -> Vec2 {
        let (mut sx, mut sy) = (0.0, 0.0);
        for &i in &self.pixels {
            sx += (i % p.n) as f64 + 0.5;
            sy += (i / p.n) as f64 + 0.5;
        }
        let k = self.pixels.len() as f64;
        p.projection.to_world(sx / k, sy / k)
    }
}

/// 8-connected components of object-coloured pixels below the gripper strip.
pub(crate) fn components(p: &Parsed) -> Vec<Component> {
    let n = p.n;
    let mut seen = vec![false; n * n];
    let mut out = Vec::new();
    for start in p.strip * n..n * n {
        let class = p.class[start];
        if seen[start] || matches!(class, PixelClass::Table | PixelClass::Unknown) {
            continue;
        }
        let Some(level) = p.level[start] else {
            continue;
        };
        let mut pixels = vec![start];
        seen[start] = true;
        let mut head = 0;
        while head < pixels.len() {
            let i = pixels[head];
            head += 1;
            let (x, y) = ((i % n) as i64, (i / n) as i64);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < p.strip as i64 || nx >= n as i64 || ny >= n as i64 {
                        continue;
                    }
                    let j = ny as usize * n + nx as usize;
                    if !seen[j] && p.class[j] == class && p.level[j] == Some(level) {
                        seen[j] = true;
                        pixels.push(j);
                    }
                }
            }
        }
        pixels.sort_unstable();
        out.push(Component {
            class,
            level,
            pixels,
        });
    }
    out
}

/// Pixels an outline is expected to explain.
pub(crate) struct Members {
    pub mask: Vec<bool>,
    pub count: usize,
}

impl Members {
    pub fn new(n: usize, pixels: &[usize]) -> Self {
        let mut mask = vec![false; n * n];
        for &i in pixels {
            mask[i] = true;
        }
        Self {
            mask,
            count: pixels.len(),
        }
    }
}

/// Agreement between an outline hypothesis and the image.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct Score {
    pub matched: usize,
    pub occluded: usize,
    pub mismatched: usize,
}

fn score(p: &Parsed, o: &ObjectInstance, member: &Members) -> Score {
    let n = p.n;
    let r = o.footprint().bounding_radius();
    let (x0, y0) = p.pixel_of(o.position - Vec2::new(r, r));
    let (x1, y1) = p.pixel_of(o.position + Vec2::new(r, r));
    let lo = |v: f64| (v.floor().max(0.0) as usize).min(n);
    let hi = |v: f64| ((v.floor() + 1.0).max(0.0) as usize).min(n);
    let mut s = Score::default();
    let mut inside_members = 0;
    for py in lo(y0)..hi(y1) {
        for px in lo(x0)..hi(x1) {
            let Some(col) = o.colour_at(p.projection.pixel_centre(px, py)) else {
                continue;
            };
            let i = py * n + px;
            if member.mask[i] {
                inside_members += 1;
            }
            if py < p.strip || p.level[i].is_some_and(|l| l > o.height_level) {
                s.occluded += 1;
            } else if p.level[i] == Some(o.height_level) && close(p.rgb(i), &col, p.tol) {
                s.matched += 1;
            } else {
                s.mismatched += 1;
            }
        }
    }
    s.mismatched += member.count - inside_members.min(member.count);
    s
}

/// Fitted object with its evidence.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Fit {
    pub object: ObjectInstance,
    pub score: Score,
}

fn better(a: &Score, b: &Score) -> bool {
    (a.mismatched, usize::MAX - a.matched) < (b.mismatched, usize::MAX - b.matched)
}

/// Best placement of `proto` near `start`: a coarse grid search, then the
/// mean of all equally good positions on a fine grid.
pub(crate) fn fit(
    p: &Parsed,
    proto: ObjectInstance,
    start: Vec2,
    radius_px: f64,
    member: &Members,
) -> Fit {
    let px = p.projection.pixel_size();
    let at = |c: Vec2| {
        let mut o = proto;
        o.position = c;
        o
    };
    let coarse = 0.25;
    let k = (radius_px / coarse).ceil() as i64;
    let mut best = (start, score(p, &at(start), member));
    for iy in -k..=k {
        for ix in -k..=k {
            let c = start + Vec2::new(ix as f64, iy as f64) * (coarse * px);
            let s = score(p, &at(c), member);
            if better(&s, &best.1) {
                best = (c, s);
            }
        }
    }
    let fine = 1.0 / 16.0;
    let k = 8;
    let mut ties: Vec<Vec2> = Vec::new();
    let mut top = best.1;
    for iy in -k..=k {
        for ix in -k..=k {
            let c = best.0 + Vec2::new(ix as f64, iy as f64) * (fine * px);
            let s = score(p, &at(c), member);
            if better(&s, &top) {
                top = s;
                ties.clear();
            }
            if s.mismatched == top.mismatched && s.matched == top.matched {
                ties.push(c);
            }
        }
    }
    let mean = ties.iter().fold(Vec2::default(), |acc, &c| acc + c) * (1.0 / ties.len() as f64);
    let s = score(p, &at(mean), member);
    if s.mismatched == top.mismatched && s.matched == top.matched {
        return Fit {
            object: at(mean),
            score: s,
        };
    }
    let nearest = ties
        .iter()
        .copied()
        .min_by(|a, b| a.dist(mean).total_cmp(&b.dist(mean)))
        .expect("at least one tie");
    Fit {
        object: at(nearest),
        score: top,
    }
}

/// Smallest number of pixel centres an outline covers over all sub-pixel
/// placements.
pub(crate) fn min_pixel_count(proto: ObjectInstance, n: usize) -> usize {
    let projection = Projection::new(TABLE, n, n).expect("table extent");
    let px = projection.pixel_size();
    let mut best = usize::MAX;
    let steps = 8;
    for sy in 0..steps {
        for sx in 0..steps {
            let mut o = proto;
            o.position = Vec2::new(
                0.5 + sx as f64 * px / steps as f64,
                0.5 + sy as f64 * px / steps as f64,
            );
            let r = o.footprint().bounding_radius() / px + 1.0;
            let (cx, cy) = projection.to_pixel_f(o.position);
            let mut count = 0;
            for py in (cy - r).floor() as i64..=(cy + r).ceil() as i64 {
                for pxi in (cx - r).floor() as i64..=(cx + r).ceil() as i64 {
                    let c = projection.to_world(pxi as f64 + 0.5, py as f64 + 0.5);
                    if o.colour_at(c).is_some() {
                        count += 1;
                    }
                }
            }
            best = best.min(count);
        }
    }
    best.max(1)
}

/// Cache of [`min_pixel_count`] per outline shape.
#[derive(Debug, Clone, Default)]
pub(crate) struct AreaTable {
    n: usize,
    table: HashMap<(ObjectKind, Pose, i32), usize>,
}

impl AreaTable {
    pub fn new(n: usize) -> Self {
        let mut table = HashMap::new();
        let shapes = [
            (ObjectKind::ColouredBlock, Pose::Upright, 0),
            (ObjectKind::ColouredBlock, Pose::Upright, 90),
            (ObjectKind::SupportBlock, Pose::Upright, 0),
            (ObjectKind::Cup, Pose::Upright, 0),
            (ObjectKind::Cup, Pose::Toppled, 0),
            (ObjectKind::Cup, Pose::Toppled, 90),
            (ObjectKind::Ball, Pose::Upright, 0),
        ];
        for (kind, pose, orientation) in shapes {
            let mut o = ObjectInstance::new(0, kind, Vec2::default());
            o.pose = pose;
            o.orientation = orientation;
            table.insert((kind, pose, orientation), min_pixel_count(o, n));
        }
        Self { n, table }
    }

    pub fn expected(&self, o: &ObjectInstance) -> usize {
        let orientation = match (o.kind, o.pose) {
            (ObjectKind::ColouredBlock, _) | (ObjectKind::Cup, Pose::Toppled) => {
                o.orientation.rem_euclid(180)
            }
            _ => 0,
        };
        self.table
            .get(&(o.kind, o.pose, orientation))
            .copied()
            .unwrap_or_else(|| min_pixel_count(*o, self.n))
    }
}
