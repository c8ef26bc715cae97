//! Top-down RGBD rendering.

use super::{ObjectInstance, ObjectKind, Pose, WorldState, TOPPLED_HALF_LEN, TOPPLED_HALF_WID};
use crate::geometry::{Footprint, Vec2, TABLE};
use crate::raster::{Projection, Raster, RasterState, STATE_CHANNELS};

/// Class colours.
pub struct Palette;

impl Palette {
    pub const TABLE: [f32; 3] = [0.5, 0.5, 0.5];
    pub const SUPPORT: [f32; 3] = [0.1, 0.1, 0.1];
    /// Half of the coloured block on its +axis side.
    pub const BLOCK_FRONT: [f32; 3] = [0.1, 0.8, 0.1];
    pub const BLOCK_BACK: [f32; 3] = [0.9, 0.9, 0.1];
    pub const CUP: [f32; 3] = [0.1, 0.2, 0.9];
    pub const BALL: [f32; 3] = [0.9, 0.1, 0.1];
}

/// Depth value encoding a height level.
pub fn depth_of_level(level: u8) -> f32 {
    level as f32 / 4.0
}

/// Rows at the top of the image showing the gripper's contents.
pub fn strip_rows(resolution: usize) -> usize {
    (3 * resolution).div_ceil(32).max(1)
}

/// Continuous pixel position of the held-object sprite at 32x32.
pub const SPRITE_CENTRE_PX: (f64, f64) = (15.5, 1.5);

fn sprite_centre(projection: &Projection) -> Vec2 {
    let n = projection.width as f64;
    projection.to_world(n / 2.0 - 0.5, strip_rows(projection.height) as f64 / 2.0)
}

impl ObjectInstance {
    /// Rendered colour at world point `p`, or `None` outside the outline.
    pub fn colour_at(&self, p: Vec2) -> Option<[f32; 3]> {
        shade(self, p)
    }
}

fn shade(o: &ObjectInstance, p: Vec2) -> Option<[f32; 3]> {
    let d = p - o.position;
    match (o.kind, o.pose) {
        (ObjectKind::Cup, Pose::Toppled) => {
            let a = o.axis();
            let u = d.dot(a) / TOPPLED_HALF_LEN;
            let v = d.dot(a.perp()) / TOPPLED_HALF_WID;
            (u * u + v * v < 1.0).then_some(Palette::CUP)
        }
        _ => {
            let inside = match o.footprint() {
                Footprint::Disc { radius, .. } => d.norm() < radius,
                Footprint::Box { half, .. } => d.x.abs() < half.x && d.y.abs() < half.y,
            };
            if !inside {
                return None;
            }
            Some(match o.kind {
                ObjectKind::ColouredBlock => {
                    if d.dot(o.axis()) >= 0.0 {
                        Palette::BLOCK_FRONT
                    } else {
                        Palette::BLOCK_BACK
                    }
                }
                ObjectKind::SupportBlock => Palette::SUPPORT,
                ObjectKind::Cup => Palette::CUP,
                ObjectKind::Ball => Palette::BALL,
            })
        }
    }
}

fn draw(
    img: &mut Raster,
    projection: &Projection,
    o: &ObjectInstance,
    depth: f32,
    rows: std::ops::Range<usize>,
) {
    let fp = o.footprint();
    let r = fp.bounding_radius();
    let c = fp.centre();
    let (x0, y0) = projection.to_pixel_f(c - Vec2::new(r, r));
    let (x1, y1) = projection.to_pixel_f(c + Vec2::new(r, r));
    let clampi = |v: f64, hi: usize| (v.floor().max(0.0) as usize).min(hi);
    let (px0, px1) = (clampi(x0, img.width()), clampi(x1 + 1.0, img.width()));
    let (py0, py1) = (
        clampi(y0, img.height()).max(rows.start),
        clampi(y1 + 1.0, img.height()).min(rows.end),
    );
    for py in py0..py1 {
        for px in px0..px1 {
            if let Some(rgb) = shade(o, projection.pixel_centre(px, py)) {
                let i = img.index(px, py, 0);
                let data = img.data_mut();
                data[i..i + 3].copy_from_slice(&rgb);
                data[i + 3] = depth;
            }
        }
    }
}

/// Render the world as seen from above at `resolution` x `resolution`.
pub fn render(world: &WorldState, resolution: usize) -> RasterState {
    let projection = Projection::new(TABLE, resolution, resolution).expect("table extent");
    let mut img = Raster::filled(resolution, resolution, STATE_CHANNELS, 0.0);
    for px in img.data_mut().chunks_exact_mut(STATE_CHANNELS) {
        px[..3].copy_from_slice(&Palette::TABLE);
    }
    let mut order: Vec<&ObjectInstance> = world.objects.iter().collect();
    order.sort_by_key(|o| (o.height_level, o.id));
    for o in order {
        draw(
            &mut img,
            &projection,
            o,
            depth_of_level(o.height_level),
            0..resolution,
        );
    }
    let strip = strip_rows(resolution);
    for py in 0..strip {
        for px in 0..resolution {
            let i = img.index(px, py, 0);
            let data = img.data_mut();
            data[i..i + 3].copy_from_slice(&Palette::TABLE);
            data[i + 3] = 0.0;
        }
    }
    if let Some(held) = &world.holding {
        let mut sprite = *held;
        sprite.position = sprite_centre(&projection);
        sprite.orientation = 0;
        draw(&mut img, &projection, &sprite, 0.0, 0..strip);
    }
    RasterState::from_raster_unchecked(img)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::microworld::{ObjectInstance, SlotId};

    #[test]
    fn empty_world_is_uniform_grey() {
        let r = render(&WorldState::empty(), 32);
        for px in r.data().chunks_exact(4) {
            assert_eq!(px, &[0.5, 0.5, 0.5, 0.0]);
        }
    }

    #[test]
    fn ball_pixel_has_class_colour_and_depth() {
        let mut w = WorldState::empty();
        let s = ObjectInstance::new(0, ObjectKind::SupportBlock, Vec2::new(0.5, 0.5));
        let mut b = ObjectInstance::new(1, ObjectKind::Ball, Vec2::new(0.5, 0.5));
        b.height_level = 1;
        b.on_slot = Some(SlotId { host: 0, index: 0 });
        w.objects = vec![s, b];
        let r = render(&w, 32);
        assert_eq!(r.pixel(16, 16), &[0.9, 0.1, 0.1, 0.25]);
        // Support corner still visible.
        assert_eq!(r.pixel(14, 14), &[0.1, 0.1, 0.1, 0.0]);
    }

    #[test]
    fn block_halves_show_direction() {
        let mut w = WorldState::empty();
        let mut b = ObjectInstance::new(0, ObjectKind::ColouredBlock, Vec2::new(0.5, 0.5));
        w.objects.push(b);
        let r = render(&w, 32);
        assert_eq!(&r.pixel(19, 15)[..3], &Palette::BLOCK_FRONT);
        assert_eq!(&r.pixel(12, 15)[..3], &Palette::BLOCK_BACK);
        b.orientation = 180;
        w.objects[0] = b;
        let r = render(&w, 32);
        assert_eq!(&r.pixel(19, 15)[..3], &Palette::BLOCK_BACK);
    }

    #[test]
    fn held_object_appears_in_strip() {
        let mut w = WorldState::empty();
        w.holding = Some(ObjectInstance::new(0, ObjectKind::Cup, Vec2::new(0.5, 0.5)));
        let r = render(&w, 32);
        assert_eq!(&r.pixel(15, 1)[..3], &Palette::CUP);
        assert!(r.data()[3 * 32 * 4..]
            .chunks_exact(4)
            .all(|p| p == [0.5, 0.5, 0.5, 0.0]));
    }
}
