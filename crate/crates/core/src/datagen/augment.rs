//! Training windows and their augmentations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::Sequence;
use crate::affordance::AffordanceKind;
use crate::forward_model::ActionCode;
use crate::microworld::{strip_rows, Palette};
use crate::raster::{Raster, RasterState, STATE_CHANNELS};

/// Largest translation in pixels.
pub const MAX_SHIFT: i64 = 2;
/// Standard deviation of the noise on the geometric action inputs.
pub const NOISE_SIGMA: f64 = 0.01;

/// A contiguous slice of a sequence prepared for training.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    /// `actions.len() + 1` frames.
    pub frames: Vec<RasterState>,
    /// Changed-pixel masks, one per action.
    pub masks: Vec<Raster>,
    pub actions: Vec<ActionCode>,
}

impl Example {
    /// Actions `start..start + len` of `seq`, with their frames.
    pub fn window(seq: &Sequence, start: usize, len: usize) -> Self {
        let n = seq.frames[0].resolution();
        Self {
            frames: seq.frames[start..=start + len].to_vec(),
            masks: seq.masks[start..start + len].to_vec(),
            actions: seq.actions[start..start + len]
                .iter()
                .map(|a| ActionCode::new(a, n))
                .collect(),
        }
    }

    pub fn whole(seq: &Sequence) -> Self {
        Self::window(seq, 0, seq.len())
    }

    pub fn resolution(&self) -> usize {
        self.frames[0].resolution()
    }

    fn remask(&mut self) {
        self.masks = self
            .frames
            .windows(2)
            .map(|w| w[0].changed_mask(&w[1]).expect("same resolution"))
            .collect();
    }

    fn map_frames(&mut self, f: impl Fn(&RasterState) -> RasterState) {
        self.frames = self.frames.iter().map(f).collect();
        self.remask();
    }
}

/// Shift the scene below the gripper strip by whole pixels; uncovered pixels
/// become bare table and actions move with the scene.
pub fn translate(ex: &Example, dx: i64, dy: i64) -> Example {
    let n = ex.resolution();
    let strip = strip_rows(n) as i64;
    let table = [Palette::TABLE[0], Palette::TABLE[1], Palette::TABLE[2], 0.0];
    let mut out = ex.clone();
    out.map_frames(|f| {
        let mut r = f.raster().clone();
        for y in strip..n as i64 {
            for x in 0..n as i64 {
                let (sx, sy) = (x - dx, y - dy);
                let v = if sx >= 0 && sx < n as i64 && sy >= strip && sy < n as i64 {
                    let p = f.pixel(sx as usize, sy as usize);
                    [p[0], p[1], p[2], p[3]]
                } else {
                    table
                };
                for (c, &val) in v.iter().enumerate().take(STATE_CHANNELS) {
                    r.set(x as usize, y as usize, c, val);
                }
            }
        }
        RasterState::new(r).expect("values copied from a valid state")
    });
    for a in &mut out.actions {
        a.values[0] += dx as f32 / n as f32;
        a.values[1] += dy as f32 / n as f32;
        a.pixel.0 = (a.pixel.0 as i64 + dx).clamp(0, n as i64 - 1) as usize;
        a.pixel.1 = (a.pixel.1 as i64 + dy).clamp(strip, n as i64 - 1) as usize;
    }
    out
}

/// Reflect left-right: x and angles are mirrored, turn directions swap.
pub fn mirror(ex: &Example) -> Example {
    let n = ex.resolution();
    let mut out = ex.clone();
    out.map_frames(|f| {
        let mut r = f.raster().clone();
        for y in 0..n {
            for x in 0..n {
                for c in 0..STATE_CHANNELS {
                    r.set(x, y, c, f.get(n - 1 - x, y, c));
                }
            }
        }
        RasterState::new(r).expect("values copied from a valid state")
    });
    for a in &mut out.actions {
        a.values[0] = 1.0 - a.values[0];
        a.values[3] = (0.5 - a.values[3]).rem_euclid(1.0);
        a.values[4] = -a.values[4];
        a.pixel.0 = n - 1 - a.pixel.0;
    }
    out
}

/// Turn symmetric actions' angles by half a revolution, each with
/// probability one half.
pub fn flip_symmetric(ex: &Example, rng: &mut impl Rng) -> Example {
    let mut out = ex.clone();
    for a in out.actions.iter_mut().filter(|a| a.symmetric) {
        if rng.gen_bool(0.5) {
            a.values[3] = (a.values[3] + 0.5).rem_euclid(1.0);
        }
    }
    out
}

/// Gaussian noise on the geometric inputs; the turn amount only for turns.
pub fn add_noise(ex: &Example, rng: &mut impl Rng) -> Example {
    let normal = Normal::new(0.0, NOISE_SIGMA).expect("positive sigma");
    let mut out = ex.clone();
    for a in &mut out.actions {
        let k = if a.kind == AffordanceKind::Turn { 5 } else { 4 };
        for v in &mut a.values[..k] {
            *v += normal.sample(rng) as f32;
        }
    }
    out
}

/// Random translation, mirroring, symmetric flips and input noise.
pub fn augment(ex: &Example, seed: u64) -> Example {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dx = rng.gen_range(-MAX_SHIFT..=MAX_SHIFT);
    let dy = rng.gen_range(-MAX_SHIFT..=MAX_SHIFT);
    let mut out = if dx != 0 || dy != 0 {
        translate(ex, dx, dy)
    } else {
        ex.clone()
    };
    if rng.gen_bool(0.5) {
        out = mirror(&out);
    }
    let out = flip_symmetric(&out, &mut rng);
    add_noise(&out, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::generate_sequence;

    fn example() -> Example {
        let seq = (0..50)
            .map(|s| generate_sequence(s, 32))
            .find(|s| s.len() == 4)
            .unwrap();
        Example::whole(&seq)
    }

    #[test]
    fn translation_moves_everything_together() {
        let ex = example();
        let t = translate(&ex, 1, 0);
        let strip = strip_rows(32);
        for (f, g) in ex.frames.iter().zip(&t.frames) {
            for y in strip..32 {
                for x in 1..32 {
                    assert_eq!(f.pixel(x - 1, y), g.pixel(x, y));
                }
            }
        }
        for (a, b) in ex.actions.iter().zip(&t.actions) {
            assert!((b.values[0] - a.values[0] - 1.0 / 32.0).abs() < 1e-6);
            assert_eq!(b.values[1], a.values[1]);
            assert_eq!(b.pixel, (a.pixel.0 + 1, a.pixel.1));
        }
        for (k, m) in t.masks.iter().enumerate() {
            assert_eq!(*m, t.frames[k].changed_mask(&t.frames[k + 1]).unwrap());
        }
    }

    #[test]
    fn mirror_is_an_involution() {
        let ex = example();
        let back = mirror(&mirror(&ex));
        assert_eq!(back.frames, ex.frames);
        assert_eq!(back.masks, ex.masks);
        for (a, b) in ex.actions.iter().zip(&back.actions) {
            assert_eq!(a.pixel, b.pixel);
            for (u, v) in a.values.iter().zip(&b.values) {
                assert!((u - v).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn flips_touch_only_symmetric_actions() {
        let ex = example();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..20 {
            let f = flip_symmetric(&ex, &mut rng);
            for (a, b) in ex.actions.iter().zip(&f.actions) {
                if !a.symmetric {
                    assert_eq!(a, b);
                }
            }
        }
    }

    #[test]
    fn noise_keeps_non_turn_amounts_zero() {
        let ex = example();
        let n = add_noise(&ex, &mut ChaCha8Rng::seed_from_u64(1));
        for a in &n.actions {
            if a.kind != AffordanceKind::Turn {
                assert_eq!(a.values[4], 0.0);
            }
        }
        assert_eq!(augment(&ex, 5), augment(&ex, 5));
    }
}
