//! Image-space state representation.
//!
//! States are top-down RGBD rasters with values in `[0, 1]`. Differential
//! updates carry one extra overwrite-mask channel and are blended into a state
//! with [`apply_diff`]. Goals are smaller (or equal) images matched against a
//! state by an exhaustive sliding window.

mod io;

pub use io::{export_ppm, load_raster, read_raster, save_raster, write_raster};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Extent, Vec2};

pub const STATE_CHANNELS: usize = 4;
pub const DIFF_CHANNELS: usize = 5;
pub const DEFAULT_RESOLUTION: usize = 32;

/// Dense row-major, channel-interleaved `f32` image.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Raster {
    pub fn filled(width: usize, height: usize, channels: usize, value: f32) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 || channels == 0 {
            return Err(Error::RejectedInput(format!(
                "raster dimensions must be positive, got {width}x{height}x{channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::RejectedInput(format!(
                "raster {width}x{height}x{channels} needs {} values, got {}",
                width * height * channels,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[self.index(x, y, c)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f32) {
        let i = self.index(x, y, c);
        self.data[i] = v;
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[f32] {
        let i = self.index(x, y, 0);
        &self.data[i..i + self.channels]
    }

    pub fn all_in_unit_range(&self) -> bool {
        self.data.iter().all(|v| (0.0..=1.0).contains(v))
    }

    /// Copy of the `w x h` window with top-left corner `(x, y)`.
    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Result<Raster> {
        if w == 0 || h == 0 || x + w > self.width || y + h > self.height {
            return Err(Error::RejectedInput(format!(
                "crop {w}x{h}@({x},{y}) outside {}x{}",
                self.width, self.height
            )));
        }
        let mut data = Vec::with_capacity(w * h * self.channels);
        for row in y..y + h {
            let start = self.index(x, row, 0);
            data.extend_from_slice(&self.data[start..start + w * self.channels]);
        }
        Raster::from_vec(w, h, self.channels, data)
    }

    /// Keep only the listed channels, in order.
    pub fn select_channels(&self, keep: &[usize]) -> Result<Raster> {
        if keep.is_empty() || keep.iter().any(|&c| c >= self.channels) {
            return Err(Error::RejectedInput(format!(
                "cannot select channels {keep:?} from {} channels",
                self.channels
            )));
        }
        let mut data = Vec::with_capacity(self.width * self.height * keep.len());
        for px in self.data.chunks_exact(self.channels) {
            data.extend(keep.iter().map(|&c| px[c]));
        }
        Raster::from_vec(self.width, self.height, keep.len(), data)
    }
}

/// A `W x H x 4` RGBD state with every value in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterState(Raster);

impl RasterState {
    pub fn new(raster: Raster) -> Result<Self> {
        if raster.channels != STATE_CHANNELS {
            return Err(Error::RejectedInput(format!(
                "state needs {STATE_CHANNELS} channels, got {}",
                raster.channels
            )));
        }
        if raster.width != raster.height {
            return Err(Error::RejectedInput(format!(
                "state must be square, got {}x{}",
                raster.width, raster.height
            )));
        }
        if !raster.all_in_unit_range() {
            return Err(Error::RejectedInput(
                "state values must lie in [0, 1]".into(),
            ));
        }
        Ok(Self(raster))
    }

    pub fn uniform(resolution: usize, value: f32) -> Self {
        Self(Raster::filled(
            resolution,
            resolution,
            STATE_CHANNELS,
            value,
        ))
    }

    pub fn resolution(&self) -> usize {
        self.0.width
    }

    pub fn raster(&self) -> &Raster {
        &self.0
    }

    pub fn into_raster(self) -> Raster {
        self.0
    }

    /// Wrap without validation; callers guarantee the invariants.
    pub(crate) fn from_raster_unchecked(raster: Raster) -> Self {
        debug_assert_eq!(raster.channels, STATE_CHANNELS);
        Self(raster)
    }

    /// Per-pixel "anything changed" mask between two states (1 where any
    /// channel differs, else 0).
    pub fn changed_mask(&self, other: &RasterState) -> Result<Raster> {
        check_same_dims(&self.0, &other.0)?;
        let data = self
            .0
            .data
            .chunks_exact(STATE_CHANNELS)
            .zip(other.0.data.chunks_exact(STATE_CHANNELS))
            .map(|(a, b)| if a != b { 1.0 } else { 0.0 })
            .collect();
        Raster::from_vec(self.0.width, self.0.height, 1, data)
    }
}

impl std::ops::Deref for RasterState {
    type Target = Raster;
    fn deref(&self) -> &Raster {
        &self.0
    }
}

/// A `W x H x 5` differential update: RGBD replacement values plus an
/// overwrite mask.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffDescriptor(Raster);

impl DiffDescriptor {
    pub fn new(raster: Raster) -> Result<Self> {
        if raster.channels != DIFF_CHANNELS {
            return Err(Error::RejectedInput(format!(
                "diff needs {DIFF_CHANNELS} channels, got {}",
                raster.channels
            )));
        }
        if !raster.all_in_unit_range() {
            return Err(Error::RejectedInput(
                "diff values must lie in [0, 1]".into(),
            ));
        }
        Ok(Self(raster))
    }

    /// Exact diff taking `from` to `to`: mask is 1 on changed pixels, which
    /// carry the new values; unchanged pixels are all zero.
    pub fn between(from: &RasterState, to: &RasterState) -> Result<Self> {
        check_same_dims(&from.0, &to.0)?;
        let mut out = Raster::filled(from.width(), from.height(), DIFF_CHANNELS, 0.0);
        for ((a, b), d) in from
            .data()
            .chunks_exact(STATE_CHANNELS)
            .zip(to.data().chunks_exact(STATE_CHANNELS))
            .zip(out.data.chunks_exact_mut(DIFF_CHANNELS))
        {
            if a != b {
                d[..STATE_CHANNELS].copy_from_slice(b);
                d[STATE_CHANNELS] = 1.0;
            }
        }
        Ok(Self(out))
    }

    pub fn raster(&self) -> &Raster {
        &self.0
    }

    pub fn into_raster(self) -> Raster {
        self.0
    }
}

impl std::ops::Deref for DiffDescriptor {
    type Target = Raster;
    fn deref(&self) -> &Raster {
        &self.0
    }
}

fn check_same_dims(a: &Raster, b: &Raster) -> Result<()> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::RejectedInput(format!(
            "dimension mismatch: {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    Ok(())
}

/// Blend a diff into a state: `mask * diff + (1 - mask) * state`, per channel.
pub fn apply_diff(state: &RasterState, diff: &DiffDescriptor) -> Result<RasterState> {
    check_same_dims(&state.0, &diff.0)?;
    let data = state
        .data()
        .chunks_exact(STATE_CHANNELS)
        .zip(diff.data().chunks_exact(DIFF_CHANNELS))
        .flat_map(|(s, d)| {
            let m = d[STATE_CHANNELS];
            (0..STATE_CHANNELS).map(move |c| (m * d[c] + (1.0 - m) * s[c]).clamp(0.0, 1.0))
        })
        .collect();
    Ok(RasterState(Raster::from_vec(
        state.width(),
        state.height(),
        STATE_CHANNELS,
        data,
    )?))
}

/// Subset of the RGBD channels that take part in a goal comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChannelMask(u8);

impl ChannelMask {
    pub const RGB: ChannelMask = ChannelMask(0b0111);
    pub const RGBD: ChannelMask = ChannelMask(0b1111);

    pub fn from_channels(channels: &[usize]) -> Result<Self> {
        let mut bits = 0u8;
        for &c in channels {
            if c >= STATE_CHANNELS {
                return Err(Error::RejectedInput(format!("channel {c} is not RGBD")));
            }
            bits |= 1 << c;
        }
        if bits == 0 {
            return Err(Error::RejectedInput("channel mask must be nonempty".into()));
        }
        Ok(Self(bits))
    }

    pub fn contains(&self, c: usize) -> bool {
        c < STATE_CHANNELS && self.0 & (1 << c) != 0
    }

    pub fn channels(&self) -> Vec<usize> {
        (0..STATE_CHANNELS).filter(|&c| self.contains(c)).collect()
    }

    pub fn name(&self) -> String {
        "rgbd"
            .chars()
            .enumerate()
            .filter(|(c, _)| self.contains(*c))
            .map(|(_, ch)| ch)
            .collect()
    }

    pub fn parse(s: &str) -> Result<Self> {
        let channels: Result<Vec<usize>> = s
            .chars()
            .map(|ch| match ch.to_ascii_lowercase() {
                'r' => Ok(0),
                'g' => Ok(1),
                'b' => Ok(2),
                'd' => Ok(3),
                other => Err(Error::RejectedInput(format!("unknown channel '{other}'"))),
            })
            .collect();
        Self::from_channels(&channels?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    /// Reach a state that contains the goal image.
    #[serde(alias = "pos")]
    Positive,
    /// Reach a state that contains the goal image as little as possible.
    #[serde(alias = "neg")]
    Negative,
}

impl Polarity {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "pos" | "positive" => Ok(Polarity::Positive),
            "neg" | "negative" => Ok(Polarity::Negative),
            other => Err(Error::RejectedInput(format!("unknown polarity '{other}'"))),
        }
    }

    pub fn short(&self) -> &'static str {
        match self {
            Polarity::Positive => "pos",
            Polarity::Negative => "neg",
        }
    }
}

/// Goal image plus how to score it.
#[derive(Debug, Clone, PartialEq)]
pub struct GoalSpec {
    goal: Raster,
    polarity: Polarity,
    mask: ChannelMask,
}

impl GoalSpec {
    /// The goal raster has 3 (RGB) or 4 (RGBD) channels; every masked channel
    /// must exist in it.
    pub fn new(goal: Raster, polarity: Polarity, mask: ChannelMask) -> Result<Self> {
        if goal.channels != 3 && goal.channels != 4 {
            return Err(Error::RejectedInput(format!(
                "goal must have 3 or 4 channels, got {}",
                goal.channels
            )));
        }
        if mask.channels().iter().any(|&c| c >= goal.channels) {
            return Err(Error::RejectedInput(format!(
                "mask {} needs channels the {}-channel goal lacks",
                mask.name(),
                goal.channels
            )));
        }
        Ok(Self {
            goal,
            polarity,
            mask,
        })
    }

    /// Negative goals ignore depth unless told otherwise.
    pub fn with_default_mask(goal: Raster, polarity: Polarity) -> Result<Self> {
        let mask = match (polarity, goal.channels) {
            (Polarity::Negative, _) | (_, 3) => ChannelMask::RGB,
            _ => ChannelMask::RGBD,
        };
        Self::new(goal, polarity, mask)
    }

    pub fn raster(&self) -> &Raster {
        &self.goal
    }

    pub fn polarity(&self) -> Polarity {
        self.polarity
    }

    pub fn mask(&self) -> ChannelMask {
        self.mask
    }

    pub fn width(&self) -> usize {
        self.goal.width
    }

    pub fn height(&self) -> usize {
        self.goal.height
    }
}

/// Mean squared error between the goal and the state window at `(x, y)`,
/// over masked channels only.
pub fn window_mse(goal: &GoalSpec, state: &RasterState, x: usize, y: usize) -> Result<f64> {
    if goal.width() > state.width() || goal.height() > state.height() {
        return Err(Error::RejectedInput(format!(
            "goal {}x{} larger than state {}x{}",
            goal.width(),
            goal.height(),
            state.width(),
            state.height()
        )));
    }
    if x + goal.width() > state.width() || y + goal.height() > state.height() {
        return Err(Error::RejectedInput(format!(
            "window ({x},{y}) out of bounds for goal {}x{} in state {}x{}",
            goal.width(),
            goal.height(),
            state.width(),
            state.height()
        )));
    }
    let channels = goal.mask.channels();
    Ok(window_mse_unchecked(goal, state, x, y, &channels))
}

fn window_mse_unchecked(
    goal: &GoalSpec,
    state: &RasterState,
    x: usize,
    y: usize,
    channels: &[usize],
) -> f64 {
    let g = &goal.goal;
    let mut sum = 0.0f64;
    for gy in 0..g.height {
        for gx in 0..g.width {
            let gp = g.pixel(gx, gy);
            let sp = state.pixel(x + gx, y + gy);
            for &c in channels {
                let d = gp[c] as f64 - sp[c] as f64;
                sum += d * d;
            }
        }
    }
    sum / (g.width * g.height * channels.len()) as f64
}

/// Lowest window MSE over every placement of the goal inside the state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoalMatch {
    pub loss: f64,
    pub x: usize,
    pub y: usize,
}

/// Minimum [`window_mse`] over all offsets `0..=W-w` by `0..=H-h`; ties go to
/// the smallest `y`, then the smallest `x`.
pub fn goal_loss(goal: &GoalSpec, state: &RasterState) -> Result<GoalMatch> {
    if goal.width() > state.width() || goal.height() > state.height() {
        return Err(Error::RejectedInput(format!(
            "goal {}x{} larger than state {}x{}",
            goal.width(),
            goal.height(),
            state.width(),
            state.height()
        )));
    }
    let channels = goal.mask.channels();
    let mut best = GoalMatch {
        loss: f64::INFINITY,
        x: 0,
        y: 0,
    };
    for y in 0..=state.height() - goal.height() {
        for x in 0..=state.width() - goal.width() {
            let loss = window_mse_unchecked(goal, state, x, y, &channels);
            if loss < best.loss {
                best = GoalMatch { loss, x, y };
            }
        }
    }
    Ok(best)
}

/// Affine top-down mapping between a world rectangle and the pixel grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub extent: Extent,
    pub width: usize,
    pub height: usize,
}

impl Projection {
    pub fn new(extent: Extent, width: usize, height: usize) -> Result<Self> {
        if extent.width() <= 0.0 || extent.height() <= 0.0 || width == 0 || height == 0 {
            return Err(Error::Config("projection needs a nonzero extent".into()));
        }
        Ok(Self {
            extent,
            width,
            height,
        })
    }

    /// Pixel containing the world point; out-of-extent points clamp to the
    /// nearest edge pixel.
    pub fn project(&self, p: Vec2) -> (usize, usize) {
        let fx = (p.x - self.extent.min.x) / self.extent.width() * self.width as f64;
        let fy = (p.y - self.extent.min.y) / self.extent.height() * self.height as f64;
        let px = (fx.floor().max(0.0) as usize).min(self.width - 1);
        let py = (fy.floor().max(0.0) as usize).min(self.height - 1);
        (px, py)
    }

    /// Continuous pixel coordinates of a world point (no clamping).
    pub fn to_pixel_f(&self, p: Vec2) -> (f64, f64) {
        (
            (p.x - self.extent.min.x) / self.extent.width() * self.width as f64,
            (p.y - self.extent.min.y) / self.extent.height() * self.height as f64,
        )
    }

    /// World point for continuous pixel coordinates.
    pub fn to_world(&self, fx: f64, fy: f64) -> Vec2 {
        Vec2::new(
            self.extent.min.x + fx / self.width as f64 * self.extent.width(),
            self.extent.min.y + fy / self.height as f64 * self.extent.height(),
        )
    }

    /// World position of a pixel centre.
    pub fn pixel_centre(&self, px: usize, py: usize) -> Vec2 {
        self.to_world(px as f64 + 0.5, py as f64 + 0.5)
    }

    /// Metres per pixel along x.
    pub fn pixel_size(&self) -> f64 {
        self.extent.width() / self.width as f64
    }
}

/// RGBD values of one pixel.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PixelSample {
    pub r: f32,
    pub g: f32,
    pub b: f32,
    pub d: f32,
}

impl PixelSample {
    pub fn to_array(self) -> [f32; 4] {
        [self.r, self.g, self.b, self.d]
    }
}

/// Read the pixel under a world point.
pub fn sample_pixel(state: &RasterState, projection: &Projection, p: Vec2) -> PixelSample {
    let (px, py) = projection.project(p);
    let v = state.pixel(px, py);
    PixelSample {
        r: v[0],
        g: v[1],
        b: v[2],
        d: v[3],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::TABLE;

    fn state_from(w: usize, vals: Vec<f32>) -> RasterState {
        RasterState::new(Raster::from_vec(w, w, 4, vals).unwrap()).unwrap()
    }

    #[test]
    fn apply_diff_identity_and_replacement() {
        let s = state_from(2, (0..16).map(|i| i as f32 / 16.0).collect());
        let zero = DiffDescriptor::new(Raster::filled(2, 2, 5, 0.0)).unwrap();
        assert_eq!(apply_diff(&s, &zero).unwrap(), s);

        let mut full = Raster::filled(2, 2, 5, 1.0);
        for (i, px) in full.data_mut().chunks_exact_mut(5).enumerate() {
            px[0] = 0.1 * i as f32;
        }
        let out = apply_diff(&s, &DiffDescriptor::new(full.clone()).unwrap()).unwrap();
        for (o, d) in out.data().chunks_exact(4).zip(full.data().chunks_exact(5)) {
            assert_eq!(o, &d[..4]);
        }
    }

    #[test]
    fn apply_diff_single_pixel() {
        let s = RasterState::uniform(2, 0.5);
        let mut d = Raster::filled(2, 2, 5, 0.0);
        d.data_mut()[..5].copy_from_slice(&[1.0, 0.0, 0.0, 0.0, 1.0]);
        let out = apply_diff(&s, &DiffDescriptor::new(d).unwrap()).unwrap();
        assert_eq!(out.pixel(0, 0), &[1.0, 0.0, 0.0, 0.0]);
        for (x, y) in [(1, 0), (0, 1), (1, 1)] {
            assert_eq!(out.pixel(x, y), &[0.5; 4]);
        }
    }

    #[test]
    fn apply_diff_dimension_mismatch() {
        let s = RasterState::uniform(2, 0.5);
        let d = DiffDescriptor::new(Raster::filled(3, 3, 5, 0.0)).unwrap();
        assert!(matches!(apply_diff(&s, &d), Err(Error::RejectedInput(_))));
    }

    #[test]
    fn diff_between_round_trips() {
        let a = RasterState::uniform(4, 0.5);
        let mut r = a.raster().clone();
        r.set(1, 2, 0, 0.9);
        let b = RasterState::new(r).unwrap();
        let d = DiffDescriptor::between(&a, &b).unwrap();
        assert_eq!(apply_diff(&a, &d).unwrap(), b);
        assert_eq!(d.data().iter().skip(4).step_by(5).sum::<f32>(), 1.0);
    }

    #[test]
    fn window_mse_examples() {
        let mut r = Raster::filled(4, 4, 4, 0.5);
        r.set(2, 1, 0, 0.8);
        let s = RasterState::new(r.clone()).unwrap();
        let g = GoalSpec::new(
            r.crop(1, 1, 2, 2).unwrap(),
            Polarity::Positive,
            ChannelMask::RGBD,
        )
        .unwrap();
        assert_eq!(window_mse(&g, &s, 1, 1).unwrap(), 0.0);

        let one = GoalSpec::new(
            Raster::filled(1, 1, 4, 1.0),
            Polarity::Positive,
            ChannelMask::from_channels(&[0]).unwrap(),
        )
        .unwrap();
        let half = RasterState::uniform(4, 0.5);
        assert_eq!(window_mse(&one, &half, 3, 3).unwrap(), 0.25);
        assert!(window_mse(&one, &half, 4, 0).is_err());
    }

    #[test]
    fn full_size_goal_is_plain_mse() {
        let s = RasterState::uniform(3, 0.25);
        let g = GoalSpec::new(
            Raster::filled(3, 3, 3, 0.75),
            Polarity::Positive,
            ChannelMask::RGB,
        )
        .unwrap();
        let m = goal_loss(&g, &s).unwrap();
        assert_eq!((m.loss, m.x, m.y), (0.25, 0, 0));
    }

    #[test]
    fn goal_loss_uniform_and_exact_patch() {
        let s = RasterState::uniform(8, 0.25);
        let g = GoalSpec::new(
            Raster::filled(3, 2, 4, 0.75),
            Polarity::Positive,
            ChannelMask::from_channels(&[1]).unwrap(),
        )
        .unwrap();
        let m = goal_loss(&g, &s).unwrap();
        assert!((m.loss - 0.25).abs() < 1e-12);
        assert_eq!((m.x, m.y), (0, 0));

        let mut r = Raster::filled(8, 8, 4, 0.2);
        r.set(5, 6, 2, 0.9);
        let s = RasterState::new(r.clone()).unwrap();
        let g = GoalSpec::new(
            r.crop(4, 5, 3, 2).unwrap(),
            Polarity::Positive,
            ChannelMask::RGBD,
        )
        .unwrap();
        let m = goal_loss(&g, &s).unwrap();
        assert_eq!((m.loss, m.x, m.y), (0.0, 4, 5));
    }

    #[test]
    fn goal_mask_must_fit_goal_channels() {
        assert!(GoalSpec::new(
            Raster::filled(2, 2, 3, 0.0),
            Polarity::Negative,
            ChannelMask::RGBD
        )
        .is_err());
        assert!(ChannelMask::from_channels(&[]).is_err());
        assert_eq!(ChannelMask::parse("rgb").unwrap(), ChannelMask::RGB);
        assert_eq!(ChannelMask::RGBD.name(), "rgbd");
    }

    #[test]
    fn projection_corners_centre_and_clamp() {
        let p = Projection::new(TABLE, 32, 32).unwrap();
        assert_eq!(p.project(Vec2::new(0.0, 0.0)), (0, 0));
        assert_eq!(p.project(Vec2::new(0.5, 0.5)), (16, 16));
        assert_eq!(p.project(Vec2::new(-3.0, 0.5)), (0, 16));
        assert_eq!(p.project(Vec2::new(1.7, 2.0)), (31, 31));
        assert!(Projection::new(Extent::new(0.0, 0.0, 0.0, 1.0), 32, 32).is_err());
    }

    #[test]
    fn sample_pixel_reads_projected_pixel() {
        let p = Projection::new(TABLE, 4, 4).unwrap();
        let s = RasterState::uniform(4, 0.5);
        assert_eq!(
            sample_pixel(&s, &p, Vec2::new(0.3, 0.9)).to_array(),
            [0.5; 4]
        );
        let mut r = s.raster().clone();
        for c in 0..4 {
            r.set(3, 0, c, 0.1 * (c + 1) as f32);
        }
        let s = RasterState::new(r).unwrap();
        let v = sample_pixel(&s, &p, Vec2::new(5.0, -1.0));
        assert_eq!(v.to_array(), [0.1, 0.2, 0.3, 0.4]);
    }
}
