//! Encoder, per-kind predictor modules and decoder over one flat parameter
//! vector.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ops::{tanh_backward, tanh_inplace, to_interleaved, to_planar, Conv3, Dense, Scalar};
use crate::affordance::AffordanceKind;
use crate::error::{Error, Result};

/// Numeric action inputs: x, y, z, angle, turn amount and the RGBD pixel.
pub const ACTION_INPUTS: usize = 9;

/// Architecture hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct NetConfig {
    pub resolution: usize,
    /// Channels of every hidden convolution.
    pub channels: usize,
    pub latent: usize,
    pub memory: usize,
    /// Width of each predictor hidden stage.
    pub hidden: usize,
    /// Encoder dense widths after the flattened features (mirrored by the
    /// decoder).
    pub dense: [usize; 2],
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            resolution: 32,
            channels: 8,
            latent: 64,
            memory: 32,
            hidden: 128,
            dense: [256, 128],
        }
    }
}

impl NetConfig {
    /// A tiny network for gradient checks and tests.
    pub fn small() -> Self {
        Self {
            resolution: 8,
            channels: 3,
            latent: 6,
            memory: 4,
            hidden: 7,
            dense: [10, 8],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.resolution >= 4
            && self.resolution.is_multiple_of(4)
            && [
                self.channels,
                self.latent,
                self.memory,
                self.hidden,
                self.dense[0],
                self.dense[1],
            ]
            .iter()
            .all(|&v| v > 0);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid network config {self:?}")))
        }
    }

    /// Spatial size after the two stride-2 convolutions.
    pub fn bottleneck(&self) -> usize {
        self.resolution / 4
    }

    pub fn flat(&self) -> usize {
        self.bottleneck() * self.bottleneck() * self.channels
    }

    pub fn to_pairs(&self) -> Vec<(&'static str, usize)> {
        vec![
            ("resolution", self.resolution),
            ("channels", self.channels),
            ("latent", self.latent),
            ("memory", self.memory),
            ("hidden", self.hidden),
            ("dense0", self.dense[0]),
            ("dense1", self.dense[1]),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictorLayout {
    pub stages: [Dense; 3],
    pub delta: Dense,
    pub memory: Dense,
}

/// Offsets of every layer inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub enc_conv: [Conv3; 2],
    pub enc_dense: [Dense; 3],
    pub predictors: [PredictorLayout; 3],
    pub dec_dense: [Dense; 3],
    pub dec_conv: [Conv3; 2],
    pub total: usize,
}

struct Cursor(usize);

impl Cursor {
    fn dense(&mut self, inp: usize, out: usize) -> Dense {
        let d = Dense {
            inp,
            out,
            offset: self.0,
        };
        self.0 += d.param_count();
        d
    }

    fn conv(&mut self, cin: usize, cout: usize, stride: usize, size: usize) -> Conv3 {
        let c = Conv3 {
            cin,
            cout,
            stride,
            size,
            offset: self.0,
        };
        self.0 += c.param_count();
        c
    }
}

impl Layout {
    pub fn new(cfg: &NetConfig) -> Self {
        let mut cur = Cursor(0);
        let (n, ch) = (cfg.resolution, cfg.channels);
        let enc_conv = [cur.conv(4, ch, 2, n), cur.conv(ch, ch, 2, n / 2)];
        let enc_dense = [
            cur.dense(cfg.flat(), cfg.dense[0]),
            cur.dense(cfg.dense[0], cfg.dense[1]),
            cur.dense(cfg.dense[1], cfg.latent),
        ];
        let a = ACTION_INPUTS;
        let h = cfg.hidden;
        let predictors = std::array::from_fn(|_| PredictorLayout {
            stages: [
                cur.dense(cfg.latent + a + cfg.memory, h),
                cur.dense(h + a, h),
                cur.dense(h + a, h),
            ],
            delta: cur.dense(h + a, cfg.latent),
            memory: cur.dense(h + a, cfg.memory),
        });
        let dec_dense = [
            cur.dense(cfg.latent, cfg.dense[1]),
            cur.dense(cfg.dense[1], cfg.dense[0]),
            cur.dense(cfg.dense[0], cfg.flat()),
        ];
        let dec_conv = [cur.conv(ch, ch, 1, n / 2), cur.conv(ch, 5, 1, n)];
        Self {
            enc_conv,
            enc_dense,
            predictors,
            dec_dense,
            dec_conv,
            total: cur.0,
        }
    }

    pub fn encoder_range(&self) -> Range<usize> {
        self.enc_conv[0].offset..self.predictors[0].stages[0].offset
    }

    pub fn predictor_range(&self, kind: AffordanceKind) -> Range<usize> {
        let p = &self.predictors[kind.index()];
        p.stages[0].offset..p.memory.offset + p.memory.param_count()
    }

    pub fn decoder_range(&self) -> Range<usize> {
        self.dec_dense[0].offset..self.total
    }
}

/// Layer inputs and outputs saved by a forward pass.
#[derive(Debug, Clone)]
pub struct EncoderCache<S> {
    /// Planar input image.
    input: Vec<S>,
    conv_out: [Vec<S>; 2],
    dense_in: [Vec<S>; 3],
    pub out: Vec<S>,
    batch: usize,
}

#[derive(Debug, Clone)]
pub struct PredictorCache<S> {
    stage_in: [Vec<S>; 4],
    stage_out: [Vec<S>; 3],
    pub delta: Vec<S>,
    pub memory: Vec<S>,
    batch: usize,
}

#[derive(Debug, Clone)]
pub struct DecoderCache<S> {
    dense_in: [Vec<S>; 3],
    dense_out: Vec<S>,
    /// Hidden activation between the two upsampling convolutions.
    conv_out: Vec<S>,
    /// Output before clamping, `[batch, n, n, 5]`.
    pub raw: Vec<S>,
    batch: usize,
}

/// Row-wise concatenation of `[batch, a]` and `[batch, b]`.
fn concat<S: Scalar>(x: &[S], a: usize, y: &[S], b: usize, batch: usize) -> Vec<S> {
    let mut out = Vec::with_capacity(batch * (a + b));
    for i in 0..batch {
        out.extend_from_slice(&x[i * a..(i + 1) * a]);
        out.extend_from_slice(&y[i * b..(i + 1) * b]);
    }
    out
}

/// Inverse of [`concat`].
fn split<S: Scalar>(z: &[S], a: usize, b: usize, batch: usize) -> (Vec<S>, Vec<S>) {
    let mut x = Vec::with_capacity(batch * a);
    let mut y = Vec::with_capacity(batch * b);
    for row in z.chunks_exact(a + b).take(batch) {
        x.extend_from_slice(&row[..a]);
        y.extend_from_slice(&row[a..]);
    }
    (x, y)
}

fn add_into<S: Scalar>(acc: &mut [S], v: &[S]) {
    for (a, &b) in acc.iter_mut().zip(v) {
        *a = *a + b;
    }
}

/// The full network with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<S> {
    pub config: NetConfig,
    pub layout: Layout,
    pub params: Vec<S>,
}

impl<S: Scalar> Network<S> {
    /// Uniform `±sqrt(6 / (fan_in + fan_out))` weights and zero biases; the
    /// decoder's output biases start at 0.5, mid-range of the clamp.
    pub fn init(config: NetConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(&config);
        let mut params = vec![S::zero(); layout.total];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |offset: usize, fan_in: usize, fan_out: usize, weights: usize| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in &mut params[offset..offset + weights] {
                *p = S::from_f(rng.gen_range(-limit..limit));
            }
        };
        let dense: Vec<Dense> = layout
            .enc_dense
            .iter()
            .chain(
                layout
                    .predictors
                    .iter()
                    .flat_map(|p| p.stages.iter().chain([&p.delta, &p.memory])),
            )
            .chain(&layout.dec_dense)
            .copied()
            .collect();
        for d in dense {
            fill(d.offset, d.inp, d.out, d.inp * d.out);
        }
        for c in layout.enc_conv.iter().chain(&layout.dec_conv) {
            fill(c.offset, 9 * c.cin, 9 * c.cout, 9 * c.cin * c.cout);
        }
        let last = layout.dec_conv[1];
        let bias = last.offset + 9 * last.cin * last.cout;
        for p in &mut params[bias..bias + last.cout] {
            *p = S::from_f(0.5);
        }
        Ok(Self {
            config,
            layout,
            params,
        })
    }

    pub fn from_params(config: NetConfig, params: Vec<S>) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(&config);
        if params.len() != layout.total {
            return Err(Error::Config(format!(
                "expected {} parameters, got {}",
                layout.total,
                params.len()
            )));
        }
        Ok(Self {
            config,
            layout,
            params,
        })
    }

    pub fn zero_grads(&self) -> Vec<S> {
        vec![S::zero(); self.layout.total]
    }

    /// States `[batch, n, n, 4]` to latents `[batch, latent]`.
    pub fn encode(&self, x: &[S], batch: usize) -> EncoderCache<S> {
        let p = &self.params;
        let l = &self.layout;
        let n = self.config.resolution;
        let input = to_planar(x, batch, n * n, 4);
        let mut h1 = l.enc_conv[0].forward(p, &input, batch);
        tanh_inplace(&mut h1);
        let mut h2 = l.enc_conv[1].forward(p, &h1, batch);
        tanh_inplace(&mut h2);
        let mut ins: Vec<Vec<S>> = Vec::with_capacity(3);
        let mut cur = h2.clone();
        for d in &l.enc_dense {
            let mut y = d.forward(p, &cur, batch);
            tanh_inplace(&mut y);
            ins.push(std::mem::replace(&mut cur, y));
        }
        let [a, b, c]: [Vec<S>; 3] = ins.try_into().expect("three dense stages");
        EncoderCache {
            input,
            conv_out: [h1, h2],
            dense_in: [a, b, c],
            out: cur,
            batch,
        }
    }

    pub fn encode_backward(&self, cache: &EncoderCache<S>, dout: &[S], g: &mut [S]) {
        let p = &self.params;
        let l = &self.layout;
        let batch = cache.batch;
        let mut dy = tanh_backward(&cache.out, dout);
        for i in (0..3).rev() {
            let dx = l.enc_dense[i]
                .backward(p, g, &cache.dense_in[i], &dy, batch, true)
                .expect("dx requested");
            let y = if i == 0 {
                &cache.conv_out[1]
            } else {
                &cache.dense_in[i]
            };
            dy = tanh_backward(y, &dx);
        }
        let dx = l.enc_conv[1]
            .backward(p, g, &cache.conv_out[0], &dy, batch, true)
            .expect("dx requested");
        let dy = tanh_backward(&cache.conv_out[0], &dx);
        l.enc_conv[0].backward(p, g, &cache.input, &dy, batch, false);
    }

    /// One predictor step for a batch that shares `kind`.
    pub fn predict(
        &self,
        kind: AffordanceKind,
        c: &[S],
        a: &[S],
        mem: &[S],
        batch: usize,
    ) -> PredictorCache<S> {
        let p = &self.params;
        let pl = &self.layout.predictors[kind.index()];
        let cfg = &self.config;
        let act = ACTION_INPUTS;
        let z0 = concat(
            &concat(c, cfg.latent, a, act, batch),
            cfg.latent + act,
            mem,
            cfg.memory,
            batch,
        );
        let mut stage_in = vec![z0];
        let mut stage_out = Vec::with_capacity(3);
        for d in &pl.stages {
            let mut h = d.forward(p, stage_in.last().expect("input"), batch);
            tanh_inplace(&mut h);
            stage_in.push(concat(&h, cfg.hidden, a, act, batch));
            stage_out.push(h);
        }
        let z3 = stage_in.last().expect("input");
        let mut delta = pl.delta.forward(p, z3, batch);
        tanh_inplace(&mut delta);
        let mut memory = pl.memory.forward(p, z3, batch);
        tanh_inplace(&mut memory);
        PredictorCache {
            stage_in: stage_in.try_into().expect("four stage inputs"),
            stage_out: stage_out.try_into().expect("three stage outputs"),
            delta,
            memory,
            batch,
        }
    }

    /// Returns `(dc, da, dmem)`.
    pub fn predict_backward(
        &self,
        kind: AffordanceKind,
        cache: &PredictorCache<S>,
        ddelta: &[S],
        dmemory: &[S],
        g: &mut [S],
    ) -> (Vec<S>, Vec<S>, Vec<S>) {
        let p = &self.params;
        let pl = &self.layout.predictors[kind.index()];
        let cfg = &self.config;
        let (act, h, batch) = (ACTION_INPUTS, cfg.hidden, cache.batch);
        let dd = tanh_backward(&cache.delta, ddelta);
        let dm = tanh_backward(&cache.memory, dmemory);
        let mut dz = pl
            .delta
            .backward(p, g, &cache.stage_in[3], &dd, batch, true)
            .expect("dx");
        add_into(
            &mut dz,
            &pl.memory
                .backward(p, g, &cache.stage_in[3], &dm, batch, true)
                .expect("dx"),
        );
        let mut da = vec![S::zero(); batch * act];
        for i in (0..3).rev() {
            let (dh, da_i) = split(&dz, h, act, batch);
            add_into(&mut da, &da_i);
            let dy = tanh_backward(&cache.stage_out[i], &dh);
            dz = pl.stages[i]
                .backward(p, g, &cache.stage_in[i], &dy, batch, true)
                .expect("dx");
        }
        let (dca, dmem) = split(&dz, cfg.latent + act, cfg.memory, batch);
        let (dc, da0) = split(&dca, cfg.latent, act, batch);
        add_into(&mut da, &da0);
        (dc, da, dmem)
    }

    /// Latent deltas `[batch, latent]` to unclamped diffs `[batch, n, n, 5]`.
    pub fn decode(&self, delta: &[S], batch: usize) -> DecoderCache<S> {
        let p = &self.params;
        let l = &self.layout;
        let mut ins: Vec<Vec<S>> = Vec::with_capacity(3);
        let mut cur = delta.to_vec();
        for d in &l.dec_dense {
            let mut y = d.forward(p, &cur, batch);
            tanh_inplace(&mut y);
            ins.push(std::mem::replace(&mut cur, y));
        }
        let mut h = l.dec_conv[0].forward_up2(p, &cur, batch);
        tanh_inplace(&mut h);
        let n = self.config.resolution;
        let raw = to_interleaved(&l.dec_conv[1].forward_up2(p, &h, batch), batch, n * n, 5);
        DecoderCache {
            dense_in: ins.try_into().expect("three dense stages"),
            dense_out: cur,
            conv_out: h,
            raw,
            batch,
        }
    }

    /// Backward from gradients on the unclamped output; returns `ddelta`.
    pub fn decode_backward(&self, cache: &DecoderCache<S>, draw: &[S], g: &mut [S]) -> Vec<S> {
        let p = &self.params;
        let l = &self.layout;
        let (batch, n) = (cache.batch, self.config.resolution);
        let draw = to_planar(draw, batch, n * n, 5);
        let dh = l.dec_conv[1]
            .backward_up2(p, g, &cache.conv_out, &draw, batch, true)
            .expect("dx");
        let dy = tanh_backward(&cache.conv_out, &dh);
        let dflat = l.dec_conv[0]
            .backward_up2(p, g, &cache.dense_out, &dy, batch, true)
            .expect("dx");
        let mut dy = tanh_backward(&cache.dense_out, &dflat);
        for i in (0..3).rev() {
            let dx = l.dec_dense[i]
                .backward(p, g, &cache.dense_in[i], &dy, batch, true)
                .expect("dx");
            if i == 0 {
                return dx;
            }
            dy = tanh_backward(&cache.dense_in[i], &dx);
        }
        unreachable!()
    }

    /// Cast every parameter to another scalar type.
    pub fn cast<T: Scalar>(&self) -> Network<T> {
        Network {
            config: self.config,
            layout: self.layout.clone(),
            params: self.params.iter().map(|v| T::from_f(v.as_f64())).collect(),
        }
    }
}
