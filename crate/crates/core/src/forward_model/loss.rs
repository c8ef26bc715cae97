//! Sequence loss on composed predicted states and its exact gradient.

use crate::affordance::AffordanceKind;
use crate::datagen::Example;
use crate::error::{Error, Result};
use crate::nn::{DecoderCache, EncoderCache, Network, PredictorCache, Scalar, ACTION_INPUTS};
use crate::raster::{DIFF_CHANNELS, STATE_CHANNELS};

/// Weight of the mask cross-entropy next to the state error.
pub const BCE_WEIGHT: f64 = 0.1;
/// Mask predictions are clipped to `[eps, 1 - eps]` inside the log.
const BCE_EPS: f64 = 0.01;

/// Equal-length examples packed as batch-major tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainBatch<S> {
    pub batch: usize,
    pub steps: usize,
    pub resolution: usize,
    /// `[batch, n, n, 4]`.
    pub root: Vec<S>,
    /// `[step][batch]`.
    pub kinds: Vec<Vec<AffordanceKind>>,
    /// `[step]` of `[batch, 5]` geometric action inputs.
    pub values: Vec<Vec<S>>,
    /// `[step][batch]` flat pixel index of the action sample.
    pub pixels: Vec<Vec<usize>>,
    /// `[step]` of `[batch, n, n, 4]` ground-truth next states.
    pub targets: Vec<Vec<S>>,
    /// `[step]` of `[batch, n, n]` ground-truth changed masks.
    pub masks: Vec<Vec<S>>,
}

impl<S: Scalar> TrainBatch<S> {
    pub fn from_examples(examples: &[Example]) -> Result<Self> {
        let first = examples
            .first()
            .ok_or_else(|| Error::RejectedInput("empty batch".into()))?;
        let steps = first.actions.len();
        let n = first.resolution();
        if examples
            .iter()
            .any(|e| e.actions.len() != steps || e.resolution() != n)
        {
            return Err(Error::RejectedInput(
                "batch examples differ in length or resolution".into(),
            ));
        }
        let cast = |v: &[f32]| v.iter().map(|&x| S::from_f(x as f64)).collect::<Vec<S>>();
        let mut b = TrainBatch {
            batch: examples.len(),
            steps,
            resolution: n,
            root: examples
                .iter()
                .flat_map(|e| cast(e.frames[0].data()))
                .collect(),
            kinds: vec![Vec::new(); steps],
            values: vec![Vec::new(); steps],
            pixels: vec![Vec::new(); steps],
            targets: vec![Vec::new(); steps],
            masks: vec![Vec::new(); steps],
        };
        for t in 0..steps {
            for e in examples {
                let a = &e.actions[t];
                b.kinds[t].push(a.kind);
                b.values[t].extend(cast(&a.values));
                b.pixels[t].push(a.pixel.1 * n + a.pixel.0);
                b.targets[t].extend(cast(e.frames[t + 1].data()));
                b.masks[t].extend(cast(e.masks[t].data()));
            }
        }
        Ok(b)
    }

    fn pixels_per_item(&self) -> usize {
        self.resolution * self.resolution
    }
}

struct KindGroup<S> {
    kind: AffordanceKind,
    rows: Vec<usize>,
    cache: PredictorCache<S>,
}

struct StepCache<S> {
    groups: Vec<KindGroup<S>>,
    decoder: DecoderCache<S>,
    /// Clamped decoder output.
    out: Vec<S>,
}

fn gather<S: Scalar>(v: &[S], width: usize, rows: &[usize]) -> Vec<S> {
    rows.iter()
        .flat_map(|&r| v[r * width..(r + 1) * width].iter().copied())
        .collect()
}

fn scatter_add<S: Scalar>(dst: &mut [S], src: &[S], width: usize, rows: &[usize]) {
    for (j, &r) in rows.iter().enumerate() {
        for k in 0..width {
            dst[r * width + k] = dst[r * width + k] + src[j * width + k];
        }
    }
}

/// How gradients cross the output clamps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradMode {
    /// True derivative: zero wherever a clamp is active.
    Exact,
    /// Where a clamp is active, pass the gradient on when descent would
    /// move the value back into range. Keeps saturated outputs trainable.
    PassBack,
}

fn clamp_backward<S: Scalar>(x: S, g: S, lo: S, hi: S, mode: GradMode) -> S {
    let inside = x >= lo && x <= hi;
    let back = (x < lo && g < S::zero()) || (x > hi && g > S::zero());
    if inside || (mode == GradMode::PassBack && back) {
        g
    } else {
        S::zero()
    }
}

/// Loss of a batch; accumulates exact parameter gradients into `grads` when
/// given.
///
/// Per step: mean squared error of the composed state plus
/// [`BCE_WEIGHT`] times the mean mask cross-entropy, summed over steps.
pub fn loss_and_grad<S: Scalar>(
    net: &Network<S>,
    b: &TrainBatch<S>,
    grads: Option<&mut [S]>,
) -> f64 {
    loss_and_grad_with(net, b, grads, GradMode::Exact)
}

pub fn loss_and_grad_with<S: Scalar>(
    net: &Network<S>,
    b: &TrainBatch<S>,
    grads: Option<&mut [S]>,
    mode: GradMode,
) -> f64 {
    let cfg = &net.config;
    let (bs, p) = (b.batch, b.pixels_per_item());
    let (lat, mem_w) = (cfg.latent, cfg.memory);
    let one = S::one();
    let mse_scale = S::from_f(1.0 / (bs * p * STATE_CHANNELS) as f64);
    let bce_scale = S::from_f(BCE_WEIGHT / (bs * p) as f64);
    let eps = S::from_f(BCE_EPS);

    let enc: EncoderCache<S> = net.encode(&b.root, bs);
    let mut latents = vec![enc.out.clone()];
    let mut memories = vec![vec![S::zero(); bs * mem_w]];
    let mut states = vec![b.root.clone()];
    let mut caches: Vec<StepCache<S>> = Vec::with_capacity(b.steps);
    let mut loss = 0.0;

    for t in 0..b.steps {
        let s = &states[t];
        let mut a = Vec::with_capacity(bs * ACTION_INPUTS);
        for i in 0..bs {
            a.extend_from_slice(&b.values[t][i * 5..(i + 1) * 5]);
            let px = b.pixels[t][i];
            a.extend_from_slice(
                &s[(i * p + px) * STATE_CHANNELS..(i * p + px + 1) * STATE_CHANNELS],
            );
        }
        let mut delta = vec![S::zero(); bs * lat];
        let mut mem_next = vec![S::zero(); bs * mem_w];
        let mut groups = Vec::new();
        for kind in AffordanceKind::ALL {
            let rows: Vec<usize> = (0..bs).filter(|&i| b.kinds[t][i] == kind).collect();
            if rows.is_empty() {
                continue;
            }
            let cache = net.predict(
                kind,
                &gather(&latents[t], lat, &rows),
                &gather(&a, ACTION_INPUTS, &rows),
                &gather(&memories[t], mem_w, &rows),
                rows.len(),
            );
            scatter_add(&mut delta, &cache.delta, lat, &rows);
            scatter_add(&mut mem_next, &cache.memory, mem_w, &rows);
            groups.push(KindGroup { kind, rows, cache });
        }
        let decoder = net.decode(&delta, bs);
        let out: Vec<S> = decoder
            .raw
            .iter()
            .map(|&v| v.max(S::zero()).min(one))
            .collect();
        let mut next = Vec::with_capacity(bs * p * STATE_CHANNELS);
        let (mut se, mut ce) = (0.0, 0.0);
        for q in 0..bs * p {
            let d = &out[q * DIFF_CHANNELS..(q + 1) * DIFF_CHANNELS];
            let m = d[STATE_CHANNELS];
            for c in 0..STATE_CHANNELS {
                let v = m * d[c] + (one - m) * s[q * STATE_CHANNELS + c];
                let e = (v - b.targets[t][q * STATE_CHANNELS + c]).as_f64();
                se += e * e;
                next.push(v);
            }
            let mc = m.max(eps).min(one - eps).as_f64();
            let y = b.masks[t][q].as_f64();
            ce -= match y {
                0.0 => (1.0 - mc).ln(),
                1.0 => mc.ln(),
                _ => y * mc.ln() + (1.0 - y) * (1.0 - mc).ln(),
            };
        }
        loss += se / (bs * p * STATE_CHANNELS) as f64 + BCE_WEIGHT * ce / (bs * p) as f64;
        latents.push(
            latents[t]
                .iter()
                .zip(&delta)
                .map(|(&x, &y)| x + y)
                .collect(),
        );
        memories.push(mem_next);
        states.push(next);
        caches.push(StepCache {
            groups,
            decoder,
            out,
        });
    }

    let Some(g) = grads else {
        return loss;
    };

    let two = S::from_f(2.0);
    // Gradient w.r.t. the state after step t (index t + 1 in `states`).
    let mut ds = vec![S::zero(); bs * p * STATE_CHANNELS];
    let mut dlat = vec![S::zero(); bs * lat];
    let mut dmem = vec![S::zero(); bs * mem_w];
    for t in (0..b.steps).rev() {
        let sc = &caches[t];
        let s_prev = &states[t];
        let s_next = &states[t + 1];
        for (k, v) in ds.iter_mut().enumerate() {
            *v = *v + two * (s_next[k] - b.targets[t][k]) * mse_scale;
        }
        let mut dout = vec![S::zero(); bs * p * DIFF_CHANNELS];
        let mut ds_prev = vec![S::zero(); bs * p * STATE_CHANNELS];
        for q in 0..bs * p {
            let d = &sc.out[q * DIFF_CHANNELS..(q + 1) * DIFF_CHANNELS];
            let m = d[STATE_CHANNELS];
            let mut dm = S::zero();
            for c in 0..STATE_CHANNELS {
                let k = q * STATE_CHANNELS + c;
                dout[q * DIFF_CHANNELS + c] = ds[k] * m;
                dm = dm + ds[k] * (d[c] - s_prev[k]);
                ds_prev[k] = ds[k] * (one - m);
            }
            let mc = m.max(eps).min(one - eps);
            let y = b.masks[t][q];
            let dbce = bce_scale * (mc - y) / (mc * (one - mc));
            dm = dm + clamp_backward(m, dbce, eps, one - eps, mode);
            dout[q * DIFF_CHANNELS + STATE_CHANNELS] = dm;
        }
        let draw: Vec<S> = sc
            .decoder
            .raw
            .iter()
            .zip(&dout)
            .map(|(&x, &gv)| clamp_backward(x, gv, S::zero(), one, mode))
            .collect();
        let mut ddelta = net.decode_backward(&sc.decoder, &draw, g);
        // c_{t+1} = c_t + delta_t
        for (x, &y) in ddelta.iter_mut().zip(&dlat) {
            *x = *x + y;
        }
        let mut da = vec![S::zero(); bs * ACTION_INPUTS];
        let mut dlat_prev = dlat.clone();
        let mut dmem_prev = vec![S::zero(); bs * mem_w];
        for grp in &sc.groups {
            let (dc, dai, dmi) = net.predict_backward(
                grp.kind,
                &grp.cache,
                &gather(&ddelta, lat, &grp.rows),
                &gather(&dmem, mem_w, &grp.rows),
                g,
            );
            scatter_add(&mut dlat_prev, &dc, lat, &grp.rows);
            scatter_add(&mut da, &dai, ACTION_INPUTS, &grp.rows);
            scatter_add(&mut dmem_prev, &dmi, mem_w, &grp.rows);
        }
        // The action pixel was read from the previous state.
        for i in 0..bs {
            let px = b.pixels[t][i];
            for c in 0..STATE_CHANNELS {
                let k = (i * p + px) * STATE_CHANNELS + c;
                ds_prev[k] = ds_prev[k] + da[i * ACTION_INPUTS + 5 + c];
            }
        }
        ds = ds_prev;
        dlat = dlat_prev;
        dmem = dmem_prev;
    }
    net.encode_backward(&enc, &dlat, g);
    loss
}
