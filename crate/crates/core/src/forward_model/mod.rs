//! Differential forward model: encode the observed state once, chain
//! per-kind latent predictors, decode each latent delta into a diff and blend
//! it into the previous predicted state.

mod action;
mod eval;
mod gradcheck;
mod loss;
mod train;

pub use action::{ActionCode, ActionInput, TURN_INPUT, Z_RANGE};
pub use eval::{eval_prediction, PredictionReport, StepError};
pub use gradcheck::{grad_check, grad_check_with, GradCheckReport, GradSample};
pub use loss::{loss_and_grad, loss_and_grad_with, GradMode, TrainBatch, BCE_WEIGHT};
pub use train::{
    sign_sgd_step, train, validation_loss, EvalRecord, LrSchedule, TrainConfig, TrainReport,
};

use crate::affordance::{AffordanceKind, ParametrizedAffordance};
use crate::error::{Error, Result};
use crate::microworld::{render, step, WorldState};
use crate::nn::{Network, ACTION_INPUTS};
use crate::raster::{apply_diff, DiffDescriptor, Raster, RasterState, DIFF_CHANNELS};

pub fn encode(net: &Network<f32>, state: &RasterState) -> Result<Vec<f32>> {
    check_resolution(net, state)?;
    Ok(net.encode(state.data(), 1).out)
}

/// One predictor step; returns the latent delta and the next memory trace.
pub fn predict_delta(
    net: &Network<f32>,
    c: &[f32],
    a: &ActionInput,
    mem: &[f32],
) -> Result<(Vec<f32>, Vec<f32>)> {
    let cfg = &net.config;
    if c.len() != cfg.latent || mem.len() != cfg.memory {
        return Err(Error::RejectedInput(format!(
            "expected latent {} and memory {}, got {} and {}",
            cfg.latent,
            cfg.memory,
            c.len(),
            mem.len()
        )));
    }
    let p = net.predict(a.kind, c, &a.to_array(), mem, 1);
    Ok((p.delta, p.memory))
}

pub fn latent_step(c: &[f32], delta: &[f32]) -> Result<Vec<f32>> {
    if c.len() != delta.len() {
        return Err(Error::RejectedInput(format!(
            "latent has {} values, delta {}",
            c.len(),
            delta.len()
        )));
    }
    Ok(c.iter().zip(delta).map(|(a, b)| a + b).collect())
}

fn clamp_diffs(net: &Network<f32>, raw: Vec<f32>) -> Vec<DiffDescriptor> {
    let n = net.config.resolution;
    raw.chunks_exact(n * n * DIFF_CHANNELS)
        .map(|r| {
            let data = r.iter().map(|v| v.clamp(0.0, 1.0)).collect();
            DiffDescriptor::new(Raster::from_vec(n, n, DIFF_CHANNELS, data).expect("decoder shape"))
                .expect("clamped to the unit range")
        })
        .collect()
}

pub fn decode(net: &Network<f32>, delta: &[f32]) -> Result<DiffDescriptor> {
    if delta.len() != net.config.latent {
        return Err(Error::RejectedInput(format!(
            "expected latent delta of {}, got {}",
            net.config.latent,
            delta.len()
        )));
    }
    let raw = net.decode(delta, 1).raw;
    Ok(clamp_diffs(net, raw).pop().expect("one diff"))
}

fn check_resolution(net: &Network<f32>, state: &RasterState) -> Result<()> {
    if state.resolution() != net.config.resolution {
        return Err(Error::RejectedInput(format!(
            "network expects {0}x{0} states, got {1}x{1}",
            net.config.resolution,
            state.resolution()
        )));
    }
    Ok(())
}

/// Source of predicted states.
#[derive(Debug, Clone, Copy)]
pub enum Backend<'a> {
    /// Simulate and render; needs the root world.
    Oracle,
    Neural(&'a Network<f32>),
}

impl Backend<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Backend::Oracle => "oracle",
            Backend::Neural(_) => "neural",
        }
    }
}

/// What a backend carries from one step of a chain to the next.
#[derive(Debug, Clone, PartialEq)]
pub enum ChainContext {
    Oracle(WorldState),
    Neural { latent: Vec<f32>, memory: Vec<f32> },
}

/// A predicted state together with the context needed to extend its chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub state: RasterState,
    pub context: ChainContext,
}

impl<'a> Backend<'a> {
    /// Chain start at the observed state.
    pub fn start(&self, root: &RasterState, world: Option<&WorldState>) -> Result<ChainState> {
        let context =
            match self {
                Backend::Oracle => ChainContext::Oracle(world.cloned().ok_or_else(|| {
                    Error::Config("the oracle backend needs the root world".into())
                })?),
                Backend::Neural(net) => ChainContext::Neural {
                    latent: encode(net, root)?,
                    memory: vec![0.0; net.config.memory],
                },
            };
        Ok(ChainState {
            state: root.clone(),
            context,
        })
    }

    /// Extend every `(chain, action)` pair by one step. Neural steps run as
    /// one batch per affordance kind; results come back in input order.
    pub fn advance(
        &self,
        items: &[(&ChainState, &ParametrizedAffordance)],
    ) -> Result<Vec<(DiffDescriptor, ChainState)>> {
        match self {
            Backend::Oracle => items
                .iter()
                .map(|(c, a)| {
                    let ChainContext::Oracle(world) = &c.context else {
                        return Err(Error::Config(
                            "chain was not started by the oracle backend".into(),
                        ));
                    };
                    // An action the world does not afford leaves it unchanged.
                    let next = match step(world, a) {
                        Ok(w) => w,
                        Err(Error::Precondition(_)) => world.clone(),
                        Err(e) => return Err(e),
                    };
                    let state = render(&next, c.state.resolution());
                    let diff = DiffDescriptor::between(&c.state, &state)?;
                    Ok((
                        diff,
                        ChainState {
                            state,
                            context: ChainContext::Oracle(next),
                        },
                    ))
                })
                .collect(),
            Backend::Neural(net) => advance_neural(net, items),
        }
    }
}

fn advance_neural(
    net: &Network<f32>,
    items: &[(&ChainState, &ParametrizedAffordance)],
) -> Result<Vec<(DiffDescriptor, ChainState)>> {
    let cfg = net.config;
    let mut out: Vec<Option<(DiffDescriptor, ChainState)>> = vec![None; items.len()];
    for kind in AffordanceKind::ALL {
        let idx: Vec<usize> = (0..items.len())
            .filter(|&i| items[i].1.kind() == kind)
            .collect();
        if idx.is_empty() {
            continue;
        }
        let b = idx.len();
        let mut c = Vec::with_capacity(b * cfg.latent);
        let mut m = Vec::with_capacity(b * cfg.memory);
        let mut a = Vec::with_capacity(b * ACTION_INPUTS);
        for &i in &idx {
            let (chain, action) = items[i];
            check_resolution(net, &chain.state)?;
            let ChainContext::Neural { latent, memory } = &chain.context else {
                return Err(Error::Config(
                    "chain was not started by the neural backend".into(),
                ));
            };
            c.extend_from_slice(latent);
            m.extend_from_slice(memory);
            a.extend(
                ActionCode::new(action, cfg.resolution)
                    .input(&chain.state)
                    .to_array(),
            );
        }
        let p = net.predict(kind, &c, &a, &m, b);
        let diffs = clamp_diffs(net, net.decode(&p.delta, b).raw);
        for (j, (&i, diff)) in idx.iter().zip(diffs).enumerate() {
            let rows = |v: &[f32], w: usize| v[j * w..(j + 1) * w].to_vec();
            let latent = latent_step(&rows(&c, cfg.latent), &rows(&p.delta, cfg.latent))?;
            let state = apply_diff(&items[i].0.state, &diff)?;
            out[i] = Some((
                diff,
                ChainState {
                    state,
                    context: ChainContext::Neural {
                        latent,
                        memory: rows(&p.memory, cfg.memory),
                    },
                },
            ));
        }
    }
    Ok(out
        .into_iter()
        .map(|o| o.expect("every item has a kind"))
        .collect())
}

/// Predict every step of `chain` from `root`, each step reading its action
/// pixel from the previous predicted state.
pub fn rollout(
    root: &RasterState,
    world: Option<&WorldState>,
    chain: &[ParametrizedAffordance],
    backend: Backend,
) -> Result<Vec<(DiffDescriptor, RasterState)>> {
    if chain.is_empty() {
        return Ok(Vec::new());
    }
    let mut cur = backend.start(root, world)?;
    let mut out = Vec::with_capacity(chain.len());
    for a in chain {
        let (diff, next) = backend.advance(&[(&cur, a)])?.pop().expect("one result");
        out.push((diff, next.state.clone()));
        cur = next;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::generate_sequence;
    use crate::nn::NetConfig;

    #[test]
    fn oracle_rollout_matches_the_sequence() {
        for seed in 0..30 {
            let s = generate_sequence(seed, 32);
            let out = rollout(
                &s.frames[0],
                Some(&s.worlds[0]),
                &s.actions,
                Backend::Oracle,
            )
            .unwrap();
            assert_eq!(out.len(), s.len());
            let mut cur = s.frames[0].clone();
            for (k, (diff, state)) in out.iter().enumerate() {
                cur = apply_diff(&cur, diff).unwrap();
                assert_eq!(&cur, state);
                assert_eq!(state, &s.frames[k + 1]);
            }
        }
    }

    #[test]
    fn oracle_without_world_is_a_config_error() {
        let s = (0..)
            .map(|k| generate_sequence(k, 32))
            .find(|s| !s.is_empty())
            .unwrap();
        assert!(matches!(
            rollout(&s.frames[0], None, &s.actions, Backend::Oracle),
            Err(Error::Config(_))
        ));
        assert!(rollout(&s.frames[0], None, &[], Backend::Oracle)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn neural_batch_equals_single_steps() {
        let net: Network<f32> = Network::init(NetConfig::default(), 2).unwrap();
        let seqs: Vec<_> = (0..8)
            .map(|s| generate_sequence(s, 32))
            .filter(|s| !s.is_empty())
            .collect();
        let b = Backend::Neural(&net);
        let starts: Vec<ChainState> = seqs
            .iter()
            .map(|s| b.start(&s.frames[0], None).unwrap())
            .collect();
        let items: Vec<_> = starts
            .iter()
            .zip(&seqs)
            .map(|(c, s)| (c, &s.actions[0]))
            .collect();
        let batched = b.advance(&items).unwrap();
        for (k, it) in items.iter().enumerate() {
            let single = b.advance(&[*it]).unwrap().pop().unwrap();
            assert_eq!(single.0, batched[k].0);
            assert_eq!(single.1.state, batched[k].1.state);
        }
    }
}
