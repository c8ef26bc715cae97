//! Finite-difference validation of the analytic gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::loss::{loss_and_grad, TrainBatch};
use crate::affordance::AffordanceKind;
use crate::error::{Error, Result};
use crate::nn::Network;

/// Gradients below this magnitude are compared absolutely.
const REL_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct GradSample {
    pub index: usize,
    pub module: &'static str,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub samples: Vec<GradSample>,
    pub max_rel_error: f64,
}

/// Compare analytic gradients to central differences on `per_module`
/// random parameters of the encoder, each predictor and the decoder.
pub fn grad_check(
    net: &Network<f64>,
    batch: &TrainBatch<f64>,
    epsilon: f64,
    per_module: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    grad_check_with(net, batch, epsilon, per_module, seed, |n, b| {
        let mut g = n.zero_grads();
        loss_and_grad(n, b, Some(&mut g));
        g
    })
}

/// [`grad_check`] against any analytic gradient function.
pub fn grad_check_with(
    net: &Network<f64>,
    batch: &TrainBatch<f64>,
    epsilon: f64,
    per_module: usize,
    seed: u64,
    analytic: impl Fn(&Network<f64>, &TrainBatch<f64>) -> Vec<f64>,
) -> Result<GradCheckReport> {
    if epsilon <= 0.0 || !epsilon.is_finite() {
        return Err(Error::RejectedInput(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let l = &net.layout;
    let modules = [
        ("encoder", l.encoder_range()),
        ("grasp", l.predictor_range(AffordanceKind::Grasp)),
        ("place", l.predictor_range(AffordanceKind::Place)),
        ("turn", l.predictor_range(AffordanceKind::Turn)),
        ("decoder", l.decoder_range()),
    ];
    let grads = analytic(net, batch);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probe = net.clone();
    let mut samples = Vec::new();
    for (module, range) in modules {
        let k = per_module.min(range.len());
        let mut picks: Vec<usize> = sample(&mut rng, range.len(), k)
            .into_iter()
            .map(|i| range.start + i)
            .collect();
        picks.sort_unstable();
        for index in picks {
            let w = net.params[index];
            probe.params[index] = w + epsilon;
            let up = loss_and_grad(&probe, batch, None);
            probe.params[index] = w - epsilon;
            let down = loss_and_grad(&probe, batch, None);
            probe.params[index] = w;
            let numeric = (up - down) / (2.0 * epsilon);
            let a = grads[index];
            let rel_error = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_FLOOR);
            samples.push(GradSample {
                index,
                module,
                analytic: a,
                numeric,
                rel_error,
            });
        }
    }
    let max_rel_error = samples.iter().map(|s| s.rel_error).fold(0.0, f64::max);
    Ok(GradCheckReport {
        samples,
        max_rel_error,
    })
}
