//! SignSGD training with validation-driven learning-rate halving.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{loss_and_grad, loss_and_grad_with, GradMode, TrainBatch};
use crate::datagen::{augment, Dataset, Example, Sequence};
use crate::error::{Error, Result};
use crate::nn::{NetConfig, Network};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batches: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Batches between validation passes.
    pub eval_interval: usize,
    /// Validation passes without improvement before the rate is cut.
    pub patience: usize,
    pub decay: f64,
    /// Batch sequence lengths cycle through `1..=max_len`.
    pub max_len: usize,
    pub augment: bool,
    pub seed: u64,
    pub init_seed: u64,
    pub net: NetConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batches: 20_000,
            batch_size: 32,
            learning_rate: 5e-5,
            eval_interval: 500,
            patience: 5,
            decay: 0.5,
            max_len: 4,
            augment: true,
            seed: 0,
            init_seed: 0,
            net: NetConfig::default(),
        }
    }
}

/// `w <- w - lr * sign(g)` with `sign(0) = 0`.
pub fn sign_sgd_step(params: &mut [f32], grads: &[f32], lr: f32) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::RejectedInput(format!(
            "{} parameters but {} gradients",
            params.len(),
            grads.len()
        )));
    }
    for (w, &g) in params.iter_mut().zip(grads) {
        if g > 0.0 {
            *w -= lr;
        } else if g < 0.0 {
            *w += lr;
        }
    }
    Ok(())
}

/// Halves (by `decay`) the rate after `patience` evaluations in a row
/// without a new best.
#[derive(Debug, Clone, PartialEq)]
pub struct LrSchedule {
    pub lr: f64,
    pub best: f64,
    pub stagnant: usize,
    pub patience: usize,
    pub decay: f64,
}

impl LrSchedule {
    pub fn new(lr: f64, patience: usize, decay: f64) -> Self {
        Self {
            lr,
            best: f64::INFINITY,
            stagnant: 0,
            patience,
            decay,
        }
    }

    /// Record a validation loss; true when it is a new best.
    pub fn observe(&mut self, loss: f64) -> bool {
        if loss < self.best {
            self.best = loss;
            self.stagnant = 0;
            return true;
        }
        self.stagnant += 1;
        if self.stagnant >= self.patience {
            self.lr *= self.decay;
            self.stagnant = 0;
        }
        false
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub batch: usize,
    /// Mean training loss since the previous evaluation.
    pub train_loss: f64,
    pub val_loss: f64,
    /// Rate in effect after this evaluation.
    pub lr: f64,
    pub improved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub batches: usize,
    pub best_batch: usize,
    pub best_val_loss: f64,
    pub final_lr: f64,
    pub history: Vec<EvalRecord>,
}

/// Mean loss over whole sequences, batched by length.
pub fn validation_loss(net: &Network<f32>, seqs: &[Sequence]) -> f64 {
    let (mut total, mut count) = (0.0, 0usize);
    for len in 1..=crate::datagen::MAX_SEQUENCE_ACTIONS {
        let exs: Vec<Example> = seqs
            .iter()
            .filter(|s| s.len() == len)
            .map(Example::whole)
            .collect();
        for chunk in exs.chunks(64) {
            let b = TrainBatch::from_examples(chunk).expect("equal lengths");
            total += loss_and_grad(net, &b, None) * chunk.len() as f64;
            count += chunk.len();
        }
    }
    if count == 0 {
        f64::NAN
    } else {
        total / count as f64
    }
}

/// Train from scratch; returns the parameters with the best validation loss.
pub fn train(
    data: &Dataset,
    cfg: &TrainConfig,
    mut progress: impl FnMut(&EvalRecord),
) -> Result<(Network<f32>, TrainReport)> {
    if cfg.batch_size == 0 || cfg.eval_interval == 0 || cfg.max_len == 0 || cfg.batches == 0 {
        return Err(Error::Config(
            "batch size, batches, eval interval and max length must be positive".into(),
        ));
    }
    if cfg.net.resolution != data.resolution {
        return Err(Error::Config(format!(
            "network resolution {} but dataset resolution {}",
            cfg.net.resolution, data.resolution
        )));
    }
    let by_len: Vec<Vec<usize>> = (0..=cfg.max_len)
        .map(|l| {
            (0..data.train.len())
                .filter(|&i| l > 0 && data.train[i].len() >= l)
                .collect()
        })
        .collect();
    if by_len[1].is_empty() {
        return Err(Error::Config("training set has no actions".into()));
    }
    let val: &[Sequence] = if data.val.iter().any(|s| !s.is_empty()) {
        &data.val
    } else {
        &data.train
    };

    let mut net: Network<f32> = Network::init(cfg.net, cfg.init_seed)?;
    let mut best = net.clone();
    let mut sched = LrSchedule::new(cfg.learning_rate, cfg.patience, cfg.decay);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut grads = net.zero_grads();
    let mut report = TrainReport {
        batches: cfg.batches,
        best_batch: 0,
        best_val_loss: f64::INFINITY,
        final_lr: cfg.learning_rate,
        history: Vec::new(),
    };
    let (mut running, mut seen) = (0.0, 0usize);
    for k in 0..cfg.batches {
        let mut len = k % cfg.max_len + 1;
        while by_len[len].is_empty() {
            len -= 1;
        }
        let pool = &by_len[len];
        let examples: Vec<Example> = (0..cfg.batch_size)
            .map(|_| {
                let s = &data.train[pool[rng.gen_range(0..pool.len())]];
                let start = rng.gen_range(0..=s.len() - len);
                let ex = Example::window(s, start, len);
                let aug_seed: u64 = rng.gen();
                if cfg.augment {
                    augment(&ex, aug_seed)
                } else {
                    ex
                }
            })
            .collect();
        let batch = TrainBatch::from_examples(&examples)?;
        grads.fill(0.0);
        running += loss_and_grad_with(&net, &batch, Some(&mut grads), GradMode::PassBack);
        seen += 1;
        sign_sgd_step(&mut net.params, &grads, sched.lr as f32)?;

        let done = k + 1;
        if done % cfg.eval_interval == 0 || done == cfg.batches {
            let val_loss = validation_loss(&net, val);
            let improved = sched.observe(val_loss);
            if improved {
                best = net.clone();
                report.best_batch = done;
                report.best_val_loss = val_loss;
            }
            let rec = EvalRecord {
                batch: done,
                train_loss: running / seen.max(1) as f64,
                val_loss,
                lr: sched.lr,
                improved,
            };
            progress(&rec);
            report.history.push(rec);
            running = 0.0;
            seen = 0;
        }
    }
    report.final_lr = sched.lr;
    Ok((best, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_sgd_semantics() {
        let mut w = [1.0f32, 1.0, 1.0];
        sign_sgd_step(&mut w, &[3.7, 0.0, -0.01], 1e-4).unwrap();
        assert_eq!(w, [1.0 - 1e-4, 1.0, 1.0 + 1e-4]);
        assert!(sign_sgd_step(&mut w, &[1.0], 1e-4).is_err());
    }

    #[test]
    fn schedule_halves_after_five_stagnant_evaluations() {
        let mut s = LrSchedule::new(5e-5, 5, 0.5);
        assert!(s.observe(1.0));
        for _ in 0..4 {
            assert!(!s.observe(1.0));
            assert_eq!(s.lr, 5e-5);
        }
        assert!(!s.observe(1.5));
        assert_eq!(s.lr, 2.5e-5);
        assert!(s.observe(0.5));
    }
}
