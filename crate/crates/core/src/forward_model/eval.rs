//! Prediction accuracy: mean absolute RGBD error per step index, over all
//! pixels and over the pixels that actually changed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{rollout, Backend};
use crate::datagen::{Sequence, MAX_SEQUENCE_ACTIONS};
use crate::error::Result;
use crate::raster::STATE_CHANNELS;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepError {
    /// Step index (1-based); 0 for the overall row.
    pub step: usize,
    pub frames: usize,
    pub changed_pixels: usize,
    /// Mean absolute error over every pixel and channel.
    pub all_area: f64,
    /// Mean absolute error over changed pixels only.
    pub changed_area: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionReport {
    pub steps: Vec<StepError>,
    pub overall: StepError,
}

#[derive(Debug, Clone, Copy, Default)]
struct Sums {
    frames: usize,
    values: usize,
    changed: usize,
    abs_all: f64,
    abs_changed: f64,
}

impl Sums {
    fn add(&mut self, o: &Sums) {
        self.frames += o.frames;
        self.values += o.values;
        self.changed += o.changed;
        self.abs_all += o.abs_all;
        self.abs_changed += o.abs_changed;
    }

    fn finish(&self, step: usize) -> StepError {
        StepError {
            step,
            frames: self.frames,
            changed_pixels: self.changed,
            all_area: if self.values > 0 {
                self.abs_all / self.values as f64
            } else {
                0.0
            },
            changed_area: if self.changed > 0 {
                self.abs_changed / (self.changed * STATE_CHANNELS) as f64
            } else {
                0.0
            },
        }
    }
}

fn sequence_sums(seq: &Sequence, backend: Backend) -> Result<Vec<Sums>> {
    let preds = rollout(&seq.frames[0], seq.worlds.first(), &seq.actions, backend)?;
    Ok(preds
        .iter()
        .enumerate()
        .map(|(t, (_, pred))| {
            let gt = &seq.frames[t + 1];
            let mask = seq.masks[t].data();
            let mut s = Sums {
                frames: 1,
                values: gt.data().len(),
                ..Sums::default()
            };
            for (q, (a, b)) in pred
                .data()
                .chunks_exact(STATE_CHANNELS)
                .zip(gt.data().chunks_exact(STATE_CHANNELS))
                .enumerate()
            {
                let e: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs() as f64).sum();
                s.abs_all += e;
                if mask[q] > 0.5 {
                    s.changed += 1;
                    s.abs_changed += e;
                }
            }
            s
        })
        .collect())
}

pub fn eval_prediction(backend: Backend, test: &[Sequence]) -> Result<PredictionReport> {
    let per_seq: Vec<Vec<Sums>> = test
        .par_iter()
        .map(|s| sequence_sums(s, backend))
        .collect::<Result<_>>()?;
    let mut steps = vec![Sums::default(); MAX_SEQUENCE_ACTIONS];
    let mut overall = Sums::default();
    for seq in &per_seq {
        for (t, s) in seq.iter().enumerate() {
            if t >= steps.len() {
                steps.resize(t + 1, Sums::default());
            }
            steps[t].add(s);
            overall.add(s);
        }
    }
    Ok(PredictionReport {
        steps: steps
            .iter()
            .enumerate()
            .map(|(t, s)| s.finish(t + 1))
            .collect(),
        overall: overall.finish(0),
    })
}

impl PredictionReport {
    pub fn table(&self) -> String {
        let mut out = String::from("step  frames  changed_px  all_area_mae  changed_area_mae\n");
        let row = |label: String, e: &StepError| {
            format!(
                "{label:<4}  {:>6}  {:>10}  {:>12.5}  {:>16.5}\n",
                e.frames, e.changed_pixels, e.all_area, e.changed_area
            )
        };
        for e in &self.steps {
            out += &row(e.step.to_string(), e);
        }
        out += &row("all".into(), &self.overall);
        out
    }
}
