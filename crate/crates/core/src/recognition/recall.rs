//! Recall evaluation and detection-list serialization.

use std::io::{BufRead, Write};

use serde::Serialize;

use crate::affordance::{AffordanceKind, Detection};
use crate::error::{Error, Result};
use crate::geometry::angle_diff_deg;

/// A ground truth counts as recalled by a detection within this distance...
pub const RECALL_DIST: f64 = 0.025;
/// ...and strictly below this angle error.
pub const RECALL_ANGLE_DEG: f64 = 5.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct KindCount {
    pub recalled: usize,
    pub total: usize,
}

impl KindCount {
    pub fn recall(&self) -> f64 {
        if self.total == 0 {
            1.0
        } else {
            self.recalled as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RecallReport {
    /// Indexed by [`AffordanceKind::index`].
    pub per_kind: [KindCount; 3],
    pub spurious: usize,
    pub images: usize,
}

impl RecallReport {
    pub fn kind(&self, k: AffordanceKind) -> KindCount {
        self.per_kind[k.index()]
    }

    pub fn overall(&self) -> KindCount {
        self.per_kind
            .iter()
            .fold(KindCount::default(), |a, k| KindCount {
                recalled: a.recalled + k.recalled,
                total: a.total + k.total,
            })
    }

    pub fn spurious_per_image(&self) -> f64 {
        if self.images == 0 {
            0.0
        } else {
            self.spurious as f64 / self.images as f64
        }
    }

    /// Table layout: one row per kind plus an overall row.
    pub fn table(&self) -> String {
        let mut s = format!(
            "{:<8} {:>8} {:>8} {:>8}\n",
            "kind", "recalled", "total", "recall"
        );
        for k in AffordanceKind::ALL {
            let c = self.kind(k);
            s += &format!(
                "{:<8} {:>8} {:>8} {:>8.3}\n",
                k.name(),
                c.recalled,
                c.total,
                c.recall()
            );
        }
        let o = self.overall();
        s += &format!(
            "{:<8} {:>8} {:>8} {:>8.3}\n",
            "overall",
            o.recalled,
            o.total,
            o.recall()
        );
        s += &format!(
            "spurious/image {:.3} over {} images\n",
            self.spurious_per_image(),
            self.images
        );
        s
    }
}

fn matches(det: &Detection, truth: &Detection) -> bool {
    let period = if truth.is_symmetric() { 180.0 } else { 360.0 };
    det.kind == truth.kind
        && det.position.dist(&truth.position) <= RECALL_DIST
        && angle_diff_deg(det.angle, truth.angle, period) < RECALL_ANGLE_DEG
}

/// Recall of ground truth by detections, image by image.
pub fn eval_recall(
    detections: &[Vec<Detection>],
    truth: &[Vec<Detection>],
) -> Result<RecallReport> {
    if detections.len() != truth.len() {
        return Err(Error::RejectedInput(format!(
            "{} detection lists for {} ground-truth lists",
            detections.len(),
            truth.len()
        )));
    }
    let mut r = RecallReport {
        images: truth.len(),
        ..Default::default()
    };
    for (dets, gts) in detections.iter().zip(truth) {
        for g in gts {
            let c = &mut r.per_kind[g.kind.index()];
            c.total += 1;
            if dets.iter().any(|d| matches(d, g)) {
                c.recalled += 1;
            }
        }
        r.spurious += dets
            .iter()
            .filter(|d| !gts.iter().any(|g| matches(d, g)))
            .count();
    }
    Ok(r)
}

/// One JSON object per line.
pub fn write_detections<W: Write>(dets: &[Detection], mut w: W) -> Result<()> {
    for d in dets {
        serde_json::to_writer(&mut w, d)?;
        w.write_all(b"\n")
            .map_err(|e| Error::io("<detections>", e))?;
    }
    Ok(())
}

pub fn read_detections<R: BufRead>(r: R) -> Result<Vec<Detection>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line.map_err(|e| Error::io("<detections>", e))?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}
