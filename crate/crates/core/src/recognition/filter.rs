//! Post-processing of raw detections.

use super::{detect, DetectorConfig};
use crate::affordance::Detection;
use crate::raster::RasterState;

/// Thresholds of the recognition pipeline.
#[derive(Debug, Clone)]
pub struct RecognitionConfig {
    pub cutoff: f64,
    pub nms_dist: f64,
    pub nms_angle_deg: f64,
    pub detector: DetectorConfig,
}

impl RecognitionConfig {
    pub fn new(resolution: usize) -> Self {
        Self {
            cutoff: 0.9,
            nms_dist: 0.025,
            nms_angle_deg: 10.0,
            detector: DetectorConfig::new(resolution),
        }
    }
}

impl Default for RecognitionConfig {
    fn default() -> Self {
        Self::new(crate::raster::DEFAULT_RESOLUTION)
    }
}

/// Keep detections with confidence at or above `cutoff` (clamped to
/// `[0, 1]`), preserving order.
pub fn prune_confidence(dets: &[Detection], cutoff: f64) -> Vec<Detection> {
    let cutoff = cutoff.clamp(0.0, 1.0);
    dets.iter()
        .filter(|d| d.confidence >= cutoff)
        .copied()
        .collect()
}

/// Indices in descending confidence, ties in input order.
fn by_confidence(dets: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].confidence.total_cmp(&dets[a].confidence));
    order
}

/// Greedy suppression: visit detections by descending confidence and drop
/// any that `suppresses` pairs with an already kept one. Output keeps input
/// order.
fn greedy(
    dets: &[Detection],
    suppresses: impl Fn(&Detection, &Detection) -> bool,
) -> Vec<Detection> {
    let mut kept: Vec<usize> = Vec::new();
    for i in by_confidence(dets) {
        if !kept.iter().any(|&k| suppresses(&dets[k], &dets[i])) {
            kept.push(i);
        }
    }
    kept.sort_unstable();
    kept.into_iter().map(|i| dets[i]).collect()
}

/// Proximity non-maximum suppression within each affordance kind.
pub fn nms_proximity(
    dets: &[Detection],
    dist_thresh: f64,
    angle_thresh_deg: f64,
) -> Vec<Detection> {
    greedy(dets, |k, d| {
        k.kind == d.kind
            && k.position.dist(&d.position) <= dist_thresh
            && k.angle_error(d) <= angle_thresh_deg
    })
}

/// Collapse symmetric detections of one kind at one position to the most
/// confident one.
pub fn dedup_symmetric(dets: &[Detection], dist_thresh: f64) -> Vec<Detection> {
    greedy(dets, |k, d| {
        k.kind == d.kind
            && k.is_symmetric()
            && d.is_symmetric()
            && k.position.dist(&d.position) <= dist_thresh
    })
}

/// Full pipeline: detect, prune, suppress, deduplicate.
pub fn recognize(state: &RasterState, cfg: &RecognitionConfig) -> Vec<Detection> {
    let raw = detect(state, &cfg.detector);
    let kept = prune_confidence(&raw, cfg.cutoff);
    let kept = nms_proximity(&kept, cfg.nms_dist, cfg.nms_angle_deg);
    dedup_symmetric(&kept, cfg.nms_dist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affordance::{AffordanceKind, Point3};

    fn det(kind: AffordanceKind, x: f64, angle: f64, sym: f64, conf: f64) -> Detection {
        Detection {
            kind,
            position: Point3::new(x, 0.5, 0.0),
            angle,
            symmetry: sym,
            confidence: conf,
        }
    }

    #[test]
    fn prune_examples() {
        let d = [
            det(AffordanceKind::Grasp, 0.1, 0.0, 0.0, 0.95),
            det(AffordanceKind::Grasp, 0.5, 0.0, 0.0, 0.89),
            det(AffordanceKind::Grasp, 0.7, 0.0, 0.0, 1.0),
        ];
        assert_eq!(prune_confidence(&d, 0.9).len(), 2);
        assert_eq!(prune_confidence(&d, 0.0).len(), 3);
        let top = prune_confidence(&d, 1.0 + 1e-9);
        assert_eq!(top.len(), 1);
        assert_eq!(top[0].confidence, 1.0);
    }

    #[test]
    fn nms_keeps_most_confident_neighbour() {
        let d = [
            det(AffordanceKind::Grasp, 0.50, 0.0, 0.0, 0.92),
            det(AffordanceKind::Grasp, 0.51, 0.0, 0.0, 0.95),
            det(AffordanceKind::Grasp, 0.01, 0.0, 0.0, 0.5),
            det(AffordanceKind::Place, 0.51, 0.0, 0.0, 0.5),
        ];
        let k = nms_proximity(&d, 0.025, 10.0);
        assert_eq!(k.len(), 3);
        assert_eq!(k[0].confidence, 0.95);
        assert_eq!(nms_proximity(&d[..1], 0.025, 10.0), d[..1].to_vec());
    }

    #[test]
    fn nms_respects_angle_and_symmetry() {
        let a = det(AffordanceKind::Grasp, 0.5, 0.0, 0.0, 0.9);
        let b = det(AffordanceKind::Grasp, 0.5, 180.0, 0.0, 0.8);
        assert_eq!(nms_proximity(&[a, b], 0.025, 10.0).len(), 2);
        let (a, b) = (
            det(AffordanceKind::Grasp, 0.5, 0.0, 1.0, 0.9),
            det(AffordanceKind::Grasp, 0.5, 180.0, 1.0, 0.8),
        );
        assert_eq!(nms_proximity(&[a, b], 0.025, 10.0).len(), 1);
    }

    #[test]
    fn dedup_examples() {
        let four: Vec<_> = [0.0, 90.0, 180.0, 270.0]
            .iter()
            .enumerate()
            .map(|(i, &a)| det(AffordanceKind::Place, 0.5, a, 1.0, 0.9 + i as f64 * 0.01))
            .collect();
        let k = dedup_symmetric(&four, 0.025);
        assert_eq!(k.len(), 1);
        assert_eq!(k[0].angle, 270.0);
        let two = [
            det(AffordanceKind::Grasp, 0.5, 0.0, 0.0, 0.9),
            det(AffordanceKind::Grasp, 0.5, 90.0, 0.0, 0.9),
        ];
        assert_eq!(dedup_symmetric(&two, 0.025).len(), 2);
        assert!(dedup_symmetric(&[], 0.025).is_empty());
    }
}
