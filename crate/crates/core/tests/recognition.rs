use foresight_core::affordance::Point3;
use foresight_core::microworld::{enumerate_affordances, random_scene, render, step, WorldState};
use foresight_core::recognition::{
    detect, eval_recall, nms_proximity, prune_confidence, recognize, RecognitionConfig,
};
use foresight_core::{AffordanceKind, Detection, ParametrizedAffordance, TurnDirection};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn parametrized(d: Detection, ccw: bool) -> ParametrizedAffordance {
    if d.kind == AffordanceKind::Turn {
        ParametrizedAffordance::turn(
            d,
            if ccw {
                TurnDirection::Ccw
            } else {
                TurnDirection::Cw
            },
        )
    } else {
        ParametrizedAffordance::plain(d)
    }
}

fn walk_frames(seed: u64) -> Vec<WorldState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = random_scene(seed);
    let mut out = vec![w.clone()];
    for _ in 0..4 {
        let a = enumerate_affordances(&w);
        if a.is_empty() {
            break;
        }
        let d = a[rng.gen_range(0..a.len())];
        w = step(&w, &parametrized(d, rng.gen_bool(0.5))).unwrap();
        out.push(w.clone());
    }
    out
}

fn recall_on(worlds: &[WorldState]) -> foresight_core::recognition::RecallReport {
    let cfg = RecognitionConfig::default();
    let dets: Vec<_> = worlds
        .iter()
        .map(|w| recognize(&render(w, 32), &cfg))
        .collect();
    let gts: Vec<_> = worlds.iter().map(enumerate_affordances).collect();
    eval_recall(&dets, &gts).unwrap()
}

#[test]
fn pipeline_recall_on_random_scenes() {
    let worlds: Vec<_> = (10_000..10_100).map(random_scene).collect();
    let r = recall_on(&worlds);
    assert!(r.overall().recall() >= 0.95, "{}", r.table());
    assert!(r.spurious_per_image() <= 0.2, "{}", r.table());
}

#[test]
fn pipeline_recall_on_sequence_frames() {
    let worlds: Vec<_> = (20_000..20_100).flat_map(walk_frames).collect();
    let r = recall_on(&worlds);
    assert!(r.overall().recall() >= 0.95, "{}", r.table());
    assert!(r.kind(AffordanceKind::Place).total > 0);
    assert!(r.spurious_per_image() <= 0.2, "{}", r.table());
}

#[test]
fn kept_detections_are_executable() {
    let cfg = RecognitionConfig::default();
    let (mut ok, mut total) = (0, 0);
    for seed in 0..1000u64 {
        let frames = walk_frames(30_000 + seed);
        let w = &frames[seed as usize % frames.len()];
        for d in recognize(&render(w, 32), &cfg) {
            for ccw in [true, false] {
                total += 1;
                ok += step(w, &parametrized(d, ccw)).is_ok() as usize;
            }
        }
    }
    assert!(ok as f64 >= 0.99 * total as f64, "{ok}/{total}");
}

#[test]
fn detection_is_deterministic() {
    let cfg = RecognitionConfig::default();
    for w in walk_frames(7) {
        let s = render(&w, 32);
        assert_eq!(detect(&s, &cfg.detector), detect(&s, &cfg.detector));
    }
}

fn arb_detection() -> impl Strategy<Value = Detection> {
    (
        0..3usize,
        0.0..1.0f64,
        0.0..1.0f64,
        0..3u8,
        0.0..360.0f64,
        prop::bool::ANY,
        0.0..=1.0f64,
    )
        .prop_map(|(k, x, y, z, angle, sym, confidence)| Detection {
            kind: AffordanceKind::ALL[k],
            position: Point3::new(x * 0.1, y * 0.1, z as f64 * 0.05),
            angle,
            symmetry: if sym { 1.0 } else { 0.0 },
            confidence,
        })
}

proptest! {
    #[test]
    fn nms_leaves_no_close_same_kind_pair(dets in prop::collection::vec(arb_detection(), 0..30)) {
        let kept = nms_proximity(&dets, 0.025, 10.0);
        for (i, a) in kept.iter().enumerate() {
            for b in &kept[i + 1..] {
                prop_assert!(!(a.kind == b.kind
                    && a.position.dist(&b.position) <= 0.025
                    && a.angle_error(b) <= 10.0));
            }
        }
    }

    #[test]
    fn prune_is_idempotent(dets in prop::collection::vec(arb_detection(), 0..30), cutoff in 0.0..1.2f64) {
        let once = prune_confidence(&dets, cutoff);
        prop_assert_eq!(prune_confidence(&once, cutoff), once);
    }
}
