use foresight_core::geometry::TABLE;
use foresight_core::microworld::{
    enumerate_affordances, random_scene, render, resolve_stability, step, strip_rows,
    ObjectInstance, WorldState,
};
use foresight_core::raster::Projection;
use foresight_core::{AffordanceKind, ParametrizedAffordance, TurnDirection};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_walk(seed: u64, len: usize) -> Vec<WorldState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut w = random_scene(seed);
    let mut out = vec![w.clone()];
    for _ in 0..len {
        let affs = enumerate_affordances(&w);
        if affs.is_empty() {
            break;
        }
        let d = affs[rng.gen_range(0..affs.len())];
        let a = if d.kind == AffordanceKind::Turn {
            let dir = if rng.gen_bool(0.5) {
                TurnDirection::Ccw
            } else {
                TurnDirection::Cw
            };
            ParametrizedAffordance::turn(d, dir)
        } else {
            ParametrizedAffordance::plain(d)
        };
        w = step(&w, &a).unwrap();
        out.push(w.clone());
    }
    out
}

#[test]
fn random_walks_keep_every_invariant() {
    let mut lengths = [0usize; 7];
    for seed in 0..1000 {
        let walk = random_walk(seed, 6);
        lengths[walk.len() - 1] += 1;
        let start_ids = walk[0].all_ids();
        for w in &walk {
            w.validate()
                .unwrap_or_else(|e| panic!("seed {seed}: {e}\n{w:?}"));
            let mut ids = w.all_ids();
            ids.extend(&w.removed);
            ids.sort_unstable();
            assert_eq!(ids, start_ids, "seed {seed}");
            assert_eq!(resolve_stability(w), *w);
        }
    }
    // Most walks run to full length.
    assert!(lengths[6] > 500, "{lengths:?}");
}

#[test]
fn gripper_gating_holds_on_random_worlds() {
    for seed in 0..1000 {
        for w in random_walk(seed, 3) {
            for d in enumerate_affordances(&w) {
                match w.holding {
                    Some(_) => assert_eq!(d.kind, AffordanceKind::Place),
                    None => assert_ne!(d.kind, AffordanceKind::Place),
                }
            }
        }
    }
}

fn covering(objs: &[ObjectInstance], p: foresight_core::geometry::Vec2) -> bool {
    objs.iter().any(|o| o.colour_at(p).is_some())
}

#[test]
fn render_changes_only_under_changed_objects() {
    let proj = Projection::new(TABLE, 32, 32).unwrap();
    for seed in 0..300 {
        let walk = random_walk(seed, 4);
        for pair in walk.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            let changed: Vec<ObjectInstance> = a
                .objects
                .iter()
                .filter(|o| !b.objects.contains(o))
                .chain(b.objects.iter().filter(|o| !a.objects.contains(o)))
                .copied()
                .collect();
            let (ra, rb) = (render(a, 32), render(b, 32));
            assert_eq!(ra, render(a, 32));
            for y in 0..32 {
                for x in 0..32 {
                    if ra.pixel(x, y) == rb.pixel(x, y) || y < strip_rows(32) {
                        continue;
                    }
                    assert!(
                        covering(&changed, proj.pixel_centre(x, y)),
                        "seed {seed}: pixel ({x},{y}) changed without a changed object"
                    );
                }
            }
        }
    }
}

#[test]
fn scene_file_round_trips_after_steps() {
    for seed in 0..200 {
        let last = random_walk(seed, 4).pop().unwrap();
        let json = last.to_json();
        let back = WorldState::from_json(&json).unwrap();
        assert_eq!(render(&back, 32), render(&last, 32));
        assert_eq!(back.to_json(), json);
    }
}
