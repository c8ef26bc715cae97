use std::collections::HashSet;

use foresight_core::datagen::{build_dataset, generate_sequence, Dataset, MAX_SEQUENCE_ACTIONS};
use foresight_core::microworld::{enumerate_affordances, random_scene, render, step};

#[test]
fn length_histogram_is_dominated_by_full_sequences() {
    let mut hist = [0usize; MAX_SEQUENCE_ACTIONS + 1];
    for seed in 0..1000 {
        hist[generate_sequence(seed, 16).len()] += 1;
    }
    let full = hist[MAX_SEQUENCE_ACTIONS];
    assert!(full > 500, "histogram {hist:?}");
    assert!(hist[..MAX_SEQUENCE_ACTIONS].iter().all(|&h| h < full));
    assert!(
        hist[..MAX_SEQUENCE_ACTIONS].iter().sum::<usize>() > 0,
        "no shorter tail: {hist:?}"
    );
}

#[test]
fn stored_records_match_their_recomputation() {
    for seed in 100..160 {
        let s = generate_sequence(seed, 32);
        assert_eq!(s.frames.len(), s.len() + 1);
        assert_eq!(s.worlds.len(), s.len() + 1);
        assert_eq!(s.masks.len(), s.len());
        assert_eq!(s.affordance_lists.len(), s.frames.len());
        assert_eq!(s.worlds[0], random_scene(seed));
        for t in 0..s.len() {
            assert_eq!(
                s.masks[t],
                s.frames[t].changed_mask(&s.frames[t + 1]).unwrap()
            );
            assert_eq!(s.worlds[t + 1], step(&s.worlds[t], &s.actions[t]).unwrap());
        }
        for (t, w) in s.worlds.iter().enumerate() {
            assert_eq!(s.frames[t], render(w, 32));
            assert_eq!(s.affordance_lists[t], enumerate_affordances(w));
        }
        // Sequences stop early only when nothing is afforded.
        if s.len() < MAX_SEQUENCE_ACTIONS {
            assert!(s.affordance_lists.last().unwrap().is_empty());
        }
    }
}

#[test]
fn splits_are_disjoint_and_counts_recount() {
    let d = build_dataset(60, 5, 16).unwrap();
    let m = d.manifest();
    assert_eq!((m.counts.train, m.counts.val, m.counts.test), (54, 3, 3));
    let ids: Vec<usize> = m
        .splits
        .train
        .iter()
        .chain(&m.splits.val)
        .chain(&m.splits.test)
        .copied()
        .collect();
    assert_eq!(ids.iter().collect::<HashSet<_>>().len(), 60);
    let recount: usize = d.sequences().map(|s| s.actions.len()).sum();
    assert_eq!(m.total_executions, recount);
    assert_eq!(build_dataset(60, 5, 16).unwrap(), d);
    assert_ne!(build_dataset(60, 6, 16).unwrap().manifest(), m);
    assert!(build_dataset(2, 5, 16).is_err());
}

#[test]
fn dataset_directory_round_trips() {
    let d = build_dataset(12, 9, 16).unwrap();
    let dir = tempfile::tempdir().unwrap();
    d.save(dir.path()).unwrap();
    assert_eq!(Dataset::load(dir.path()).unwrap(), d);

    let seq_dir = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.is_dir())
        .unwrap();
    std::fs::remove_dir_all(seq_dir).unwrap();
    assert!(Dataset::load(dir.path()).is_err());
}
