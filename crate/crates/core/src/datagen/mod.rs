//! Random-rollout datasets for training and evaluating the forward model and
//! the recognizer.

mod augment;

pub use augment::{
    add_noise, augment, flip_symmetric, mirror, translate, Example, MAX_SHIFT, NOISE_SIGMA,
};

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::affordance::{AffordanceKind, Detection, ParametrizedAffordance, TurnDirection};
use crate::error::{Error, Result};
use crate::microworld::{enumerate_affordances, random_scene, render, step, WorldState};
use crate::raster::{load_raster, save_raster, Raster, RasterState};

/// Longest action chain per sequence.
pub const MAX_SEQUENCE_ACTIONS: usize = 4;

/// One random rollout with everything recorded along the way.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub id: usize,
    pub seed: u64,
    pub frames: Vec<RasterState>,
    pub actions: Vec<ParametrizedAffordance>,
    pub worlds: Vec<WorldState>,
    /// Single-channel changed-pixel masks, one per action.
    pub masks: Vec<Raster>,
    /// Ground-truth detections per frame.
    pub affordance_lists: Vec<Vec<Detection>>,
}

impl Sequence {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Roll out up to [`MAX_SEQUENCE_ACTIONS`] uniformly chosen affordances from
/// `world`; turns pick their direction by a fair coin.
pub fn rollout_from(world: WorldState, seed: u64, resolution: usize) -> Sequence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa5a5_5a5a_0f0f_f0f0);
    let mut seq = Sequence {
        id: 0,
        seed,
        frames: vec![render(&world, resolution)],
        actions: Vec::new(),
        worlds: vec![],
        masks: Vec::new(),
        affordance_lists: Vec::new(),
    };
    let mut w = world;
    loop {
        let affs = enumerate_affordances(&w);
        seq.affordance_lists.push(affs.clone());
        if affs.is_empty() || seq.actions.len() == MAX_SEQUENCE_ACTIONS {
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
        let next = step(&w, &a).expect("enumerated affordances are executable");
        let frame = render(&next, resolution);
        let prev = seq.frames.last().expect("root frame");
        seq.masks
            .push(prev.changed_mask(&frame).expect("same resolution"));
        seq.frames.push(frame);
        seq.actions.push(a);
        seq.worlds.push(std::mem::replace(&mut w, next));
    }
    seq.worlds.push(w);
    seq
}

pub fn generate_sequence(seed: u64, resolution: usize) -> Sequence {
    rollout_from(random_scene(seed), seed, resolution)
}

/// Train, validation and test sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub seed: u64,
    pub resolution: usize,
    pub train: Vec<Sequence>,
    pub val: Vec<Sequence>,
    pub test: Vec<Sequence>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub resolution: usize,
    pub counts: SplitCounts,
    /// Executed actions per split.
    pub executions: SplitCounts,
    pub total_executions: usize,
    pub splits: Splits,
}

/// Size of the validation and of the test split for `n` sequences.
pub fn holdout_size(n: usize) -> usize {
    (n / 20).max(1)
}

/// `n` sequences split deterministically: the last `holdout_size(n)` ids are
/// the test set, the ones before them the validation set.
pub fn build_dataset(n: usize, seed: u64, resolution: usize) -> Result<Dataset> {
    if n < 3 {
        return Err(Error::Config(format!("need at least 3 sequences, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<u64> = (0..n).map(|_| rng.gen()).collect();
    let mut all: Vec<Sequence> = seeds
        .par_iter()
        .enumerate()
        .map(|(id, &s)| {
            let mut seq = generate_sequence(s, resolution);
            seq.id = id;
            seq
        })
        .collect();
    let h = holdout_size(n);
    let test = all.split_off(n - h);
    let val = all.split_off(n - 2 * h);
    Ok(Dataset {
        seed,
        resolution,
        train: all,
        val,
        test,
    })
}

impl Dataset {
    pub fn manifest(&self) -> Manifest {
        let ids = |v: &[Sequence]| v.iter().map(|s| s.id).collect::<Vec<_>>();
        let execs = |v: &[Sequence]| v.iter().map(Sequence::len).sum::<usize>();
        let executions = SplitCounts {
            train: execs(&self.train),
            val: execs(&self.val),
            test: execs(&self.test),
        };
        Manifest {
            seed: self.seed,
            resolution: self.resolution,
            counts: SplitCounts {
                train: self.train.len(),
                val: self.val.len(),
                test: self.test.len(),
            },
            total_executions: executions.train + executions.val + executions.test,
            executions,
            splits: Splits {
                train: ids(&self.train),
                val: ids(&self.val),
                test: ids(&self.test),
            },
        }
    }

    pub fn sequences(&self) -> impl Iterator<Item = &Sequence> {
        self.train.iter().chain(&self.val).chain(&self.test)
    }

    /// Write one directory per sequence, then `manifest.json`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let seqs: Vec<&Sequence> = self.sequences().collect();
        seqs.par_iter()
            .try_for_each(|s| save_sequence(s, &sequence_dir(dir, s.id)))?;
        let path = dir.join("manifest.json");
        let json = serde_json::to_string_pretty(&self.manifest())?;
        fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("manifest.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let m: Manifest = serde_json::from_str(&text)?;
        let load = |ids: &[usize]| -> Result<Vec<Sequence>> {
            ids.par_iter()
                .map(|&id| load_sequence(&sequence_dir(dir, id), id))
                .collect()
        };
        let d = Dataset {
            seed: m.seed,
            resolution: m.resolution,
            train: load(&m.splits.train)?,
            val: load(&m.splits.val)?,
            test: load(&m.splits.test)?,
        };
        if d.manifest() != m {
            return Err(Error::Format(format!(
                "{} does not match its sequences",
                path.display()
            )));
        }
        Ok(d)
    }
}

fn sequence_dir(dir: &Path, id: usize) -> PathBuf {
    dir.join(format!("seq_{id:05}"))
}

#[derive(Serialize, Deserialize)]
struct SequenceMeta {
    id: usize,
    seed: u64,
    actions: usize,
}

fn write_lines<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut out = Vec::new();
    for it in items {
        serde_json::to_writer(&mut out, it)?;
        out.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))
}

fn read_lines<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

fn save_sequence(s: &Sequence, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let meta = SequenceMeta {
        id: s.id,
        seed: s.seed,
        actions: s.len(),
    };
    let path = dir.join("sequence.json");
    fs::write(&path, serde_json::to_string(&meta)? + "\n").map_err(|e| Error::io(&path, e))?;
    for (k, f) in s.frames.iter().enumerate() {
        save_raster(f, dir.join(format!("frame_{k}.rgbdf")))?;
    }
    for (k, m) in s.masks.iter().enumerate() {
        save_raster(m, dir.join(format!("mask_{}.rgbdf", k + 1)))?;
    }
    write_lines(&dir.join("actions.jsonl"), &s.actions)?;
    write_lines(&dir.join("affordances.jsonl"), &s.affordance_lists)?;
    write_lines(&dir.join("worlds.jsonl"), &s.worlds)
}

fn load_sequence(dir: &Path, id: usize) -> Result<Sequence> {
    let path = dir.join("sequence.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let meta: SequenceMeta = serde_json::from_str(&text)?;
    if meta.id != id {
        return Err(Error::Format(format!(
            "{} holds sequence {}",
            dir.display(),
            meta.id
        )));
    }
    let frames = (0..=meta.actions)
        .map(|k| RasterState::new(load_raster(dir.join(format!("frame_{k}.rgbdf")))?))
        .collect::<Result<Vec<_>>>()?;
    let masks = (1..=meta.actions)
        .map(|k| load_raster(dir.join(format!("mask_{k}.rgbdf"))))
        .collect::<Result<Vec<_>>>()?;
    let actions: Vec<ParametrizedAffordance> = read_lines(&dir.join("actions.jsonl"))?;
    let affordance_lists: Vec<Vec<Detection>> = read_lines(&dir.join("affordances.jsonl"))?;
    let worlds: Vec<WorldState> = read_lines(&dir.join("worlds.jsonl"))?;
    for w in &worlds {
        w.validate()?;
    }
    if actions.len() != meta.actions
        || worlds.len() != frames.len()
        || affordance_lists.len() != frames.len()
    {
        return Err(Error::Format(format!("{} is inconsistent", dir.display())));
    }
    Ok(Sequence {
        id,
        seed: meta.seed,
        frames,
        actions,
        worlds,
        masks,
        affordance_lists,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_world_gives_a_single_frame() {
        let s = rollout_from(WorldState::empty(), 1, 32);
        assert!(s.is_empty());
        assert_eq!(s.frames.len(), 1);
        assert_eq!(s.worlds.len(), 1);
        assert_eq!(s.affordance_lists, vec![vec![]]);
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        assert_eq!(generate_sequence(77, 32), generate_sequence(77, 32));
    }

    #[test]
    fn too_small_is_rejected() {
        assert!(build_dataset(2, 0, 32).is_err());
    }
}
