//! Task fixtures: `taskNN.scene.json`, `taskNN.goal.rgbdf` and
//! `taskNN.goal.json`, shipped inside the binary and regenerable with
//! `foresight export-tasks`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use foresight_core::microworld::WorldState;
use foresight_core::raster::{read_raster, save_raster, ChannelMask, GoalSpec, Polarity};
use foresight_core::tasks::Task;
use foresight_core::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalMeta {
    pub name: String,
    pub description: String,
    pub polarity: Polarity,
    pub channels: String,
    pub n_max: usize,
}

#[derive(Debug, Clone)]
pub struct TaskFixture {
    pub id: usize,
    pub meta: GoalMeta,
    pub world: WorldState,
    pub goal: GoalSpec,
}

impl TaskFixture {
    pub fn stem(&self) -> String {
        format!("task{:02}", self.id)
    }

    fn parse(id: usize, scene: &str, goal: &[u8], meta: &str) -> Result<Self> {
        let meta: GoalMeta = serde_json::from_str(meta)?;
        let goal = GoalSpec::new(
            read_raster(goal)?,
            meta.polarity,
            ChannelMask::parse(&meta.channels)?,
        )?;
        Ok(Self {
            id,
            world: WorldState::from_json(scene)?,
            goal,
            meta,
        })
    }

    pub fn from_task(t: &Task) -> Self {
        Self {
            id: t.id,
            meta: GoalMeta {
                name: t.name.to_string(),
                description: t.description.to_string(),
                polarity: t.goal.polarity(),
                channels: t.goal.mask().name(),
                n_max: t.n_max,
            },
            world: t.world.clone(),
            goal: t.goal.clone(),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let stem = self.stem();
        self.world.save(dir.join(format!("{stem}.scene.json")))?;
        save_raster(self.goal.raster(), dir.join(format!("{stem}.goal.rgbdf")))?;
        let meta = dir.join(format!("{stem}.goal.json"));
        let json = serde_json::to_string_pretty(&self.meta).expect("metadata serializes") + "\n";
        std::fs::write(&meta, json).map_err(|e| Error::io(&meta, e))
    }

    pub fn load(dir: &Path, id: usize) -> Result<Self> {
        let stem = format!("task{id:02}");
        let read = |ext: &str| {
            let p = dir.join(format!("{stem}.{ext}"));
            std::fs::read(&p).map_err(|e| Error::io(&p, e))
        };
        let text = |b: Vec<u8>| String::from_utf8(b).map_err(|e| Error::Format(e.to_string()));
        Self::parse(
            id,
            &text(read("scene.json")?)?,
            &read("goal.rgbdf")?,
            &text(read("goal.json")?)?,
        )
    }
}

macro_rules! embedded {
    ($($id:literal => $stem:literal),* $(,)?) => {
        [$((
            $id,
            include_str!(concat!("../fixtures/tasks/", $stem, ".scene.json")),
            &include_bytes!(concat!("../fixtures/tasks/", $stem, ".goal.rgbdf"))[..],
            include_str!(concat!("../fixtures/tasks/", $stem, ".goal.json")),
        )),*]
    };
}

/// The ten fixtures compiled into the binary.
pub fn embedded_tasks() -> Result<Vec<TaskFixture>> {
    embedded!(
        1 => "task01", 2 => "task02", 3 => "task03", 4 => "task04", 5 => "task05",
        6 => "task06", 7 => "task07", 8 => "task08", 9 => "task09", 10 => "task10",
    )
    .into_iter()
    .map(|(id, scene, goal, meta)| TaskFixture::parse(id, scene, goal, meta))
    .collect()
}

/// Fixtures from a directory, or the embedded ones.
pub fn load_tasks(dir: Option<&Path>) -> Result<Vec<TaskFixture>> {
    match dir {
        None => embedded_tasks(),
        Some(d) => (1..=foresight_core::tasks::TASK_COUNT)
            .map(|id| TaskFixture::load(d, id))
            .collect(),
    }
}
