//! Dataset manifest and generation planning.
//!
//! Scenes are first recorded as pending with their final id and seed, then
//! flipped to completed once their directory is in place. Because ids and
//! seeds are fixed at planning time, an interrupted run resumed later
//! produces the same bytes as an uninterrupted one.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::digest::{fnv1a64, mix64};

use super::{io_err, read_json, write_json, IoError};

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitCounts {
    #[serde(default)]
    pub train: u32,
    #[serde(default)]
    pub val: u32,
    #[serde(default)]
    pub test: u32,
}

impl SplitCounts {
    pub fn get(&self, split: Split) -> u32 {
        match split {
            Split::Train => self.train,
            Split::Val => self.val,
            Split::Test => self.test,
        }
    }

    fn set(&mut self, split: Split, v: u32) {
        match split {
            Split::Train => self.train = v,
            Split::Val => self.val = v,
            Split::Test => self.test = v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SceneStatus {
    Pending,
    Completed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneEntry {
    pub id: String,
    pub split: Split,
    pub map_id: String,
    pub seed: u64,
    /// Bumped each time the scene is replaced.
    pub generation: u32,
    pub status: SceneStatus,
    pub digest: Option<String>,
    pub frame_count: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub base_seed: u64,
    /// Requested scene counts per map.
    pub requested: BTreeMap<String, SplitCounts>,
    pub scenes: Vec<SceneEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkItem {
    pub id: String,
    pub split: Split,
    pub map_id: String,
    pub seed: u64,
}

/// Seed of a scene, fixed by the dataset seed, the scene id and how often
/// the scene was replaced.
pub fn scene_seed(base_seed: u64, id: &str, generation: u32) -> u64 {
    mix64(base_seed ^ mix64(fnv1a64(id.as_bytes()).wrapping_add(generation as u64)))
}

pub fn manifest_path(root: &Path) -> PathBuf {
    root.join(MANIFEST_FILE)
}

impl Manifest {
    pub fn new(base_seed: u64) -> Self {
        Self {
            version: MANIFEST_VERSION,
            base_seed,
            requested: BTreeMap::new(),
            scenes: Vec::new(),
        }
    }

    pub fn load(root: &Path) -> Result<Self, IoError> {
        let path = manifest_path(root);
        let m: Manifest = read_json(&path).map_err(|e| match e {
            IoError::Json { source, .. } => IoError::CorruptManifest(source.to_string()),
            other => other,
        })?;
        m.validate()?;
        Ok(m)
    }

    /// Loads the manifest under `root`, or starts a new one when there is none.
    pub fn load_or_new(root: &Path, base_seed: u64) -> Result<Self, IoError> {
        if !manifest_path(root).exists() {
            return Ok(Self::new(base_seed));
        }
        let m = Self::load(root)?;
        if m.base_seed != base_seed {
            return Err(IoError::SeedMismatch {
                stored: m.base_seed,
                requested: base_seed,
            });
        }
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), IoError> {
        let bad = |msg: String| Err(IoError::CorruptManifest(msg));
        if self.version != MANIFEST_VERSION {
            return bad(format!("version {}", self.version));
        }
        let mut ids = HashSet::new();
        for s in &self.scenes {
            if !ids.insert(s.id.as_str()) {
                return bad(format!("duplicate scene id {}", s.id));
            }
            if s.status == SceneStatus::Completed && (s.digest.is_none() || s.frame_count.is_none()) {
                return bad(format!("completed scene {} lacks digest or frame count", s.id));
            }
            if s.seed != scene_seed(self.base_seed, &s.id, s.generation) {
                return bad(format!("scene {} seed does not match its id and generation", s.id));
            }
        }
        for (map, counts) in &self.requested {
            for split in Split::ALL {
                let have = self.count(map, split, Some(SceneStatus::Completed));
                if have > counts.get(split) as usize {
                    return bad(format!("{map}/{}: {have} completed > {} requested", split.name(), counts.get(split)));
                }
            }
        }
        Ok(())
    }

    /// Writes `manifest.json` through a temporary file and a rename, so
    /// readers see either the old or the new manifest.
    pub fn save(&self, root: &Path) -> Result<(), IoError> {
        let tmp = root.join(format!("{MANIFEST_FILE}.tmp"));
        write_json(&tmp, self)?;
        let file = std::fs::File::open(&tmp).map_err(io_err(&tmp))?;
        file.sync_all().map_err(io_err(&tmp))?;
        let path = manifest_path(root);
        std::fs::rename(&tmp, &path).map_err(io_err(&path))
    }

    pub fn count(&self, map: &str, split: Split, status: Option<SceneStatus>) -> usize {
        self.scenes
            .iter()
            .filter(|s| s.map_id == map && s.split == split && status.is_none_or(|st| s.status == st))
            .count()
    }

    pub fn entry(&self, id: &str) -> Option<&SceneEntry> {
        self.scenes.iter().find(|s| s.id == id)
    }

    pub fn completed(&self) -> impl Iterator<Item = &SceneEntry> {
        self.scenes.iter().filter(|s| s.status == SceneStatus::Completed)
    }

    pub fn mark_completed(&mut self, id: &str, digest: String, frame_count: usize) -> Result<(), IoError> {
        let e = self
            .scenes
            .iter_mut()
            .find(|s| s.id == id)
            .ok_or_else(|| IoError::UnknownScene(id.to_string()))?;
        e.status = SceneStatus::Completed;
        e.digest = Some(digest);
        e.frame_count = Some(frame_count);
        Ok(())
    }

    fn pending(&self) -> Vec<WorkItem> {
        self.scenes
            .iter()
            .filter(|s| s.status == SceneStatus::Pending)
            .map(|s| WorkItem {
                id: s.id.clone(),
                split: s.split,
                map_id: s.map_id.clone(),
                seed: s.seed,
            })
            .collect()
    }
}

/// Brings the manifest up to the requested counts and returns every scene
/// still to be generated, in id order.
///
/// New scenes get the next free ids. `replace` re-queues existing scenes with
/// a fresh seed. Requested counts never shrink below what already exists.
pub fn plan_generation(
    manifest: &mut Manifest,
    requested: &BTreeMap<String, SplitCounts>,
    replace: &[String],
) -> Result<Vec<WorkItem>, IoError> {
    for id in replace {
        let base = manifest.base_seed;
        let e = manifest
            .scenes
            .iter_mut()
            .find(|s| &s.id == id)
            .ok_or_else(|| IoError::UnknownScene(id.clone()))?;
        e.generation += 1;
        e.seed = scene_seed(base, &e.id, e.generation);
        e.status = SceneStatus::Pending;
        e.digest = None;
        e.frame_count = None;
    }
    for (map, want) in requested {
        for split in Split::ALL {
            let have = manifest.count(map, split, None);
            for _ in have..want.get(split) as usize {
                let id = format!("scene_{:04}", manifest.scenes.len());
                manifest.scenes.push(SceneEntry {
                    seed: scene_seed(manifest.base_seed, &id, 0),
                    id,
                    split,
                    map_id: map.clone(),
                    generation: 0,
                    status: SceneStatus::Pending,
                    digest: None,
                    frame_count: None,
                });
            }
            let stored = manifest.requested.entry(map.clone()).or_default();
            let total = manifest_count_all(&manifest.scenes, map, split).max(want.get(split) as usize);
            stored.set(split, total as u32);
        }
    }
    Ok(manifest.pending())
}

fn manifest_count_all(scenes: &[SceneEntry], map: &str, split: Split) -> usize {
    scenes.iter().filter(|s| s.map_id == map && s.split == split).count()
}
