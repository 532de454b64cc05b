//! Scene directories.
//!
//! ```text
//! scenes/<id>/config.json
//! scenes/<id>/scene_log.json
//! scenes/<id>/frames/<k:04>/{boxes.json, lidar.bin, radar.bin, bev_gt.bin, masks.bin}
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::grid::{BevGrid, SemanticMask};
use crate::model::{BBox3D, PointCloud, Pose, Vec3};
use crate::sampler::SceneConfig;

use super::formats::{decode_bev_gt, decode_cloud, decode_masks, encode_bev_gt, encode_cloud, encode_masks};
use super::{config_digest, io_err, read_bytes, read_json, write_bytes, write_json, IoError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameLog {
    pub index: usize,
    pub time_s: f64,
    pub ego: Pose,
    pub boxes: usize,
    pub valid_boxes: usize,
    pub elevation_fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaneLog {
    pub lane_width: f64,
    pub polyline: Vec<Vec3>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneLog {
    pub id: String,
    pub map_id: String,
    pub seed: u64,
    pub config_digest: String,
    pub lanes: Vec<LaneLog>,
    pub frames: Vec<FrameLog>,
}

/// One annotated frame as stored. Boxes and clouds are in the ego frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub index: usize,
    pub boxes: Vec<BBox3D>,
    pub lidar: PointCloud,
    pub radar: PointCloud,
    pub bev_gt: BevGrid,
    pub overhead_mask: SemanticMask,
    pub underground_mask: SemanticMask,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneRecord {
    pub id: String,
    pub config: SceneConfig,
    pub log: SceneLog,
    pub frames: Vec<FrameRecord>,
}

pub fn scene_dir(root: &Path, id: &str) -> PathBuf {
    root.join("scenes").join(id)
}

pub fn frame_dir(scene_dir: &Path, index: usize) -> PathBuf {
    scene_dir.join("frames").join(format!("{index:04}"))
}

/// Streams a scene into a directory frame by frame.
pub struct SceneWriter {
    dir: PathBuf,
}

impl SceneWriter {
    /// Creates `dir` (replacing any previous content) and writes `config.json`.
    pub fn create(dir: &Path, config: &SceneConfig) -> Result<Self, IoError> {
        if dir.exists() {
            std::fs::remove_dir_all(dir).map_err(io_err(dir))?;
        }
        let frames = dir.join("frames");
        std::fs::create_dir_all(&frames).map_err(io_err(&frames))?;
        write_json(&dir.join("config.json"), config)?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    pub fn write_frame(&mut self, f: &FrameRecord) -> Result<(), IoError> {
        let d = frame_dir(&self.dir, f.index);
        std::fs::create_dir_all(&d).map_err(io_err(&d))?;
        write_json(&d.join("boxes.json"), &f.boxes)?;
        write_bytes(&d.join("lidar.bin"), &encode_cloud(&f.lidar))?;
        write_bytes(&d.join("radar.bin"), &encode_cloud(&f.radar))?;
        write_bytes(&d.join("bev_gt.bin"), &encode_bev_gt(&f.bev_gt)?)?;
        write_bytes(
            &d.join("masks.bin"),
            &encode_masks(&f.bev_gt.spec, [&f.overhead_mask, &f.underground_mask])?,
        )?;
        Ok(())
    }

    pub fn finish(self, log: &SceneLog) -> Result<PathBuf, IoError> {
        write_json(&self.dir.join("scene_log.json"), log)?;
        Ok(self.dir)
    }
}

/// Writes a complete scene to `scenes/<id>/` under `root`.
pub fn write_scene(root: &Path, scene: &SceneRecord) -> Result<PathBuf, IoError> {
    let mut w = SceneWriter::create(&scene_dir(root, &scene.id), &scene.config)?;
    for f in &scene.frames {
        w.write_frame(f)?;
    }
    w.finish(&scene.log)
}

pub fn read_scene_config(root: &Path, id: &str) -> Result<SceneConfig, IoError> {
    read_json(&scene_dir(root, id).join("config.json"))
}

/// Reads the log and checks that the stored config still hashes to the
/// digest recorded with it.
pub fn read_scene_log(root: &Path, id: &str) -> Result<(SceneConfig, SceneLog), IoError> {
    let config = read_scene_config(root, id)?;
    let log: SceneLog = read_json(&scene_dir(root, id).join("scene_log.json"))?;
    let actual = config_digest(&config);
    if actual != log.config_digest {
        return Err(IoError::DigestMismatch {
            id: id.to_string(),
            expected: log.config_digest,
            actual,
        });
    }
    Ok((config, log))
}

pub fn read_frame_boxes(root: &Path, id: &str, index: usize) -> Result<Vec<BBox3D>, IoError> {
    read_json(&frame_dir(&scene_dir(root, id), index).join("boxes.json"))
}

pub fn read_frame_bev(root: &Path, id: &str, index: usize) -> Result<BevGrid, IoError> {
    decode_bev_gt(&read_bytes(&frame_dir(&scene_dir(root, id), index).join("bev_gt.bin"))?)
}

pub fn read_frame(root: &Path, id: &str, index: usize) -> Result<FrameRecord, IoError> {
    let d = frame_dir(&scene_dir(root, id), index);
    let (_, [overhead_mask, underground_mask]) = decode_masks(&read_bytes(&d.join("masks.bin"))?)?;
    Ok(FrameRecord {
        index,
        boxes: read_json(&d.join("boxes.json"))?,
        lidar: decode_cloud(&read_bytes(&d.join("lidar.bin"))?)?,
        radar: decode_cloud(&read_bytes(&d.join("radar.bin"))?)?,
        bev_gt: decode_bev_gt(&read_bytes(&d.join("bev_gt.bin"))?)?,
        overhead_mask,
        underground_mask,
    })
}

pub fn read_scene(root: &Path, id: &str) -> Result<SceneRecord, IoError> {
    let (config, log) = read_scene_log(root, id)?;
    let frames = log
        .frames
        .iter()
        .map(|f| read_frame(root, id, f.index))
        .collect::<Result<_, _>>()?;
    Ok(SceneRecord {
        id: id.to_string(),
        config,
        log,
        frames,
    })
}
