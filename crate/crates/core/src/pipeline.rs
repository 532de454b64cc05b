//! Scene config to annotated on-disk scene: simulate, annotate, compose BEV
//! ground truth, write.

use std::path::Path;

use crate::annotate::{annotate_frame, AnnotateError};
use crate::bevgt::{compose, morphology::StructuringElement};
use crate::grid::GridError;
use crate::io::store::{FrameLog, LaneLog, SceneWriter};
use crate::io::{config_digest, FrameRecord, IoError, SceneLog, SceneRecord};
use crate::model::{Validity, Waypoint};
use crate::sampler::SceneConfig;
use crate::synth::{Frame, RoadNetwork, SceneSimulator, SynthError, SynthOptions};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Annotate(#[from] AnnotateError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Io(#[from] IoError),
}

/// Annotates one simulated frame and composes its BEV ground truth.
pub fn process_frame(
    frame: &Frame,
    waypoints: &[Waypoint],
    config: &SceneConfig,
) -> Result<(FrameRecord, FrameLog), PipelineError> {
    let boxes = annotate_frame(frame, config.bbox_radius_m)?;
    let comp = compose(
        &frame.ego,
        &frame.boxes,
        &frame.overhead_mask,
        &frame.underground_mask,
        waypoints,
        &config.grid,
        StructuringElement::default(),
    )?;
    let log = FrameLog {
        index: frame.index,
        time_s: frame.time_s,
        ego: frame.ego,
        boxes: boxes.len(),
        valid_boxes: boxes.iter().filter(|b| b.validity == Validity::Valid).count(),
        elevation_fallback: comp.fallback,
    };
    let record = FrameRecord {
        index: frame.index,
        boxes,
        lidar: frame.lidar.clone(),
        radar: frame.radar.clone(),
        bev_gt: comp.grid,
        overhead_mask: frame.overhead_mask.clone(),
        underground_mask: frame.underground_mask.clone(),
    };
    Ok((record, log))
}

fn empty_log(id: &str, config: &SceneConfig, network: &RoadNetwork) -> SceneLog {
    SceneLog {
        id: id.to_string(),
        map_id: config.map_id.clone(),
        seed: config.seed,
        config_digest: config_digest(config),
        lanes: network
            .lanes
            .iter()
            .map(|l| LaneLog {
                lane_width: l.lane_width,
                polyline: l.polyline.clone(),
            })
            .collect(),
        frames: Vec::with_capacity(config.frame_count()),
    }
}

/// Builds a whole annotated scene in memory.
pub fn build_scene(id: &str, config: &SceneConfig, options: SynthOptions) -> Result<SceneRecord, PipelineError> {
    let mut sim = SceneSimulator::new(config.clone(), options)?;
    let waypoints = sim.network().waypoints();
    let mut log = empty_log(id, config, sim.network());
    let mut frames = Vec::with_capacity(config.frame_count());
    while let Some(frame) = sim.next_frame() {
        let (rec, fl) = process_frame(&frame, &waypoints, config)?;
        frames.push(rec);
        log.frames.push(fl);
    }
    Ok(SceneRecord {
        id: id.to_string(),
        config: config.clone(),
        log,
        frames,
    })
}

/// Simulates and writes a scene into `dir` one frame at a time, keeping only
/// the current frame in memory. Returns the scene log.
pub fn generate_into(dir: &Path, id: &str, config: &SceneConfig, options: SynthOptions) -> Result<SceneLog, PipelineError> {
    let mut sim = SceneSimulator::new(config.clone(), options)?;
    let waypoints = sim.network().waypoints();
    let mut log = empty_log(id, config, sim.network());
    let mut writer = SceneWriter::create(dir, config)?;
    while let Some(frame) = sim.next_frame() {
        let (rec, fl) = process_frame(&frame, &waypoints, config)?;
        writer.write_frame(&rec)?;
        log.frames.push(fl);
    }
    writer.finish(&log)?;
    Ok(log)
}
