//! `eval` and `export-gt`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bevkit::eval::detection::{evaluate_detection, DetectionReport, EvalFrame};
use bevkit::eval::{SegAccumulator, SegPrediction, SegmentationReport};
use bevkit::io::formats::{decode_seg_prediction, encode_seg_prediction};
use bevkit::io::predictions::{read_jsonl, write_jsonl};
use bevkit::io::store::{read_frame_bev, read_frame_boxes, read_scene_log};
use bevkit::io::{frame_id, Manifest, Split};
use bevkit::model::{BBox3D, Validity};
use bevkit::{MatchMethod, Prediction};

/// A frame of a completed scene, addressed by `scene/NNNN`.
#[derive(Debug, Clone)]
pub struct FrameRef {
    pub scene: String,
    pub index: usize,
    pub id: String,
}

/// Every frame of every completed scene, optionally limited to one split,
/// in scene then frame order.
pub fn dataset_frames(root: &Path, split: Option<Split>) -> Result<Vec<FrameRef>> {
    if !bevkit::io::manifest::manifest_path(root).exists() {
        bail!("no scenes: {} has no manifest", root.display());
    }
    let manifest = Manifest::load(root)?;
    let mut out = Vec::new();
    for entry in manifest.completed() {
        if split.is_some_and(|s| s != entry.split) {
            continue;
        }
        let (_, log) = read_scene_log(root, &entry.id)?;
        for f in &log.frames {
            out.push(FrameRef {
                scene: entry.id.clone(),
                index: f.index,
                id: frame_id(&entry.id, f.index),
            });
        }
    }
    if out.is_empty() {
        bail!("no scenes");
    }
    Ok(out)
}

fn list_unknown(unknown: &BTreeSet<String>) -> String {
    let shown: Vec<&str> = unknown.iter().take(5).map(String::as_str).collect();
    let more = unknown.len().saturating_sub(shown.len());
    let tail = if more > 0 { format!(" and {more} more") } else { String::new() };
    format!("{}{tail}", shown.join(", "))
}

pub fn cmd_eval_det(root: &Path, predictions: &Path, method: MatchMethod, split: Option<Split>) -> Result<DetectionReport> {
    let frames = dataset_frames(root, split)?;
    let mut by_frame: BTreeMap<String, Vec<Prediction>> = BTreeMap::new();
    for p in read_jsonl(predictions)? {
        by_frame.entry(p.frame_id.clone()).or_default().push(p);
    }
    let known: BTreeSet<&str> = frames.iter().map(|f| f.id.as_str()).collect();
    let unknown: BTreeSet<String> = by_frame.keys().filter(|k| !known.contains(k.as_str())).cloned().collect();
    if !unknown.is_empty() {
        bail!("predictions reference frames not in the dataset: {}", list_unknown(&unknown));
    }
    let mut eval_frames = Vec::with_capacity(frames.len());
    for f in &frames {
        let gts = read_frame_boxes(root, &f.scene, f.index)?;
        let preds = by_frame.remove(&f.id).unwrap_or_default();
        eval_frames.push(EvalFrame::new(f.id.clone(), &gts, preds));
    }
    Ok(evaluate_detection(&eval_frames, method)?)
}

/// Path of the segmentation prediction for frame `scene/NNNN`.
pub fn seg_prediction_path(dir: &Path, f: &FrameRef) -> PathBuf {
    dir.join(&f.scene).join(format!("{:04}.bin", f.index))
}

pub fn cmd_eval_seg(root: &Path, predictions: &Path, thresholds: Vec<f64>, split: Option<Split>) -> Result<SegmentationReport> {
    let frames = dataset_frames(root, split)?;
    let mut acc = SegAccumulator::new(thresholds);
    for f in &frames {
        let path = seg_prediction_path(predictions, f);
        let bytes = std::fs::read(&path).with_context(|| format!("missing segmentation prediction for frame {}", f.id))?;
        let pred = decode_seg_prediction(&bytes).with_context(|| format!("reading {}", path.display()))?;
        let gt = read_frame_bev(root, &f.scene, f.index)?;
        acc.add(&pred, &gt).with_context(|| format!("frame {}", f.id))?;
    }
    Ok(acc.report()?)
}

fn valid(boxes: &[BBox3D]) -> impl Iterator<Item = &BBox3D> {
    boxes.iter().filter(|b| b.validity == Validity::Valid)
}

/// Writes the ground truth back out in prediction format with score 1.
/// Returns the number of frames exported.
pub fn cmd_export_det(root: &Path, out: &Path, split: Option<Split>) -> Result<usize> {
    let frames = dataset_frames(root, split)?;
    let mut preds = Vec::new();
    for f in &frames {
        let boxes = read_frame_boxes(root, &f.scene, f.index)?;
        preds.extend(valid(&boxes).map(|b| Prediction::from_box(f.id.clone(), b, 1.0)));
    }
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    write_jsonl(out, &preds)?;
    Ok(frames.len())
}

pub fn cmd_export_seg(root: &Path, out: &Path, split: Option<Split>) -> Result<usize> {
    let frames = dataset_frames(root, split)?;
    for f in &frames {
        let gt = read_frame_bev(root, &f.scene, f.index)?;
        let path = seg_prediction_path(out, f);
        std::fs::create_dir_all(path.parent().expect("prediction path has a parent"))?;
        std::fs::write(&path, encode_seg_prediction(&SegPrediction::from_grid(&gt))?)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(frames.len())
}
