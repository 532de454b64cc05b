//! Detection and segmentation metrics.

pub mod detection;
pub mod iou;
pub mod matching;
pub mod report;
pub mod seg;

pub use detection::{
    aggregate, average_precision, evaluate_detection, sds, tp_metrics, Aggregate, CellResult, DetectionReport,
    EvalFrame, Prediction, TpErrors,
};
pub use iou::{aligned_iou, iou3d};
pub use matching::{match_predictions, MatchMethod, Matching, DISTANCE_THRESHOLDS_M, IOU_THRESHOLDS};
pub use seg::{seg_iou, SegAccumulator, SegPrediction, SegmentationReport, SEG_SWEEP};

use crate::model::Vec3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("box {id} has non-positive or non-finite size {size:?}")]
    DegenerateBox { id: u64, size: Vec3 },
    #[error("threshold {threshold} is not valid for {} matching", method.name())]
    BadThreshold { method: MatchMethod, threshold: f64 },
    #[error("unknown matching method {0:?} (expected iou or distance)")]
    UnknownMethod(String),
    #[error("class has no ground truth")]
    NoGroundTruth,
    #[error("nothing to aggregate: no ground truth in any class")]
    EmptyReport,
    #[error("prediction for {frame_id}: {reason}")]
    BadPrediction { frame_id: String, reason: String },
    #[error("prediction grid does not match the ground-truth grid")]
    SpecMismatch,
    #[error("segmentation threshold must be in (0, 1), got {0}")]
    BadSegThreshold(f64),
    #[error("segmentation prediction needs 8 planes of {expected} scores, got {channels} planes or wrong plane size")]
    SegShape { expected: usize, channels: usize },
}
