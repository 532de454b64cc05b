//! BEV segmentation IoU.

use serde::{Deserialize, Serialize};

use crate::grid::{BevGrid, BitPlane, GridSpec};
use crate::model::BevClass;

use super::EvalError;

/// Thresholds of the per-threshold sweep.
pub const SEG_SWEEP: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
pub const DEFAULT_SEG_THRESHOLD: f64 = 0.5;

/// Per-class score planes, row-major `l * l` each, in channel order.
#[derive(Debug, Clone, PartialEq)]
pub struct SegPrediction {
    pub spec: GridSpec,
    pub scores: Vec<Vec<f32>>,
}

impl SegPrediction {
    pub fn new(spec: GridSpec, scores: Vec<Vec<f32>>) -> Result<Self, EvalError> {
        let n = spec.side() * spec.side();
        if scores.len() != BevClass::COUNT || scores.iter().any(|p| p.len() != n) {
            return Err(EvalError::SegShape {
                expected: n,
                channels: scores.len(),
            });
        }
        Ok(Self { spec, scores })
    }

    /// Scores 1.0 on every labeled cell of `gt`, 0.0 elsewhere.
    pub fn from_grid(gt: &BevGrid) -> Self {
        let side = gt.spec.side();
        let scores = gt
            .channels()
            .iter()
            .map(|p| {
                let mut v = vec![0.0f32; side * side];
                for (r, c) in p.iter_ones() {
                    v[r * side + c] = 1.0;
                }
                v
            })
            .collect();
        Self { spec: gt.spec, scores }
    }

    /// Cells with score strictly above `threshold`.
    pub fn binarize(&self, class: BevClass, threshold: f64) -> BitPlane {
        let side = self.spec.side();
        let s = &self.scores[class.index()];
        BitPlane::from_fn(side, side, |r, c| s[r * side + c] as f64 > threshold)
    }
}

fn check(pred: &SegPrediction, gt: &BevGrid, threshold: f64) -> Result<(), EvalError> {
    if pred.spec != gt.spec {
        return Err(EvalError::SpecMismatch);
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(EvalError::BadSegThreshold(threshold));
    }
    Ok(())
}

/// Per-class IoU of one prediction. `None` for classes absent from both.
pub fn seg_iou(pred: &SegPrediction, gt: &BevGrid, threshold: f64) -> Result<[Option<f64>; 8], EvalError> {
    let mut acc = SegAccumulator::new(vec![threshold]);
    acc.add(pred, gt)?;
    Ok(acc.iou(0))
}

/// Intersection and union counts summed over frames, per threshold and class.
#[derive(Debug, Clone, PartialEq)]
pub struct SegAccumulator {
    pub thresholds: Vec<f64>,
    inter: Vec<[u64; 8]>,
    union: Vec<[u64; 8]>,
    frames: usize,
}

impl SegAccumulator {
    pub fn new(thresholds: Vec<f64>) -> Self {
        let n = thresholds.len();
        Self {
            thresholds,
            inter: vec![[0; 8]; n],
            union: vec![[0; 8]; n],
            frames: 0,
        }
    }

    pub fn add(&mut self, pred: &SegPrediction, gt: &BevGrid) -> Result<(), EvalError> {
        for &t in &self.thresholds {
            check(pred, gt, t)?;
        }
        for (ti, &t) in self.thresholds.iter().enumerate() {
            for class in BevClass::ALL {
                let p = pred.binarize(class, t);
                let g = gt.plane(class);
                self.inter[ti][class.index()] += p.intersection_count(g) as u64;
                self.union[ti][class.index()] += p.union_count(g) as u64;
            }
        }
        self.frames += 1;
        Ok(())
    }

    pub fn iou(&self, ti: usize) -> [Option<f64>; 8] {
        std::array::from_fn(|c| {
            let u = self.union[ti][c];
            (u > 0).then(|| self.inter[ti][c] as f64 / u as f64)
        })
    }

    pub fn report(&self) -> Result<SegmentationReport, EvalError> {
        if self.frames == 0 {
            return Err(EvalError::EmptyReport);
        }
        let rows = self
            .thresholds
            .iter()
            .enumerate()
            .map(|(ti, &threshold)| {
                let ious = self.iou(ti);
                let defined: Vec<f64> = ious.iter().flatten().copied().collect();
                SegRow {
                    threshold,
                    classes: BevClass::ALL
                        .iter()
                        .map(|&class| ClassIou {
                            class,
                            iou: ious[class.index()],
                        })
                        .collect(),
                    miou: (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64),
                }
            })
            .collect();
        Ok(SegmentationReport {
            frames: self.frames,
            rows,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassIou {
    pub class: BevClass,
    pub iou: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegRow {
    pub threshold: f64,
    pub classes: Vec<ClassIou>,
    /// Mean over classes with a defined IoU.
    pub miou: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationReport {
    pub frames: usize,
    pub rows: Vec<SegRow>,
}
