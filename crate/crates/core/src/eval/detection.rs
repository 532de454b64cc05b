//! Average precision, true-positive error metrics, aggregation and the
//! composite detection score.

use serde::{Deserialize, Serialize};

use crate::model::{yaw_difference, BBox3D, DetectionClass, Validity, Vec3};

use super::iou::aligned_iou;
use super::matching::{match_predictions, MatchMethod};
use super::EvalError;

/// One detection as read from a predictions file. Coordinates are in the ego
/// frame of the frame it belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Prediction {
    pub frame_id: String,
    pub class: DetectionClass,
    pub center: Vec3,
    pub size: Vec3,
    pub yaw: f64,
    #[serde(default)]
    pub velocity: Vec3,
    pub score: f64,
}

impl Prediction {
    pub fn from_box(frame_id: impl Into<String>, b: &BBox3D, score: f64) -> Self {
        Self {
            frame_id: frame_id.into(),
            class: b.class,
            center: b.center,
            size: b.size,
            yaw: b.yaw,
            velocity: b.velocity,
            score,
        }
    }

    pub fn to_box(&self) -> BBox3D {
        BBox3D::new(0, self.class, self.center, self.size, self.yaw).with_velocity(self.velocity)
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let finite = self
            .center
            .iter()
            .chain(&self.size)
            .chain(&self.velocity)
            .chain([&self.yaw])
            .all(|v| v.is_finite());
        if !finite || !(0.0..=1.0).contains(&self.score) {
            return Err(EvalError::BadPrediction {
                frame_id: self.frame_id.clone(),
                reason: "non-finite value or score outside [0, 1]".into(),
            });
        }
        if !self.size.iter().all(|&s| s > 0.0) {
            return Err(EvalError::BadPrediction {
                frame_id: self.frame_id.clone(),
                reason: "box size must be positive".into(),
            });
        }
        Ok(())
    }
}

/// Ground truth and predictions of one frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalFrame {
    pub frame_id: String,
    pub gts: Vec<BBox3D>,
    pub preds: Vec<Prediction>,
}

impl EvalFrame {
    /// Keeps only valid GT boxes; invalid ones have no sensor support and are
    /// not expected to be detected.
    pub fn new(frame_id: impl Into<String>, gts: &[BBox3D], preds: Vec<Prediction>) -> Self {
        let mut gts: Vec<BBox3D> = gts.iter().filter(|b| b.validity == Validity::Valid).cloned().collect();
        gts.sort_by_key(|b| b.id);
        Self {
            frame_id: frame_id.into(),
            gts,
            preds,
        }
    }
}

/// Exact area under the step precision-recall curve. `ranked` holds
/// `(score, is_true_positive)`; it is swept by descending score (stable).
pub fn average_precision(ranked: &[(f64, bool)], n_gt: usize) -> Result<f64, EvalError> {
    if n_gt == 0 {
        return Err(EvalError::NoGroundTruth);
    }
    let mut order: Vec<usize> = (0..ranked.len()).collect();
    order.sort_by(|&a, &b| ranked[b].0.total_cmp(&ranked[a].0).then(a.cmp(&b)));
    let (mut tp, mut seen, mut area) = (0usize, 0usize, 0.0);
    for i in order {
        seen += 1;
        if ranked[i].1 {
            tp += 1;
            area += tp as f64 / seen as f64;
        }
    }
    Ok(area / n_gt as f64)
}

/// Mean errors over matched pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TpErrors {
    pub ate: f64,
    pub aoe: f64,
    pub ase: f64,
    pub ave: f64,
}

impl TpErrors {
    pub const ZERO: TpErrors = TpErrors {
        ate: 0.0,
        aoe: 0.0,
        ase: 0.0,
        ave: 0.0,
    };

    pub fn for_pair(pred: &BBox3D, gt: &BBox3D) -> Self {
        let d: f64 = (0..3).map(|k| (pred.center[k] - gt.center[k]).powi(2)).sum();
        Self {
            ate: d.sqrt(),
            aoe: yaw_difference(pred.yaw, gt.yaw),
            ase: 1.0 - aligned_iou(pred.size, gt.size),
            ave: (pred.velocity[0] - gt.velocity[0]).hypot(pred.velocity[1] - gt.velocity[1]),
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.ate, self.aoe, self.ase, self.ave]
    }
}

/// Means over the given pairs, `None` when there are none.
pub fn tp_metrics(pairs: &[(BBox3D, BBox3D)]) -> Option<TpErrors> {
    if pairs.is_empty() {
        return None;
    }
    let n = pairs.len() as f64;
    let mut sum = [0.0; 4];
    for (p, g) in pairs {
        for (s, v) in sum.iter_mut().zip(TpErrors::for_pair(p, g).as_array()) {
            *s += v;
        }
    }
    Some(TpErrors {
        ate: sum[0] / n,
        aoe: sum[1] / n,
        ase: sum[2] / n,
        ave: sum[3] / n,
    })
}

/// `(4 mAP + sum(1 - min(1, mTP))) / 8`.
pub fn sds(map: f64, tp: &TpErrors) -> f64 {
    let penalty: f64 = tp.as_array().iter().map(|v| 1.0 - v.min(1.0)).sum();
    (4.0 * map + penalty) / 8.0
}

/// One (class, threshold) cell of the detection table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub class: DetectionClass,
    pub threshold: f64,
    pub n_gt: usize,
    pub n_pred: usize,
    pub tp: usize,
    pub fp: usize,
    pub ap: f64,
    /// `None` when the cell has no matches.
    pub errors: Option<TpErrors>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub map: f64,
    pub mate: f64,
    pub maoe: f64,
    pub mase: f64,
    pub mave: f64,
    pub sds: f64,
}

impl Aggregate {
    pub fn tp(&self) -> TpErrors {
        TpErrors {
            ate: self.mate,
            aoe: self.maoe,
            ase: self.mase,
            ave: self.mave,
        }
    }
}

/// Unweighted means over cells. Cells without GT are skipped by the caller;
/// cells without matches do not contribute to the error means. If no cell
/// has a match the error means are 1.0, the worst value SDS can see.
pub fn aggregate(cells: &[CellResult]) -> Result<Aggregate, EvalError> {
    let scored: Vec<&CellResult> = cells.iter().filter(|c| c.n_gt > 0).collect();
    if scored.is_empty() {
        return Err(EvalError::EmptyReport);
    }
    let map = scored.iter().map(|c| c.ap).sum::<f64>() / scored.len() as f64;
    let with_tp: Vec<TpErrors> = scored.iter().filter_map(|c| c.errors).collect();
    let mean = |f: fn(&TpErrors) -> f64| {
        if with_tp.is_empty() {
            1.0
        } else {
            with_tp.iter().map(f).sum::<f64>() / with_tp.len() as f64
        }
    };
    let tp = TpErrors {
        ate: mean(|t| t.ate),
        aoe: mean(|t| t.aoe),
        ase: mean(|t| t.ase),
        ave: mean(|t| t.ave),
    };
    Ok(Aggregate {
        map,
        mate: tp.ate,
        maoe: tp.aoe,
        mase: tp.ase,
        mave: tp.ave,
        sds: sds(map, &tp),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub method: MatchMethod,
    pub thresholds: Vec<f64>,
    pub frames: usize,
    pub cells: Vec<CellResult>,
    pub summary: Aggregate,
}

impl DetectionReport {
    /// Per-class means over thresholds, for classes with GT.
    pub fn per_class(&self) -> Vec<(DetectionClass, Aggregate)> {
        DetectionClass::ALL
            .iter()
            .filter_map(|&class| {
                let cells: Vec<CellResult> = self.cells.iter().filter(|c| c.class == class).cloned().collect();
                aggregate(&cells).ok().map(|a| (class, a))
            })
            .collect()
    }
}

/// Evaluates one (class, threshold) cell over all frames.
pub fn evaluate_cell(
    frames: &[EvalFrame],
    class: DetectionClass,
    method: MatchMethod,
    threshold: f64,
) -> Result<CellResult, EvalError> {
    let mut ranked = Vec::new();
    let mut pairs = Vec::new();
    let (mut n_gt, mut n_pred) = (0, 0);
    for f in frames {
        let gts: Vec<BBox3D> = f.gts.iter().filter(|b| b.class == class).cloned().collect();
        let preds: Vec<&Prediction> = f.preds.iter().filter(|p| p.class == class).collect();
        n_gt += gts.len();
        n_pred += preds.len();
        let boxes: Vec<BBox3D> = preds.iter().map(|p| p.to_box()).collect();
        let scores: Vec<f64> = preds.iter().map(|p| p.score).collect();
        let m = match_predictions(&boxes, &scores, &gts, method, threshold)?;
        let assigned = m.assignment(boxes.len());
        for (i, a) in assigned.iter().enumerate() {
            ranked.push((scores[i], a.is_some()));
            if let Some(g) = a {
                pairs.push((boxes[i].clone(), gts[*g].clone()));
            }
        }
    }
    let ap = if n_gt > 0 { average_precision(&ranked, n_gt)? } else { 0.0 };
    Ok(CellResult {
        class,
        threshold,
        n_gt,
        n_pred,
        tp: pairs.len(),
        fp: n_pred - pairs.len(),
        ap,
        errors: tp_metrics(&pairs),
    })
}

/// Full detection evaluation over the method's threshold set. Only classes
/// present in the GT are scored.
pub fn evaluate_detection(frames: &[EvalFrame], method: MatchMethod) -> Result<DetectionReport, EvalError> {
    for f in frames {
        for p in &f.preds {
            p.validate()?;
        }
    }
    let mut cells = Vec::new();
    for class in DetectionClass::ALL {
        if !frames.iter().any(|f| f.gts.iter().any(|b| b.class == class)) {
            continue;
        }
        for &t in method.thresholds() {
            cells.push(evaluate_cell(frames, class, method, t)?);
        }
    }
    let summary = aggregate(&cells)?;
    Ok(DetectionReport {
        method,
        thresholds: method.thresholds().to_vec(),
        frames: frames.len(),
        cells,
        summary,
    })
}
