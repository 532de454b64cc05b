//! Prediction to ground-truth association for one class in one frame.

use serde::{Deserialize, Serialize};

use crate::model::BBox3D;

use super::iou::iou3d;
use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMethod {
    Iou,
    Distance,
}

pub const IOU_THRESHOLDS: [f64; 7] = [0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
pub const DISTANCE_THRESHOLDS_M: [f64; 4] = [0.5, 1.0, 2.0, 4.0];

impl MatchMethod {
    pub fn thresholds(self) -> &'static [f64] {
        match self {
            MatchMethod::Iou => &IOU_THRESHOLDS,
            MatchMethod::Distance => &DISTANCE_THRESHOLDS_M,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MatchMethod::Iou => "iou",
            MatchMethod::Distance => "distance",
        }
    }

    pub fn validate_threshold(self, t: f64) -> Result<(), EvalError> {
        let ok = match self {
            MatchMethod::Iou => t > 0.0 && t < 1.0,
            MatchMethod::Distance => t > 0.0 && t.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(EvalError::BadThreshold { method: self, threshold: t })
        }
    }
}

impl std::str::FromStr for MatchMethod {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, EvalError> {
        match s {
            "iou" => Ok(MatchMethod::Iou),
            "distance" => Ok(MatchMethod::Distance),
            other => Err(EvalError::UnknownMethod(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Matching {
    /// `(prediction index, gt index)` in the order the predictions were visited.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_preds: Vec<usize>,
    pub unmatched_gts: Vec<usize>,
}

impl Matching {
    /// Matched GT index per prediction.
    pub fn assignment(&self, n_preds: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; n_preds];
        for &(p, g) in &self.pairs {
            out[p] = Some(g);
        }
        out
    }
}

pub fn planar_distance(a: &BBox3D, b: &BBox3D) -> f64 {
    (a.center[0] - b.center[0]).hypot(a.center[1] - b.center[1])
}

/// Affinity table: `Some(cost)` when the pair clears the threshold, lower is
/// better (negated IoU or planar distance).
fn costs(preds: &[BBox3D], gts: &[BBox3D], method: MatchMethod, t: f64) -> Result<Vec<Vec<Option<f64>>>, EvalError> {
    preds
        .iter()
        .map(|p| {
            gts.iter()
                .map(|g| {
                    Ok(match method {
                        MatchMethod::Iou => {
                            let v = iou3d(p, g)?;
                            (v > t).then_some(-v)
                        }
                        MatchMethod::Distance => {
                            let d = planar_distance(p, g);
                            (d < t).then_some(d)
                        }
                    })
                })
                .collect()
        })
        .collect()
}

/// Visiting order: descending score, input order among equal scores.
pub fn score_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Greedy matching. Predictions are visited by descending score; each takes
/// the best still-free GT that clears the threshold (IoU strictly above it,
/// or planar center distance strictly below it). Ties go to the lower GT
/// index, so callers should pass GTs sorted by id.
pub fn match_predictions(
    preds: &[BBox3D],
    scores: &[f64],
    gts: &[BBox3D],
    method: MatchMethod,
    threshold: f64,
) -> Result<Matching, EvalError> {
    method.validate_threshold(threshold)?;
    let cost = costs(preds, gts, method, threshold)?;
    let mut taken = vec![false; gts.len()];
    let mut m = Matching::default();
    for p in score_order(scores) {
        let mut best: Option<(f64, usize)> = None;
        for (g, c) in cost[p].iter().enumerate() {
            if let (Some(c), false) = (c, taken[g]) {
                if best.is_none_or(|(bc, _)| *c < bc) {
                    best = Some((*c, g));
                }
            }
        }
        match best {
            Some((_, g)) => {
                taken[g] = true;
                m.pairs.push((p, g));
            }
            None => m.unmatched_preds.push(p),
        }
    }
    m.unmatched_gts = (0..gts.len()).filter(|&g| !taken[g]).collect();
    Ok(m)
}

/// Priority key of an assignment plus the assignment itself.
type Best = (Vec<(u8, f64, usize)>, Vec<Option<usize>>);

/// Exhaustive reference for small instances. Enumerates every one-to-one
/// partial assignment that respects the threshold and keeps the one that is
/// best in score-priority order: the highest-scored prediction first gets
/// matched if it can, then with the lowest cost, then to the lowest GT index,
/// then the next prediction likewise.
pub fn match_exhaustive(
    preds: &[BBox3D],
    scores: &[f64],
    gts: &[BBox3D],
    method: MatchMethod,
    threshold: f64,
) -> Result<Vec<Option<usize>>, EvalError> {
    method.validate_threshold(threshold)?;
    let cost = costs(preds, gts, method, threshold)?;
    let order = score_order(scores);
    let mut best: Option<Best> = None;
    let mut current = vec![None; preds.len()];
    let mut used = vec![false; gts.len()];

    fn key(order: &[usize], a: &[Option<usize>], cost: &[Vec<Option<f64>>]) -> Vec<(u8, f64, usize)> {
        order
            .iter()
            .map(|&p| match a[p] {
                Some(g) => (0, cost[p][g].unwrap(), g),
                None => (1, 0.0, 0),
            })
            .collect()
    }

    fn better(a: &[(u8, f64, usize)], b: &[(u8, f64, usize)]) -> bool {
        for (x, y) in a.iter().zip(b) {
            let o = x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)).then(x.2.cmp(&y.2));
            if o != std::cmp::Ordering::Equal {
                return o == std::cmp::Ordering::Less;
            }
        }
        false
    }

    fn recurse(
        i: usize,
        order: &[usize],
        cost: &[Vec<Option<f64>>],
        current: &mut Vec<Option<usize>>,
        used: &mut Vec<bool>,
        best: &mut Option<Best>,
    ) {
        if i == current.len() {
            let k = key(order, current, cost);
            if best.as_ref().is_none_or(|(bk, _)| better(&k, bk)) {
                *best = Some((k, current.clone()));
            }
            return;
        }
        recurse(i + 1, order, cost, current, used, best);
        for g in 0..used.len() {
            if !used[g] && cost[i][g].is_some() {
                used[g] = true;
                current[i] = Some(g);
                recurse(i + 1, order, cost, current, used, best);
                current[i] = None;
                used[g] = false;
            }
        }
    }

    recurse(0, &order, &cost, &mut current, &mut used, &mut best);
    Ok(best.map(|(_, a)| a).unwrap_or_default())
}

/// Largest number of simultaneously matchable pairs (no score priority).
pub fn max_cardinality(preds: &[BBox3D], gts: &[BBox3D], method: MatchMethod, threshold: f64) -> Result<usize, EvalError> {
    let cost = costs(preds, gts, method, threshold)?;
    fn go(i: usize, cost: &[Vec<Option<f64>>], used: &mut Vec<bool>) -> usize {
        if i == cost.len() {
            return 0;
        }
        let mut best = go(i + 1, cost, used);
        for g in 0..used.len() {
            if !used[g] && cost[i][g].is_some() {
                used[g] = true;
                best = best.max(1 + go(i + 1, cost, used));
                used[g] = false;
            }
        }
        best
    }
    Ok(go(0, &cost, &mut vec![false; gts.len()]))
}
