//! Per-frame box collection, sensor point counting and validity labels.

use crate::model::{point_in_box, BBox3D, PointCloud, Pose, Validity, BOUNDARY_EPS};
use crate::synth::Frame;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnnotateError {
    #[error("{boxes} boxes but {lidar} lidar and {radar} radar counts")]
    LengthMismatch { boxes: usize, lidar: usize, radar: usize },
    #[error("collection radius must be positive, got {0}")]
    BadRadius(f64),
}

/// Boxes whose center lies within `radius` (planar) of the ego, moved into
/// the ego frame and sorted by id.
pub fn collect_boxes(world_boxes: &[BBox3D], ego: &Pose, radius: f64) -> Result<Vec<BBox3D>, AnnotateError> {
    if radius.is_nan() || radius <= 0.0 {
        return Err(AnnotateError::BadRadius(radius));
    }
    let r2 = radius * radius;
    let mut out: Vec<BBox3D> = world_boxes
        .iter()
        .filter(|b| {
            let dx = b.center[0] - ego.position[0];
            let dy = b.center[1] - ego.position[1];
            dx * dx + dy * dy <= r2
        })
        .map(|b| b.to_ego(ego))
        .collect();
    out.sort_by_key(|b| b.id);
    Ok(out)
}

/// O(N*M) reference: every point tested against every box.
pub fn count_points_brute_force(cloud: &PointCloud, boxes: &[BBox3D]) -> Vec<u32> {
    boxes
        .iter()
        .map(|b| (0..cloud.len()).filter(|&i| point_in_box(cloud.xyz(i), b)).count() as u32)
        .collect()
}

/// Slack added to every bounding rectangle so rounding in the AABB never
/// drops a point that `point_in_box` accepts.
const AABB_MARGIN: f64 = 1e-6 + BOUNDARY_EPS;
const INDEX_CELL_M: f64 = 2.0;
const MAX_INDEX_SIDE: usize = 2048;

struct Aabb {
    min: [f64; 3],
    max: [f64; 3],
}

impl Aabb {
    fn of(b: &BBox3D) -> Self {
        let (s, c) = b.yaw.sin_cos();
        let hx = c.abs() * b.size[0] / 2.0 + s.abs() * b.size[1] / 2.0 + AABB_MARGIN;
        let hy = s.abs() * b.size[0] / 2.0 + c.abs() * b.size[1] / 2.0 + AABB_MARGIN;
        let hz = b.size[2] / 2.0 + AABB_MARGIN;
        Self {
            min: [b.center[0] - hx, b.center[1] - hy, b.center[2] - hz],
            max: [b.center[0] + hx, b.center[1] + hy, b.center[2] + hz],
        }
    }

    fn contains(&self, p: [f64; 3]) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }
}

/// Uniform xy bucket grid over box bounding rectangles, stored as CSR lists.
struct BoxIndex {
    origin: [f64; 2],
    cell: f64,
    nx: usize,
    ny: usize,
    starts: Vec<u32>,
    entries: Vec<u32>,
}

impl BoxIndex {
    fn build(aabbs: &[Aabb]) -> Option<Self> {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for a in aabbs {
            for k in 0..2 {
                lo[k] = lo[k].min(a.min[k]);
                hi[k] = hi[k].max(a.max[k]);
            }
        }
        if !(lo[0].is_finite() && hi[0].is_finite() && lo[1].is_finite() && hi[1].is_finite()) {
            return None;
        }
        let span = (hi[0] - lo[0]).max(hi[1] - lo[1]);
        let cell = INDEX_CELL_M.max(span / MAX_INDEX_SIDE as f64);
        let nx = ((hi[0] - lo[0]) / cell).floor() as usize + 1;
        let ny = ((hi[1] - lo[1]) / cell).floor() as usize + 1;
        let slot = |a: &Aabb, k: usize, n: usize| {
            let lo_i = ((a.min[k] - lo[k]) / cell).floor().max(0.0) as usize;
            let hi_i = (((a.max[k] - lo[k]) / cell).floor() as usize).min(n - 1);
            (lo_i, hi_i)
        };
        let mut counts = vec![0u32; nx * ny + 1];
        for a in aabbs {
            let (x0, x1) = slot(a, 0, nx);
            let (y0, y1) = slot(a, 1, ny);
            for iy in y0..=y1 {
                for ix in x0..=x1 {
                    counts[iy * nx + ix + 1] += 1;
                }
            }
        }
        for i in 1..counts.len() {
            counts[i] += counts[i - 1];
        }
        let mut fill = counts.clone();
        let mut entries = vec![0u32; *counts.last().unwrap() as usize];
        for (bi, a) in aabbs.iter().enumerate() {
            let (x0, x1) = slot(a, 0, nx);
            let (y0, y1) = slot(a, 1, ny);
            for iy in y0..=y1 {
                for ix in x0..=x1 {
                    let c = iy * nx + ix;
                    entries[fill[c] as usize] = bi as u32;
                    fill[c] += 1;
                }
            }
        }
        Some(Self {
            origin: lo,
            cell,
            nx,
            ny,
            starts: counts,
            entries,
        })
    }

    fn candidates(&self, x: f64, y: f64) -> &[u32] {
        let fx = (x - self.origin[0]) / self.cell;
        let fy = (y - self.origin[1]) / self.cell;
        if !(fx >= 0.0 && fy >= 0.0) {
            return &[];
        }
        let (ix, iy) = (fx as usize, fy as usize);
        if ix >= self.nx || iy >= self.ny {
            return &[];
        }
        let c = iy * self.nx + ix;
        &self.entries[self.starts[c] as usize..self.starts[c + 1] as usize]
    }
}

/// Points of `cloud` inside each box. A point inside two boxes counts for
/// both. Uses a bucket grid over box bounding rectangles; the per-point test
/// is the same [`point_in_box`] as the brute-force reference, so results are
/// identical.
pub fn count_points(cloud: &PointCloud, boxes: &[BBox3D]) -> Vec<u32> {
    let mut counts = vec![0u32; boxes.len()];
    let aabbs: Vec<Aabb> = boxes.iter().map(Aabb::of).collect();
    let Some(index) = BoxIndex::build(&aabbs) else {
        return count_points_brute_force(cloud, boxes);
    };
    for i in 0..cloud.len() {
        let p = cloud.xyz(i);
        for &bi in index.candidates(p[0], p[1]) {
            let bi = bi as usize;
            if aabbs[bi].contains(p) && point_in_box(p, &boxes[bi]) {
                counts[bi] += 1;
            }
        }
    }
    counts
}

/// Stores the counts on each box and marks it valid when either sensor saw
/// at least one point inside it.
pub fn label_validity(boxes: &mut [BBox3D], lidar: &[u32], radar: &[u32]) -> Result<(), AnnotateError> {
    if lidar.len() != boxes.len() || radar.len() != boxes.len() {
        return Err(AnnotateError::LengthMismatch {
            boxes: boxes.len(),
            lidar: lidar.len(),
            radar: radar.len(),
        });
    }
    for ((b, &l), &r) in boxes.iter_mut().zip(lidar).zip(radar) {
        b.num_lidar_pts = l;
        b.num_radar_pts = r;
        b.validity = if l as u64 + r as u64 >= 1 {
            Validity::Valid
        } else {
            Validity::Invalid
        };
    }
    Ok(())
}

/// Collect, count and label one frame. Returned boxes are in the ego frame,
/// the same frame as the frame's clouds.
pub fn annotate_frame(frame: &Frame, radius: f64) -> Result<Vec<BBox3D>, AnnotateError> {
    let mut boxes = collect_boxes(&frame.boxes, &frame.ego, radius)?;
    let lidar = count_points(&frame.lidar, &boxes);
    let radar = count_points(&frame.radar, &boxes);
    label_validity(&mut boxes, &lidar, &radar)?;
    Ok(boxes)
}
