//! BEV ground-truth composition.
//!
//! The road channel comes from waypoints (a cell is road when some waypoint
//! lies closer to its center than that waypoint's lane width) OR-ed with the
//! road pixels of the overhead mask, then closed morphologically. Object
//! channels come from the OR of the overhead and underground masks, except
//! when two nearby waypoints sit on different levels; then the object
//! channels are rasterized straight from the 3D boxes and the masks are not
//! used at all.

pub mod morphology;

use crate::grid::{for_each_footprint_cell, BevGrid, BitPlane, GridError, GridSpec, SemanticMask};
use crate::model::{world_to_ego, BBox3D, BevClass, Pose, Waypoint};
use crate::synth::Frame;

pub use morphology::{binary_closing, dilate, erode, StructuringElement};

/// Waypoints closer than this (planar, metres) are checked for a level change.
pub const ELEVATION_PAIR_DISTANCE_M: f64 = 48.0;
/// Height difference (metres) above which two nearby waypoints are on different roads.
pub const ELEVATION_DELTA_M: f64 = 6.4;
/// Height of the virtual BEV cameras above and below the ego vehicle.
pub const CAMERA_HEIGHT_M: f64 = 1000.0;

/// Road plane produced by the waypoint rasterizer.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadMask {
    pub spec: GridSpec,
    pub bits: BitPlane,
}

pub fn rasterize_road_from_waypoints(wps: &[Waypoint], ego: &Pose, spec: &GridSpec) -> RoadMask {
    let mut bits = BitPlane::square(spec.side());
    let reach = spec.half_extent();
    for wp in wps {
        let w = wp.lane_width;
        let p = world_to_ego(wp.position, ego);
        if p[0].abs() > reach + w || p[1].abs() > reach + w {
            continue;
        }
        let w2 = w * w;
        let Some((rows, cols)) = spec.cell_range(p[0] - w, p[0] + w, p[1] - w, p[1] + w) else {
            continue;
        };
        for row in rows {
            for col in cols.clone() {
                let (x, y) = spec.cell_center(row, col);
                let (dx, dy) = (x - p[0], y - p[1]);
                if dx * dx + dy * dy < w2 {
                    bits.set(row, col, true);
                }
            }
        }
    }
    RoadMask { spec: *spec, bits }
}

/// Per-class OR of the two camera masks. The road channel is left empty;
/// road is handled separately.
pub fn merge_class_masks(down: &SemanticMask, up: &SemanticMask) -> Result<Vec<BitPlane>, GridError> {
    if down.side() != up.side() {
        return Err(GridError::Mismatch {
            left: down.side(),
            right: up.side(),
        });
    }
    let side = down.side();
    let mut planes = vec![BitPlane::square(side); BevClass::COUNT];
    let road = BevClass::Road.bit();
    for (i, (&a, &b)) in down.labels().iter().zip(up.labels()).enumerate() {
        let merged = (a | b) & !road;
        if merged == 0 {
            continue;
        }
        let (r, c) = (i / side, i % side);
        for class in BevClass::ALL {
            if merged & class.bit() != 0 {
                planes[class.index()].set(r, c, true);
            }
        }
    }
    Ok(planes)
}

/// True when two waypoints closer than 48 m differ in height by more than 6.4 m.
///
/// Waypoints are bucketed into 48 m cells; a pair of neighbouring buckets is
/// only scanned pairwise when its combined height range exceeds the limit.
pub fn elevation_conflict(wps: &[Waypoint], _ego: &Pose) -> bool {
    use std::collections::HashMap;

    if wps.len() < 2 {
        return false;
    }
    let cell = ELEVATION_PAIR_DISTANCE_M;
    let mut buckets: HashMap<(i64, i64), (f64, f64, Vec<usize>)> = HashMap::new();
    for (i, wp) in wps.iter().enumerate() {
        let key = (
            (wp.position[0] / cell).floor() as i64,
            (wp.position[1] / cell).floor() as i64,
        );
        let z = wp.position[2];
        let entry = buckets.entry(key).or_insert((z, z, Vec::new()));
        entry.0 = entry.0.min(z);
        entry.1 = entry.1.max(z);
        entry.2.push(i);
    }
    let limit2 = ELEVATION_PAIR_DISTANCE_M * ELEVATION_PAIR_DISTANCE_M;
    let mut keys: Vec<_> = buckets.keys().copied().collect();
    keys.sort_unstable();
    for &ka in &keys {
        let (amin, amax, ref a) = buckets[&ka];
        for dx in -1..=1 {
            for dy in -1..=1 {
                let kb = (ka.0 + dx, ka.1 + dy);
                // Visit each unordered bucket pair once.
                if kb < ka {
                    continue;
                }
                let Some((bmin, bmax, b)) = buckets.get(&kb) else {
                    continue;
                };
                if amax.max(*bmax) - amin.min(*bmin) <= ELEVATION_DELTA_M {
                    continue;
                }
                for &i in a {
                    let p = wps[i].position;
                    for &j in b {
                        let q = wps[j].position;
                        if (p[2] - q[2]).abs() <= ELEVATION_DELTA_M {
                            continue;
                        }
                        let (ex, ey) = (p[0] - q[0], p[1] - q[1]);
                        if ex * ex + ey * ey < limit2 {
                            return true;
                        }
                    }
                }
            }
        }
    }
    false
}

/// Object channels straight from 3D boxes. Two-wheelers also mark the rider
/// channel over the same footprint.
pub fn rasterize_boxes(boxes: &[BBox3D], ego: &Pose, spec: &GridSpec) -> Vec<BitPlane> {
    let mut planes = vec![BitPlane::square(spec.side()); BevClass::COUNT];
    for b in boxes {
        let e = b.to_ego(ego);
        let class = b.class.bev_class();
        let rider = b.class.has_rider();
        for_each_footprint_cell(spec, e.center, e.yaw, e.size[0] / 2.0, e.size[1] / 2.0, |r, c| {
            planes[class.index()].set(r, c, true);
            if rider {
                planes[BevClass::Rider.index()].set(r, c, true);
            }
        });
    }
    planes
}

/// Waypoints whose ego-frame planar position lies inside the grid square.
pub fn waypoints_in_grid(wps: &[Waypoint], ego: &Pose, spec: &GridSpec) -> Vec<Waypoint> {
    let h = spec.half_extent();
    wps.iter()
        .filter(|wp| {
            let p = world_to_ego(wp.position, ego);
            p[0].abs() <= h && p[1].abs() <= h
        })
        .copied()
        .collect()
}

/// Everything [`compose_bev_gt`] produces, including the intermediate road
/// planes used by oracle comparisons.
#[derive(Debug, Clone)]
pub struct Composition {
    pub grid: BevGrid,
    /// Waypoint raster alone.
    pub road_waypoints: BitPlane,
    /// Road plane right before closing.
    pub road_pre_closing: BitPlane,
    /// True when the elevation fallback was used.
    pub fallback: bool,
}

/// Full composition from explicit inputs. `down` is the overhead camera
/// (looking down), `up` the underground one.
pub fn compose(
    ego: &Pose,
    boxes: &[BBox3D],
    down: &SemanticMask,
    up: &SemanticMask,
    wps: &[Waypoint],
    spec: &GridSpec,
    element: StructuringElement,
) -> Result<Composition, GridError> {
    spec.validate()?;
    for m in [down, up] {
        if m.side() != spec.side() {
            return Err(GridError::Mismatch {
                left: m.side(),
                right: spec.side(),
            });
        }
    }
    let nearby = waypoints_in_grid(wps, ego, spec);
    let fallback = elevation_conflict(&nearby, ego);
    let road_waypoints = rasterize_road_from_waypoints(wps, ego, spec).bits;

    let (road_pre_closing, mut planes) = if fallback {
        (road_waypoints.clone(), rasterize_boxes(boxes, ego, spec))
    } else {
        let mut road = road_waypoints.clone();
        road.or_assign(&down.plane(BevClass::Road));
        (road, merge_class_masks(down, up)?)
    };
    planes[BevClass::Road.index()] = binary_closing(&road_pre_closing, element);
    Ok(Composition {
        grid: BevGrid::from_channels(*spec, planes)?,
        road_waypoints,
        road_pre_closing,
        fallback,
    })
}

/// BEV ground truth for one frame using the default 3x3 cross closing.
pub fn compose_bev_gt(frame: &Frame, wps: &[Waypoint], spec: &GridSpec) -> Result<BevGrid, GridError> {
    compose(
        &frame.ego,
        &frame.boxes,
        &frame.overhead_mask,
        &frame.underground_mask,
        wps,
        spec,
        StructuringElement::default(),
    )
    .map(|c| c.grid)
}

/// Field of view (degrees) that makes each pixel of an `l x l` camera at
/// `height` metres cover one `d x d` cell.
pub fn camera_fov_for_grid(spec: &GridSpec, height: f64) -> f64 {
    assert!(height > 0.0, "camera height must be positive");
    (2.0 * (spec.extent() / (2.0 * height)).atan()).to_degrees()
}
