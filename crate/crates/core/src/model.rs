//! Shared scene types and the rigid-frame / box-geometry primitives.
//!
//! Conventions used everywhere in the crate:
//! - right-handed frames, `x` forward, `y` left, `z` up;
//! - yaw is a counter-clockwise rotation about `z`, normalized to `(-pi, pi]`;
//! - pitch and roll are always zero.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Plain 3-vector in metres (or m/s for velocities).
pub type Vec3 = [f64; 3];

/// Absolute slack applied to inclusive box-boundary tests, in metres.
///
/// Corners produced by [`box_corners`] go through a rotation and back, so an
/// exact comparison would reject some of them by one ulp.
pub const BOUNDARY_EPS: f64 = 1e-9;

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(angle: f64) -> f64 {
    let mut r = angle.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Smallest absolute difference between two headings, in `[0, pi]`.
pub fn yaw_difference(a: f64, b: f64) -> f64 {
    let d = (a - b).abs().rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    pub yaw: f64,
}

impl Pose {
    pub fn new(position: Vec3, yaw: f64) -> Self {
        Self {
            position,
            yaw: normalize_angle(yaw),
        }
    }

    pub fn origin() -> Self {
        Self::new([0.0; 3], 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|c| c.is_finite()) && self.yaw.is_finite()
    }
}

/// Rotates the planar part of `v` by `angle` (counter-clockwise).
#[inline]
pub fn rotate_z(v: Vec3, angle: f64) -> Vec3 {
    let (s, c) = angle.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1], v[2]]
}

/// Expresses a world-frame point in the ego frame.
pub fn world_to_ego(p: Vec3, ego: &Pose) -> Vec3 {
    let d = [
        p[0] - ego.position[0],
        p[1] - ego.position[1],
        p[2] - ego.position[2],
    ];
    rotate_z(d, -ego.yaw)
}

/// Inverse of [`world_to_ego`].
pub fn ego_to_world(p: Vec3, ego: &Pose) -> Vec3 {
    let r = rotate_z(p, ego.yaw);
    [
        r[0] + ego.position[0],
        r[1] + ego.position[1],
        r[2] + ego.position[2],
    ]
}

/// The six object classes that receive 3D boxes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectionClass {
    Car,
    Truck,
    Bus,
    Motorcycle,
    Bicycle,
    Pedestrian,
}

impl DetectionClass {
    pub const ALL: [DetectionClass; 6] = [
        DetectionClass::Car,
        DetectionClass::Truck,
        DetectionClass::Bus,
        DetectionClass::Motorcycle,
        DetectionClass::Bicycle,
        DetectionClass::Pedestrian,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            DetectionClass::Car => "car",
            DetectionClass::Truck => "truck",
            DetectionClass::Bus => "bus",
            DetectionClass::Motorcycle => "motorcycle",
            DetectionClass::Bicycle => "bicycle",
            DetectionClass::Pedestrian => "pedestrian",
        }
    }

    /// BEV channel that carries this class's footprint.
    pub fn bev_class(self) -> BevClass {
        match self {
            DetectionClass::Car => BevClass::Car,
            DetectionClass::Truck => BevClass::Truck,
            DetectionClass::Bus => BevClass::Bus,
            DetectionClass::Motorcycle => BevClass::Motorcycle,
            DetectionClass::Bicycle => BevClass::Bicycle,
            DetectionClass::Pedestrian => BevClass::Pedestrian,
        }
    }

    /// Two-wheelers carry a rider.
    pub fn has_rider(self) -> bool {
        matches!(self, DetectionClass::Motorcycle | DetectionClass::Bicycle)
    }
}

impl fmt::Display for DetectionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown class name `{0}`")]
pub struct UnknownClass(pub String);

impl FromStr for DetectionClass {
    type Err = UnknownClass;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DetectionClass::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| UnknownClass(s.to_string()))
    }
}

/// BEV segmentation classes. The declaration order is the channel order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BevClass {
    Road,
    Car,
    Truck,
    Bus,
    Motorcycle,
    Bicycle,
    Rider,
    Pedestrian,
}

impl BevClass {
    pub const COUNT: usize = 8;

    pub const ALL: [BevClass; 8] = [
        BevClass::Road,
        BevClass::Car,
        BevClass::Truck,
        BevClass::Bus,
        BevClass::Motorcycle,
        BevClass::Bicycle,
        BevClass::Rider,
        BevClass::Pedestrian,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Bit used for this class in a per-pixel label byte.
    pub fn bit(self) -> u8 {
        1 << self.index()
    }

    pub fn name(self) -> &'static str {
        match self {
            BevClass::Road => "road",
            BevClass::Car => "car",
            BevClass::Truck => "truck",
            BevClass::Bus => "bus",
            BevClass::Motorcycle => "motorcycle",
            BevClass::Bicycle => "bicycle",
            BevClass::Rider => "rider",
            BevClass::Pedestrian => "pedestrian",
        }
    }
}

impl fmt::Display for BevClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Validity {
    Valid,
    Invalid,
    #[default]
    Unlabeled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BBox3D {
    pub id: u64,
    pub class: DetectionClass,
    pub center: Vec3,
    /// (length, width, height)
    pub size: Vec3,
    pub yaw: f64,
    pub velocity: Vec3,
    pub angular_velocity: f64,
    #[serde(default)]
    pub num_lidar_pts: u32,
    #[serde(default)]
    pub num_radar_pts: u32,
    #[serde(default)]
    pub validity: Validity,
}

impl BBox3D {
    pub fn new(id: u64, class: DetectionClass, center: Vec3, size: Vec3, yaw: f64) -> Self {
        Self {
            id,
            class,
            center,
            size,
            yaw: normalize_angle(yaw),
            velocity: [0.0; 3],
            angular_velocity: 0.0,
            num_lidar_pts: 0,
            num_radar_pts: 0,
            validity: Validity::Unlabeled,
        }
    }

    pub fn with_velocity(mut self, velocity: Vec3) -> Self {
        self.velocity = velocity;
        self
    }

    pub fn volume(&self) -> f64 {
        self.size[0] * self.size[1] * self.size[2]
    }

    pub fn has_positive_size(&self) -> bool {
        self.size.iter().all(|&s| s > 0.0 && s.is_finite())
    }

    /// Footprint rectangle corners in the `xy` plane, counter-clockwise.
    pub fn footprint(&self) -> [[f64; 2]; 4] {
        let (hl, hw) = (self.size[0] / 2.0, self.size[1] / 2.0);
        let (s, c) = self.yaw.sin_cos();
        let local = [[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]];
        local.map(|[x, y]| [self.center[0] + c * x - s * y, self.center[1] + s * x + c * y])
    }

    /// The box re-expressed in the ego frame: center, yaw and velocity move,
    /// everything else is copied.
    pub fn to_ego(&self, ego: &Pose) -> BBox3D {
        BBox3D {
            center: world_to_ego(self.center, ego),
            yaw: normalize_angle(self.yaw - ego.yaw),
            velocity: rotate_z(self.velocity, -ego.yaw),
            ..self.clone()
        }
    }
}

/// Corners of the yaw-rotated cuboid.
///
/// Order: bottom face then top face; on each face front-left, front-right,
/// rear-right, rear-left (front = local `+x`, left = local `+y`).
pub fn box_corners(b: &BBox3D) -> [Vec3; 8] {
    let [hl, hw, hh] = b.size.map(|s| s / 2.0);
    let local: [Vec3; 8] = [
        [hl, hw, -hh],
        [hl, -hw, -hh],
        [-hl, -hw, -hh],
        [-hl, hw, -hh],
        [hl, hw, hh],
        [hl, -hw, hh],
        [-hl, -hw, hh],
        [-hl, hw, hh],
    ];
    local.map(|v| {
        let r = rotate_z(v, b.yaw);
        [r[0] + b.center[0], r[1] + b.center[1], r[2] + b.center[2]]
    })
}

/// Inclusive containment test in the box's own frame.
#[inline]
pub fn point_in_box(p: Vec3, b: &BBox3D) -> bool {
    let d = [p[0] - b.center[0], p[1] - b.center[1], p[2] - b.center[2]];
    if d[2].abs() > b.size[2] / 2.0 + BOUNDARY_EPS {
        return false;
    }
    let (s, c) = b.yaw.sin_cos();
    let lx = c * d[0] + s * d[1];
    let ly = -s * d[0] + c * d[1];
    lx.abs() <= b.size[0] / 2.0 + BOUNDARY_EPS && ly.abs() <= b.size[1] / 2.0 + BOUNDARY_EPS
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensorKind {
    Lidar,
    Radar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoordFrame {
    Ego,
    World,
}

/// `(x, y, z, intensity)` records stored as `f32`, matching the on-disk layout.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<[f32; 4]>,
    pub sensor: SensorKind,
    pub frame: CoordFrame,
}

impl PointCloud {
    pub fn new(sensor: SensorKind, frame: CoordFrame) -> Self {
        Self {
            points: Vec::new(),
            sensor,
            frame,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn xyz(&self, i: usize) -> Vec3 {
        let p = self.points[i];
        [p[0] as f64, p[1] as f64, p[2] as f64]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub position: Vec3,
    pub lane_width: f64,
}
