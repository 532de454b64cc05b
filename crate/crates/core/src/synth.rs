//! Kinematic micro-scene generator.
//!
//! Stands in for a driving simulator: a small synthetic road network per map,
//! an ego vehicle following its lane, background vehicles moving at constant
//! speed along lanes, pedestrians random-walking on sidewalks, sensor clouds
//! sampled on object surfaces and the ground, and the two virtual camera masks
//! (overhead and underground) rasterized from true footprints.
//!
//! All randomness comes from [`SeedStreams`] of the scene seed, so a scene is
//! a pure function of its [`SceneConfig`] and [`SynthOptions`].

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::digest::fnv1a64;
use crate::grid::{for_each_footprint_cell, BitPlane, GridSpec, MaskProvenance, SemanticMask};
use crate::model::{
    ego_to_world, rotate_z, world_to_ego, BBox3D, BevClass, CoordFrame, DetectionClass, PointCloud, Pose,
    SensorKind, Vec3, Waypoint,
};
use crate::sampler::{map_is_elevated, streams::SYNTH_BASE, SceneConfig, SeedStreams};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("road network has no lanes")]
    NoLanes,
    #[error("lane {0} has fewer than two distinct points")]
    DegenerateLane(usize),
    #[error("scene config yields zero frames")]
    NoFrames,
    #[error("elevation offset must be positive, got {0}")]
    NonPositiveRise(f64),
    #[error("scene needs at least {needed} lanes, has {have}")]
    TooFewLanes { needed: usize, have: usize },
}

/// Spacing between road waypoints, metres.
pub const WAYPOINT_SPACING_M: f64 = 0.4;
/// Spacing between vehicle spawn points along lanes, metres.
pub const SPAWN_SPACING_M: f64 = 24.0;
pub const LANE_WIDTH_M: f64 = 3.5;
/// Urban speed limit (50 km/h).
pub const SPEED_LIMIT_MPS: f64 = 50.0 / 3.6;

const HALF_ROAD_LEN: f64 = 500.0;
const CROSS_STREET_X: f64 = 480.0;
const CROSS_STREET_HALF_LEN: f64 = 300.0;
const BRANCH_LEN: f64 = 200.0;
const SIDEWALK_INNER: f64 = 4.0;
const SIDEWALK_OUTER: f64 = 7.0;
const PED_X_LIMIT: f64 = 480.0;
const PED_TURN_PROB: f64 = 0.02;
const ELEVATED_BASE_Z: f64 = 50.0;

/// Class mix of background vehicles. Cars dominate as they do in typical
/// vehicle libraries.
pub const VEHICLE_CLASS_WEIGHTS: [(DetectionClass, f64); 5] = [
    (DetectionClass::Car, 0.70),
    (DetectionClass::Truck, 0.12),
    (DetectionClass::Bus, 0.03),
    (DetectionClass::Motorcycle, 0.08),
    (DetectionClass::Bicycle, 0.07),
];

/// Nominal `(length, width, height)` per class, metres. Individual objects are
/// scaled by up to +-10% per axis.
pub fn nominal_size(class: DetectionClass) -> Vec3 {
    match class {
        DetectionClass::Car => [4.5, 1.9, 1.5],
        DetectionClass::Truck => [6.5, 2.3, 2.8],
        DetectionClass::Bus => [11.0, 2.9, 3.3],
        DetectionClass::Motorcycle => [2.1, 0.8, 1.5],
        DetectionClass::Bicycle => [1.8, 0.6, 1.7],
        DetectionClass::Pedestrian => [0.6, 0.6, 1.75],
    }
}

mod stream_ids {
    use super::SYNTH_BASE;
    pub const EGO: u64 = SYNTH_BASE + 1;
    pub const VEHICLES: u64 = SYNTH_BASE + 2;
    pub const PEDESTRIANS: u64 = SYNTH_BASE + 3;
    pub const PED_STEPS: u64 = SYNTH_BASE + 4;
    pub const CANOPY: u64 = SYNTH_BASE + 5;
    /// Per-frame sensor streams: `FRAME_BASE + 2 * step (+1 for radar)`.
    pub const FRAME_BASE: u64 = SYNTH_BASE + (1 << 32);
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lane {
    pub id: usize,
    pub polyline: Vec<Vec3>,
    pub lane_width: f64,
    pub waypoints: Vec<Waypoint>,
}

impl Lane {
    /// Polyline length in metres.
    pub fn length(&self) -> f64 {
        self.polyline.windows(2).map(|w| dist3(w[0], w[1])).sum()
    }

    /// Position and heading at arc length `s` (clamped to the lane).
    pub fn point_at(&self, s: f64) -> (Vec3, f64) {
        let mut remaining = s.max(0.0);
        for w in self.polyline.windows(2) {
            let len = dist3(w[0], w[1]);
            let heading = (w[1][1] - w[0][1]).atan2(w[1][0] - w[0][0]);
            if remaining <= len || len == 0.0 {
                let t = if len > 0.0 { remaining / len } else { 0.0 };
                return (lerp(w[0], w[1], t), heading);
            }
            remaining -= len;
        }
        let n = self.polyline.len();
        let (a, b) = (self.polyline[n - 2], self.polyline[n - 1]);
        (b, (b[1] - a[1]).atan2(b[0] - a[0]))
    }
}

fn dist3(a: Vec3, b: Vec3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn lerp(a: Vec3, b: Vec3, t: f64) -> Vec3 {
    [
        a[0] + (b[0] - a[0]) * t,
        a[1] + (b[1] - a[1]) * t,
        a[2] + (b[2] - a[2]) * t,
    ]
}

/// Points along `poly`, starting at its first vertex, with consecutive points
/// exactly `spacing` apart in straight-line distance.
#[allow(clippy::mut_range_bound)]
pub fn resample_polyline(poly: &[Vec3], spacing: f64) -> Vec<Vec3> {
    let mut out = vec![poly[0]];
    let mut cur = poly[0];
    let mut seg = 0usize;
    'outer: loop {
        for k in seg..poly.len() - 1 {
            let a = if k == seg { cur } else { poly[k] };
            let b = poly[k + 1];
            let e = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
            let d = [a[0] - cur[0], a[1] - cur[1], a[2] - cur[2]];
            let qa = e[0] * e[0] + e[1] * e[1] + e[2] * e[2];
            if qa == 0.0 {
                continue;
            }
            let qb = 2.0 * (d[0] * e[0] + d[1] * e[1] + d[2] * e[2]);
            let qc = d[0] * d[0] + d[1] * d[1] + d[2] * d[2] - spacing * spacing;
            let disc = qb * qb - 4.0 * qa * qc;
            if disc < 0.0 {
                continue;
            }
            let t = (-qb + disc.sqrt()) / (2.0 * qa);
            if (0.0..=1.0).contains(&t) {
                cur = lerp(a, b, t);
                out.push(cur);
                seg = k;
                continue 'outer;
            }
        }
        break;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoadNetwork {
    pub lanes: Vec<Lane>,
    pub spacing: f64,
}

impl RoadNetwork {
    pub fn from_polylines(polylines: Vec<(Vec<Vec3>, f64)>, spacing: f64) -> Result<Self, SynthError> {
        if polylines.is_empty() {
            return Err(SynthError::NoLanes);
        }
        let lanes = polylines
            .into_iter()
            .enumerate()
            .map(|(id, (polyline, lane_width))| {
                if polyline.len() < 2 || polyline.windows(2).all(|w| dist3(w[0], w[1]) == 0.0) {
                    return Err(SynthError::DegenerateLane(id));
                }
                let waypoints = resample_polyline(&polyline, spacing)
                    .into_iter()
                    .map(|position| Waypoint { position, lane_width })
                    .collect();
                Ok(Lane {
                    id,
                    polyline,
                    lane_width,
                    waypoints,
                })
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { lanes, spacing })
    }

    /// Synthetic town for `map_id`: a two-lane main road along `x`, a lane
    /// branching off it to the right, and a two-lane cross street near the
    /// east end. Branch position and angle vary per map.
    pub fn for_map(map_id: &str) -> Self {
        let h = fnv1a64(map_id.as_bytes());
        let base_z = if map_is_elevated(map_id).unwrap_or(false) {
            ELEVATED_BASE_Z
        } else {
            0.0
        };
        let branch_x = -150.0 + (h % 101) as f64;
        let branch_angle = (10.0 + ((h >> 8) % 11) as f64).to_radians();
        let half = LANE_WIDTH_M / 2.0;
        let w = LANE_WIDTH_M;
        let p = |x: f64, y: f64| [x, y, base_z];
        let lanes = vec![
            (vec![p(-HALF_ROAD_LEN, -half), p(HALF_ROAD_LEN, -half)], w),
            (vec![p(HALF_ROAD_LEN, half), p(-HALF_ROAD_LEN, half)], w),
            (
                vec![
                    p(branch_x, -half),
                    p(
                        branch_x + BRANCH_LEN * branch_angle.cos(),
                        -half - BRANCH_LEN * branch_angle.sin(),
                    ),
                ],
                w,
            ),
            (
                vec![
                    p(CROSS_STREET_X + half, -CROSS_STREET_HALF_LEN),
                    p(CROSS_STREET_X + half, CROSS_STREET_HALF_LEN),
                ],
                w,
            ),
            (
                vec![
                    p(CROSS_STREET_X - half, CROSS_STREET_HALF_LEN),
                    p(CROSS_STREET_X - half, -CROSS_STREET_HALF_LEN),
                ],
                w,
            ),
        ];
        Self::from_polylines(lanes, WAYPOINT_SPACING_M).expect("built-in network is valid")
    }

    pub fn waypoints(&self) -> Vec<Waypoint> {
        self.lanes.iter().flat_map(|l| l.waypoints.iter().copied()).collect()
    }

    pub fn total_length(&self) -> f64 {
        self.lanes.iter().map(Lane::length).sum()
    }

    /// Vehicle spawn points at 24 m spacing along all lanes.
    pub fn spawn_locations(&self) -> u32 {
        self.lanes
            .iter()
            .map(|l| (l.length() / SPAWN_SPACING_M).floor() as u32)
            .sum()
    }
}

/// Sensor model of the micro-sim.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LidarModel {
    /// Expected points on an object = `density * visible_area / range^2`.
    pub density: f64,
    pub ground_points: usize,
    pub max_range_m: f64,
    /// Radar expectation is the lidar one divided by this.
    pub radar_sparsity: f64,
    pub radar_ground_points: usize,
}

impl Default for LidarModel {
    fn default() -> Self {
        Self {
            density: 2000.0,
            ground_points: 6000,
            max_range_m: 120.0,
            radar_sparsity: 16.0,
            radar_ground_points: 400,
        }
    }
}

/// Surface points are pulled this fraction toward the box center so they
/// stay strictly inside after `f32` rounding.
const SURFACE_INSET: f64 = 0.98;
const GROUND_Z: f32 = -0.05;
const GROUND_MIN_RANGE_M: f64 = 2.0;

impl LidarModel {
    /// Side and top area seen by a roof-mounted sensor.
    pub fn visible_area(size: Vec3) -> f64 {
        let [l, w, h] = size;
        2.0 * l * h + 2.0 * w * h + l * w
    }

    pub fn expected_points(&self, size: Vec3, range_m: f64) -> f64 {
        if range_m > self.max_range_m {
            return 0.0;
        }
        self.density * Self::visible_area(size) / range_m.max(1.0).powi(2)
    }
}

/// Draws `Poisson(lambda)` points uniformly on the top and side faces of
/// `b` (pulled slightly inward) and returns them in the frame of `b`.
pub fn sample_surface_points<R: Rng + ?Sized>(b: &BBox3D, lambda: f64, rng: &mut R) -> Vec<Vec3> {
    if lambda <= 0.0 {
        return Vec::new();
    }
    let n = Poisson::new(lambda).expect("positive rate").sample(rng) as usize;
    let [l, w, h] = b.size;
    let (hl, hw, hh) = (l / 2.0, w / 2.0, h / 2.0);
    let faces = [l * w, l * h, l * h, w * h, w * h];
    let total: f64 = faces.iter().sum();
    (0..n)
        .map(|_| {
            let mut pick = rng.random::<f64>() * total;
            let mut face = faces.len() - 1;
            for (i, a) in faces.iter().enumerate() {
                if pick < *a {
                    face = i;
                    break;
                }
                pick -= a;
            }
            let u = rng.random_range(-1.0..1.0);
            let v = rng.random_range(-1.0..1.0);
            let local = match face {
                0 => [u * hl, v * hw, hh],
                1 => [u * hl, hw, v * hh],
                2 => [u * hl, -hw, v * hh],
                3 => [hl, u * hw, v * hh],
                _ => [-hl, u * hw, v * hh],
            }
            .map(|c| c * SURFACE_INSET);
            let r = rotate_z(local, b.yaw);
            [r[0] + b.center[0], r[1] + b.center[1], r[2] + b.center[2]]
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthOptions {
    pub lidar: LidarModel,
    pub lidar_enabled: bool,
    pub radar_enabled: bool,
    /// Tree crowns along the sidewalks that hide cells from the overhead camera.
    pub canopy: bool,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            lidar: LidarModel::default(),
            lidar_enabled: true,
            radar_enabled: true,
            canopy: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub index: usize,
    pub time_s: f64,
    pub ego: Pose,
    /// World-frame boxes of every background agent.
    pub boxes: Vec<BBox3D>,
    /// Ego-frame lidar cloud.
    pub lidar: PointCloud,
    /// Ego-frame radar cloud.
    pub radar: PointCloud,
    pub overhead_mask: SemanticMask,
    pub underground_mask: SemanticMask,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub config: SceneConfig,
    pub network: RoadNetwork,
    pub frames: Vec<Frame>,
}

impl Scene {
    pub fn waypoints(&self) -> Vec<Waypoint> {
        self.network.waypoints()
    }
}

#[derive(Debug, Clone)]
struct Vehicle {
    id: u64,
    class: DetectionClass,
    size: Vec3,
    lane: usize,
    arc0: f64,
    speed: f64,
}

#[derive(Debug, Clone)]
struct Pedestrian {
    id: u64,
    size: Vec3,
    pos: [f64; 2],
    speed: f64,
    heading: f64,
    band: (f64, f64),
}

#[derive(Debug, Clone, Copy)]
struct Crown {
    center: [f64; 2],
    radius: f64,
}

/// Frame-by-frame scene generator. Warm-up steps are simulated on
/// construction; iteration yields exactly `config.frame_count()` frames.
pub struct SceneSimulator {
    config: SceneConfig,
    network: RoadNetwork,
    options: SynthOptions,
    streams: SeedStreams,
    ego_lane: usize,
    ego_arc0: f64,
    ego_speed: f64,
    vehicles: Vec<Vehicle>,
    pedestrians: Vec<Pedestrian>,
    ped_rng: ChaCha8Rng,
    canopy: Vec<Crown>,
    /// Step index of the next frame to emit; warm-up steps are negative.
    step: i64,
}

fn scaled_size<R: Rng + ?Sized>(class: DetectionClass, rng: &mut R) -> Vec3 {
    nominal_size(class).map(|s| s * rng.random_range(0.9..1.1))
}

fn pick_vehicle_class<R: Rng + ?Sized>(rng: &mut R) -> DetectionClass {
    let mut u = rng.random::<f64>();
    for (class, w) in VEHICLE_CLASS_WEIGHTS {
        if u < w {
            return class;
        }
        u -= w;
    }
    DetectionClass::Car
}

impl SceneSimulator {
    pub fn new(config: SceneConfig, options: SynthOptions) -> Result<Self, SynthError> {
        let network = RoadNetwork::for_map(&config.map_id);
        Self::with_network(config, network, options)
    }

    pub fn with_network(config: SceneConfig, network: RoadNetwork, options: SynthOptions) -> Result<Self, SynthError> {
        if network.lanes.is_empty() {
            return Err(SynthError::NoLanes);
        }
        if config.frame_count() == 0 {
            return Err(SynthError::NoFrames);
        }
        let streams = config.streams();
        let dt = config.timestep_s;
        let speed_factor = 1.0 + config.traffic.max_speed_delta_pct / 100.0;

        let ego_lane = 0;
        let ego_speed = SPEED_LIMIT_MPS * speed_factor;
        let mut rng = streams.stream(stream_ids::EGO);
        let lane_len = network.lanes[ego_lane].length();
        // Place the ego so it stays on its lane through warm-up and the whole scene.
        let travel = ego_speed * (config.warmup_s + config.duration_s);
        let start = (0.3 * lane_len).min((lane_len - travel).max(0.0));
        let ego_arc0 = start + config.warmup_s * ego_speed + rng.random::<f64>() * 0.1 * lane_len.min(1000.0);

        let lengths: Vec<f64> = network.lanes.iter().map(Lane::length).collect();
        let total: f64 = lengths.iter().sum();
        let mut rng = streams.stream(stream_ids::VEHICLES);
        let vehicles = (0..config.traffic.n_vehicles)
            .map(|i| {
                let mut u = rng.random::<f64>() * total;
                let mut lane = lengths.len() - 1;
                for (k, len) in lengths.iter().enumerate() {
                    if u < *len {
                        lane = k;
                        break;
                    }
                    u -= len;
                }
                let class = pick_vehicle_class(&mut rng);
                Vehicle {
                    id: 1 + i as u64,
                    class,
                    size: scaled_size(class, &mut rng),
                    lane,
                    arc0: rng.random::<f64>() * lengths[lane],
                    speed: SPEED_LIMIT_MPS * speed_factor * rng.random_range(0.6..1.0),
                }
            })
            .collect();

        let mut rng = streams.stream(stream_ids::PEDESTRIANS);
        let ped_hi = config.traffic.ped_speed_max.max(config.traffic.ped_speed_min);
        let ped_lo = config.traffic.ped_speed_min;
        let pedestrians = (0..config.traffic.n_pedestrians)
            .map(|i| {
                let band = if rng.random::<bool>() {
                    (SIDEWALK_INNER, SIDEWALK_OUTER)
                } else {
                    (-SIDEWALK_OUTER, -SIDEWALK_INNER)
                };
                Pedestrian {
                    id: 1 + config.traffic.n_vehicles as u64 + i as u64,
                    size: scaled_size(DetectionClass::Pedestrian, &mut rng),
                    pos: [
                        rng.random_range(-PED_X_LIMIT..PED_X_LIMIT),
                        rng.random_range(band.0..band.1),
                    ],
                    speed: if ped_hi > ped_lo {
                        rng.random_range(ped_lo..ped_hi)
                    } else {
                        ped_lo
                    },
                    heading: rng.random_range(-PI..PI),
                    band,
                }
            })
            .collect();

        let canopy = if options.canopy {
            let mut rng = streams.stream(stream_ids::CANOPY);
            let mut crowns = Vec::new();
            for side in [1.0, -1.0] {
                let mut x = -HALF_ROAD_LEN + rng.random_range(0.0..20.0);
                while x < HALF_ROAD_LEN {
                    crowns.push(Crown {
                        center: [x, side * (5.5 + rng.random_range(-1.0..1.0))],
                        radius: rng.random_range(2.0..4.5),
                    });
                    x += rng.random_range(12.0..40.0);
                }
            }
            crowns
        } else {
            Vec::new()
        };

        let mut sim = Self {
            ped_rng: streams.stream(stream_ids::PED_STEPS),
            config,
            network,
            options,
            streams,
            ego_lane,
            ego_arc0,
            ego_speed,
            vehicles,
            pedestrians,
            canopy,
            step: 0,
        };
        let warmup = sim.config.warmup_steps() as i64;
        sim.step = -warmup;
        for _ in 0..warmup {
            sim.advance_pedestrians(dt);
            sim.step += 1;
        }
        Ok(sim)
    }

    pub fn network(&self) -> &RoadNetwork {
        &self.network
    }

    pub fn config(&self) -> &SceneConfig {
        &self.config
    }

    fn time(&self) -> f64 {
        self.step as f64 * self.config.timestep_s
    }

    fn ego_pose(&self) -> Pose {
        let lane = &self.network.lanes[self.ego_lane];
        let (p, heading) = lane.point_at(self.ego_arc0 + self.ego_speed * self.time());
        Pose::new(p, heading)
    }

    /// Picks this step's pedestrian velocities (turns and sidewalk
    /// reflections), returns them, and moves pedestrians by one step.
    fn advance_pedestrians(&mut self, dt: f64) -> Vec<[f64; 2]> {
        let mut velocities = Vec::with_capacity(self.pedestrians.len());
        for p in &mut self.pedestrians {
            if self.ped_rng.random::<f64>() < PED_TURN_PROB {
                p.heading = self.ped_rng.random_range(-PI..PI);
            }
            let (s, c) = p.heading.sin_cos();
            let mut v = [p.speed * c, p.speed * s];
            let next = [p.pos[0] + v[0] * dt, p.pos[1] + v[1] * dt];
            if next[1] < p.band.0 || next[1] > p.band.1 {
                v[1] = -v[1];
            }
            if next[0].abs() > PED_X_LIMIT {
                v[0] = -v[0];
            }
            p.heading = v[1].atan2(v[0]);
            velocities.push(v);
            p.pos = [p.pos[0] + v[0] * dt, p.pos[1] + v[1] * dt];
        }
        velocities
    }

    fn vehicle_box(&self, v: &Vehicle, t: f64) -> BBox3D {
        let lane = &self.network.lanes[v.lane];
        let len = lane.length();
        let arc = (v.arc0 + v.speed * t).rem_euclid(len);
        let (p, heading) = lane.point_at(arc);
        let (s, c) = heading.sin_cos();
        BBox3D::new(v.id, v.class, [p[0], p[1], p[2] + v.size[2] / 2.0], v.size, heading)
            .with_velocity([v.speed * c, v.speed * s, 0.0])
    }

    fn ground_z(&self) -> f64 {
        self.network.lanes[self.ego_lane].polyline[0][2]
    }

    fn sensor_cloud(&self, ego: &Pose, boxes: &[BBox3D], kind: SensorKind) -> PointCloud {
        let mut cloud = PointCloud::new(kind, CoordFrame::Ego);
        let enabled = match kind {
            SensorKind::Lidar => self.options.lidar_enabled,
            SensorKind::Radar => self.options.radar_enabled,
        };
        if !enabled {
            return cloud;
        }
        let model = &self.options.lidar;
        let (scale, ground) = match kind {
            SensorKind::Lidar => (1.0, model.ground_points),
            SensorKind::Radar => (1.0 / model.radar_sparsity, model.radar_ground_points),
        };
        let offset = (self.step as u64).wrapping_mul(2) + u64::from(kind == SensorKind::Radar);
        let mut rng = self.streams.stream(stream_ids::FRAME_BASE + offset);

        for b in boxes {
            let e = world_to_ego(b.center, ego);
            let range = e[0].hypot(e[1]);
            let lambda = scale * model.expected_points(b.size, range);
            for p in sample_surface_points(b, lambda, &mut rng) {
                let q = world_to_ego(p, ego);
                cloud.points.push([q[0] as f32, q[1] as f32, q[2] as f32, 0.0]);
            }
        }
        let ratio = model.max_range_m / GROUND_MIN_RANGE_M;
        for _ in 0..ground {
            let r = GROUND_MIN_RANGE_M * ratio.powf(rng.random::<f64>());
            let theta = rng.random_range(-PI..PI);
            cloud
                .points
                .push([(r * theta.cos()) as f32, (r * theta.sin()) as f32, GROUND_Z, 0.0]);
        }
        cloud
    }

    fn canopy_plane(&self, ego: &Pose, spec: &GridSpec) -> BitPlane {
        let mut plane = BitPlane::square(spec.side());
        let reach = spec.half_extent() * std::f64::consts::SQRT_2;
        for crown in &self.canopy {
            let c = world_to_ego([crown.center[0], crown.center[1], 0.0], ego);
            if c[0].hypot(c[1]) > reach + crown.radius {
                continue;
            }
            let r = crown.radius;
            let Some((rows, cols)) = spec.cell_range(c[0] - r, c[0] + r, c[1] - r, c[1] + r) else {
                continue;
            };
            for row in rows {
                for col in cols.clone() {
                    let (x, y) = spec.cell_center(row, col);
                    if (x - c[0]).powi(2) + (y - c[1]).powi(2) <= r * r {
                        plane.set(row, col, true);
                    }
                }
            }
        }
        plane
    }

    /// Overhead and underground camera masks for the current ego pose.
    fn masks(&self, ego: &Pose, boxes: &[BBox3D]) -> (SemanticMask, SemanticMask) {
        let spec = &self.config.grid;
        let side = spec.side();
        let mut down = SemanticMask::new(side, MaskProvenance::Overhead);
        let mut up = SemanticMask::new(side, MaskProvenance::Underground);
        let hidden = self.canopy_plane(ego, spec);

        // Road surface: the lane strips themselves.
        for lane in &self.network.lanes {
            for w in lane.polyline.windows(2) {
                let a = world_to_ego(w[0], ego);
                let b = world_to_ego(w[1], ego);
                let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0, 0.0];
                let len = (b[0] - a[0]).hypot(b[1] - a[1]);
                let yaw = (b[1] - a[1]).atan2(b[0] - a[0]);
                for_each_footprint_cell(spec, mid, yaw, len / 2.0, lane.lane_width / 2.0, |r, c| {
                    if !hidden.get(r, c) {
                        down.insert(r, c, BevClass::Road);
                    }
                });
            }
        }

        for b in boxes {
            let e = b.to_ego(ego);
            let class = b.class.bev_class();
            let rider = b.class.has_rider();
            for_each_footprint_cell(spec, e.center, e.yaw, e.size[0] / 2.0, e.size[1] / 2.0, |r, c| {
                up.insert(r, c, class);
                if rider {
                    up.insert(r, c, BevClass::Rider);
                }
                if !hidden.get(r, c) {
                    down.remove(r, c, BevClass::Road);
                    down.insert(r, c, if rider { BevClass::Rider } else { class });
                }
            });
        }
        (down, up)
    }

    pub fn next_frame(&mut self) -> Option<Frame> {
        let frames = self.config.frame_count() as i64;
        if self.step >= frames {
            return None;
        }
        let t = self.time();
        let ego = self.ego_pose();
        let ground = self.ground_z();
        let mut boxes: Vec<BBox3D> = self.vehicles.iter().map(|v| self.vehicle_box(v, t)).collect();

        let peds: Vec<(u64, Vec3, [f64; 2])> =
            self.pedestrians.iter().map(|p| (p.id, p.size, p.pos)).collect();
        let velocities = self.advance_pedestrians(self.config.timestep_s);
        for ((id, size, pos), v) in peds.into_iter().zip(velocities) {
            let yaw = v[1].atan2(v[0]);
            boxes.push(
                BBox3D::new(id, DetectionClass::Pedestrian, [pos[0], pos[1], ground + size[2] / 2.0], size, yaw)
                    .with_velocity([v[0], v[1], 0.0]),
            );
        }

        let lidar = self.sensor_cloud(&ego, &boxes, SensorKind::Lidar);
        let radar = self.sensor_cloud(&ego, &boxes, SensorKind::Radar);
        let (overhead_mask, underground_mask) = self.masks(&ego, &boxes);
        let frame = Frame {
            index: self.step as usize,
            time_s: t,
            ego,
            boxes,
            lidar,
            radar,
            overhead_mask,
            underground_mask,
        };
        self.step += 1;
        Some(frame)
    }

    pub fn into_scene(mut self) -> Scene {
        let mut frames = Vec::with_capacity(self.config.frame_count());
        while let Some(f) = self.next_frame() {
            frames.push(f);
        }
        Scene {
            config: self.config,
            network: self.network,
            frames,
        }
    }
}

impl Iterator for SceneSimulator {
    type Item = Frame;

    fn next(&mut self) -> Option<Frame> {
        self.next_frame()
    }
}

pub fn generate_scene(config: &SceneConfig) -> Result<Scene, SynthError> {
    generate_scene_with(config, SynthOptions::default())
}

pub fn generate_scene_with(config: &SceneConfig, options: SynthOptions) -> Result<Scene, SynthError> {
    Ok(SceneSimulator::new(config.clone(), options)?.into_scene())
}

/// Replaces the last lane with a straight lane parallel to the ego lane,
/// `dist` metres to its left and `dz` metres higher, spanning the ego's route
/// plus the grid reach on both ends. Frames are left untouched; only the
/// waypoint map changes.
pub fn plant_elevation_conflict(mut scene: Scene, dz: f64, dist: f64) -> Result<Scene, SynthError> {
    if dz <= 0.0 || !dz.is_finite() {
        return Err(SynthError::NonPositiveRise(dz));
    }
    let have = scene.network.lanes.len();
    if have < 2 {
        return Err(SynthError::TooFewLanes { needed: 2, have });
    }
    let (Some(first), Some(last)) = (scene.frames.first(), scene.frames.last()) else {
        return Err(SynthError::NoFrames);
    };
    let reach = scene.config.grid.half_extent() + 8.0;
    let start = first.ego;
    let end = last.ego;
    let left = |pose: &Pose, along: f64| {
        ego_to_world([along, dist, dz], pose)
    };
    let polyline = vec![left(&start, -reach), left(&end, reach)];
    let width = scene.network.lanes[0].lane_width;
    let mut polylines: Vec<(Vec<Vec3>, f64)> = scene
        .network
        .lanes
        .iter()
        .take(have - 1)
        .map(|l| (l.polyline.clone(), l.lane_width))
        .collect();
    polylines.push((polyline, width));
    scene.network = RoadNetwork::from_polylines(polylines, scene.network.spacing)?;
    Ok(scene)
}
