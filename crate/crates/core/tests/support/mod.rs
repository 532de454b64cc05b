//! Reference implementations shared by the integration tests and the
//! acceptance target. Everything here is written directly from the
//! definitions, without reusing the optimized library paths.
#![allow(dead_code)]

use bevkit::grid::{BitPlane, GridSpec, SemanticMask};
use bevkit::model::{world_to_ego, BBox3D, BevClass, PointCloud, Pose, Waypoint, BOUNDARY_EPS};
use bevkit::sampler::{sample_traffic, sample_weather, Overrides, SeedStreams};
use bevkit::StructuringElement;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Beta, ContinuousCDF, DiscreteCDF, DiscreteUniform, LogNormal, Normal, Uniform};

// ---------------------------------------------------------------------------
// Kolmogorov-Smirnov

/// Two-sided KS statistic. `cdf` is `F(x)` and `cdf_left` is `F(x-)`; they
/// differ only at atoms, which lets discrete and mixed laws be tested too.
pub fn ks_statistic_with(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64, cdf_left: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < xs.len() {
        let v = xs[i];
        let mut j = i;
        while j < xs.len() && xs[j] == v {
            j += 1;
        }
        d = d.max((j as f64 / n - cdf(v)).abs());
        d = d.max((i as f64 / n - cdf_left(v)).abs());
        i = j;
    }
    d
}

pub fn ks_statistic(xs: Vec<f64>, cdf: impl Fn(f64) -> f64 + Copy) -> f64 {
    ks_statistic_with(xs, cdf, cdf)
}

/// Asymptotic critical value `sqrt(-ln(alpha / 2) / 2) / sqrt(n)`.
pub fn ks_critical(n: usize, alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

#[derive(Debug, Clone)]
pub struct KsCase {
    pub name: &'static str,
    pub n: usize,
    pub d: f64,
    pub critical: f64,
}

impl KsCase {
    pub fn passes(&self) -> bool {
        self.d < self.critical
    }
}

fn case(name: &'static str, xs: Vec<f64>, cdf: impl Fn(f64) -> f64 + Copy, alpha: f64) -> KsCase {
    let n = xs.len();
    KsCase {
        name,
        n,
        d: ks_statistic(xs, cdf),
        critical: ks_critical(n, alpha),
    }
}

fn case_with(
    name: &'static str,
    xs: Vec<f64>,
    cdf: impl Fn(f64) -> f64,
    cdf_left: impl Fn(f64) -> f64,
    alpha: f64,
) -> KsCase {
    let n = xs.len();
    KsCase {
        name,
        n,
        d: ks_statistic_with(xs, cdf, cdf_left),
        critical: ks_critical(n, alpha),
    }
}

/// Spawn-location count used for the traffic draws in the suite.
pub const SUITE_SPAWN_LOCATIONS: u32 = 120;

/// Samples `n` scenes (seeds `0..n`) and checks every sampled parameter
/// against its analytic law. Conditional parameters are tested on the scenes
/// where their gate is open, after undoing the scaling.
pub fn sampler_ks_suite(n: usize, alpha: f64) -> Vec<KsCase> {
    let none = Overrides::new();
    let mut weather = Vec::with_capacity(n);
    let mut traffic = Vec::with_capacity(n);
    for seed in 0..n as u64 {
        let s = SeedStreams::new(seed);
        weather.push(sample_weather(&s, &none, false).unwrap());
        traffic.push(sample_traffic(&s, SUITE_SPAWN_LOCATIONS, &none).unwrap());
    }
    let beta = |a, b| {
        let d = Beta::new(a, b).unwrap();
        move |x: f64| d.cdf(x.clamp(0.0, 1.0))
    };
    let uniform = |lo, hi| {
        let d = Uniform::new(lo, hi).unwrap();
        move |x: f64| d.cdf(x)
    };
    let std_normal = Normal::new(0.0, 1.0).unwrap();
    let phi = move |x: f64| std_normal.cdf(x);

    let mut out = Vec::new();
    out.push(case("cloudiness", weather.iter().map(|w| w.cloudiness / 100.0).collect(), beta(0.8, 1.0), alpha));
    out.push(case(
        "precipitation share",
        weather
            .iter()
            .filter(|w| w.cloudiness > 40.0)
            .map(|w| w.precipitation / w.cloudiness)
            .collect(),
        beta(0.8, 0.2),
        alpha,
    ));
    out.push(case(
        "precipitation deposits share",
        weather
            .iter()
            .filter(|w| w.precipitation < 100.0)
            .map(|w| (w.precipitation_deposits - w.precipitation) / (100.0 - w.precipitation))
            .collect(),
        beta(1.2, 1.6),
        alpha,
    ));
    // Wetness is clamp(Normal(k_p, 10), 0, 100) with k_p varying per scene.
    // The randomized probability integral transform maps it to U(0, 1).
    let mut pit_rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let wet_pit: Vec<f64> = weather
        .iter()
        .map(|w| {
            let lo = phi((0.0 - w.precipitation) / 10.0);
            let hi = phi((100.0 - w.precipitation) / 10.0);
            if w.wetness <= 0.0 {
                pit_rng.random::<f64>() * lo
            } else if w.wetness >= 100.0 {
                hi + pit_rng.random::<f64>() * (1.0 - hi)
            } else {
                phi((w.wetness - w.precipitation) / 10.0)
            }
        })
        .collect();
    out.push(case("wetness", wet_pit, uniform(0.0, 1.0), alpha));
    out.push(case("wind intensity", weather.iter().map(|w| w.wind_intensity).collect(), uniform(0.0, 100.0), alpha));
    out.push(case("sun azimuth", weather.iter().map(|w| w.sun_azimuth_angle).collect(), uniform(0.0, 360.0), alpha));
    out.push(case(
        "sun altitude",
        weather.iter().map(|w| (w.sun_altitude_angle + 90.0) / 180.0).collect(),
        beta(3.6, 2.0),
        alpha,
    ));
    out.push(case(
        "fog density",
        weather
            .iter()
            .filter(|w| w.cloudiness > 40.0 || w.sun_altitude_angle < 10.0)
            .map(|w| w.fog_density / 100.0)
            .collect(),
        beta(1.6, 2.0),
        alpha,
    ));
    let ln_fog = LogNormal::new(3.2, 0.8).unwrap();
    out.push(case(
        "fog distance",
        weather.iter().filter(|w| w.fog_density > 10.0).map(|w| w.fog_distance).collect(),
        move |x| ln_fog.cdf(x.max(0.0)),
        alpha,
    ));
    out.push(case(
        "fog falloff",
        weather.iter().filter(|w| w.fog_density > 10.0).map(|w| w.fog_falloff / 5.0).collect(),
        beta(1.2, 2.4),
        alpha,
    ));

    let vehicles = DiscreteUniform::new(0, (SUITE_SPAWN_LOCATIONS - 3) as i64).unwrap();
    out.push(case_with(
        "vehicle count",
        traffic.iter().map(|t| t.n_vehicles as f64).collect(),
        move |x| vehicles.cdf(x.floor() as i64),
        move |x| vehicles.cdf(x.ceil() as i64 - 1),
        alpha,
    ));
    let peds = DiscreteUniform::new(0, 640).unwrap();
    out.push(case_with(
        "pedestrian count",
        traffic.iter().map(|t| t.n_pedestrians as f64).collect(),
        move |x| peds.cdf(x.floor() as i64),
        move |x| peds.cdf(x.ceil() as i64 - 1),
        alpha,
    ));
    // max(0.8, LogNormal): an atom at 0.8 and the lognormal law above it.
    let ln_ped = LogNormal::new(0.16, 0.64).unwrap();
    out.push(case_with(
        "pedestrian max speed",
        traffic.iter().map(|t| t.ped_speed_max).collect(),
        move |x| if x < 0.8 { 0.0 } else { ln_ped.cdf(x) },
        move |x| if x <= 0.8 { 0.0 } else { ln_ped.cdf(x) },
        alpha,
    ));
    out.push(case(
        "max speed delta",
        traffic.iter().map(|t| t.max_speed_delta_pct).collect(),
        uniform(-20.0, 40.0),
        alpha,
    ));
    // max(0, Normal(3.2, 1)): atom at 0.
    let gap = Normal::new(3.2, 1.0).unwrap();
    out.push(case_with(
        "stop gap",
        traffic.iter().map(|t| t.stop_gap_m).collect(),
        move |x| if x < 0.0 { 0.0 } else { gap.cdf(x) },
        move |x| if x <= 0.0 { 0.0 } else { gap.cdf(x) },
        alpha,
    ));
    out.push(case("green time", traffic.iter().map(|t| t.green_time_s).collect(), uniform(4.0, 28.0), alpha));
    out.push(case(
        "walker cross factor",
        traffic.iter().map(|t| t.walker_cross_factor).collect(),
        beta(2.4, 1.6),
        alpha,
    ));
    out.push(case(
        "light intensity delta",
        traffic.iter().map(|t| t.light_intensity_delta_lm).collect(),
        uniform(-10_000.0, 10_000.0),
        alpha,
    ));
    out
}

/// Conditional invariants and mean cloudiness over seeds `0..n`.
pub fn weather_invariants(n: usize) -> (usize, f64) {
    let none = Overrides::new();
    let mut violations = 0;
    let mut sum = 0.0;
    for seed in 0..n as u64 {
        let s = SeedStreams::new(seed);
        for elevated in [false, true] {
            let w = sample_weather(&s, &none, elevated).unwrap();
            let ok = (w.precipitation <= 0.0 || w.cloudiness > 40.0)
                && (w.fog_density <= 0.0 || w.cloudiness > 40.0 || w.sun_altitude_angle < 10.0)
                && (w.fog_distance <= 0.0 || w.fog_density > 10.0)
                && w.precipitation_deposits >= w.precipitation
                && (0.0..=100.0).contains(&w.wetness)
                && (!elevated || w.fog_falloff == 0.01)
                && (elevated || w.fog_density > 10.0 || w.fog_falloff == 1.0);
            if !ok {
                violations += 1;
            }
        }
        sum += sample_weather(&s, &none, false).unwrap().cloudiness;
    }
    (violations, sum / n as f64)
}

// ---------------------------------------------------------------------------
// Point counting

/// Inclusive containment written from the definition: rotate the offset by
/// `-yaw` and compare against the half extents.
pub fn inside(p: [f64; 3], b: &BBox3D) -> bool {
    let (dx, dy, dz) = (p[0] - b.center[0], p[1] - b.center[1], p[2] - b.center[2]);
    let (s, c) = (-b.yaw).sin_cos();
    let lx = c * dx - s * dy;
    let ly = s * dx + c * dy;
    lx.abs() <= b.size[0] / 2.0 + BOUNDARY_EPS
        && ly.abs() <= b.size[1] / 2.0 + BOUNDARY_EPS
        && dz.abs() <= b.size[2] / 2.0 + BOUNDARY_EPS
}

pub fn brute_counts(cloud: &PointCloud, boxes: &[BBox3D]) -> Vec<u32> {
    boxes
        .iter()
        .map(|b| {
            cloud
                .points
                .iter()
                .filter(|p| inside([p[0] as f64, p[1] as f64, p[2] as f64], b))
                .count() as u32
        })
        .collect()
}

// ---------------------------------------------------------------------------
// BEV ground truth

#[derive(Debug, Clone, PartialEq)]
pub struct OracleComposition {
    pub road_waypoints: BitPlane,
    pub road_pre_closing: BitPlane,
    /// All eight channels, road closed.
    pub channels: Vec<BitPlane>,
    pub fallback: bool,
}

/// Every pair of in-grid waypoints checked directly.
pub fn oracle_fallback(wps: &[Waypoint], ego: &Pose, spec: &GridSpec) -> bool {
    let h = spec.half_extent();
    let near: Vec<&Waypoint> = wps
        .iter()
        .filter(|w| {
            let p = world_to_ego(w.position, ego);
            p[0].abs() <= h && p[1].abs() <= h
        })
        .collect();
    for (i, a) in near.iter().enumerate() {
        for b in &near[i + 1..] {
            let dx = a.position[0] - b.position[0];
            let dy = a.position[1] - b.position[1];
            if (dx * dx + dy * dy).sqrt() < 48.0 && (a.position[2] - b.position[2]).abs() > 6.4 {
                return true;
            }
        }
    }
    false
}

/// Per-cell road test: some waypoint lies strictly closer than its lane
/// width to the cell center. Waypoints that cannot reach the grid are
/// skipped up front.
pub fn oracle_road(wps: &[Waypoint], ego: &Pose, spec: &GridSpec) -> BitPlane {
    let h = spec.half_extent();
    let local: Vec<([f64; 3], f64)> = wps
        .iter()
        .map(|w| (world_to_ego(w.position, ego), w.lane_width))
        .filter(|(p, w)| p[0].abs() <= h + w && p[1].abs() <= h + w)
        .collect();
    let n = spec.side();
    BitPlane::from_fn(n, n, |r, c| {
        let (x, y) = spec.cell_center(r, c);
        local.iter().any(|(p, w)| {
            let (dx, dy) = (x - p[0], y - p[1]);
            dx * dx + dy * dy < w * w
        })
    })
}

/// Per-cell footprint test for each box, in the ego frame.
pub fn oracle_boxes(boxes: &[BBox3D], ego: &Pose, spec: &GridSpec) -> Vec<BitPlane> {
    let n = spec.side();
    let local: Vec<BBox3D> = boxes.iter().map(|b| b.to_ego(ego)).collect();
    let mut planes = vec![BitPlane::square(n); BevClass::COUNT];
    for b in &local {
        let class = b.class.bev_class();
        for r in 0..n {
            for c in 0..n {
                let (x, y) = spec.cell_center(r, c);
                if inside([x, y, b.center[2]], b) {
                    planes[class.index()].set(r, c, true);
                    if b.class.has_rider() {
                        planes[BevClass::Rider.index()].set(r, c, true);
                    }
                }
            }
        }
    }
    planes
}

/// Closing from the set definitions: dilation is "some element cell is set"
/// (outside counts as unset), erosion is "every element cell is set"
/// (outside counts as set).
pub fn oracle_closing(input: &BitPlane, element: StructuringElement) -> BitPlane {
    let offsets: &[(isize, isize)] = match element {
        StructuringElement::Cross => &[(0, 0), (-1, 0), (1, 0), (0, -1), (0, 1)],
        StructuringElement::Square => &[(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 0), (0, 1), (1, -1), (1, 0), (1, 1)],
    };
    let (w, h) = (input.width(), input.height());
    let at = |p: &BitPlane, r: isize, c: isize, outside: bool| {
        if r < 0 || c < 0 || r >= h as isize || c >= w as isize {
            outside
        } else {
            p.get(r as usize, c as usize)
        }
    };
    let dilated = BitPlane::from_fn(w, h, |r, c| {
        offsets.iter().any(|&(dr, dc)| at(input, r as isize + dr, c as isize + dc, false))
    });
    BitPlane::from_fn(w, h, |r, c| {
        offsets.iter().all(|&(dr, dc)| at(&dilated, r as isize + dr, c as isize + dc, true))
    })
}

pub fn oracle_compose(
    ego: &Pose,
    boxes: &[BBox3D],
    down: &SemanticMask,
    up: &SemanticMask,
    wps: &[Waypoint],
    spec: &GridSpec,
    element: StructuringElement,
) -> OracleComposition {
    let n = spec.side();
    let fallback = oracle_fallback(wps, ego, spec);
    let road_waypoints = oracle_road(wps, ego, spec);
    let (road_pre_closing, mut channels) = if fallback {
        (road_waypoints.clone(), oracle_boxes(boxes, ego, spec))
    } else {
        let road = BitPlane::from_fn(n, n, |r, c| road_waypoints.get(r, c) || down.has(r, c, BevClass::Road));
        let channels = BevClass::ALL
            .iter()
            .map(|&class| {
                if class == BevClass::Road {
                    BitPlane::square(n)
                } else {
                    BitPlane::from_fn(n, n, |r, c| down.has(r, c, class) || up.has(r, c, class))
                }
            })
            .collect();
        (road, channels)
    };
    channels[BevClass::Road.index()] = oracle_closing(&road_pre_closing, element);
    OracleComposition {
        road_waypoints,
        road_pre_closing,
        channels,
        fallback,
    }
}

// ---------------------------------------------------------------------------
// Detection score rows

/// `(mAP %, mATE, mAOE, mASE, mAVE, printed score %)` for the ten published
/// benchmark rows: five with IoU matching, then five with distance matching.
pub const PUBLISHED_ROWS: [(f64, f64, f64, f64, f64, f64); 10] = [
    (7.0, 0.337, 0.943, 0.106, 4.98, 23.7),
    (33.9, 0.105, 0.086, 0.107, 1.49, 50.8),
    (34.1, 0.107, 0.077, 0.101, 1.46, 51.0),
    (33.0, 0.081, 0.140, 0.071, 0.51, 56.5),
    (34.2, 0.083, 0.131, 0.069, 0.49, 57.5),
    (22.1, 0.744, 1.044, 0.137, 4.65, 25.1),
    (48.1, 0.144, 0.133, 0.134, 1.56, 56.4),
    (48.1, 0.146, 0.122, 0.127, 1.54, 56.6),
    (47.7, 0.113, 0.224, 0.090, 0.55, 61.7),
    (47.8, 0.113, 0.207, 0.085, 0.53, 62.2),
];

// ---------------------------------------------------------------------------
// Random counting frames

/// Random boxes and an ego-frame cloud: uniform clutter, points placed inside
/// boxes, and points snapped onto box faces so the inclusive boundary is
/// exercised.
pub fn random_count_frame(rng: &mut impl Rng, max_points: usize, max_boxes: usize) -> (PointCloud, Vec<BBox3D>) {
    use bevkit::model::{box_corners, CoordFrame, DetectionClass, SensorKind};
    let n_boxes = rng.random_range(0..=max_boxes);
    let boxes: Vec<BBox3D> = (0..n_boxes)
        .map(|i| {
            let c = [rng.random_range(-60.0..60.0), rng.random_range(-60.0..60.0), rng.random_range(-1.0..2.0)];
            let s = [rng.random_range(0.3..14.0), rng.random_range(0.3..3.5), rng.random_range(0.5..4.5)];
            let class = DetectionClass::ALL[rng.random_range(0..DetectionClass::ALL.len())];
            BBox3D::new(i as u64, class, c, s, rng.random_range(-3.5..3.5))
        })
        .collect();
    let n_points = rng.random_range(0..=max_points);
    let mut cloud = PointCloud::new(SensorKind::Lidar, CoordFrame::Ego);
    cloud.points.reserve(n_points);
    for _ in 0..n_points {
        let kind = if boxes.is_empty() { 0 } else { rng.random_range(0..4) };
        let p = match kind {
            0 | 1 => [rng.random_range(-70.0..70.0), rng.random_range(-70.0..70.0), rng.random_range(-2.0..4.0)],
            2 => {
                let b = &boxes[rng.random_range(0..boxes.len())];
                let u: [f64; 3] = std::array::from_fn(|k| rng.random_range(-0.5..0.5) * b.size[k]);
                let (s, c) = b.yaw.sin_cos();
                [b.center[0] + c * u[0] - s * u[1], b.center[1] + s * u[0] + c * u[1], b.center[2] + u[2]]
            }
            _ => {
                let b = &boxes[rng.random_range(0..boxes.len())];
                box_corners(b)[rng.random_range(0..8)]
            }
        };
        cloud.points.push([p[0] as f32, p[1] as f32, p[2] as f32, rng.random::<f32>()]);
    }
    (cloud, boxes)
}
