//! Seeded sampling of complete scene configurations.
//!
//! Every sampled quantity reads from its own ChaCha8 stream derived from the
//! scene seed (`seed_from_u64(seed)` then `set_stream(id)`), so a parameter's
//! value depends only on the seed and its stream id, never on which other
//! parameters were drawn, overridden or skipped by a conditional. The stream
//! ids are part of the reproducibility contract and must not be renumbered.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::grid::GridSpec;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SamplerError {
    #[error("unknown override key `{0}`")]
    UnknownOverride(String),
    #[error("override `{key}` = {value} outside [{min}, {max}]")]
    OutOfRange {
        key: String,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("override `{key}` must be an integer, got {value}")]
    NotInteger { key: String, value: f64 },
    #[error("need at least 3 spawn locations, got {0}")]
    TooFewSpawnLocations(u32),
    #[error("unknown map `{0}`")]
    UnknownMap(String),
    #[error("duration {duration_s} s is not a whole number of {timestep_s} s steps")]
    FractionalFrameCount { duration_s: f64, timestep_s: f64 },
    #[error("scene would have no frames")]
    NoFrames,
}

/// Factory for the per-parameter random streams of one scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedStreams {
    seed: u64,
}

impl SeedStreams {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self, id: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(id);
        rng
    }
}

/// Stream ids. Weather lives in `0x100..`, traffic in `0x200..`, the scene
/// generator uses `0x1000..`.
pub mod streams {
    pub const CLOUDINESS: u64 = 0x100;
    pub const PRECIPITATION: u64 = 0x101;
    pub const PRECIPITATION_DEPOSITS: u64 = 0x102;
    pub const WETNESS: u64 = 0x103;
    pub const WIND_INTENSITY: u64 = 0x104;
    pub const SUN_AZIMUTH: u64 = 0x105;
    pub const SUN_ALTITUDE: u64 = 0x106;
    pub const FOG_DENSITY: u64 = 0x107;
    pub const FOG_DISTANCE: u64 = 0x108;
    pub const FOG_FALLOFF: u64 = 0x109;

    pub const N_VEHICLES: u64 = 0x200;
    pub const N_PEDESTRIANS: u64 = 0x201;
    pub const PED_SPEED_MAX: u64 = 0x202;
    pub const MAX_SPEED_DELTA: u64 = 0x203;
    pub const STOP_GAP: u64 = 0x204;
    pub const GREEN_TIME: u64 = 0x205;
    pub const WALKER_CROSS: u64 = 0x206;
    pub const LIGHT_INTENSITY: u64 = 0x207;

    pub const SYNTH_BASE: u64 = 0x1000;
}

/// Primitive distributions appearing in the parameter tables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dist {
    Beta { alpha: f64, beta: f64 },
    Normal { mean: f64, std_dev: f64 },
    /// Half-open `[low, high)`.
    Uniform { low: f64, high: f64 },
    /// `exp(Normal(mu, sigma))`: parameters are those of the underlying normal.
    LogNormal { mu: f64, sigma: f64 },
    /// Inclusive integer range.
    UniformInt { low: i64, high: i64 },
}

impl Dist {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Dist::Beta { alpha, beta } => rand_distr::Beta::new(alpha, beta)
                .expect("beta parameters are positive")
                .sample(rng),
            Dist::Normal { mean, std_dev } => rand_distr::Normal::new(mean, std_dev)
                .expect("normal std dev is positive")
                .sample(rng),
            Dist::Uniform { low, high } => rng.random_range(low..high),
            Dist::LogNormal { mu, sigma } => rand_distr::LogNormal::new(mu, sigma)
                .expect("lognormal sigma is positive")
                .sample(rng),
            Dist::UniformInt { low, high } => rng.random_range(low..=high) as f64,
        }
    }
}

pub const CLOUDINESS: Dist = Dist::Beta { alpha: 0.8, beta: 1.0 };
pub const PRECIPITATION: Dist = Dist::Beta { alpha: 0.8, beta: 0.2 };
pub const PRECIPITATION_DEPOSITS: Dist = Dist::Beta { alpha: 1.2, beta: 1.6 };
pub const WETNESS_STD_DEV: f64 = 10.0;
pub const WIND_INTENSITY: Dist = Dist::Uniform { low: 0.0, high: 100.0 };
pub const SUN_AZIMUTH: Dist = Dist::Uniform { low: 0.0, high: 360.0 };
pub const SUN_ALTITUDE: Dist = Dist::Beta { alpha: 3.6, beta: 2.0 };
pub const FOG_DENSITY: Dist = Dist::Beta { alpha: 1.6, beta: 2.0 };
pub const FOG_DISTANCE: Dist = Dist::LogNormal { mu: 3.2, sigma: 0.8 };
pub const FOG_FALLOFF: Dist = Dist::Beta { alpha: 1.2, beta: 2.4 };

pub const PED_SPEED_MAX: Dist = Dist::LogNormal { mu: 0.16, sigma: 0.64 };
pub const MAX_SPEED_DELTA_PCT: Dist = Dist::Uniform { low: -20.0, high: 40.0 };
pub const STOP_GAP: Dist = Dist::Normal { mean: 3.2, std_dev: 1.0 };
pub const GREEN_TIME: Dist = Dist::Uniform { low: 4.0, high: 28.0 };
pub const WALKER_CROSS: Dist = Dist::Beta { alpha: 2.4, beta: 1.6 };

/// Rain and fog need more cloud cover than this.
pub const CLOUD_GATE: f64 = 40.0;
/// Fog may also form when the sun is lower than this (degrees).
pub const FOG_SUN_GATE: f64 = 10.0;
/// Fog distance and falloff are only sampled for denser fog than this.
pub const FOG_DENSITY_GATE: f64 = 10.0;
/// Fog falloff on maps with non-zero terrain elevation.
pub const ELEVATED_MAP_FOG_FALLOFF: f64 = 0.01;
pub const DEFAULT_FOG_FALLOFF: f64 = 1.0;

pub const MAX_PEDESTRIANS: u32 = 640;
pub const PED_SPEED_MIN: f64 = 0.8;
pub const DOOR_OPEN_PROB: f64 = 0.10;
pub const EMERGENCY_LIGHT_PROB: f64 = 0.50;
pub const EGO_RECKLESS_PROB: f64 = 0.01;
pub const OTHER_RECKLESS_PROB: f64 = 0.01;
pub const STREET_LIGHT_FAILURE_PROB: f64 = 0.10;
pub const SPAWN_RADIUS_M: f64 = 400.0;
pub const MIN_STREET_LIGHT_LM: f64 = 10_000.0;
/// Scene-average street-light intensity used for the intensity change range.
pub const MEAN_STREET_LIGHT_LM: f64 = MIN_STREET_LIGHT_LM;

pub const WARMUP_S: f64 = 4.0;
pub const DURATION_S: f64 = 16.0;
pub const TIMESTEP_S: f64 = 0.05;
pub const BBOX_RADIUS_M: f64 = 120.0;

/// Known maps and whether their terrain sits above sea level.
pub const MAPS: [(&str, bool); 11] = [
    ("Town01", false),
    ("Town02", false),
    ("Town03", false),
    ("Town04", false),
    ("Town05", false),
    ("Town06", false),
    ("Town07", false),
    ("Town10HD", false),
    ("Town12", true),
    ("Town13", true),
    ("Town15", true),
];

pub fn map_is_elevated(map_id: &str) -> Result<bool, SamplerError> {
    MAPS.iter()
        .find(|(id, _)| *id == map_id)
        .map(|&(_, elevated)| elevated)
        .ok_or_else(|| SamplerError::UnknownMap(map_id.to_string()))
}

struct OverrideKey {
    name: &'static str,
    min: f64,
    max: f64,
    integer: bool,
}

const fn key(name: &'static str, min: f64, max: f64) -> OverrideKey {
    OverrideKey {
        name,
        min,
        max,
        integer: false,
    }
}

const fn int_key(name: &'static str, min: f64, max: f64) -> OverrideKey {
    OverrideKey {
        name,
        min,
        max,
        integer: true,
    }
}

const OVERRIDE_KEYS: &[OverrideKey] = &[
    key("cloudiness", 0.0, 100.0),
    key("precipitation", 0.0, 100.0),
    key("precipitation_deposits", 0.0, 100.0),
    key("wetness", 0.0, 100.0),
    key("wind_intensity", 0.0, 100.0),
    key("sun_azimuth_angle", 0.0, 360.0),
    key("sun_altitude_angle", -90.0, 90.0),
    key("fog_density", 0.0, 100.0),
    key("fog_distance", 0.0, f64::MAX),
    key("fog_falloff", 0.0, f64::MAX),
    int_key("n_vehicles", 0.0, u32::MAX as f64),
    int_key("n_pedestrians", 0.0, MAX_PEDESTRIANS as f64),
    key("door_open_prob", 0.0, 1.0),
    key("emergency_light_prob", 0.0, 1.0),
    key("ego_reckless_prob", 0.0, 1.0),
    key("other_reckless_prob", 0.0, 1.0),
    key("street_light_failure_prob", 0.0, 1.0),
    key("max_speed_delta_pct", -100.0, 100.0),
    key("stop_gap_m", 0.0, 50.0),
    key("green_time_s", 4.0, 28.0),
    key("walker_cross_factor", 0.0, 1.0),
    key("ped_speed_max", PED_SPEED_MIN, 10.0),
    key("spawn_radius_m", 0.0, 10_000.0),
    key("light_intensity_delta_lm", -1e6, 1e6),
    key("warmup_s", 0.0, 600.0),
    key("duration_s", 0.0, 3600.0),
    key("timestep_s", 1e-4, 1.0),
    key("bbox_radius_m", 0.0, 10_000.0),
];

/// User-fixed parameter values, by name. Ordered so serialization is canonical.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Overrides(pub BTreeMap<String, f64>);

impl Overrides {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.0.insert(key.to_string(), value);
        self
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.0.get(key).copied()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Checks every key is known and every value is inside its range.
    pub fn validate(&self) -> Result<(), SamplerError> {
        for (k, &v) in &self.0 {
            let spec = OVERRIDE_KEYS
                .iter()
                .find(|s| s.name == k)
                .ok_or_else(|| SamplerError::UnknownOverride(k.clone()))?;
            if !(v.is_finite() && v >= spec.min && v <= spec.max) {
                return Err(SamplerError::OutOfRange {
                    key: k.clone(),
                    value: v,
                    min: spec.min,
                    max: spec.max,
                });
            }
            if spec.integer && v.fract() != 0.0 {
                return Err(SamplerError::NotInteger {
                    key: k.clone(),
                    value: v,
                });
            }
        }
        Ok(())
    }

    pub fn known_keys() -> impl Iterator<Item = &'static str> {
        OVERRIDE_KEYS.iter().map(|k| k.name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherParams {
    pub cloudiness: f64,
    pub precipitation: f64,
    pub precipitation_deposits: f64,
    pub wetness: f64,
    pub wind_intensity: f64,
    pub sun_azimuth_angle: f64,
    pub sun_altitude_angle: f64,
    pub fog_density: f64,
    pub fog_distance: f64,
    pub fog_falloff: f64,
}

impl WeatherParams {
    pub fn is_night(&self) -> bool {
        self.sun_altitude_angle < 0.0
    }

    /// Conditional structure of the sampled weather.
    pub fn invariants_hold(&self) -> bool {
        let in_pct = |v: f64| (0.0..=100.0).contains(&v);
        in_pct(self.cloudiness)
            && in_pct(self.precipitation)
            && in_pct(self.precipitation_deposits)
            && in_pct(self.wetness)
            && in_pct(self.wind_intensity)
            && in_pct(self.fog_density)
            && (0.0..360.0).contains(&self.sun_azimuth_angle)
            && (-90.0..=90.0).contains(&self.sun_altitude_angle)
            && self.fog_distance >= 0.0
            && self.fog_falloff >= 0.0
            && (self.precipitation <= 0.0 || self.cloudiness > CLOUD_GATE)
            && (self.fog_density <= 0.0
                || self.cloudiness > CLOUD_GATE
                || self.sun_altitude_angle < FOG_SUN_GATE)
            && (self.fog_distance <= 0.0 || self.fog_density > FOG_DENSITY_GATE)
            && self.precipitation_deposits >= self.precipitation
    }
}

/// Draws from `dist` on its own stream, then lets an override replace it.
fn draw(streams: &SeedStreams, id: u64, dist: Dist) -> f64 {
    dist.sample(&mut streams.stream(id))
}

pub fn sample_weather(
    streams: &SeedStreams,
    overrides: &Overrides,
    elevation_flag: bool,
) -> Result<WeatherParams, SamplerError> {
    overrides.validate()?;
    let pick = |key: &str, sampled: f64| overrides.get(key).unwrap_or(sampled);

    let cloudiness = pick("cloudiness", 100.0 * draw(streams, streams::CLOUDINESS, CLOUDINESS));

    let rain_share = draw(streams, streams::PRECIPITATION, PRECIPITATION);
    let precipitation = pick(
        "precipitation",
        if cloudiness > CLOUD_GATE {
            rain_share * cloudiness
        } else {
            0.0
        },
    );

    let deposit_share = draw(streams, streams::PRECIPITATION_DEPOSITS, PRECIPITATION_DEPOSITS);
    let precipitation_deposits = pick(
        "precipitation_deposits",
        precipitation + deposit_share * (100.0 - precipitation),
    );

    let wet = draw(
        streams,
        streams::WETNESS,
        Dist::Normal {
            mean: precipitation,
            std_dev: WETNESS_STD_DEV,
        },
    );
    let wetness = pick("wetness", wet.clamp(0.0, 100.0));

    let wind_intensity = pick("wind_intensity", draw(streams, streams::WIND_INTENSITY, WIND_INTENSITY));
    let sun_azimuth_angle = pick("sun_azimuth_angle", draw(streams, streams::SUN_AZIMUTH, SUN_AZIMUTH));
    let sun_altitude_angle = pick(
        "sun_altitude_angle",
        180.0 * draw(streams, streams::SUN_ALTITUDE, SUN_ALTITUDE) - 90.0,
    );

    let fog = draw(streams, streams::FOG_DENSITY, FOG_DENSITY);
    let fog_density = pick(
        "fog_density",
        if cloudiness > CLOUD_GATE || sun_altitude_angle < FOG_SUN_GATE {
            100.0 * fog
        } else {
            0.0
        },
    );

    let dense_fog = fog_density > FOG_DENSITY_GATE;
    let fog_start = draw(streams, streams::FOG_DISTANCE, FOG_DISTANCE);
    let fog_distance = pick("fog_distance", if dense_fog { fog_start } else { 0.0 });

    let falloff = draw(streams, streams::FOG_FALLOFF, FOG_FALLOFF);
    let sampled_falloff = if elevation_flag {
        ELEVATED_MAP_FOG_FALLOFF
    } else if dense_fog {
        5.0 * falloff
    } else {
        DEFAULT_FOG_FALLOFF
    };
    let fog_falloff = pick("fog_falloff", sampled_falloff);

    Ok(WeatherParams {
        cloudiness,
        precipitation,
        precipitation_deposits,
        wetness,
        wind_intensity,
        sun_azimuth_angle,
        sun_altitude_angle,
        fog_density,
        fog_distance,
        fog_falloff,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficParams {
    /// Available spawn locations `s` the counts were drawn against.
    pub spawn_locations: u32,
    pub n_vehicles: u32,
    pub n_pedestrians: u32,
    pub door_open_prob: f64,
    pub emergency_light_prob: f64,
    pub ego_reckless_prob: f64,
    pub other_reckless_prob: f64,
    pub street_light_failure_prob: f64,
    pub max_speed_delta_pct: f64,
    pub stop_gap_m: f64,
    pub green_time_s: f64,
    pub walker_cross_factor: f64,
    pub ped_speed_min: f64,
    pub ped_speed_max: f64,
    pub spawn_radius_m: f64,
    pub light_intensity_delta_lm: f64,
}

pub fn sample_traffic(
    streams: &SeedStreams,
    spawn_locations: u32,
    overrides: &Overrides,
) -> Result<TrafficParams, SamplerError> {
    if spawn_locations < 3 {
        return Err(SamplerError::TooFewSpawnLocations(spawn_locations));
    }
    overrides.validate()?;
    let pick = |key: &str, sampled: f64| overrides.get(key).unwrap_or(sampled);
    let max_vehicles = spawn_locations - 3;

    let n_vehicles = pick(
        "n_vehicles",
        draw(
            streams,
            streams::N_VEHICLES,
            Dist::UniformInt {
                low: 0,
                high: max_vehicles as i64,
            },
        ),
    );
    if n_vehicles > max_vehicles as f64 {
        return Err(SamplerError::OutOfRange {
            key: "n_vehicles".into(),
            value: n_vehicles,
            min: 0.0,
            max: max_vehicles as f64,
        });
    }
    let n_pedestrians = pick(
        "n_pedestrians",
        draw(
            streams,
            streams::N_PEDESTRIANS,
            Dist::UniformInt {
                low: 0,
                high: MAX_PEDESTRIANS as i64,
            },
        ),
    );
    let ped_speed_max = pick(
        "ped_speed_max",
        draw(streams, streams::PED_SPEED_MAX, PED_SPEED_MAX).max(PED_SPEED_MIN),
    );
    let max_speed_delta_pct = pick(
        "max_speed_delta_pct",
        draw(streams, streams::MAX_SPEED_DELTA, MAX_SPEED_DELTA_PCT),
    );
    let stop_gap_m = pick("stop_gap_m", draw(streams, streams::STOP_GAP, STOP_GAP).max(0.0));
    let green_time_s = pick("green_time_s", draw(streams, streams::GREEN_TIME, GREEN_TIME));
    let walker_cross_factor = pick(
        "walker_cross_factor",
        draw(streams, streams::WALKER_CROSS, WALKER_CROSS),
    );
    let light_intensity_delta_lm = pick(
        "light_intensity_delta_lm",
        draw(
            streams,
            streams::LIGHT_INTENSITY,
            Dist::Uniform {
                low: -MEAN_STREET_LIGHT_LM,
                high: MEAN_STREET_LIGHT_LM,
            },
        ),
    );

    Ok(TrafficParams {
        spawn_locations,
        n_vehicles: n_vehicles as u32,
        n_pedestrians: n_pedestrians as u32,
        door_open_prob: pick("door_open_prob", DOOR_OPEN_PROB),
        emergency_light_prob: pick("emergency_light_prob", EMERGENCY_LIGHT_PROB),
        ego_reckless_prob: pick("ego_reckless_prob", EGO_RECKLESS_PROB),
        other_reckless_prob: pick("other_reckless_prob", OTHER_RECKLESS_PROB),
        street_light_failure_prob: pick("street_light_failure_prob", STREET_LIGHT_FAILURE_PROB),
        max_speed_delta_pct,
        stop_gap_m,
        green_time_s,
        walker_cross_factor,
        ped_speed_min: PED_SPEED_MIN,
        ped_speed_max,
        spawn_radius_m: pick("spawn_radius_m", SPAWN_RADIUS_M),
        light_intensity_delta_lm,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub seed: u64,
    pub map_id: String,
    pub weather: WeatherParams,
    pub traffic: TrafficParams,
    pub warmup_s: f64,
    pub duration_s: f64,
    pub timestep_s: f64,
    pub bbox_radius_m: f64,
    pub grid: GridSpec,
    pub overrides: Overrides,
}

impl SceneConfig {
    /// Number of emitted frames (`duration_s / timestep_s`).
    pub fn frame_count(&self) -> usize {
        (self.duration_s / self.timestep_s).round() as usize
    }

    pub fn warmup_steps(&self) -> usize {
        (self.warmup_s / self.timestep_s).round() as usize
    }

    pub fn streams(&self) -> SeedStreams {
        SeedStreams::new(self.seed)
    }

    pub fn with_grid(mut self, grid: GridSpec) -> Self {
        self.grid = grid;
        self
    }
}

pub fn sample_scene_config(
    seed: u64,
    map_id: &str,
    spawn_locations: u32,
    overrides: &Overrides,
) -> Result<SceneConfig, SamplerError> {
    let elevated = map_is_elevated(map_id)?;
    overrides.validate()?;
    let streams = SeedStreams::new(seed);
    let weather = sample_weather(&streams, overrides, elevated)?;
    let traffic = sample_traffic(&streams, spawn_locations, overrides)?;

    let pick = |key: &str, default: f64| overrides.get(key).unwrap_or(default);
    let duration_s = pick("duration_s", DURATION_S);
    let timestep_s = pick("timestep_s", TIMESTEP_S);
    let steps = duration_s / timestep_s;
    if (steps - steps.round()).abs() > 1e-6 {
        return Err(SamplerError::FractionalFrameCount {
            duration_s,
            timestep_s,
        });
    }
    if steps.round() < 1.0 {
        return Err(SamplerError::NoFrames);
    }

    Ok(SceneConfig {
        seed,
        map_id: map_id.to_string(),
        weather,
        traffic,
        warmup_s: pick("warmup_s", WARMUP_S),
        duration_s,
        timestep_s,
        bbox_radius_m: pick("bbox_radius_m", BBOX_RADIUS_M),
        grid: GridSpec::default(),
        overrides: overrides.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_table() {
        let cfg = sample_scene_config(7, "Town03", 120, &Overrides::new()).unwrap();
        assert_eq!(cfg.frame_count(), 320);
        assert_eq!(cfg.warmup_steps(), 80);
        assert_eq!(cfg.bbox_radius_m, 120.0);
        assert_eq!(cfg.grid, GridSpec::default());
        let t = &cfg.traffic;
        assert_eq!(t.door_open_prob, 0.10);
        assert_eq!(t.emergency_light_prob, 0.50);
        assert_eq!(t.ego_reckless_prob, 0.01);
        assert_eq!(t.other_reckless_prob, 0.01);
        assert_eq!(t.street_light_failure_prob, 0.10);
        assert_eq!(t.ped_speed_min, 0.8);
        assert_eq!(t.spawn_radius_m, 400.0);
    }

    #[test]
    fn low_cloud_means_no_rain() {
        for seed in 0..200 {
            let o = Overrides::new().with("cloudiness", 30.0);
            let w = sample_weather(&SeedStreams::new(seed), &o, false).unwrap();
            assert_eq!(w.precipitation, 0.0);
        }
    }

    #[test]
    fn thin_fog_defaults() {
        for seed in 0..200 {
            let o = Overrides::new().with("fog_density", 5.0);
            let w = sample_weather(&SeedStreams::new(seed), &o, false).unwrap();
            assert_eq!(w.fog_falloff, 1.0);
            assert_eq!(w.fog_distance, 0.0);
        }
    }

    #[test]
    fn elevated_maps_pin_fog_falloff() {
        for seed in 0..50 {
            let w = sample_weather(&SeedStreams::new(seed), &Overrides::new(), true).unwrap();
            assert_eq!(w.fog_falloff, 0.01);
        }
        let cfg = sample_scene_config(1, "Town12", 50, &Overrides::new()).unwrap();
        assert_eq!(cfg.weather.fog_falloff, 0.01);
    }

    #[test]
    fn negative_sun_altitude_is_night() {
        for seed in 0..50 {
            let o = Overrides::new().with("sun_altitude_angle", -10.0);
            let w = sample_weather(&SeedStreams::new(seed), &o, false).unwrap();
            assert!(w.is_night());
        }
    }

    #[test]
    fn overrides_feed_conditionals() {
        // Forcing heavy cloud always enables rain sampling.
        let mut rained = 0;
        for seed in 0..100 {
            let o = Overrides::new().with("cloudiness", 90.0);
            let w = sample_weather(&SeedStreams::new(seed), &o, false).unwrap();
            assert_eq!(w.cloudiness, 90.0);
            if w.precipitation > 0.0 {
                rained += 1;
            }
        }
        assert!(rained > 90);
    }

    #[test]
    fn rejects_bad_overrides() {
        let s = SeedStreams::new(0);
        let unknown = Overrides::new().with("humidity", 3.0);
        assert_eq!(
            sample_weather(&s, &unknown, false),
            Err(SamplerError::UnknownOverride("humidity".into()))
        );
        let out = Overrides::new().with("cloudiness", 120.0);
        assert!(matches!(sample_weather(&s, &out, false), Err(SamplerError::OutOfRange { .. })));
        let frac = Overrides::new().with("n_pedestrians", 2.5);
        assert!(matches!(sample_traffic(&s, 10, &frac), Err(SamplerError::NotInteger { .. })));
        let too_many = Overrides::new().with("n_vehicles", 8.0);
        assert!(matches!(sample_traffic(&s, 10, &too_many), Err(SamplerError::OutOfRange { .. })));
    }

    #[test]
    fn traffic_bounds() {
        let o = Overrides::new();
        assert_eq!(
            sample_traffic(&SeedStreams::new(0), 2, &o),
            Err(SamplerError::TooFewSpawnLocations(2))
        );
        for seed in 0..500 {
            let s = SeedStreams::new(seed);
            assert_eq!(sample_traffic(&s, 3, &o).unwrap().n_vehicles, 0);
            let t = sample_traffic(&s, 50, &o).unwrap();
            assert!(t.n_vehicles <= 47);
            assert!(t.n_pedestrians <= 640);
            assert!(t.ped_speed_max >= t.ped_speed_min);
            assert!((4.0..=28.0).contains(&t.green_time_s));
            assert!((-20.0..40.0).contains(&t.max_speed_delta_pct));
            assert!(t.stop_gap_m >= 0.0);
            assert!(t.light_intensity_delta_lm.abs() <= MEAN_STREET_LIGHT_LM);
        }
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let o = Overrides::new();
        let a = sample_scene_config(99, "Town05", 80, &o).unwrap();
        let b = sample_scene_config(99, "Town05", 80, &o).unwrap();
        assert_eq!(serde_json::to_vec(&a).unwrap(), serde_json::to_vec(&b).unwrap());
        let mut identical = 0;
        for k in 0..1000u64 {
            let x = sample_scene_config(k, "Town05", 80, &o).unwrap();
            let y = sample_scene_config(k + 1, "Town05", 80, &o).unwrap();
            if x.weather == y.weather && x.traffic == y.traffic {
                identical += 1;
            }
        }
        assert_eq!(identical, 0);
    }

    #[test]
    fn full_override_reproduces_overrides() {
        let mut o = Overrides::new();
        for (k, v) in [
            ("cloudiness", 55.0),
            ("precipitation", 20.0),
            ("precipitation_deposits", 30.0),
            ("wetness", 25.0),
            ("wind_intensity", 10.0),
            ("sun_azimuth_angle", 100.0),
            ("sun_altitude_angle", 45.0),
            ("fog_density", 12.0),
            ("fog_distance", 30.0),
            ("fog_falloff", 2.0),
        ] {
            o = o.with(k, v);
        }
        for seed in [0, 1, 12345] {
            let w = sample_weather(&SeedStreams::new(seed), &o, false).unwrap();
            assert_eq!(w.cloudiness, 55.0);
            assert_eq!(w.precipitation, 20.0);
            assert_eq!(w.precipitation_deposits, 30.0);
            assert_eq!(w.wetness, 25.0);
            assert_eq!(w.wind_intensity, 10.0);
            assert_eq!(w.sun_azimuth_angle, 100.0);
            assert_eq!(w.sun_altitude_angle, 45.0);
            assert_eq!(w.fog_density, 12.0);
            assert_eq!(w.fog_distance, 30.0);
            assert_eq!(w.fog_falloff, 2.0);
        }
    }

    #[test]
    fn frame_count_must_be_whole() {
        let o = Overrides::new().with("duration_s", 1.03);
        assert!(matches!(
            sample_scene_config(0, "Town01", 10, &o),
            Err(SamplerError::FractionalFrameCount { .. })
        ));
        let o = Overrides::new().with("duration_s", 1.0);
        assert_eq!(sample_scene_config(0, "Town01", 10, &o).unwrap().frame_count(), 20);
        assert!(matches!(
            sample_scene_config(0, "Atlantis", 10, &Overrides::new()),
            Err(SamplerError::UnknownMap(_))
        ));
    }
}
