//! Dataset statistics: weather and lighting buckets, box and label counts,
//! and distance, speed and per-frame histograms of valid objects.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::grid::BevGrid;
use crate::model::{BBox3D, BevClass, DetectionClass, Validity};
use crate::sampler::SceneConfig;

use super::manifest::Manifest;
use super::store::{read_frame_bev, read_frame_boxes, read_scene_log};
use super::IoError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Intensity {
    None,
    Low,
    Moderate,
    Heavy,
}

/// Percentage buckets: none below 10, low 10-40, moderate 40-70, heavy 70+.
pub fn intensity_bucket(percent: f64) -> Intensity {
    if percent < 10.0 {
        Intensity::None
    } else if percent < 40.0 {
        Intensity::Low
    } else if percent < 70.0 {
        Intensity::Moderate
    } else {
        Intensity::Heavy
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lighting {
    Night,
    DawnDusk,
    Day,
}

/// Sun altitude buckets: night below 0 degrees, dawn/dusk 0-6, day 6+.
pub fn lighting_bucket(altitude_deg: f64) -> Lighting {
    if altitude_deg < 0.0 {
        Lighting::Night
    } else if altitude_deg < 6.0 {
        Lighting::DawnDusk
    } else {
        Lighting::Day
    }
}

/// Bin labels and one count series per key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bins: Vec<String>,
    pub series: BTreeMap<String, Vec<u64>>,
}

impl Histogram {
    /// `n` bins of `width` starting at 0, then an open-ended last bin.
    pub fn uniform(width: f64, n: usize) -> Self {
        let mut bins: Vec<String> = (0..n)
            .map(|i| format!("{}-{}", i as f64 * width, (i + 1) as f64 * width))
            .collect();
        bins.push(format!("{}+", n as f64 * width));
        Self {
            bins,
            series: BTreeMap::new(),
        }
    }

    fn add(&mut self, key: &str, bin: usize) {
        let n = self.bins.len();
        self.series.entry(key.to_string()).or_insert_with(|| vec![0; n])[bin.min(n - 1)] += 1;
    }

    pub fn total(&self, key: &str) -> u64 {
        self.series.get(key).map_or(0, |v| v.iter().sum())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin");
        for k in self.series.keys() {
            let _ = write!(s, ",{k}");
        }
        s.push('\n');
        for (i, b) in self.bins.iter().enumerate() {
            s.push_str(b);
            for v in self.series.values() {
                let _ = write!(s, ",{}", v[i]);
            }
            s.push('\n');
        }
        s
    }
}

fn bin_of(value: f64, width: f64) -> usize {
    (value.max(0.0) / width).floor() as usize
}

pub const DISTANCE_BIN_M: f64 = 10.0;
pub const DISTANCE_BINS: usize = 10;
pub const SPEED_BIN_MPS: f64 = 3.0;
pub const SPEED_BINS: usize = 10;
pub const BOXES_PER_FRAME_BIN: f64 = 5.0;
pub const BOXES_PER_FRAME_BINS: usize = 20;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCount {
    pub total: u64,
    pub valid: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub scenes: usize,
    pub frames: usize,
    pub precipitation: BTreeMap<Intensity, u64>,
    pub fog: BTreeMap<Intensity, u64>,
    pub lighting: BTreeMap<Lighting, u64>,
    pub boxes: BTreeMap<DetectionClass, ClassCount>,
    /// Labeled BEV cells per class, summed over frames.
    pub bev_labels: BTreeMap<BevClass, u64>,
    pub valid_boxes_per_frame: Histogram,
    pub distance: Histogram,
    pub speed: Histogram,
}

impl StatsReport {
    pub fn new() -> Self {
        Self {
            scenes: 0,
            frames: 0,
            precipitation: BTreeMap::new(),
            fog: BTreeMap::new(),
            lighting: BTreeMap::new(),
            boxes: DetectionClass::ALL.iter().map(|&c| (c, ClassCount::default())).collect(),
            bev_labels: BevClass::ALL.iter().map(|&c| (c, 0)).collect(),
            valid_boxes_per_frame: Histogram::uniform(BOXES_PER_FRAME_BIN, BOXES_PER_FRAME_BINS),
            distance: Histogram::uniform(DISTANCE_BIN_M, DISTANCE_BINS),
            speed: Histogram::uniform(SPEED_BIN_MPS, SPEED_BINS),
        }
    }

    pub fn add_scene(&mut self, config: &SceneConfig) {
        self.scenes += 1;
        *self.precipitation.entry(intensity_bucket(config.weather.precipitation)).or_default() += 1;
        *self.fog.entry(intensity_bucket(config.weather.fog_density)).or_default() += 1;
        *self.lighting.entry(lighting_bucket(config.weather.sun_altitude_angle)).or_default() += 1;
    }

    /// `boxes` in the ego frame.
    pub fn add_frame(&mut self, boxes: &[BBox3D], bev: &BevGrid) {
        self.frames += 1;
        let mut valid = 0;
        for b in boxes {
            let c = self.boxes.entry(b.class).or_default();
            c.total += 1;
            if b.validity != Validity::Valid {
                continue;
            }
            c.valid += 1;
            valid += 1;
            let d = b.center[0].hypot(b.center[1]);
            let v = b.velocity[0].hypot(b.velocity[1]);
            self.distance.add(b.class.name(), bin_of(d, DISTANCE_BIN_M));
            self.speed.add(b.class.name(), bin_of(v, SPEED_BIN_MPS));
        }
        self.valid_boxes_per_frame.add("frames", bin_of(valid as f64, BOXES_PER_FRAME_BIN));
        for class in BevClass::ALL {
            *self.bev_labels.entry(class).or_default() += bev.plane(class).count_ones() as u64;
        }
    }

    /// `(file name, csv)` for each histogram.
    pub fn csv_files(&self) -> Vec<(String, String)> {
        vec![
            ("valid_boxes_per_frame.csv".into(), self.valid_boxes_per_frame.to_csv()),
            ("distance.csv".into(), self.distance.to_csv()),
            ("speed.csv".into(), self.speed.to_csv()),
        ]
    }
}

impl Default for StatsReport {
    fn default() -> Self {
        Self::new()
    }
}

/// Statistics over every completed scene in the dataset at `root`.
pub fn dataset_stats(root: &Path) -> Result<StatsReport, IoError> {
    let manifest = Manifest::load(root)?;
    let mut report = StatsReport::new();
    for entry in manifest.completed() {
        let (config, log) = read_scene_log(root, &entry.id)?;
        if entry.digest.as_deref() != Some(log.config_digest.as_str()) {
            return Err(IoError::DigestMismatch {
                id: entry.id.clone(),
                expected: entry.digest.clone().unwrap_or_default(),
                actual: log.config_digest,
            });
        }
        report.add_scene(&config);
        for f in &log.frames {
            let boxes = read_frame_boxes(root, &entry.id, f.index)?;
            let bev = read_frame_bev(root, &entry.id, f.index)?;
            report.add_frame(&boxes, &bev);
        }
    }
    if report.scenes == 0 {
        return Err(IoError::NoScenes);
    }
    Ok(report)
}
