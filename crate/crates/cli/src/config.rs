//! Run configuration file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bevkit::io::SplitCounts;
use bevkit::sampler::map_is_elevated;
use bevkit::{sample_scene_config, GridSpec, Overrides, RoadNetwork, SynthOptions};
use serde::{Deserialize, Serialize};

fn yes() -> bool {
    true
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sensors {
    #[serde(default = "yes")]
    pub lidar: bool,
    #[serde(default = "yes")]
    pub radar: bool,
}

impl Default for Sensors {
    fn default() -> Self {
        Self { lidar: true, radar: true }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Fixed values for sampled parameters, by name.
    #[serde(default)]
    pub overrides: Overrides,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Dataset root. `--out` takes precedence.
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default = "one")]
    pub jobs: usize,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub sensors: Sensors,
    #[serde(default)]
    pub scenario: Scenario,
    /// Requested scene counts per map and split.
    pub scenes: BTreeMap<String, SplitCounts>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: RunConfig = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks everything that can be checked without generating: grid,
    /// override names and ranges, map names, and a trial draw per map.
    pub fn validate(&self) -> Result<()> {
        if self.jobs == 0 {
            bail!("jobs must be at least 1");
        }
        self.grid.validate()?;
        self.scenario.overrides.validate()?;
        for map in self.scenes.keys() {
            map_is_elevated(map)?;
            let spawn = RoadNetwork::for_map(map).spawn_locations();
            sample_scene_config(0, map, spawn, &self.scenario.overrides).with_context(|| format!("map {map}"))?;
        }
        Ok(())
    }

    pub fn synth_options(&self) -> SynthOptions {
        SynthOptions {
            lidar_enabled: self.sensors.lidar,
            radar_enabled: self.sensors.radar,
            ..SynthOptions::default()
        }
    }
}
