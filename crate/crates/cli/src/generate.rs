//! `generate`: plan, simulate, annotate and write scenes, committing each to
//! the manifest as soon as its directory is in place.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use anyhow::{Context, Result};
use bevkit::io::store::scene_dir;
use bevkit::io::{plan_generation, Manifest, SceneLog, WorkItem};
use bevkit::{generate_into, sample_scene_config, RoadNetwork};
use serde::Serialize;

use crate::config::RunConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct GenerateSummary {
    pub root: PathBuf,
    /// Scenes already complete before this run.
    pub already_complete: usize,
    pub generated: Vec<String>,
    pub frames: usize,
    pub failed: Vec<SceneFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SceneFailure {
    pub id: String,
    pub error: String,
}

/// Options that do not belong in the config file.
#[derive(Debug, Clone, Default)]
pub struct GenerateOptions {
    pub replace: Vec<String>,
    /// Abort the process right after this many commits. Simulates a crash.
    pub stop_after: Option<usize>,
}

fn tmp_dir(root: &Path, id: &str) -> PathBuf {
    root.join("scenes").join(format!("{id}.tmp"))
}

/// Builds one scene under `scenes/<id>.tmp` and moves it into place.
fn run_item(root: &Path, item: &WorkItem, cfg: &RunConfig) -> Result<SceneLog> {
    let spawn = RoadNetwork::for_map(&item.map_id).spawn_locations();
    let config = sample_scene_config(item.seed, &item.map_id, spawn, &cfg.scenario.overrides)?.with_grid(cfg.grid);
    let tmp = tmp_dir(root, &item.id);
    let log = generate_into(&tmp, &item.id, &config, cfg.synth_options())?;
    let dest = scene_dir(root, &item.id);
    if dest.exists() {
        std::fs::remove_dir_all(&dest).with_context(|| format!("removing {}", dest.display()))?;
    }
    std::fs::rename(&tmp, &dest).with_context(|| format!("moving {} into place", tmp.display()))?;
    Ok(log)
}

pub fn cmd_generate(cfg: &RunConfig, root: &Path, opts: &GenerateOptions) -> Result<GenerateSummary> {
    let scenes = root.join("scenes");
    std::fs::create_dir_all(&scenes).with_context(|| format!("creating {}", scenes.display()))?;
    let mut manifest = Manifest::load_or_new(root, cfg.seed)?;
    let work = plan_generation(&mut manifest, &cfg.scenes, &opts.replace)?;
    manifest.save(root)?;

    let mut summary = GenerateSummary {
        root: root.to_path_buf(),
        already_complete: manifest.completed().count(),
        ..GenerateSummary::default()
    };
    if work.is_empty() {
        return Ok(summary);
    }

    let jobs = cfg.jobs.clamp(1, work.len());
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel();
    std::thread::scope(|s| -> Result<()> {
        for _ in 0..jobs {
            let tx = tx.clone();
            let (work, next) = (&work, &next);
            s.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(item) = work.get(i) else { break };
                if tx.send((i, run_item(root, item, cfg))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        // Single writer: only this thread touches the manifest.
        let mut committed = 0;
        for (i, result) in rx {
            let item = &work[i];
            match result {
                Ok(log) => {
                    manifest.mark_completed(&item.id, log.config_digest.clone(), log.frames.len())?;
                    manifest.save(root)?;
                    committed += 1;
                    summary.generated.push(item.id.clone());
                    summary.frames += log.frames.len();
                    if opts.stop_after == Some(committed) {
                        std::process::abort();
                    }
                }
                Err(e) => {
                    let _ = std::fs::remove_dir_all(tmp_dir(root, &item.id));
                    summary.failed.push(SceneFailure {
                        id: item.id.clone(),
                        error: format!("{e:#}"),
                    });
                }
            }
        }
        Ok(())
    })?;
    summary.generated.sort();
    summary.failed.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(summary)
}
