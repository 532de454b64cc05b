//! `stats`: dataset summary as text, JSON or CSV.

use std::fmt::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use bevkit::io::stats::StatsReport;

/// Writes one CSV per histogram into `dir` and returns their paths.
pub fn write_csvs(report: &StatsReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut paths = Vec::new();
    for (name, csv) in report.csv_files() {
        let path = dir.join(name);
        std::fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?;
        paths.push(path);
    }
    Ok(paths)
}

pub fn stats_text(r: &StatsReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{} scenes, {} frames", r.scenes, r.frames);
    let bucket_line = |s: &mut String, name: &str, items: Vec<(String, u64)>| {
        let parts: Vec<String> = items.iter().map(|(k, v)| format!("{k} {v}")).collect();
        let _ = writeln!(s, "{name:<14} {}", parts.join(", "));
    };
    bucket_line(&mut s, "precipitation", r.precipitation.iter().map(|(k, v)| (variant_name(k), *v)).collect());
    bucket_line(&mut s, "fog", r.fog.iter().map(|(k, v)| (variant_name(k), *v)).collect());
    bucket_line(&mut s, "lighting", r.lighting.iter().map(|(k, v)| (variant_name(k), *v)).collect());
    let _ = writeln!(s, "\n{:<12} {:>10} {:>10}", "class", "boxes", "valid");
    for (class, c) in &r.boxes {
        let _ = writeln!(s, "{:<12} {:>10} {:>10}", class.name(), c.total, c.valid);
    }
    let _ = writeln!(s, "\n{:<12} {:>12}", "bev class", "cells");
    for (class, n) in &r.bev_labels {
        let _ = writeln!(s, "{:<12} {:>12}", class.name(), n);
    }
    s
}

/// Serialized name of a unit enum variant.
fn variant_name<T: serde::Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        other => format!("{other:?}"),
    }
}

pub fn load(root: &Path) -> Result<StatsReport> {
    if !bevkit::io::manifest::manifest_path(root).exists() {
        anyhow::bail!("no scenes: {} has no manifest", root.display());
    }
    Ok(bevkit::io::dataset_stats(root)?)
}
