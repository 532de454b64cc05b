#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_bevkit"));
    c.env("NO_COLOR", "1");
    c
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Small, fast scenes: 4 frames, enough traffic for every class to appear.
pub fn write_config(dir: &Path, seed: u64, scenes: &str) -> PathBuf {
    let path = dir.join("config.json");
    let text = format!(
        r#"{{
  "seed": {seed},
  "scenario": {{"overrides": {{"duration_s": 0.2, "n_vehicles": 40, "n_pedestrians": 40}}}},
  "scenes": {scenes}
}}"#
    );
    std::fs::write(&path, text).unwrap();
    path
}

/// Relative path to file bytes for everything under `root`.
pub fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(base: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        let mut entries: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for p in entries {
            if p.is_dir() {
                walk(base, &p, out);
            } else {
                out.insert(p.strip_prefix(base).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

/// First differing path between two trees, if any.
pub fn tree_diff(a: &Path, b: &Path) -> Option<String> {
    let (ta, tb) = (tree(a), tree(b));
    for (k, v) in &ta {
        match tb.get(k) {
            None => return Some(format!("{} missing on the right", k.display())),
            Some(w) if w != v => return Some(format!("{} differs", k.display())),
            _ => {}
        }
    }
    tb.keys()
        .find(|k| !ta.contains_key(*k))
        .map(|k| format!("{} missing on the left", k.display()))
}
