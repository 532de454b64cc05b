//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

#[path = "../../core/tests/support/mod.rs"]
mod support;

mod common;

use std::path::Path;
use std::process::Stdio;
use std::time::{Duration, Instant};

use bevkit::bevgt::{camera_fov_for_grid, compose, rasterize_road_from_waypoints, CAMERA_HEIGHT_M};
use bevkit::eval::detection::{evaluate_detection, sds, EvalFrame, TpErrors};
use bevkit::eval::{seg_iou, SegPrediction};
use bevkit::io::{frame_id, Manifest};
use bevkit::model::{BevClass, Pose, Validity, Waypoint};
use bevkit::synth::{generate_scene, plant_elevation_conflict};
use bevkit::{
    binary_closing, build_scene, count_points, sample_scene_config, BevGrid, BitPlane, GridSpec, MatchMethod,
    Overrides, Prediction, RoadNetwork, StructuringElement, SynthOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Check = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration, what: &str) -> Result<String, String> {
    let t = start.elapsed();
    ensure(t <= limit, || format!("{what} took {:.1} s, limit {} s", t.as_secs_f64(), limit.as_secs()))?;
    Ok(format!("{:.1} s", t.as_secs_f64()))
}

fn score_rows() -> Outcome {
    let mut worst: f64 = 0.0;
    for (i, &(map, ate, aoe, ase, ave, printed)) in support::PUBLISHED_ROWS.iter().enumerate() {
        let got = 100.0 * sds(map / 100.0, &TpErrors { ate, aoe, ase, ave });
        let err = (got - printed).abs();
        worst = worst.max(err);
        ensure(err <= 0.15, || format!("row {}: computed {got:.3}, printed {printed}", i + 1))?;
    }
    Ok(format!("10 rows, max deviation {worst:.3} pp"))
}

fn zero_noise_identity() -> Outcome {
    let start = Instant::now();
    let o = Overrides::new().with("n_vehicles", 80.0).with("n_pedestrians", 60.0);
    let spawn = RoadNetwork::for_map("Town05").spawn_locations();
    let cfg = sample_scene_config(17, "Town05", spawn, &o).map_err(|e| e.to_string())?;
    let rec = build_scene("scene_0000", &cfg, SynthOptions::default()).map_err(|e| e.to_string())?;
    ensure(rec.frames.len() == 320, || format!("{} frames", rec.frames.len()))?;

    let frames: Vec<EvalFrame> = rec
        .frames
        .iter()
        .map(|f| {
            let id = frame_id(&rec.id, f.index);
            let preds = f
                .boxes
                .iter()
                .filter(|b| b.validity == Validity::Valid)
                .map(|b| Prediction::from_box(id.clone(), b, 1.0))
                .collect();
            EvalFrame::new(id, &f.boxes, preds)
        })
        .collect();
    let objects: std::collections::BTreeSet<u64> = frames.iter().flat_map(|f| f.gts.iter().map(|b| b.id)).collect();
    ensure(objects.len() >= 20, || format!("only {} distinct valid objects", objects.len()))?;
    for method in [MatchMethod::Iou, MatchMethod::Distance] {
        let r = evaluate_detection(&frames, method).map_err(|e| e.to_string())?;
        if let Some(c) = r.cells.iter().find(|c| c.ap != 1.0) {
            return Err(format!("{} AP {} for {:?} at {}", method.name(), c.ap, c.class, c.threshold));
        }
        let s = &r.summary;
        ensure([s.mate, s.maoe, s.mase, s.mave] == [0.0; 4] && s.map == 1.0 && s.sds == 1.0, || {
            format!("{} summary {s:?}", method.name())
        })?;
    }
    for f in &rec.frames {
        let ious = seg_iou(&SegPrediction::from_grid(&f.bev_gt), &f.bev_gt, 0.5).map_err(|e| e.to_string())?;
        for class in BevClass::ALL {
            let non_empty = !f.bev_gt.plane(class).is_empty();
            ensure(!non_empty || ious[class.index()] == Some(1.0), || format!("frame {} {:?}", f.index, class))?;
        }
    }
    let t = within(start, Duration::from_secs(60), "identity run")?;
    Ok(format!("{} objects, 320 frames, both methods, {t}", objects.len()))
}

fn counting_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xc0ffee);
    let mut points = 0;
    for i in 0..1000 {
        let (cloud, boxes) = support::random_count_frame(&mut rng, 50_000, 100);
        points += cloud.len();
        let want = support::brute_counts(&cloud, &boxes);
        let got = count_points(&cloud, &boxes);
        ensure(got == want, || format!("frame {i}: counts differ"))?;
    }
    let t = within(start, Duration::from_secs(120), "1000 frames")?;
    Ok(format!("1000 frames, {points} points, {t}"))
}

fn bev_oracle() -> Outcome {
    let start = Instant::now();
    let mut frames = 0;
    let mut fallbacks = 0;
    let maps = ["Town01", "Town03", "Town05", "Town10HD", "Town12"];
    for seed in 0..25u64 {
        let map = maps[seed as usize % maps.len()];
        let vehicles = seed % 4;
        let o = Overrides::new()
            .with("n_vehicles", vehicles as f64)
            .with("n_pedestrians", ((seed * 7) % (6 - vehicles)) as f64)
            .with("duration_s", 0.2);
        let cfg = sample_scene_config(seed, map, RoadNetwork::for_map(map).spawn_locations(), &o).map_err(|e| e.to_string())?;
        let mut scene = generate_scene(&cfg).map_err(|e| e.to_string())?;
        if seed % 5 == 4 {
            scene = plant_elevation_conflict(scene, 8.0, 9.0).map_err(|e| e.to_string())?;
        }
        let wps = scene.waypoints();
        for f in &scene.frames {
            ensure(f.boxes.len() <= 5, || format!("{} objects", f.boxes.len()))?;
            let element = StructuringElement::Cross;
            let got = compose(&f.ego, &f.boxes, &f.overhead_mask, &f.underground_mask, &wps, &cfg.grid, element)
                .map_err(|e| e.to_string())?;
            let want = support::oracle_compose(&f.ego, &f.boxes, &f.overhead_mask, &f.underground_mask, &wps, &cfg.grid, element);
            let tag = format!("seed {seed} frame {}", f.index);
            ensure(got.road_pre_closing == want.road_pre_closing, || format!("{tag}: pre-closing road"))?;
            ensure(got.grid.channels() == &want.channels[..], || format!("{tag}: channels"))?;
            ensure(got.fallback == want.fallback, || format!("{tag}: fallback flag"))?;
            frames += 1;
            fallbacks += got.fallback as usize;
        }
    }
    ensure(frames == 100, || format!("{frames} frames"))?;

    let o = Overrides::new().with("n_vehicles", 3.0).with("n_pedestrians", 2.0).with("duration_s", 0.1);
    let cfg = sample_scene_config(99, "Town03", RoadNetwork::for_map("Town03").spawn_locations(), &o).map_err(|e| e.to_string())?;
    let base = generate_scene(&cfg).map_err(|e| e.to_string())?;
    for (dz, dist, expect) in [(7.0, 10.0, true), (5.0, 10.0, false), (7.0, 60.0, false)] {
        let s = plant_elevation_conflict(base.clone(), dz, dist).map_err(|e| e.to_string())?;
        let wps = s.waypoints();
        for f in &s.frames {
            let got = compose(&f.ego, &f.boxes, &f.overhead_mask, &f.underground_mask, &wps, &cfg.grid, StructuringElement::Cross)
                .map_err(|e| e.to_string())?;
            let oracle = support::oracle_fallback(&wps, &f.ego, &cfg.grid);
            ensure(got.fallback == expect && oracle == expect, || {
                format!("dz {dz} m, dist {dist} m: fallback {} oracle {oracle}, expected {expect}", got.fallback)
            })?;
        }
    }
    Ok(format!("100 frames ({fallbacks} with fallback), 3 elevation cases, {:.1} s", start.elapsed().as_secs_f64()))
}

fn grid_geometry() -> Outcome {
    let spec = GridSpec::default();
    let payload = BevGrid::payload_len_for(&spec);
    let fov = camera_fov_for_grid(&spec, CAMERA_HEIGHT_M);
    ensure((spec.extent() - 144.0).abs() < 1e-9, || format!("extent {}", spec.extent()))?;
    ensure(payload == 129_600, || format!("payload {payload}"))?;
    ensure((fov - 8.237).abs() <= 0.001, || format!("fov {fov}"))?;
    Ok(format!("144 m x 144 m, {payload} bytes, fov {fov:.4} deg"))
}

fn sampler_suite() -> Outcome {
    let cases = support::sampler_ks_suite(100_000, 0.001);
    let worst = cases.iter().map(|c| c.d / c.critical).fold(0.0, f64::max);
    if let Some(c) = cases.iter().find(|c| !c.passes()) {
        return Err(format!("{}: D = {:.5}, critical {:.5}", c.name, c.d, c.critical));
    }
    let (violations, mean) = support::weather_invariants(100_000);
    ensure(violations == 0, || format!("{violations} invariant violations"))?;
    ensure((mean - 44.4).abs() <= 0.3, || format!("mean cloudiness {mean:.3}"))?;
    Ok(format!("{} KS cases, max D/critical {worst:.2}, invariants hold, mean cloudiness {mean:.2}", cases.len()))
}

/// Road raster of two lanes that split at a shallow angle, so the strip of
/// background between them starts one cell wide.
fn diverging_lanes() -> Result<usize, String> {
    let spec = GridSpec::default();
    let w = 1.75;
    let theta: f64 = 2f64.to_radians();
    let mut wps = Vec::new();
    let mut x = -70.0;
    while x <= 70.0 {
        wps.push(Waypoint { position: [x, w, 0.0], lane_width: w });
        wps.push(Waypoint { position: [x, -w - (x + 70.0) * theta.tan(), 0.0], lane_width: w });
        x += 0.4;
    }
    let road = rasterize_road_from_waypoints(&wps, &Pose::origin(), &spec).bits;
    let closed = binary_closing(&road, StructuringElement::Cross);
    let mut one_cell_rows = 0;
    for r in 0..spec.side() {
        let set: Vec<usize> = (0..spec.side()).filter(|&c| road.get(r, c)).collect();
        for pair in set.windows(2) {
            let gap = pair[1] - pair[0] - 1;
            if gap == 1 {
                one_cell_rows += 1;
                ensure(closed.get(r, pair[0] + 1), || format!("row {r}: 1-cell gap left open"))?;
            } else if gap >= 3 {
                ensure(!closed.get(r, pair[0] + gap / 2 + 1), || format!("row {r}: {gap}-cell gap filled"))?;
            }
        }
    }
    ensure(one_cell_rows > 0, || "lanes never form a 1-cell gap".into())?;
    Ok(one_cell_rows)
}

fn morphology() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(64);
    for i in 0..10_000 {
        let density = rng.random_range(0.05..0.95);
        let p = BitPlane::from_fn(64, 64, |_, _| rng.random_bool(density));
        for element in [StructuringElement::Cross, StructuringElement::Square] {
            let once = binary_closing(&p, element);
            ensure(p.is_subset_of(&once), || format!("mask {i}: not extensive"))?;
            ensure(binary_closing(&once, element) == once, || format!("mask {i}: not idempotent"))?;
            if i % 10 == 0 {
                ensure(once == support::oracle_closing(&p, element), || format!("mask {i}: differs from definition"))?;
            }
        }
    }
    let rows = diverging_lanes()?;
    Ok(format!("10000 masks x 2 elements, lane split gap filled on {rows} rows"))
}

fn generate(cfg: &Path, out: &Path, extra: &[&str]) -> std::process::Command {
    let mut c = common::bin();
    c.args(["generate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--jobs", "1"]);
    c.args(extra);
    c.stdout(Stdio::null()).stderr(Stdio::null());
    c
}

fn crash_resume() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = dir.path().join("config.json");
    std::fs::write(
        &cfg,
        r#"{"seed": 77, "scenario": {"overrides": {"duration_s": 2.0, "n_vehicles": 60, "n_pedestrians": 60}},
            "scenes": {"Town01": {"train": 3, "test": 1}, "Town05": {"val": 2}}}"#,
    )
    .map_err(|e| e.to_string())?;
    let n = 6;
    let full = dir.path().join("full");
    let status = generate(&cfg, &full, &[]).status().map_err(|e| e.to_string())?;
    ensure(status.success(), || "uninterrupted run failed".into())?;

    // Hard kill from outside once k scenes are committed.
    let killed = dir.path().join("killed");
    let mut child = generate(&cfg, &killed, &[]).spawn().map_err(|e| e.to_string())?;
    let k = 2;
    let deadline = Instant::now() + Duration::from_secs(120);
    loop {
        let done = Manifest::load(&killed).map(|m| m.completed().count()).unwrap_or(0);
        if done >= k || Instant::now() > deadline {
            break;
        }
        if child.try_wait().map_err(|e| e.to_string())?.is_some() {
            break;
        }
        std::thread::sleep(Duration::from_millis(2));
    }
    let _ = child.kill();
    let _ = child.wait();
    let at_kill = Manifest::load(&killed).map(|m| m.completed().count()).unwrap_or(0);
    ensure(at_kill < n, || "run finished before it could be killed".into())?;

    // In-process abort right after the k-th commit.
    let aborted = dir.path().join("aborted");
    let status = generate(&cfg, &aborted, &["--stop-after", "3"]).status().map_err(|e| e.to_string())?;
    ensure(!status.success(), || "--stop-after did not abort".into())?;

    for (name, root) in [("killed", &killed), ("aborted", &aborted)] {
        let status = generate(&cfg, root, &[]).status().map_err(|e| e.to_string())?;
        ensure(status.success(), || format!("{name}: resume failed"))?;
        let m = Manifest::load(root).map_err(|e| e.to_string())?;
        ensure(m.completed().count() == n, || format!("{name}: {} committed", m.completed().count()))?;
        if let Some(d) = common::tree_diff(&full, root) {
            return Err(format!("{name}: {d}"));
        }
    }
    Ok(format!("{n} scenes; killed at {at_kill} committed, aborted at 3; both byte-identical after resume"))
}

fn main() {
    let checks: [Check; 8] = [
        ("detection score formula on published rows", score_rows),
        ("zero-noise pipeline identity", zero_noise_identity),
        ("point counting equals brute force", counting_oracle),
        ("BEV ground truth equals per-cell oracle", bev_oracle),
        ("grid geometry", grid_geometry),
        ("sampler distribution suite", sampler_suite),
        ("morphology properties", morphology),
        ("crash and resume", crash_resume),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
