//! Plain-text report tables.

use std::fmt::Write;

use super::detection::DetectionReport;
use super::matching::MatchMethod;
use super::seg::SegmentationReport;
use crate::model::BevClass;

fn thresholds_label(method: MatchMethod, ts: &[f64]) -> String {
    let list: Vec<String> = ts.iter().map(|t| format!("{t}")).collect();
    match method {
        MatchMethod::Iou => format!("IoU thresholds {{{}}}", list.join(", ")),
        MatchMethod::Distance => format!("distance thresholds {{{}}} m", list.join(", ")),
    }
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.digits$}"))
}

pub fn detection_table(r: &DetectionReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "3D detection, {} matching, {}, {} frames",
        r.method.name(),
        thresholds_label(r.method, &r.thresholds),
        r.frames
    );
    let _ = writeln!(
        s,
        "{:<12} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}",
        "class", "gt", "AP[%]", "ATE", "AOE", "ASE", "AVE"
    );
    for (class, a) in r.per_class() {
        let n_gt = r.cells.iter().find(|c| c.class == class).map_or(0, |c| c.n_gt);
        let has_tp = r.cells.iter().any(|c| c.class == class && c.errors.is_some());
        let tp = |v: f64| opt(has_tp.then_some(v), 3);
        let _ = writeln!(
            s,
            "{:<12} {:>8} {:>8.1} {:>8} {:>8} {:>8} {:>8}",
            class.name(),
            n_gt,
            a.map * 100.0,
            tp(a.mate),
            tp(a.maoe),
            tp(a.mase),
            tp(a.mave)
        );
    }
    let m = &r.summary;
    let _ = writeln!(
        s,
        "\n{:>8} {:>8} {:>8} {:>8} {:>8} {:>8}",
        "mAP[%]", "mATE", "mAOE", "mASE", "mAVE", "SDS[%]"
    );
    let _ = writeln!(
        s,
        "{:>8.1} {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>8.1}",
        m.map * 100.0,
        m.mate,
        m.maoe,
        m.mase,
        m.mave,
        m.sds * 100.0
    );
    s
}

pub fn segmentation_table(r: &SegmentationReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "BEV segmentation IoU [%], {} frames", r.frames);
    let _ = write!(s, "{:>9}", "threshold");
    for c in BevClass::ALL {
        let _ = write!(s, " {:>10}", c.name());
    }
    let _ = writeln!(s, " {:>8}", "mIoU");
    for row in &r.rows {
        let _ = write!(s, "{:>9}", format!("{}", row.threshold));
        for c in &row.classes {
            let _ = write!(s, " {:>10}", opt(c.iou.map(|v| v * 100.0), 1));
        }
        let _ = writeln!(s, " {:>8}", opt(row.miou.map(|v| v * 100.0), 1));
    }
    s
}
