//! Oriented 3D box overlap for yaw-only boxes.

use crate::model::BBox3D;

use super::EvalError;

type Pt = [f64; 2];

fn cross(o: Pt, a: Pt, b: Pt) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Shoelace area of a simple polygon (positive for counter-clockwise).
pub fn polygon_area(poly: &[Pt]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let twice: f64 = (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum();
    twice / 2.0
}

/// Sutherland-Hodgman clip of `subject` by the convex, counter-clockwise `clip`.
pub fn clip_convex(subject: &[Pt], clip: &[Pt]) -> Vec<Pt> {
    // Points within this distance-like margin of an edge count as inside, so
    // coincident edges do not produce slivers of the wrong sign.
    const TOL: f64 = 1e-12;
    let mut out = subject.to_vec();
    for i in 0..clip.len() {
        if out.is_empty() {
            break;
        }
        let (a, b) = (clip[i], clip[(i + 1) % clip.len()]);
        let input = std::mem::take(&mut out);
        for j in 0..input.len() {
            let p = input[j];
            let q = input[(j + 1) % input.len()];
            let cp = cross(a, b, p);
            let cq = cross(a, b, q);
            let p_in = cp >= -TOL;
            let q_in = cq >= -TOL;
            if p_in {
                out.push(p);
            }
            if p_in != q_in {
                let t = cp / (cp - cq);
                out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
            }
        }
    }
    out
}

/// Footprint intersection area of two boxes.
pub fn footprint_intersection(a: &BBox3D, b: &BBox3D) -> f64 {
    polygon_area(&clip_convex(&a.footprint(), &b.footprint())).max(0.0)
}

fn check(b: &BBox3D) -> Result<(), EvalError> {
    if b.has_positive_size() && b.center.iter().chain([&b.yaw]).all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(EvalError::DegenerateBox { id: b.id, size: b.size })
    }
}

/// 3D intersection over union: footprint polygon overlap times the overlap of
/// the vertical extents.
pub fn iou3d(a: &BBox3D, b: &BBox3D) -> Result<f64, EvalError> {
    check(a)?;
    check(b)?;
    let za = (a.center[2] - a.size[2] / 2.0, a.center[2] + a.size[2] / 2.0);
    let zb = (b.center[2] - b.size[2] / 2.0, b.center[2] + b.size[2] / 2.0);
    let dz = (za.1.min(zb.1) - za.0.max(zb.0)).max(0.0);
    if dz == 0.0 {
        return Ok(0.0);
    }
    let inter = footprint_intersection(a, b) * dz;
    let union = a.volume() + b.volume() - inter;
    Ok((inter / union).clamp(0.0, 1.0))
}

/// IoU of two boxes after moving them to a common center and yaw, which
/// depends on the sizes only.
pub fn aligned_iou(a: [f64; 3], b: [f64; 3]) -> f64 {
    let inter: f64 = (0..3).map(|k| a[k].min(b[k])).product();
    let union = a.iter().product::<f64>() + b.iter().product::<f64>() - inter;
    inter / union
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DetectionClass;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn cube(center: [f64; 3], size: [f64; 3], yaw: f64) -> BBox3D {
        BBox3D::new(0, DetectionClass::Car, center, size, yaw)
    }

    /// Interval product oracle for boxes whose yaw is a multiple of pi/2.
    fn axis_oracle(a: &BBox3D, b: &BBox3D) -> f64 {
        let ext = |bx: &BBox3D| {
            let quarter = (bx.yaw / FRAC_PI_2).round() as i64;
            let (l, w) = if quarter.rem_euclid(2) == 0 {
                (bx.size[0], bx.size[1])
            } else {
                (bx.size[1], bx.size[0])
            };
            [l, w, bx.size[2]]
        };
        let (ea, eb) = (ext(a), ext(b));
        let inter: f64 = (0..3)
            .map(|k| {
                let lo = (a.center[k] - ea[k] / 2.0).max(b.center[k] - eb[k] / 2.0);
                let hi = (a.center[k] + ea[k] / 2.0).min(b.center[k] + eb[k] / 2.0);
                (hi - lo).max(0.0)
            })
            .product();
        inter / (a.volume() + b.volume() - inter)
    }

    #[test]
    fn examples() {
        let a = cube([0.0; 3], [2.0; 3], 0.0);
        assert_eq!(iou3d(&a, &a).unwrap(), 1.0);
        let b = cube([1.0, 0.0, 0.0], [2.0; 3], 0.0);
        assert!((iou3d(&a, &b).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        let far = cube([10.0, 0.0, 0.0], [2.0; 3], 0.0);
        assert_eq!(iou3d(&a, &far).unwrap(), 0.0);
        let above = cube([0.0, 0.0, 5.0], [2.0; 3], 0.0);
        assert_eq!(iou3d(&a, &above).unwrap(), 0.0);
        let flat = cube([0.0; 3], [2.0, 0.0, 2.0], 0.0);
        assert!(matches!(iou3d(&a, &flat), Err(EvalError::DegenerateBox { .. })));
    }

    #[test]
    fn rotated_square_inside_square() {
        // A unit square rotated 45 degrees inside a 2x2 square.
        let a = cube([0.0; 3], [2.0, 2.0, 1.0], 0.0);
        let b = cube([0.0; 3], [1.0, 1.0, 1.0], std::f64::consts::FRAC_PI_4);
        assert!((iou3d(&a, &b).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn aligned_iou_example() {
        assert!((aligned_iou([2.0; 3], [1.0; 3]) - 0.125).abs() < 1e-15);
    }

    fn arb_box(quarter: bool) -> impl Strategy<Value = BBox3D> {
        (-3.0..3.0f64, -3.0..3.0f64, -1.0..1.0f64, 0.2..5.0f64, 0.2..3.0f64, 0.2..3.0f64, -3.0..3.0f64, -2i32..=2)
            .prop_map(move |(x, y, z, l, w, h, yaw, q)| {
                let yaw = if quarter { q as f64 * FRAC_PI_2 } else { yaw };
                cube([x, y, z], [l, w, h], yaw)
            })
    }

    proptest! {
        #[test]
        fn symmetric_and_bounded(a in arb_box(false), b in arb_box(false)) {
            let ab = iou3d(&a, &b).unwrap();
            let ba = iou3d(&b, &a).unwrap();
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert!((ab - ba).abs() < 1e-9);
        }

        #[test]
        fn common_rotation_invariant(a in arb_box(false), b in arb_box(false), t in -3.0..3.0f64) {
            let rot = |bx: &BBox3D| {
                let c = crate::model::rotate_z(bx.center, t);
                cube(c, bx.size, crate::model::normalize_angle(bx.yaw + t))
            };
            let before = iou3d(&a, &b).unwrap();
            let after = iou3d(&rot(&a), &rot(&b)).unwrap();
            prop_assert!((before - after).abs() < 1e-9);
        }

        #[test]
        fn matches_interval_oracle(a in arb_box(true), b in arb_box(true)) {
            prop_assert!((iou3d(&a, &b).unwrap() - axis_oracle(&a, &b)).abs() < 1e-9);
        }
    }
}
