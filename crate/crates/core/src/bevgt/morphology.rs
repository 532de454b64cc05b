//! Binary morphology on [`BitPlane`]s with small symmetric elements.
//!
//! Dilation treats cells outside the plane as background and erosion treats
//! them as foreground. With that pairing the two operators are adjoint on the
//! bounded plane, so their composition is a true closing (extensive,
//! increasing and idempotent) right up to the border.

use serde::{Deserialize, Serialize};

use crate::grid::BitPlane;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StructuringElement {
    /// 3x3 cross (center plus 4-neighbours).
    #[default]
    Cross,
    /// Full 3x3 square (center plus 8-neighbours).
    Square,
}

impl StructuringElement {
    pub fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            StructuringElement::Cross => &[(0, 0), (-1, 0), (1, 0), (0, -1), (0, 1)],
            StructuringElement::Square => &[
                (0, 0),
                (-1, -1),
                (-1, 0),
                (-1, 1),
                (0, -1),
                (0, 1),
                (1, -1),
                (1, 0),
                (1, 1),
            ],
        }
    }
}

/// `out(r, c) = input(r + dr, c + dc)`, or `fill` when that cell is outside.
/// `dc` must be in `-1..=1`.
fn shifted(input: &BitPlane, dr: isize, dc: isize, fill: bool) -> BitPlane {
    debug_assert!((-1..=1).contains(&dc));
    let (w, h) = (input.width(), input.height());
    let mut out = BitPlane::new(w, h);
    if w == 0 {
        return out;
    }
    let wpr = input.words_per_row();
    let tail = input.tail_mask();
    let fill_word = if fill { u64::MAX } else { 0 };
    let last = w - 1;
    for r in 0..h {
        let src_r = r as isize + dr;
        let dst = out.row_words_mut(r);
        if src_r < 0 || src_r >= h as isize {
            dst.fill(fill_word);
        } else {
            let src = input.row_words(src_r as usize);
            match dc {
                0 => dst.copy_from_slice(src),
                1 => {
                    for i in 0..wpr {
                        let next = if i + 1 < wpr { src[i + 1] << 63 } else { 0 };
                        dst[i] = (src[i] >> 1) | next;
                    }
                    let word = &mut dst[last / 64];
                    let bit = 1u64 << (last % 64);
                    if fill {
                        *word |= bit;
                    } else {
                        *word &= !bit;
                    }
                }
                _ => {
                    for i in 0..wpr {
                        let prev = if i > 0 { src[i - 1] >> 63 } else { 0 };
                        dst[i] = (src[i] << 1) | prev;
                    }
                    if fill {
                        dst[0] |= 1;
                    } else {
                        dst[0] &= !1;
                    }
                }
            }
        }
        dst[wpr - 1] &= tail;
    }
    out
}

pub fn dilate(input: &BitPlane, element: StructuringElement) -> BitPlane {
    let mut out = BitPlane::new(input.width(), input.height());
    for &(dr, dc) in element.offsets() {
        let s = shifted(input, dr, dc, false);
        out.or_assign(&s);
    }
    out
}

pub fn erode(input: &BitPlane, element: StructuringElement) -> BitPlane {
    let mut out = input.clone();
    for &(dr, dc) in element.offsets() {
        if (dr, dc) == (0, 0) {
            continue;
        }
        out.and_assign(&shifted(input, dr, dc, true));
    }
    out
}

/// Dilation followed by erosion with the same element.
pub fn binary_closing(input: &BitPlane, element: StructuringElement) -> BitPlane {
    erode(&dilate(input, element), element)
}
