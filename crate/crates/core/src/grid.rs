//! Ego-centered BEV grid geometry and bit-plane storage.
//!
//! The grid is aligned with the ego heading. Row `0` is the rear edge and rows
//! grow forward (`+x`); column `0` is the left edge and columns grow to the
//! right (`-y`). Cell `(0, 0)` is therefore the rear-left corner.

use serde::{Deserialize, Serialize};

use crate::model::{BevClass, Vec3, BOUNDARY_EPS};

pub const DEFAULT_CELLS: u32 = 360;
pub const DEFAULT_CELL_SIZE: f64 = 0.4;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GridError {
    #[error("grid side must be even and positive, got {0}")]
    BadCellCount(u32),
    #[error("cell size must be finite and positive, got {0}")]
    BadCellSize(f64),
    #[error("grid mismatch: {left} cells vs {right} cells")]
    Mismatch { left: usize, right: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Cells per side (`l`).
    pub cells: u32,
    /// Metres per cell side (`d`).
    pub cell_size_m: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            cells: DEFAULT_CELLS,
            cell_size_m: DEFAULT_CELL_SIZE,
        }
    }
}

impl GridSpec {
    pub fn new(cells: u32, cell_size_m: f64) -> Result<Self, GridError> {
        let spec = Self { cells, cell_size_m };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), GridError> {
        if self.cells == 0 || !self.cells.is_multiple_of(2) {
            return Err(GridError::BadCellCount(self.cells));
        }
        if !(self.cell_size_m.is_finite() && self.cell_size_m > 0.0) {
            return Err(GridError::BadCellSize(self.cell_size_m));
        }
        Ok(())
    }

    pub fn side(&self) -> usize {
        self.cells as usize
    }

    /// Side length of the covered square, in metres.
    pub fn extent(&self) -> f64 {
        self.cells as f64 * self.cell_size_m
    }

    pub fn half_extent(&self) -> f64 {
        self.extent() / 2.0
    }

    /// Ego-frame `(x, y)` of the center of cell `(row, col)`.
    #[inline]
    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        let d = self.cell_size_m;
        let h = self.half_extent();
        ((row as f64 + 0.5) * d - h, h - (col as f64 + 0.5) * d)
    }

    /// Cell containing the ego-frame point, if inside the grid.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let d = self.cell_size_m;
        let h = self.half_extent();
        let r = ((x + h) / d).floor();
        let c = ((h - y) / d).floor();
        let n = self.cells as f64;
        (r >= 0.0 && r < n && c >= 0.0 && c < n).then_some((r as usize, c as usize))
    }

    /// Conservative `(rows, cols)` index ranges whose centers may fall in the
    /// ego-frame axis-aligned rectangle `[x0, x1] x [y0, y1]`.
    pub fn cell_range(
        &self,
        x0: f64,
        x1: f64,
        y0: f64,
        y1: f64,
    ) -> Option<(std::ops::Range<usize>, std::ops::Range<usize>)> {
        let d = self.cell_size_m;
        let h = self.half_extent();
        let n = self.cells as i64;
        let r0 = (((x0 + h) / d).floor() as i64 - 1).max(0);
        let r1 = (((x1 + h) / d).floor() as i64 + 2).min(n);
        let c0 = (((h - y1) / d).floor() as i64 - 1).max(0);
        let c1 = (((h - y0) / d).floor() as i64 + 2).min(n);
        (r0 < r1 && c0 < c1).then_some((r0 as usize..r1 as usize, c0 as usize..c1 as usize))
    }

    /// Cell size in whole millimetres, used by the binary formats.
    pub fn cell_size_mm(&self) -> Option<u32> {
        let mm = self.cell_size_m * 1000.0;
        let rounded = mm.round();
        ((mm - rounded).abs() < 1e-6 && rounded >= 1.0 && rounded <= u32::MAX as f64)
            .then_some(rounded as u32)
    }
}

/// Calls `visit(row, col)` for every cell whose center lies inside the
/// rectangle of half extents `(half_len, half_wid)` centered at ego-frame
/// `center` with heading `yaw`. Boundary centers count as inside.
pub fn for_each_footprint_cell(
    spec: &GridSpec,
    center: Vec3,
    yaw: f64,
    half_len: f64,
    half_wid: f64,
    mut visit: impl FnMut(usize, usize),
) {
    let (s, c) = yaw.sin_cos();
    let ex = c.abs() * half_len + s.abs() * half_wid;
    let ey = s.abs() * half_len + c.abs() * half_wid;
    let Some((rows, cols)) = spec.cell_range(
        center[0] - ex,
        center[0] + ex,
        center[1] - ey,
        center[1] + ey,
    ) else {
        return;
    };
    for row in rows {
        for col in cols.clone() {
            let (x, y) = spec.cell_center(row, col);
            let (dx, dy) = (x - center[0], y - center[1]);
            let lx = c * dx + s * dy;
            let ly = -s * dx + c * dy;
            if lx.abs() <= half_len + BOUNDARY_EPS && ly.abs() <= half_wid + BOUNDARY_EPS {
                visit(row, col);
            }
        }
    }
}

/// Dense binary plane, one bit per cell, rows padded to whole `u64` words.
///
/// Padding bits are always zero so derived equality is cell equality.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitPlane {
    width: usize,
    height: usize,
    words_per_row: usize,
    words: Vec<u64>,
}

impl BitPlane {
    pub fn new(width: usize, height: usize) -> Self {
        let words_per_row = width.div_ceil(64);
        Self {
            width,
            height,
            words_per_row,
            words: vec![0; words_per_row * height],
        }
    }

    pub fn square(side: usize) -> Self {
        Self::new(side, side)
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut plane = Self::new(width, height);
        for r in 0..height {
            for c in 0..width {
                if f(r, c) {
                    plane.set(r, c, true);
                }
            }
        }
        plane
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn same_shape(&self, other: &BitPlane) -> bool {
        self.width == other.width && self.height == other.height
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        debug_assert!(row < self.height && col < self.width);
        let w = self.words[row * self.words_per_row + col / 64];
        (w >> (col % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        debug_assert!(row < self.height && col < self.width);
        let w = &mut self.words[row * self.words_per_row + col / 64];
        let bit = 1u64 << (col % 64);
        if value {
            *w |= bit;
        } else {
            *w &= !bit;
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn row_words(&self, row: usize) -> &[u64] {
        &self.words[row * self.words_per_row..(row + 1) * self.words_per_row]
    }

    pub(crate) fn row_words_mut(&mut self, row: usize) -> &mut [u64] {
        &mut self.words[row * self.words_per_row..(row + 1) * self.words_per_row]
    }

    pub(crate) fn words_per_row(&self) -> usize {
        self.words_per_row
    }

    /// Mask for the valid bits of the last word in a row.
    pub(crate) fn tail_mask(&self) -> u64 {
        match self.width % 64 {
            0 => u64::MAX,
            r => (1u64 << r) - 1,
        }
    }

    /// Cell count of `self & other`.
    pub fn intersection_count(&self, other: &BitPlane) -> usize {
        assert!(self.same_shape(other));
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    /// Cell count of `self | other`.
    pub fn union_count(&self, other: &BitPlane) -> usize {
        assert!(self.same_shape(other));
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a | b).count_ones() as usize)
            .sum()
    }

    pub fn or_assign(&mut self, other: &BitPlane) {
        assert!(self.same_shape(other));
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn and_assign(&mut self, other: &BitPlane) {
        assert!(self.same_shape(other));
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= b;
        }
    }

    /// True when every set cell of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &BitPlane) -> bool {
        self.same_shape(other) && self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.height).flat_map(move |r| {
            self.row_words(r)
                .iter()
                .enumerate()
                .flat_map(move |(wi, &w)| {
                    let mut w = w;
                    std::iter::from_fn(move || {
                        if w == 0 {
                            return None;
                        }
                        let b = w.trailing_zeros() as usize;
                        w &= w - 1;
                        Some((r, wi * 64 + b))
                    })
                })
        })
    }

    /// Packs cells in row-major order, least-significant bit first, with no
    /// row padding. Appends `ceil(width * height / 8)` bytes to `out`.
    pub fn pack_into(&self, out: &mut Vec<u8>) {
        let total = self.width * self.height;
        let start = out.len();
        out.resize(start + total.div_ceil(8), 0);
        let buf = &mut out[start..];
        let mut idx = 0usize;
        for r in 0..self.height {
            for c in 0..self.width {
                if self.get(r, c) {
                    buf[idx / 8] |= 1 << (idx % 8);
                }
                idx += 1;
            }
        }
    }

    /// Inverse of [`BitPlane::pack_into`]. `bytes` must hold at least
    /// `ceil(width * height / 8)` bytes.
    pub fn unpack(width: usize, height: usize, bytes: &[u8]) -> Self {
        let mut plane = Self::new(width, height);
        let mut idx = 0usize;
        for r in 0..height {
            for c in 0..width {
                if bytes[idx / 8] >> (idx % 8) & 1 == 1 {
                    plane.set(r, c, true);
                }
                idx += 1;
            }
        }
        plane
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskProvenance {
    Overhead,
    Underground,
    Synthetic,
}

impl MaskProvenance {
    pub fn code(self) -> u8 {
        match self {
            MaskProvenance::Overhead => 0,
            MaskProvenance::Underground => 1,
            MaskProvenance::Synthetic => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(MaskProvenance::Overhead),
            1 => Some(MaskProvenance::Underground),
            2 => Some(MaskProvenance::Synthetic),
            _ => None,
        }
    }
}

/// Square semantic image aligned with the BEV grid: pixel `(r, c)` covers
/// grid cell `(r, c)`. Each pixel is a byte of [`BevClass::bit`] flags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SemanticMask {
    side: usize,
    labels: Vec<u8>,
    pub provenance: MaskProvenance,
}

impl SemanticMask {
    pub fn new(side: usize, provenance: MaskProvenance) -> Self {
        Self {
            side,
            labels: vec![0; side * side],
            provenance,
        }
    }

    pub fn from_labels(side: usize, labels: Vec<u8>, provenance: MaskProvenance) -> Self {
        assert_eq!(labels.len(), side * side);
        Self {
            side,
            labels,
            provenance,
        }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.labels[row * self.side + col]
    }

    #[inline]
    pub fn has(&self, row: usize, col: usize, class: BevClass) -> bool {
        self.get(row, col) & class.bit() != 0
    }

    #[inline]
    pub fn insert(&mut self, row: usize, col: usize, class: BevClass) {
        self.labels[row * self.side + col] |= class.bit();
    }

    #[inline]
    pub fn remove(&mut self, row: usize, col: usize, class: BevClass) {
        self.labels[row * self.side + col] &= !class.bit();
    }

    pub fn plane(&self, class: BevClass) -> BitPlane {
        let bit = class.bit();
        let mut plane = BitPlane::square(self.side);
        for (i, &l) in self.labels.iter().enumerate() {
            if l & bit != 0 {
                plane.set(i / self.side, i % self.side, true);
            }
        }
        plane
    }
}

/// `C x l x l` binary ground truth, one [`BitPlane`] per [`BevClass`].
#[derive(Debug, Clone, PartialEq)]
pub struct BevGrid {
    pub spec: GridSpec,
    channels: Vec<BitPlane>,
}

impl BevGrid {
    pub fn empty(spec: GridSpec) -> Self {
        Self {
            spec,
            channels: vec![BitPlane::square(spec.side()); BevClass::COUNT],
        }
    }

    pub fn from_channels(spec: GridSpec, channels: Vec<BitPlane>) -> Result<Self, GridError> {
        for ch in &channels {
            if ch.width() != spec.side() || ch.height() != spec.side() {
                return Err(GridError::Mismatch {
                    left: ch.width(),
                    right: spec.side(),
                });
            }
        }
        assert_eq!(channels.len(), BevClass::COUNT, "one plane per BEV class");
        Ok(Self { spec, channels })
    }

    pub fn plane(&self, class: BevClass) -> &BitPlane {
        &self.channels[class.index()]
    }

    pub fn plane_mut(&mut self, class: BevClass) -> &mut BitPlane {
        &mut self.channels[class.index()]
    }

    pub fn channels(&self) -> &[BitPlane] {
        &self.channels
    }

    pub fn labels_at(&self, row: usize, col: usize) -> Vec<BevClass> {
        BevClass::ALL
            .into_iter()
            .filter(|c| self.plane(*c).get(row, col))
            .collect()
    }

    /// Channel-major packed payload: `C * l * l` bits.
    pub fn packed_payload(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.payload_len());
        for ch in &self.channels {
            ch.pack_into(&mut out);
        }
        out
    }

    pub fn payload_len(&self) -> usize {
        Self::payload_len_for(&self.spec)
    }

    pub fn payload_len_for(spec: &GridSpec) -> usize {
        BevClass::COUNT * (spec.side() * spec.side()).div_ceil(8)
    }

    pub fn from_packed_payload(spec: GridSpec, bytes: &[u8]) -> Self {
        let side = spec.side();
        let per = (side * side).div_ceil(8);
        let channels = (0..BevClass::COUNT)
            .map(|k| BitPlane::unpack(side, side, &bytes[k * per..(k + 1) * per]))
            .collect();
        Self { spec, channels }
    }
}
