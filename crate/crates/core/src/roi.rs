//! Finger localization against the dark background.
//!
//! Each column is scanned with a vertical step detector: a block of
//! `edge_half_height` rows on one side of a candidate boundary minus the
//! block on the other side. The upper boundary is the first tissue row and
//! is searched in the top half; the lower boundary is the last tissue row and
//! is searched in the bottom half.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame::Frame;

/// Columns whose inside run is shorter than this are skipped by profile
/// based stages.
pub const MIN_USABLE_RUN: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FingerMask {
    width: usize,
    height: usize,
    upper: Vec<usize>,
    lower: Vec<usize>,
}

impl FingerMask {
    /// Mask with explicit per-column boundaries (inclusive rows).
    pub fn from_boundaries(height: usize, upper: Vec<usize>, lower: Vec<usize>) -> Result<Self> {
        if upper.len() != lower.len() || upper.is_empty() {
            return Err(Error::Dimension("boundary vectors differ in length".into()));
        }
        for (x, (&u, &l)) in upper.iter().zip(&lower).enumerate() {
            if u > l || l >= height {
                return Err(Error::Dimension(format!(
                    "column {x}: boundaries {u}..={l} invalid for height {height}"
                )));
            }
        }
        Ok(Self {
            width: upper.len(),
            height,
            upper,
            lower,
        })
    }

    /// Every pixel inside.
    pub fn full(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            upper: vec![0; width],
            lower: vec![height - 1; width],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn upper_boundary(&self) -> &[usize] {
        &self.upper
    }

    pub fn lower_boundary(&self) -> &[usize] {
        &self.lower
    }

    #[inline]
    pub fn inside(&self, x: usize, y: usize) -> bool {
        y >= self.upper[x] && y <= self.lower[x]
    }

    pub fn run_len(&self, x: usize) -> usize {
        self.lower[x] - self.upper[x] + 1
    }

    pub fn column_usable(&self, x: usize) -> bool {
        self.run_len(x) >= MIN_USABLE_RUN
    }

    pub fn count_inside(&self) -> usize {
        (0..self.width).map(|x| self.run_len(x)).sum()
    }

    /// Row-major boolean grid.
    pub fn to_grid(&self) -> Vec<bool> {
        let mut grid = vec![false; self.width * self.height];
        for x in 0..self.width {
            for y in self.upper[x]..=self.lower[x] {
                grid[y * self.width + x] = true;
            }
        }
        grid
    }
}

pub fn localize_finger(frame: &Frame, edge_half_height: usize) -> Result<FingerMask> {
    let (w, h) = (frame.width(), frame.height());
    if edge_half_height == 0 {
        return Err(Error::param("edge_half_height must be >= 1"));
    }
    if h <= 2 * edge_half_height {
        return Err(Error::Dimension(format!(
            "frame height {h} too short for edge half-height {edge_half_height}"
        )));
    }
    let (upper, lower): (Vec<usize>, Vec<usize>) = (0..w)
        .into_par_iter()
        .map(|x| column_boundaries(frame, x, edge_half_height))
        .unzip();
    Ok(FingerMask {
        width: w,
        height: h,
        upper,
        lower,
    })
}

fn column_boundaries(frame: &Frame, x: usize, k: usize) -> (usize, usize) {
    let h = frame.height();
    let center = h / 2;
    let block = |from: usize, to: usize| -> f64 { (from..to).map(|y| frame.get(x, y)).sum() };

    // upper: tissue (bright) below the candidate row, background above
    let upper = argmax_toward(center, (k..=center).map(|r| (r, block(r, r + k) - block(r - k, r))));
    // lower: tissue above and including the candidate row, background below
    let lower = argmax_toward(
        center,
        (center..=h - 1 - k).map(|r| (r, block(r + 1 - k, r + 1) - block(r + 1, r + 1 + k))),
    );
    (upper, lower)
}

/// Row with the largest response; ties go to the row nearest `center`.
fn argmax_toward(center: usize, responses: impl Iterator<Item = (usize, f64)>) -> usize {
    let mut best: Option<(usize, f64)> = None;
    for (r, v) in responses {
        best = match best {
            None => Some((r, v)),
            Some((br, bv)) => {
                if v > bv || (v == bv && r.abs_diff(center) < br.abs_diff(center)) {
                    Some((r, v))
                } else {
                    Some((br, bv))
                }
            }
        };
    }
    best.map(|(r, _)| r).unwrap_or(center)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn banded(w: usize, h: usize, top: usize, bottom: usize) -> Frame {
        let mut px = vec![0.05; w * h];
        for y in top..=bottom {
            for x in 0..w {
                px[y * w + x] = 0.9;
            }
        }
        Frame::new(w, h, px).unwrap()
    }

    /// Brute force: evaluate the step response at every admissible row and
    /// take the best one, independent of the production scan.
    fn brute_upper(col: &[f64], k: usize) -> usize {
        let c = col.len() / 2;
        let mut best = (usize::MAX, f64::NEG_INFINITY);
        for r in k..=c {
            let below: f64 = col[r..r + k].iter().sum();
            let above: f64 = col[r - k..r].iter().sum();
            let v = below - above;
            if v > best.1 || (v == best.1 && r.abs_diff(c) < best.0.abs_diff(c)) {
                best = (r, v);
            }
        }
        best.0
    }

    #[test]
    fn step_band_boundaries() {
        let f = banded(8, 40, 10, 29);
        let m = localize_finger(&f, 4).unwrap();
        for x in 0..8 {
            assert_eq!(m.upper_boundary()[x], 10);
            assert_eq!(m.lower_boundary()[x], 29);
            let col: Vec<f64> = (0..40).map(|y| f.get(x, y)).collect();
            assert_eq!(brute_upper(&col, 4), 10);
        }
        assert_eq!(m.count_inside(), 8 * 20);
    }

    #[test]
    fn uniform_frame_ties_to_center() {
        let f = Frame::filled(5, 30, 0.4).unwrap();
        let m = localize_finger(&f, 4).unwrap();
        for x in 0..5 {
            assert_eq!(m.upper_boundary()[x], 15);
            assert_eq!(m.lower_boundary()[x], 15);
            assert!(m.inside(x, 15));
        }
    }

    #[test]
    fn too_short_frame() {
        let f = Frame::filled(3, 8, 0.1).unwrap();
        assert!(matches!(localize_finger(&f, 4), Err(Error::Dimension(_))));
    }

    #[test]
    fn vertical_translation_moves_boundaries_exactly() {
        let base = localize_finger(&banded(4, 60, 18, 41), 4).unwrap();
        for k in [1usize, 3, 5] {
            let m = localize_finger(&banded(4, 60, 18 + k, 41 + k), 4).unwrap();
            for x in 0..4 {
                assert_eq!(m.upper_boundary()[x], base.upper_boundary()[x] + k);
                assert_eq!(m.lower_boundary()[x], base.lower_boundary()[x] + k);
            }
        }
    }

    #[test]
    fn mask_is_column_convex() {
        let m = localize_finger(&banded(6, 48, 12, 37), 4).unwrap();
        let grid = m.to_grid();
        for x in 0..6 {
            let rows: Vec<usize> = (0..48).filter(|&y| grid[y * 6 + x]).collect();
            assert!(rows.windows(2).all(|p| p[1] == p[0] + 1));
        }
    }
}
