//! Binary morphology on vein maps.
//!
//! Pixels beyond the frame count as background for both dilation and
//! erosion, so erosion eats a border of `radius` pixels from a full map.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::veinmap::VeinMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Disk,
    Square,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StructuringElement {
    shape: Shape,
    radius: usize,
}

impl StructuringElement {
    pub fn new(shape: Shape, radius: usize) -> Result<Self> {
        if radius < 1 {
            return Err(Error::param("structuring element radius must be >= 1"));
        }
        Ok(Self { shape, radius })
    }

    pub fn square(radius: usize) -> Result<Self> {
        Self::new(Shape::Square, radius)
    }

    pub fn disk(radius: usize) -> Result<Self> {
        Self::new(Shape::Disk, radius)
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    /// Offsets `(dx, dy)` covered by the element.
    pub fn offsets(&self) -> Vec<(isize, isize)> {
        let r = self.radius as isize;
        let mut out = Vec::new();
        for dy in -r..=r {
            for dx in -r..=r {
                if self.shape == Shape::Square || dx * dx + dy * dy <= r * r {
                    out.push((dx, dy));
                }
            }
        }
        out
    }

    /// Both shapes are point-symmetric, so reflection is the identity.
    pub fn reflected(&self) -> Self {
        *self
    }
}

pub fn dilate(map: &VeinMap, se: &StructuringElement) -> VeinMap {
    let offsets = se.offsets();
    let (w, h) = (map.width() as isize, map.height() as isize);
    let mut out = VeinMap::empty(map.width(), map.height());
    for y in 0..h {
        for x in 0..w {
            if !map.get(x as usize, y as usize) {
                continue;
            }
            for &(dx, dy) in &offsets {
                let (tx, ty) = (x + dx, y + dy);
                if tx >= 0 && ty >= 0 && tx < w && ty < h {
                    out.set(tx as usize, ty as usize, true);
                }
            }
        }
    }
    out
}

pub fn erode(map: &VeinMap, se: &StructuringElement) -> VeinMap {
    let offsets = se.offsets();
    let (w, h) = (map.width() as isize, map.height() as isize);
    let mut out = VeinMap::empty(map.width(), map.height());
    for y in 0..h {
        for x in 0..w {
            let fits = offsets.iter().all(|&(dx, dy)| {
                let (sx, sy) = (x + dx, y + dy);
                sx >= 0 && sy >= 0 && sx < w && sy < h && map.get(sx as usize, sy as usize)
            });
            if fits {
                out.set(x as usize, y as usize, true);
            }
        }
    }
    out
}

/// Erode then dilate.
pub fn open(map: &VeinMap, se: &StructuringElement) -> VeinMap {
    dilate(&erode(map, se), se)
}

/// Dilate then erode.
pub fn close(map: &VeinMap, se: &StructuringElement) -> VeinMap {
    erode(&dilate(map, se), se)
}

/// Binary median: majority vote over a `window x window` neighbourhood with
/// edge replication.
pub fn median_filter(map: &VeinMap, window: usize) -> Result<VeinMap> {
    if window < 3 || window.is_multiple_of(2) {
        return Err(Error::param(format!("median window must be odd and >= 3, got {window}")));
    }
    let r = (window / 2) as isize;
    let (w, h) = (map.width() as isize, map.height() as isize);
    let majority = window * window / 2;
    let mut out = VeinMap::empty(map.width(), map.height());
    for y in 0..h {
        for x in 0..w {
            let mut count = 0;
            for dy in -r..=r {
                let sy = (y + dy).clamp(0, h - 1) as usize;
                for dx in -r..=r {
                    let sx = (x + dx).clamp(0, w - 1) as usize;
                    count += usize::from(map.get(sx, sy));
                }
            }
            if count > majority {
                out.set(x as usize, y as usize, true);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn map_from(rows: &[&str]) -> VeinMap {
        let h = rows.len();
        let w = rows[0].len();
        let cells = rows.iter().flat_map(|r| r.chars().map(|c| c == '#')).collect();
        VeinMap::new(w, h, cells).unwrap()
    }

    fn sq1() -> StructuringElement {
        StructuringElement::square(1).unwrap()
    }

    /// 8-connected components by flood fill.
    fn components(map: &VeinMap) -> usize {
        let (w, h) = (map.width(), map.height());
        let mut seen = vec![false; w * h];
        let mut count = 0;
        for start in 0..w * h {
            if !map.cells()[start] || seen[start] {
                continue;
            }
            count += 1;
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(i) = stack.pop() {
                let (x, y) = ((i % w) as isize, (i / w) as isize);
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let (nx, ny) = (x + dx, y + dy);
                        if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                            continue;
                        }
                        let j = ny as usize * w + nx as usize;
                        if map.cells()[j] && !seen[j] {
                            seen[j] = true;
                            stack.push(j);
                        }
                    }
                }
            }
        }
        count
    }

    #[test]
    fn dilate_basics() {
        assert_eq!(dilate(&VeinMap::empty(5, 5), &sq1()).count(), 0);
        let d = dilate(&map_from(&[".....", ".....", "..#..", ".....", "....."]), &sq1());
        assert_eq!(d, map_from(&[".....", ".###.", ".###.", ".###.", "....."]));
    }

    #[test]
    fn dilate_closes_two_pixel_gaps() {
        let m = map_from(&["..............", "##..##..##..##", ".............."]);
        assert_eq!(components(&m), 4);
        assert_eq!(components(&dilate(&m, &sq1())), 1);
    }

    #[test]
    fn erode_basics() {
        let full = VeinMap::new(6, 5, vec![true; 30]).unwrap();
        let e = erode(&full, &sq1());
        assert_eq!(e.count(), 4 * 3);
        assert!(!e.get(0, 0) && e.get(1, 1));
        let block = map_from(&[".....", ".###.", ".###.", ".###.", "....."]);
        assert_eq!(erode(&block, &sq1()), map_from(&[".....", ".....", "..#..", ".....", "....."]));
    }

    #[test]
    fn open_removes_specks_keeps_bands() {
        let speck = map_from(&[".....", ".....", "..#..", ".....", "....."]);
        assert_eq!(open(&speck, &sq1()).count(), 0);
        let mut rows = vec![".........."; 2];
        rows.extend(vec!["##########"; 5]);
        rows.extend(vec![".........."; 2]);
        let band = map_from(&rows);
        assert_eq!(open(&band, &sq1()), band);
    }

    #[test]
    fn median_filter_cases() {
        let ones = VeinMap::new(7, 6, vec![true; 42]).unwrap();
        assert_eq!(median_filter(&ones, 3).unwrap(), ones);
        let speck = map_from(&[".....", ".....", "..#..", ".....", "....."]);
        assert_eq!(median_filter(&speck, 3).unwrap().count(), 0);
        assert!(matches!(median_filter(&ones, 4), Err(Error::Parameter(_))));
        assert!(StructuringElement::square(0).is_err());
    }

    #[test]
    fn disk_offsets() {
        assert_eq!(StructuringElement::disk(1).unwrap().offsets().len(), 5);
        assert_eq!(StructuringElement::disk(2).unwrap().offsets().len(), 13);
        assert_eq!(sq1().offsets().len(), 9);
    }

    fn padded_map(cells: Vec<bool>, w: usize, h: usize, pad: usize) -> VeinMap {
        let (pw, ph) = (w + 2 * pad, h + 2 * pad);
        let mut m = VeinMap::empty(pw, ph);
        for y in 0..h {
            for x in 0..w {
                m.set(x + pad, y + pad, cells[y * w + x]);
            }
        }
        m
    }

    fn arb_map() -> impl Strategy<Value = (VeinMap, StructuringElement)> {
        (1usize..=2, prop::bool::ANY, proptest::collection::vec(prop::bool::weighted(0.6), 100))
            .prop_map(|(r, disk, cells)| {
                let se = if disk {
                    StructuringElement::disk(r).unwrap()
                } else {
                    StructuringElement::square(r).unwrap()
                };
                (padded_map(cells, 10, 10, r), se)
            })
    }

    proptest! {
        // Grids carry a background border of the element radius so the
        // frame edge does not break the duality.
        #[test]
        fn erosion_dilation_duality((m, se) in arb_map()) {
            let lhs = erode(&m, &se);
            let rhs = dilate(&m.complement(), &se.reflected()).complement();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn opening_is_idempotent((m, se) in arb_map()) {
            let once = open(&m, &se);
            prop_assert_eq!(open(&once, &se), once);
        }

        #[test]
        fn extensive_and_anti_extensive((m, se) in arb_map()) {
            prop_assert!(m.is_subset_of(&dilate(&m, &se)));
            prop_assert!(erode(&m, &se).is_subset_of(&m));
            prop_assert!(m.is_subset_of(&close(&m, &se)));
        }

        #[test]
        fn dilation_is_monotone((m, se) in arb_map(), extra in proptest::collection::vec(prop::bool::weighted(0.2), 196)) {
            let mut bigger = m.clone();
            for (i, add) in extra.iter().enumerate().take(m.cells().len()) {
                if *add {
                    bigger.set(i % m.width(), i / m.width(), true);
                }
            }
            prop_assert!(dilate(&m, &se).is_subset_of(&dilate(&bigger, &se)));
        }
    }
}
