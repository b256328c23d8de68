//! Repeated line tracking.
//!
//! Each walk starts at a random pixel inside the finger with a random
//! heading and advances one pixel at a time. The candidates are the heading
//! and the two directions 45 degrees to either side. A candidate is
//! admissible when the cross-section perpendicular to the step, sampled
//! `valley_radius` pixels to either side of the candidate, is a valley: both
//! flanks brighter than the candidate by at least the depth threshold. One
//! admissible candidate is drawn at random, going straight weighing more than
//! turning. Walks
//! never revisit a pixel and stop when nothing is admissible. Every pixel of
//! a walk that took at least one step gains one count in the locus space.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Method, ScoreField};
use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::roi::FingerMask;

/// Eight headings, counter-clockwise from east, 45 degrees apart.
const HEADINGS: [(isize, isize); 8] = [
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineTrackingOptions {
    pub iterations: usize,
    pub valley_radius: f64,
    /// Minimum flank-minus-center intensity for a valley.
    pub depth_threshold: f64,
    /// Relative weight of keeping the heading versus a 45 degree turn.
    pub straight_weight: f64,
    pub seed: u64,
}

impl Default for LineTrackingOptions {
    fn default() -> Self {
        Self {
            iterations: 3000,
            valley_radius: 14.0,
            depth_threshold: 0.05,
            straight_weight: 2.0,
            seed: 0,
        }
    }
}

pub fn repeated_line_tracking(
    frame: &Frame,
    mask: &FingerMask,
    iterations: usize,
    valley_radius: f64,
    seed: u64,
) -> Result<ScoreField> {
    repeated_line_tracking_with(
        frame,
        mask,
        LineTrackingOptions {
            iterations,
            valley_radius,
            seed,
            ..LineTrackingOptions::default()
        },
    )
}

pub fn repeated_line_tracking_with(
    frame: &Frame,
    mask: &FingerMask,
    opts: LineTrackingOptions,
) -> Result<ScoreField> {
    if !(opts.valley_radius >= 1.0) || !opts.valley_radius.is_finite() {
        return Err(Error::param(format!(
            "valley radius must be >= 1, got {}",
            opts.valley_radius
        )));
    }
    if !(opts.depth_threshold >= 0.0) || !(opts.straight_weight > 0.0) {
        return Err(Error::param("depth threshold must be >= 0 and straight weight > 0"));
    }
    let (w, h) = (frame.width(), frame.height());
    if mask.width() != w || mask.height() != h {
        return Err(Error::Dimension("mask does not match frame".into()));
    }

    let starts: Vec<(usize, usize)> = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .filter(|&(x, y)| mask.inside(x, y))
        .collect();
    let mut locus = vec![0u32; w * h];
    if starts.is_empty() || opts.iterations == 0 {
        return Ok(to_field(w, h, &locus, mask));
    }

    let flanks: Vec<[(isize, isize); 2]> = HEADINGS
        .iter()
        .map(|&(dx, dy)| {
            let norm = ((dx * dx + dy * dy) as f64).sqrt();
            let (nx, ny) = (-dy as f64 / norm, dx as f64 / norm);
            let ox = (nx * opts.valley_radius).round() as isize;
            let oy = (ny * opts.valley_radius).round() as isize;
            [(ox, oy), (-ox, -oy)]
        })
        .collect();

    let mut stamp = vec![0u32; w * h];
    let mut path: Vec<usize> = Vec::new();
    for walk in 0..opts.iterations {
        let mut rng = ChaCha8Rng::seed_from_u64(walk_seed(opts.seed, walk as u64));
        let tag = walk as u32 + 1;
        let (sx, sy) = starts[rng.random_range(0..starts.len())];
        let mut heading = rng.random_range(0..HEADINGS.len());
        let (mut x, mut y) = (sx as isize, sy as isize);
        path.clear();
        path.push(sy * w + sx);
        stamp[sy * w + sx] = tag;

        loop {
            let mut options: [(usize, f64); 3] = [(0, 0.0); 3];
            let mut n = 0;
            let mut total = 0.0;
            for turn in [-1isize, 0, 1] {
                let dir = (heading as isize + turn).rem_euclid(8) as usize;
                let (dx, dy) = HEADINGS[dir];
                let (cx, cy) = (x + dx, y + dy);
                if cx < 0 || cy < 0 || cx >= w as isize || cy >= h as isize {
                    continue;
                }
                let (cxu, cyu) = (cx as usize, cy as usize);
                if !mask.inside(cxu, cyu) || stamp[cyu * w + cxu] == tag {
                    continue;
                }
                let Some(depth) = valley_depth(frame, cx, cy, &flanks[dir]) else {
                    continue;
                };
                if depth >= opts.depth_threshold && depth > 0.0 {
                    let weight = if turn == 0 { opts.straight_weight } else { 1.0 };
                    options[n] = (dir, weight);
                    n += 1;
                    total += weight;
                }
            }
            if n == 0 {
                break;
            }
            let mut pick = rng.random::<f64>() * total;
            let mut chosen = options[n - 1].0;
            for &(dir, weight) in &options[..n] {
                if pick < weight {
                    chosen = dir;
                    break;
                }
                pick -= weight;
            }
            heading = chosen;
            x += HEADINGS[chosen].0;
            y += HEADINGS[chosen].1;
            let idx = y as usize * w + x as usize;
            stamp[idx] = tag;
            path.push(idx);
        }

        if path.len() > 1 {
            for &idx in &path {
                locus[idx] += 1;
            }
        }
    }
    Ok(to_field(w, h, &locus, mask))
}

/// `min(flank) - center`, or `None` when a flank leaves the frame.
fn valley_depth(frame: &Frame, x: isize, y: isize, flanks: &[(isize, isize); 2]) -> Option<f64> {
    let (w, h) = (frame.width() as isize, frame.height() as isize);
    let mut lowest = f64::INFINITY;
    for &(ox, oy) in flanks {
        let (fx, fy) = (x + ox, y + oy);
        if fx < 0 || fy < 0 || fx >= w || fy >= h {
            return None;
        }
        lowest = lowest.min(frame.get(fx as usize, fy as usize));
    }
    Some(lowest - frame.get(x as usize, y as usize))
}

/// SplitMix64 finalizer over (seed, walk index).
pub(crate) fn walk_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn to_field(w: usize, h: usize, locus: &[u32], mask: &FingerMask) -> ScoreField {
    let scores = locus.iter().map(|&c| f64::from(c)).collect();
    ScoreField::new(w, h, scores, Method::RepeatedLineTracking, mask)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn horizontal_valley(w: usize, h: usize, center: usize, half: usize) -> Frame {
        let px = (0..h)
            .flat_map(|y| {
                let v = if y.abs_diff(center) <= half { 0.3 } else { 0.7 };
                std::iter::repeat_n(v, w)
            })
            .collect();
        Frame::new(w, h, px).unwrap()
    }

    #[test]
    fn zero_iterations_give_zero_field() {
        let f = horizontal_valley(32, 32, 16, 2);
        let s = repeated_line_tracking(&f, &FingerMask::full(32, 32), 0, 6.0, 1).unwrap();
        assert!(s.scores().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn uniform_frame_never_steps() {
        let f = Frame::filled(40, 30, 0.5).unwrap();
        let s = repeated_line_tracking(&f, &FingerMask::full(40, 30), 1000, 6.0, 9).unwrap();
        assert!(s.scores().iter().all(|&v| v <= 1.0));
        assert!(s.scores().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn walks_follow_the_valley() {
        let f = horizontal_valley(64, 40, 20, 2);
        let s = repeated_line_tracking(&f, &FingerMask::full(64, 40), 500, 8.0, 4).unwrap();
        let mut on = 0.0;
        let mut off = 0.0;
        for y in 0usize..40 {
            for x in 0..64 {
                if y.abs_diff(20) <= 2 {
                    on += s.get(x, y);
                } else if y.abs_diff(20) > 3 {
                    // a start pixel next to the band may be counted
                    off += s.get(x, y);
                }
            }
        }
        assert!(on > 0.0);
        assert_eq!(off, 0.0);
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let f = horizontal_valley(48, 32, 15, 3);
        let m = FingerMask::full(48, 32);
        let a = repeated_line_tracking(&f, &m, 300, 7.0, 11).unwrap();
        let b = repeated_line_tracking(&f, &m, 300, 7.0, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bad_radius_rejected() {
        let f = Frame::filled(8, 8, 0.5).unwrap();
        assert!(repeated_line_tracking(&f, &FingerMask::full(8, 8), 1, 0.0, 0).is_err());
    }
}
