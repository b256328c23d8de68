//! Maximum curvature vein scoring.
//!
//! Cross-sectional profiles are taken along four directions. Each profile is
//! differentiated with Gaussian derivative kernels and its curvature
//! `k = P'' / (1 + P'^2)^(3/2)` is computed. Every maximal run of positive
//! curvature (a concave valley) of length `Wr` contributes `k(z) * Wr` to the
//! pixels of the run, so the contribution peaks at the curvature maximum with
//! the classic `k_max * Wr` score, and the scored region spans the valley.
//! A center-connection pass then reinforces pixels whose neighbours on both
//! sides along some direction carry scores, bridging broken centerlines.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Method, ScoreField};
use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::roi::FingerMask;

/// (dx, dy) steps: vertical, horizontal, diagonal, anti-diagonal.
const DIRECTIONS: [(isize, isize); 4] = [(0, 1), (1, 0), (1, 1), (1, -1)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileDirections {
    #[default]
    All,
    /// Column profiles only.
    VerticalOnly,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureOptions {
    pub sigma: f64,
    pub directions: ProfileDirections,
}

pub fn max_curvature(frame: &Frame, mask: &FingerMask, sigma: f64) -> Result<ScoreField> {
    max_curvature_with(
        frame,
        mask,
        CurvatureOptions {
            sigma,
            directions: ProfileDirections::All,
        },
    )
}

pub fn max_curvature_with(
    frame: &Frame,
    mask: &FingerMask,
    opts: CurvatureOptions,
) -> Result<ScoreField> {
    if !(opts.sigma >= 1.0) || !opts.sigma.is_finite() {
        return Err(Error::param(format!("curvature sigma must be >= 1, got {}", opts.sigma)));
    }
    let (w, h) = (frame.width(), frame.height());
    if mask.width() != w || mask.height() != h {
        return Err(Error::Dimension("mask does not match frame".into()));
    }
    let kernels = DerivativeKernels::new(opts.sigma);
    let dirs: &[(isize, isize)] = match opts.directions {
        ProfileDirections::All => &DIRECTIONS,
        ProfileDirections::VerticalOnly => &DIRECTIONS[..1],
    };

    let per_direction: Vec<Vec<f64>> = dirs
        .par_iter()
        .map(|&d| direction_scores(frame, d, &kernels))
        .collect();
    let mut valley = vec![0.0; w * h];
    for scores in &per_direction {
        for (v, s) in valley.iter_mut().zip(scores) {
            *v += s;
        }
    }

    let connected = connect_centers(&valley, w, h);
    let field: Vec<f64> = valley.iter().zip(&connected).map(|(v, c)| v + c).collect();
    Ok(ScoreField::new(w, h, field, Method::MaxCurvature, mask))
}

struct DerivativeKernels {
    radius: usize,
    first: Vec<f64>,
    second: Vec<f64>,
}

impl DerivativeKernels {
    fn new(sigma: f64) -> Self {
        let radius = (4.0 * sigma).ceil() as usize;
        let offsets: Vec<f64> = (0..=2 * radius).map(|i| i as f64 - radius as f64).collect();
        let s2 = sigma * sigma;
        let g: Vec<f64> = offsets.iter().map(|&t| (-0.5 * t * t / s2).exp()).collect();
        let gsum: f64 = g.iter().sum();
        let mut first: Vec<f64> = offsets.iter().zip(&g).map(|(&t, &gv)| -t / s2 * gv / gsum).collect();
        let mut second: Vec<f64> = offsets
            .iter()
            .zip(&g)
            .map(|(&t, &gv)| (t * t / (s2 * s2) - 1.0 / s2) * gv / gsum)
            .collect();
        // zero-sum second kernel, then unit response on t and t^2/2.
        // Correlation form: out(z) = sum k[i] * x(z + t_i).
        let mean = second.iter().sum::<f64>() / second.len() as f64;
        second.iter_mut().for_each(|k| *k -= mean);
        let norm1: f64 = offsets.iter().zip(&first).map(|(&t, &k)| -t * k).sum();
        first.iter_mut().for_each(|k| *k /= -norm1);
        let norm2: f64 = offsets.iter().zip(&second).map(|(&t, &k)| 0.5 * t * t * k).sum();
        second.iter_mut().for_each(|k| *k /= norm2);
        Self {
            radius,
            first,
            second,
        }
    }
}

fn direction_scores(frame: &Frame, (dx, dy): (isize, isize), kernels: &DerivativeKernels) -> Vec<f64> {
    let (w, h) = (frame.width() as isize, frame.height() as isize);
    let mut out = vec![0.0; (w * h) as usize];
    let inside = |x: isize, y: isize| x >= 0 && y >= 0 && x < w && y < h;

    let mut coords: Vec<(usize, usize)> = Vec::new();
    let mut profile: Vec<f64> = Vec::new();
    let mut curvature: Vec<f64> = Vec::new();
    for y0 in 0..h {
        for x0 in 0..w {
            // a profile starts where the previous step would leave the image
            if inside(x0 - dx, y0 - dy) {
                continue;
            }
            coords.clear();
            profile.clear();
            let (mut x, mut y) = (x0, y0);
            while inside(x, y) {
                coords.push((x as usize, y as usize));
                profile.push(frame.get(x as usize, y as usize));
                x += dx;
                y += dy;
            }
            profile_curvature(&profile, kernels, &mut curvature);
            score_valleys(&curvature, |i, s| {
                let (px, py) = coords[i];
                out[py * w as usize + px] += s;
            });
        }
    }
    out
}

/// Curvature of a smoothed profile, edge-replicated. Differences against the
/// center sample keep flat profiles exactly zero.
fn profile_curvature(profile: &[f64], k: &DerivativeKernels, out: &mut Vec<f64>) {
    let n = profile.len() as isize;
    let r = k.radius as isize;
    out.clear();
    out.extend((0..n).map(|z| {
        let center = profile[z as usize];
        let mut d1 = 0.0;
        let mut d2 = 0.0;
        for i in -r..=r {
            let v = profile[(z + i).clamp(0, n - 1) as usize] - center;
            let ki = (i + r) as usize;
            d1 += k.first[ki] * v;
            d2 += k.second[ki] * v;
        }
        d2 / (1.0 + d1 * d1).powf(1.5)
    }));
}

/// Call `emit(i, score)` for every sample inside a positive-curvature run.
fn score_valleys(curvature: &[f64], mut emit: impl FnMut(usize, f64)) {
    let mut i = 0;
    while i < curvature.len() {
        if curvature[i] > 0.0 {
            let start = i;
            while i < curvature.len() && curvature[i] > 0.0 {
                i += 1;
            }
            let run_width = (i - start) as f64;
            for (z, &k) in curvature.iter().enumerate().take(i).skip(start) {
                emit(z, k * run_width);
            }
        } else {
            i += 1;
        }
    }
}

/// Strongest bridge over all directions:
/// `min(max(V[p+d], V[p+2d]), max(V[p-d], V[p-2d]))`.
fn connect_centers(valley: &[f64], w: usize, h: usize) -> Vec<f64> {
    let at = |x: isize, y: isize| -> f64 {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            0.0
        } else {
            valley[y as usize * w + x as usize]
        }
    };
    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let y = y as isize;
        for (x, cell) in row.iter_mut().enumerate() {
            let x = x as isize;
            let mut best: f64 = 0.0;
            for &(dx, dy) in &DIRECTIONS {
                let fwd = at(x + dx, y + dy).max(at(x + 2 * dx, y + 2 * dy));
                let back = at(x - dx, y - dy).max(at(x - 2 * dx, y - 2 * dy));
                best = best.max(fwd.min(back));
            }
            *cell = best;
        }
    });
    out
}
