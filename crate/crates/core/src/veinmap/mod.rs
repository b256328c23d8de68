//! Vein likelihood fields and their binarization.
//!
//! Two extractors produce a [`ScoreField`]: [`max_curvature`] scores concave
//! cross-sectional intensity valleys, [`repeated_line_tracking`] counts how
//! often random valley-following walks visit each pixel. Both fields are
//! zero outside the finger mask.

mod curvature;
mod line_tracking;

use serde::{Deserialize, Serialize};

pub use curvature::{max_curvature, max_curvature_with, CurvatureOptions, ProfileDirections};
pub use line_tracking::{repeated_line_tracking, repeated_line_tracking_with, LineTrackingOptions};

use crate::error::{Error, Result};
use crate::roi::FingerMask;

/// Independent 64-bit seed for stream `index` under a master `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    line_tracking::walk_seed(seed, index)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    MaxCurvature,
    RepeatedLineTracking,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreField {
    width: usize,
    height: usize,
    scores: Vec<f64>,
    method: Method,
}

impl ScoreField {
    pub(crate) fn new(
        width: usize,
        height: usize,
        mut scores: Vec<f64>,
        method: Method,
        mask: &FingerMask,
    ) -> Self {
        debug_assert_eq!(scores.len(), width * height);
        for y in 0..height {
            for x in 0..width {
                if !mask.inside(x, y) {
                    scores[y * width + x] = 0.0;
                }
            }
        }
        Self {
            width,
            height,
            scores,
            method,
        }
    }

    /// Field from raw scores, zeroed outside `mask`. Negative scores are
    /// rejected.
    pub fn from_scores(
        width: usize,
        height: usize,
        scores: Vec<f64>,
        method: Method,
        mask: &FingerMask,
    ) -> Result<Self> {
        if scores.len() != width * height || mask.width() != width || mask.height() != height {
            return Err(Error::Dimension("score grid does not match mask".into()));
        }
        if scores.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::param("scores must be finite and >= 0"));
        }
        Ok(Self::new(width, height, scores, method, mask))
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn method(&self) -> Method {
        self.method
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.scores[y * self.width + x]
    }

    /// Min-max scaled to 0..=255 for export.
    pub fn to_gray(&self) -> Vec<u8> {
        let (lo, hi) = self
            .scores
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| (lo.min(s), hi.max(s)));
        let span = hi - lo;
        self.scores
            .iter()
            .map(|&s| {
                if span > 0.0 {
                    ((s - lo) / span * 255.0).round() as u8
                } else {
                    0
                }
            })
            .collect()
    }
}

/// Binary vessel mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VeinMap {
    width: usize,
    height: usize,
    vein: Vec<bool>,
}

impl VeinMap {
    pub fn new(width: usize, height: usize, vein: Vec<bool>) -> Result<Self> {
        if vein.len() != width * height {
            return Err(Error::Dimension(format!(
                "{} cells for a {width}x{height} map",
                vein.len()
            )));
        }
        Ok(Self { width, height, vein })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            vein: vec![false; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cells(&self) -> &[bool] {
        &self.vein
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.vein[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.vein[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.vein.iter().filter(|&&v| v).count()
    }

    pub fn complement(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            vein: self.vein.iter().map(|v| !v).collect(),
        }
    }

    pub fn is_subset_of(&self, other: &VeinMap) -> bool {
        self.vein.iter().zip(&other.vein).all(|(&a, &b)| !a || b)
    }

    /// Clear everything outside the finger.
    pub fn restrict_to(&mut self, mask: &FingerMask) {
        for y in 0..self.height {
            for x in 0..self.width {
                if !mask.inside(x, y) {
                    self.vein[y * self.width + x] = false;
                }
            }
        }
    }

    /// 0/255 bytes for export.
    pub fn to_gray(&self) -> Vec<u8> {
        self.vein.iter().map(|&v| if v { 255 } else { 0 }).collect()
    }
}

/// Keep pixels whose score is at or above the given percentile of the
/// nonzero scores. Percentiles interpolate linearly between order
/// statistics, so percentile 0 keeps every nonzero pixel.
pub fn binarize(field: &ScoreField, percentile: f64) -> Result<VeinMap> {
    if !(0.0..100.0).contains(&percentile) {
        return Err(Error::param(format!("percentile {percentile} outside [0, 100)")));
    }
    let mut nonzero: Vec<f64> = field.scores.iter().copied().filter(|&s| s > 0.0).collect();
    if nonzero.is_empty() {
        return Err(Error::EmptyMap);
    }
    nonzero.sort_by(f64::total_cmp);
    let threshold = percentile_of_sorted(&nonzero, percentile);
    let vein = field
        .scores
        .iter()
        .map(|&s| s > 0.0 && s >= threshold)
        .collect();
    Ok(VeinMap {
        width: field.width,
        height: field.height,
        vein,
    })
}

pub(crate) fn percentile_of_sorted(sorted: &[f64], percentile: f64) -> f64 {
    let pos = percentile / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}
