//! From a width series to beats per minute.
//!
//! raw widths -> moving average -> Savitzky-Golay -> derivative -> peaks.
//! Nothing is fitted to a sinusoid; the peak count over the capture time is
//! the heart rate.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Raw,
    Smoothed,
    Sg,
    Derivative,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Raw => "raw",
            Stage::Smoothed => "smoothed",
            Stage::Sg => "sg",
            Stage::Derivative => "derivative",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendSeries {
    pub values: Vec<f64>,
    pub fps: f64,
    pub stage: Stage,
}

impl TrendSeries {
    pub fn new(values: Vec<f64>, fps: f64, stage: Stage) -> Result<Self> {
        if !(fps > 0.0) {
            return Err(Error::param(format!("fps must be > 0, got {fps}")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("series contains non-finite values"));
        }
        Ok(Self { values, fps, stage })
    }

    pub fn raw(values: Vec<f64>, fps: f64) -> Result<Self> {
        Self::new(values, fps, Stage::Raw)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.values.len() as f64 / self.fps
    }

    fn with(&self, values: Vec<f64>, stage: Stage) -> Self {
        Self {
            values,
            fps: self.fps,
            stage,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeartRateResult {
    pub peak_indices: Vec<usize>,
    pub peak_times: Vec<f64>,
    pub peak_count: usize,
    pub duration_s: f64,
    pub bpm: f64,
}

/// Centered mean with edge replication.
pub fn moving_average(series: &TrendSeries, window: usize) -> Result<TrendSeries> {
    let n = series.len();
    if window == 0 || window.is_multiple_of(2) || window > n {
        return Err(Error::param(format!(
            "moving average window must be odd, >= 1 and <= {n}, got {window}"
        )));
    }
    let r = (window / 2) as isize;
    let x = &series.values;
    let values = (0..n as isize)
        .map(|i| {
            (-r..=r)
                .map(|k| x[(i + k).clamp(0, n as isize - 1) as usize])
                .sum::<f64>()
                / window as f64
        })
        .collect();
    Ok(series.with(values, Stage::Smoothed))
}

/// Least-squares weights: row `j` evaluates the degree-`order` fit of a
/// `window`-sample block at position `j` of that block.
fn savgol_weights(window: usize, order: usize) -> DMatrix<f64> {
    let m = (window / 2) as f64;
    let design = DMatrix::from_fn(window, order + 1, |i, k| ((i as f64 - m) / m).powi(k as i32));
    let pinv = design
        .clone()
        .svd(true, true)
        .pseudo_inverse(1e-12)
        .expect("svd with both factors computed");
    design * pinv
}

/// Savitzky-Golay smoothing. Edge samples use the fit of the first or last
/// full window, evaluated at their offset.
pub fn savitzky_golay(series: &TrendSeries, window: usize, order: usize) -> Result<TrendSeries> {
    let n = series.len();
    if window < 3 || window.is_multiple_of(2) {
        return Err(Error::param(format!("SG window must be odd and >= 3, got {window}")));
    }
    if order >= window {
        return Err(Error::param(format!("SG order {order} must be below window {window}")));
    }
    if window > n {
        return Err(Error::param(format!("SG window {window} longer than series ({n})")));
    }
    let weights = savgol_weights(window, order);
    let half = window / 2;
    let x = &series.values;
    let values = (0..n)
        .map(|i| {
            let (start, row) = if i < half {
                (0, i)
            } else if i + half >= n {
                (n - window, i - (n - window))
            } else {
                (i - half, half)
            };
            (0..window).map(|j| weights[(row, j)] * x[start + j]).sum()
        })
        .collect();
    Ok(series.with(values, Stage::Sg))
}

/// Rate of change in units per second.
///
/// Interior samples use the five-point central stencil, the second and
/// penultimate samples the three-point central difference, and the end
/// samples one-sided differences. All of them are exact on linear series.
pub fn differentiate(series: &TrendSeries) -> Result<TrendSeries> {
    let n = series.len();
    if n < 3 {
        return Err(Error::param(format!("need at least 3 samples to differentiate, got {n}")));
    }
    let x = &series.values;
    let fps = series.fps;
    let values = (0..n)
        .map(|i| {
            let d = if i == 0 {
                x[1] - x[0]
            } else if i == n - 1 {
                x[n - 1] - x[n - 2]
            } else if i == 1 || i == n - 2 {
                (x[i + 1] - x[i - 1]) / 2.0
            } else {
                (x[i - 2] - 8.0 * x[i - 1] + 8.0 * x[i + 1] - x[i + 2]) / 12.0
            };
            d * fps
        })
        .collect();
    Ok(series.with(values, Stage::Derivative))
}

/// Interior local maxima (plateaus resolve to their middle sample).
pub fn local_maxima(x: &[f64]) -> Vec<usize> {
    let mut peaks = Vec::new();
    let n = x.len();
    let mut i = 1;
    while i + 1 < n {
        if x[i - 1] < x[i] {
            let mut j = i;
            while j + 1 < n && x[j + 1] == x[i] {
                j += 1;
            }
            if j + 1 < n && x[j + 1] < x[i] {
                peaks.push((i + j) / 2);
                i = j + 1;
                continue;
            }
            i = j + 1;
            continue;
        }
        i += 1;
    }
    peaks
}

/// Topographic prominence of the peak at `i`: its height above the higher
/// of the two lowest points reached before climbing above it on either side.
pub fn prominence(x: &[f64], i: usize) -> f64 {
    let peak = x[i];
    let mut left_min = peak;
    for &v in x[..i].iter().rev() {
        if v > peak {
            break;
        }
        left_min = left_min.min(v);
    }
    let mut right_min = peak;
    for &v in &x[i + 1..] {
        if v > peak {
            break;
        }
        right_min = right_min.min(v);
    }
    peak - left_min.max(right_min)
}

/// Peaks with prominence at least `min_prominence`, kept greedily from the
/// most prominent down while staying `min_separation_s` apart.
pub fn count_peaks(series: &TrendSeries, min_prominence: f64, min_separation_s: f64) -> Result<HeartRateResult> {
    if !(min_separation_s > 0.0) {
        return Err(Error::param("min_separation_s must be > 0"));
    }
    let x = &series.values;
    let mut candidates: Vec<(usize, f64)> = local_maxima(x)
        .into_iter()
        .map(|i| (i, prominence(x, i)))
        .filter(|&(_, p)| p >= min_prominence)
        .collect();
    candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let min_gap = min_separation_s * series.fps;
    let mut kept: Vec<usize> = Vec::new();
    for (i, _) in candidates {
        if kept.iter().all(|&k| (k.abs_diff(i) as f64) >= min_gap - 1e-9) {
            kept.push(i);
        }
    }
    kept.sort_unstable();
    let duration_s = series.duration_s();
    let peak_count = kept.len();
    Ok(HeartRateResult {
        peak_times: kept.iter().map(|&i| i as f64 / series.fps).collect(),
        peak_indices: kept,
        peak_count,
        duration_s,
        bpm: if duration_s > 0.0 {
            peak_count as f64 * 60.0 / duration_s
        } else {
            0.0
        },
    })
}

/// Interquartile range with linear interpolation between order statistics.
pub fn interquartile_range(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    crate::veinmap::percentile_of_sorted(&sorted, 75.0) - crate::veinmap::percentile_of_sorted(&sorted, 25.0)
}

/// `max(floor, fraction * IQR)`.
pub fn prominence_threshold(series: &TrendSeries, iqr_fraction: f64, floor: f64) -> f64 {
    (iqr_fraction * interquartile_range(&series.values)).max(floor)
}
