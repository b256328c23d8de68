//! Vessel runs along vertical profiles and the per-frame width series.
//!
//! Width (run length at a fixed column) is the cardiac observable; the run's
//! center row only serves to re-identify the same vessel in the next frame.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roi::FingerMask;
use crate::veinmap::VeinMap;

/// Contiguous vertical foreground segment at one column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VesselRun {
    pub column: usize,
    pub top: usize,
    pub bottom: usize,
}

impl VesselRun {
    pub fn width(&self) -> usize {
        self.bottom - self.top + 1
    }

    pub fn center_row(&self) -> f64 {
        (self.top + self.bottom) as f64 / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VesselSelection {
    pub column: usize,
    pub center_row: f64,
    pub width: usize,
}

/// Maximal foreground runs at `column`, top to bottom.
pub fn column_runs(map: &VeinMap, column: usize) -> Vec<VesselRun> {
    let mut runs = Vec::new();
    if column >= map.width() {
        return runs;
    }
    let mut y = 0;
    while y < map.height() {
        if map.get(column, y) {
            let top = y;
            while y < map.height() && map.get(column, y) {
                y += 1;
            }
            runs.push(VesselRun {
                column,
                top,
                bottom: y - 1,
            });
        } else {
            y += 1;
        }
    }
    runs
}

/// Columns in the middle `band_fraction` of the frame.
pub fn central_band(width: usize, band_fraction: f64) -> std::ops::Range<usize> {
    let span = ((width as f64 * band_fraction).round() as usize).clamp(1, width);
    let start = (width - span) / 2;
    start..start + span
}

/// Runs from every usable column of the central band.
pub fn central_band_runs(map: &VeinMap, mask: Option<&FingerMask>, band_fraction: f64) -> Vec<VesselRun> {
    central_band(map.width(), band_fraction)
        .filter(|&x| mask.is_none_or(|m| m.column_usable(x)))
        .flat_map(|x| column_runs(map, x))
        .collect()
}

/// Pick the run of median width among `candidates`. Ties go to the run
/// nearest the vertical center, then the smaller row, then the column
/// nearest the horizontal center, then the smaller column.
pub fn select_vessel(candidates: &[VesselRun], width: usize, height: usize) -> Result<VesselSelection> {
    if candidates.is_empty() {
        return Err(Error::NoVessel);
    }
    let mut widths: Vec<usize> = candidates.iter().map(VesselRun::width).collect();
    widths.sort_unstable();
    let median = widths[(widths.len() - 1) / 2];
    let vc = (height as f64 - 1.0) / 2.0;
    let hc = (width as f64 - 1.0) / 2.0;
    let best = candidates
        .iter()
        .filter(|r| r.width() == median)
        .min_by(|a, b| {
            (a.center_row() - vc)
                .abs()
                .total_cmp(&(b.center_row() - vc).abs())
                .then(a.top.cmp(&b.top))
                .then((a.column as f64 - hc).abs().total_cmp(&(b.column as f64 - hc).abs()))
                .then(a.column.cmp(&b.column))
        })
        .expect("median width is present");
    Ok(VesselSelection {
        column: best.column,
        center_row: best.center_row(),
        width: best.width(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackingPolicy {
    pub band_fraction: f64,
    /// Max center-row distance when matching to the previous frame; `None`
    /// selects the vessel independently in every frame.
    pub gate_px: Option<f64>,
    pub max_gap_fraction: f64,
    /// Columns averaged around the reference column (1 or an odd count).
    pub width_columns: usize,
}

impl Default for TrackingPolicy {
    fn default() -> Self {
        Self {
            band_fraction: 0.5,
            gate_px: Some(15.0),
            max_gap_fraction: 0.2,
            width_columns: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthSeries {
    /// Gap-filled widths, one per frame.
    pub widths: Vec<f64>,
    pub gaps: Vec<bool>,
    pub fps: f64,
    pub reference: VesselSelection,
}

impl WidthSeries {
    pub fn frames_total(&self) -> usize {
        self.widths.len()
    }

    pub fn gap_count(&self) -> usize {
        self.gaps.iter().filter(|&&g| g).count()
    }
}

/// Per-frame width of the monitored vessel.
///
/// `masks` is either empty or one mask per map; masks exclude short columns
/// from vessel selection.
pub fn width_series(
    maps: &[VeinMap],
    masks: &[FingerMask],
    policy: &TrackingPolicy,
    fps: f64,
) -> Result<WidthSeries> {
    if maps.is_empty() {
        return Err(Error::param("no maps to track"));
    }
    if !(fps > 0.0) {
        return Err(Error::param(format!("fps must be > 0, got {fps}")));
    }
    if !masks.is_empty() && masks.len() != maps.len() {
        return Err(Error::Dimension("one mask per map required".into()));
    }
    if policy.width_columns == 0 || policy.width_columns.is_multiple_of(2) {
        return Err(Error::param("width_columns must be odd"));
    }
    let (w, h) = (maps[0].width(), maps[0].height());
    if maps.iter().any(|m| m.width() != w || m.height() != h) {
        return Err(Error::Dimension("maps differ in size".into()));
    }
    let mask_of = |i: usize| masks.get(i);
    let select = |i: usize| {
        select_vessel(&central_band_runs(&maps[i], mask_of(i), policy.band_fraction), w, h)
    };

    let n = maps.len();
    let mut raw: Vec<Option<f64>> = vec![None; n];
    let reference;
    match policy.gate_px {
        None => {
            let picks: Vec<Option<VesselSelection>> = (0..n).map(|i| select(i).ok()).collect();
            reference = picks.iter().flatten().next().copied().ok_or(Error::NoVessel)?;
            for (slot, pick) in raw.iter_mut().zip(&picks) {
                *slot = pick.map(|p| p.width as f64);
            }
        }
        Some(gate) => {
            let (first, sel) = (0..n)
                .find_map(|i| select(i).ok().map(|s| (i, s)))
                .ok_or(Error::NoVessel)?;
            reference = sel;
            let mut prev_center = sel.center_row;
            for (i, slot) in raw.iter_mut().enumerate().skip(first) {
                if let Some((width, center)) =
                    matched_width(&maps[i], sel.column, policy.width_columns, prev_center, gate)
                {
                    *slot = Some(width);
                    prev_center = center;
                }
            }
        }
    }

    let gaps: Vec<bool> = raw.iter().map(Option::is_none).collect();
    let gapped = gaps.iter().filter(|&&g| g).count();
    if gapped as f64 > policy.max_gap_fraction * n as f64 || gapped == n {
        return Err(Error::TrackingFailure { gapped, total: n });
    }
    Ok(WidthSeries {
        widths: fill_gaps(&raw),
        gaps,
        fps,
        reference,
    })
}

/// Width at the reference column (averaged over `columns` neighbours) of the
/// run nearest `prev_center`, and its center row.
fn matched_width(
    map: &VeinMap,
    column: usize,
    columns: usize,
    prev_center: f64,
    gate: f64,
) -> Option<(f64, f64)> {
    let half = (columns / 2) as isize;
    let nearest = |x: usize| {
        column_runs(map, x)
            .into_iter()
            .map(|r| (r, (r.center_row() - prev_center).abs()))
            .filter(|&(_, d)| d <= gate)
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(r, _)| r)
    };
    let center_run = nearest(column)?;
    let mut total = 0.0;
    let mut count = 0.0;
    for dx in -half..=half {
        let x = column as isize + dx;
        if x < 0 || x >= map.width() as isize {
            continue;
        }
        if let Some(r) = nearest(x as usize) {
            total += r.width() as f64;
            count += 1.0;
        }
    }
    Some((total / count, center_run.center_row()))
}

/// Linear interpolation across interior gaps; leading and trailing gaps take
/// the nearest present value.
pub fn fill_gaps(raw: &[Option<f64>]) -> Vec<f64> {
    let present: Vec<(usize, f64)> = raw
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (i, v)))
        .collect();
    if present.is_empty() {
        return vec![0.0; raw.len()];
    }
    let mut out = Vec::with_capacity(raw.len());
    let mut k = 0;
    for i in 0..raw.len() {
        while k + 1 < present.len() && present[k + 1].0 <= i {
            k += 1;
        }
        let (i0, v0) = present[k];
        let v = if i <= i0 {
            v0
        } else if k + 1 < present.len() {
            let (i1, v1) = present[k + 1];
            v0 + (v1 - v0) * (i - i0) as f64 / (i1 - i0) as f64
        } else {
            v0
        };
        out.push(v);
    }
    out
}
