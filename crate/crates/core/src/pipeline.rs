//! The full workflow: finger ROI, vein extraction, binarization,
//! post-processing, vessel tracking and heart-rate recovery.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{PeakSeries, PipelineConfig};
use crate::error::{Error, Result};
use crate::frame::{Frame, VideoSequence};
use crate::hr::{self, HeartRateResult, TrendSeries};
use crate::morph::{self, StructuringElement};
use crate::roi::{localize_finger, FingerMask};
use crate::track::{width_series, WidthSeries};
use crate::veinmap::{
    self, binarize, derive_seed, CurvatureOptions, LineTrackingOptions, Method, ScoreField, VeinMap,
};

/// Below this rate the output is most likely noise rather than a pulse.
pub const LOW_RATE_WARNING_BPM: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// dilate, then median.
    PaperMc,
    /// median, erode, dilate (or erode, dilate, median when swapped).
    PaperRlt,
}

impl Preset {
    pub fn for_method(method: Method) -> Self {
        match method {
            Method::MaxCurvature => Preset::PaperMc,
            Method::RepeatedLineTracking => Preset::PaperRlt,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::PaperMc => "paper-mc",
            Preset::PaperRlt => "paper-rlt",
        }
    }
}

pub fn method_name(method: Method) -> &'static str {
    match method {
        Method::MaxCurvature => "maxcurv",
        Method::RepeatedLineTracking => "rlt",
    }
}

/// Score field of one frame. `index` selects the per-frame random stream.
pub fn extract(frame: &Frame, mask: &FingerMask, method: Method, cfg: &PipelineConfig, index: usize) -> Result<ScoreField> {
    match method {
        Method::MaxCurvature => veinmap::max_curvature_with(
            frame,
            mask,
            CurvatureOptions {
                sigma: cfg.curvature_sigma,
                directions: cfg.curvature_directions,
            },
        ),
        Method::RepeatedLineTracking => veinmap::repeated_line_tracking_with(
            frame,
            mask,
            LineTrackingOptions {
                iterations: cfg.rlt_iterations,
                valley_radius: cfg.rlt_valley_radius,
                depth_threshold: cfg.rlt_depth_threshold,
                straight_weight: cfg.rlt_straight_weight,
                seed: derive_seed(cfg.seed, index as u64),
            },
        ),
    }
}

/// Binarize, treating a field without any score as an empty map.
pub fn binarize_or_empty(field: &ScoreField, percentile: f64) -> Result<VeinMap> {
    match binarize(field, percentile) {
        Err(Error::EmptyMap) => Ok(VeinMap::empty(field.width(), field.height())),
        other => other,
    }
}

pub fn post_process(map: &VeinMap, preset: Preset, cfg: &PipelineConfig) -> Result<VeinMap> {
    let se = StructuringElement::new(cfg.morph_shape, cfg.morph_radius)?;
    Ok(match preset {
        Preset::PaperMc => morph::median_filter(&morph::dilate(map, &se), cfg.median_window)?,
        Preset::PaperRlt if cfg.rlt_median_first => {
            let m = morph::median_filter(map, cfg.median_window)?;
            morph::dilate(&morph::erode(&m, &se), &se)
        }
        Preset::PaperRlt => {
            let m = morph::dilate(&morph::erode(map, &se), &se);
            morph::median_filter(&m, cfg.median_window)?
        }
    })
}

#[derive(Debug, Clone)]
pub struct FrameMaps {
    pub mask: FingerMask,
    /// Score field scaled to 0..=255.
    pub scores: Vec<u8>,
    pub raw: VeinMap,
    pub post: VeinMap,
}

/// ROI, extraction, binarization and post-processing of one frame.
pub fn process_frame(frame: &Frame, method: Method, preset: Preset, cfg: &PipelineConfig, index: usize) -> Result<FrameMaps> {
    let mask = localize_finger(frame, cfg.edge_half_height)?;
    let field = extract(frame, &mask, method, cfg, index)?;
    let raw = binarize_or_empty(&field, cfg.percentile_for(method))?;
    let mut post = post_process(&raw, preset, cfg)?;
    post.restrict_to(&mask);
    Ok(FrameMaps {
        mask,
        scores: field.to_gray(),
        raw,
        post,
    })
}

/// Every frame, in parallel. Results do not depend on the thread count.
pub fn process_sequence(seq: &VideoSequence, method: Method, preset: Preset, cfg: &PipelineConfig) -> Result<Vec<FrameMaps>> {
    cfg.validate()?;
    seq.frames()
        .par_iter()
        .enumerate()
        .map(|(i, f)| process_frame(f, method, preset, cfg, i))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendStages {
    pub raw: TrendSeries,
    pub smoothed: TrendSeries,
    pub sg: TrendSeries,
    pub derivative: TrendSeries,
}

impl TrendStages {
    pub fn all(&self) -> [&TrendSeries; 4] {
        [&self.raw, &self.smoothed, &self.sg, &self.derivative]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeartRateAnalysis {
    pub stages: TrendStages,
    pub prominence_threshold: f64,
    pub result: HeartRateResult,
    pub warnings: Vec<String>,
}

/// Smooth, filter, differentiate and count peaks.
pub fn analyze_widths(widths: &[f64], fps: f64, cfg: &PipelineConfig) -> Result<HeartRateAnalysis> {
    let raw = TrendSeries::raw(widths.to_vec(), fps)?;
    let smoothed = hr::moving_average(&raw, cfg.smooth_window)?;
    let sg = hr::savitzky_golay(&smoothed, cfg.sg_window, cfg.sg_order)?;
    let derivative = hr::differentiate(&sg)?;
    let target = match cfg.peak_series {
        PeakSeries::Derivative => &derivative,
        PeakSeries::Sg => &sg,
    };
    let threshold = hr::prominence_threshold(target, cfg.peak_prominence_iqr_fraction, cfg.peak_min_prominence);
    let result = hr::count_peaks(target, threshold, cfg.peak_min_separation_s)?;
    let mut warnings = Vec::new();
    if result.bpm < LOW_RATE_WARNING_BPM {
        warnings.push(format!(
            "only {} peaks in {:.1} s ({:.1} bpm); no pulsatile width signal detected",
            result.peak_count, result.duration_s, result.bpm
        ));
    }
    Ok(HeartRateAnalysis {
        stages: TrendStages {
            raw,
            smoothed,
            sg,
            derivative,
        },
        prominence_threshold: threshold,
        result,
        warnings,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub extract_ms: f64,
    pub track_ms: f64,
    pub hr_ms: f64,
}

#[derive(Debug, Clone)]
pub struct MonitorOutput {
    pub frames: Vec<FrameMaps>,
    pub widths: WidthSeries,
    pub analysis: HeartRateAnalysis,
    pub timings: Timings,
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Video in, heart rate out.
pub fn monitor(seq: &VideoSequence, method: Method, preset: Preset, cfg: &PipelineConfig) -> Result<MonitorOutput> {
    let t = Instant::now();
    let frames = process_sequence(seq, method, preset, cfg)?;
    let extract_ms = ms(t);

    let t = Instant::now();
    let maps: Vec<VeinMap> = frames.iter().map(|f| f.post.clone()).collect();
    let masks: Vec<FingerMask> = frames.iter().map(|f| f.mask.clone()).collect();
    let widths = width_series(&maps, &masks, &cfg.tracking_policy(), seq.fps())?;
    let track_ms = ms(t);

    let t = Instant::now();
    let analysis = analyze_widths(&widths.widths, seq.fps(), cfg)?;
    let hr_ms = ms(t);
    Ok(MonitorOutput {
        frames,
        widths,
        analysis,
        timings: Timings {
            extract_ms,
            track_ms,
            hr_ms,
        },
    })
}
