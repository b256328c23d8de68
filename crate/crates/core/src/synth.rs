//! Synthetic transillumination phantom with known ground truth.
//!
//! A horizontal finger band at tissue brightness sits on a dark background
//! (edges blurred with a 2 px Gaussian). Each vessel is a straight dark band
//! (edges blurred with a 1 px Gaussian) whose width follows
//! `base + amplitude * sin(2 pi f t)` with `f = pulse_bpm / 60`, rounded to
//! whole pixels when drawn. The whole scene shifts horizontally by a seeded
//! cumulative jitter, then Gaussian noise is added and clipped to `[0, 1]`.

use std::f64::consts::{PI, SQRT_2};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{Frame, VideoSequence};
use crate::veinmap::VeinMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VesselSpec {
    /// Row of the centerline at the horizontal center of the frame.
    pub center_row: f64,
    pub base_width: f64,
    pub modulation_amplitude: f64,
    /// 0 is horizontal, 90 is vertical.
    pub orientation_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub width: usize,
    pub height: usize,
    pub fps: f64,
    pub duration_s: f64,
    pub finger_top: usize,
    pub finger_bottom: usize,
    pub vessels: Vec<VesselSpec>,
    pub pulse_bpm: f64,
    pub background_level: f64,
    pub tissue_level: f64,
    pub vessel_level: f64,
    pub noise_sigma: f64,
    pub jitter_px_per_frame: f64,
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            width: 128,
            height: 96,
            fps: 30.0,
            duration_s: 60.0,
            finger_top: 16,
            finger_bottom: 79,
            vessels: vec![VesselSpec {
                center_row: 48.0,
                base_width: 6.0,
                modulation_amplitude: 2.0,
                orientation_deg: 3.0,
            }],
            pulse_bpm: 77.0,
            background_level: 0.05,
            tissue_level: 0.7,
            vessel_level: 0.4,
            noise_sigma: 0.02,
            jitter_px_per_frame: 0.0,
            seed: 0,
        }
    }
}

impl PhantomSpec {
    /// Stronger vessel contrast, as seen under near-infrared illumination.
    pub fn near_infrared() -> Self {
        Self {
            tissue_level: 0.75,
            vessel_level: 0.3,
            pulse_bpm: 75.0,
            ..Self::default()
        }
    }

    pub fn frame_count(&self) -> usize {
        (self.duration_s * self.fps).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, message: String| {
            Err(Error::Spec {
                field: field.into(),
                message,
            })
        };
        if self.width < 8 || self.height < 8 {
            return bad("width", format!("frame {}x{} too small", self.width, self.height));
        }
        if !(self.fps > 0.0) {
            return bad("fps", "must be > 0".into());
        }
        if !(self.duration_s > 0.0) || self.frame_count() == 0 {
            return bad("duration_s", "must cover at least one frame".into());
        }
        if self.finger_top >= self.finger_bottom || self.finger_bottom >= self.height {
            return bad(
                "finger_bottom",
                format!(
                    "band {}..={} not inside a frame of height {}",
                    self.finger_top, self.finger_bottom, self.height
                ),
            );
        }
        if !(40.0..=180.0).contains(&self.pulse_bpm) {
            return bad("pulse_bpm", format!("{} outside [40, 180]", self.pulse_bpm));
        }
        for (name, v) in [
            ("background_level", self.background_level),
            ("tissue_level", self.tissue_level),
            ("vessel_level", self.vessel_level),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(name, format!("{v} outside [0, 1]"));
            }
        }
        if self.vessel_level >= self.tissue_level {
            return bad("vessel_level", "must be darker than tissue_level".into());
        }
        if !(self.noise_sigma >= 0.0) {
            return bad("noise_sigma", "must be >= 0".into());
        }
        if !(self.jitter_px_per_frame >= 0.0) {
            return bad("jitter_px_per_frame", "must be >= 0".into());
        }
        for v in &self.vessels {
            if v.base_width - v.modulation_amplitude.abs() < 1.0 {
                return bad("vessel", "width must stay >= 1 px".into());
            }
            let inside = v.center_row > self.finger_top as f64 && v.center_row < self.finger_bottom as f64;
            if !inside {
                return bad(
                    "vessel",
                    format!("center row {} outside finger band", v.center_row),
                );
            }
        }
        Ok(())
    }

    /// Parse the flat `key = value` format. Unlisted keys keep defaults; any
    /// `vessel = center_row, base_width, amplitude, orientation` line
    /// replaces the default vessel list, and `vessels = none` clears it.
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = Self::default();
        let mut vessels: Option<Vec<VesselSpec>> = None;
        for (key, value) in crate::config::key_values(text)? {
            let field_err = |msg: String| Error::Spec {
                field: key.clone(),
                message: msg,
            };
            let num = |v: &str| -> Result<f64> {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| field_err(format!("expected a number, got {v:?}")))
            };
            let int = |v: &str| -> Result<usize> {
                v.parse::<usize>()
                    .map_err(|_| field_err(format!("expected a non-negative integer, got {v:?}")))
            };
            match key.as_str() {
                "width" => spec.width = int(&value)?,
                "height" => spec.height = int(&value)?,
                "fps" => spec.fps = num(&value)?,
                "duration_s" => spec.duration_s = num(&value)?,
                "finger_top" => spec.finger_top = int(&value)?,
                "finger_bottom" => spec.finger_bottom = int(&value)?,
                "pulse_bpm" => spec.pulse_bpm = num(&value)?,
                "background_level" => spec.background_level = num(&value)?,
                "tissue_level" => spec.tissue_level = num(&value)?,
                "vessel_level" => spec.vessel_level = num(&value)?,
                "noise_sigma" => spec.noise_sigma = num(&value)?,
                "jitter_px_per_frame" => spec.jitter_px_per_frame = num(&value)?,
                "seed" => {
                    spec.seed = value
                        .parse()
                        .map_err(|_| field_err(format!("expected an integer seed, got {value:?}")))?
                }
                "vessels" if value == "none" => vessels = Some(Vec::new()),
                "vessel" => {
                    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                    if parts.len() != 4 {
                        return Err(field_err(
                            "expected center_row, base_width, amplitude, orientation".into(),
                        ));
                    }
                    vessels.get_or_insert_with(Vec::new).push(VesselSpec {
                        center_row: num(parts[0])?,
                        base_width: num(parts[1])?,
                        modulation_amplitude: num(parts[2])?,
                        orientation_deg: num(parts[3])?,
                    });
                }
                _ => return Err(field_err("unknown field".into())),
            }
        }
        if let Some(v) = vessels {
            spec.vessels = v;
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "width = {}", self.width);
        let _ = writeln!(s, "height = {}", self.height);
        let _ = writeln!(s, "fps = {}", self.fps);
        let _ = writeln!(s, "duration_s = {}", self.duration_s);
        let _ = writeln!(s, "finger_top = {}", self.finger_top);
        let _ = writeln!(s, "finger_bottom = {}", self.finger_bottom);
        let _ = writeln!(s, "pulse_bpm = {}", self.pulse_bpm);
        let _ = writeln!(s, "background_level = {}", self.background_level);
        let _ = writeln!(s, "tissue_level = {}", self.tissue_level);
        let _ = writeln!(s, "vessel_level = {}", self.vessel_level);
        let _ = writeln!(s, "noise_sigma = {}", self.noise_sigma);
        let _ = writeln!(s, "jitter_px_per_frame = {}", self.jitter_px_per_frame);
        let _ = writeln!(s, "seed = {}", self.seed);
        if self.vessels.is_empty() {
            let _ = writeln!(s, "vessels = none");
        }
        for v in &self.vessels {
            let _ = writeln!(
                s,
                "vessel = {}, {}, {}, {}",
                v.center_row, v.base_width, v.modulation_amplitude, v.orientation_deg
            );
        }
        s
    }
}

/// Known truth for every frame.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    spec: PhantomSpec,
    /// Horizontal scene offset per frame, px.
    pub offsets: Vec<f64>,
    /// `widths[frame][vessel]`, unrounded.
    pub widths: Vec<Vec<f64>>,
}

impl GroundTruth {
    pub fn spec(&self) -> &PhantomSpec {
        &self.spec
    }

    pub fn frame_count(&self) -> usize {
        self.offsets.len()
    }

    /// Drawn (rounded) width of `vessel` at `frame`.
    pub fn drawn_width(&self, frame: usize, vessel: usize) -> f64 {
        self.widths[frame][vessel].round()
    }

    /// Signed perpendicular distance from pixel `(x, y)` to a vessel's
    /// centerline at `frame`.
    pub fn distance(&self, frame: usize, vessel: usize, x: f64, y: f64) -> f64 {
        let v = &self.spec.vessels[vessel];
        signed_distance(v, self.spec.width, x - self.offsets[frame], y)
    }

    fn in_band(&self, y: usize) -> bool {
        y >= self.spec.finger_top && y <= self.spec.finger_bottom
    }

    /// Pixels covered by any vessel at `frame`.
    pub fn vessel_mask(&self, frame: usize) -> VeinMap {
        self.mask_where(frame, |t, k, x, y| t.distance(frame, k, x, y).abs() < t.drawn_width(frame, k) / 2.0)
    }

    /// One-pixel centerline of `vessel` at `frame`.
    pub fn centerline_mask(&self, frame: usize, vessel: usize) -> VeinMap {
        self.mask_where(frame, |t, k, x, y| k == vessel && t.distance(frame, k, x, y).abs() <= 0.5)
    }

    fn mask_where(&self, _frame: usize, pred: impl Fn(&Self, usize, f64, f64) -> bool) -> VeinMap {
        let (w, h) = (self.spec.width, self.spec.height);
        let mut m = VeinMap::empty(w, h);
        for y in 0..h {
            if !self.in_band(y) {
                continue;
            }
            for x in 0..w {
                if (0..self.spec.vessels.len()).any(|k| pred(self, k, x as f64, y as f64)) {
                    m.set(x, y, true);
                }
            }
        }
        m
    }
}

fn signed_distance(v: &VesselSpec, width: usize, x: f64, y: f64) -> f64 {
    let theta = v.orientation_deg.to_radians();
    let xc = (width / 2) as f64;
    -(x - xc) * theta.sin() + (y - v.center_row) * theta.cos()
}

/// Coverage of `[lo, hi]` by a unit-area Gaussian of scale `sigma` at `t`.
fn blurred_box(t: f64, lo: f64, hi: f64, sigma: f64) -> f64 {
    let s = SQRT_2 * sigma;
    0.5 * (libm::erf((t - lo) / s) - libm::erf((t - hi) / s))
}

/// Deterministic generator; frames can be rendered individually.
#[derive(Debug, Clone)]
pub struct Phantom {
    truth: GroundTruth,
}

impl Phantom {
    pub fn new(spec: PhantomSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.frame_count();
        let offsets = jitter_offsets(&spec, n);
        let freq = spec.pulse_bpm / 60.0;
        let widths = (0..n)
            .map(|i| {
                let t = i as f64 / spec.fps;
                spec.vessels
                    .iter()
                    .map(|v| v.base_width + v.modulation_amplitude * (2.0 * PI * freq * t).sin())
                    .collect()
            })
            .collect();
        Ok(Self {
            truth: GroundTruth {
                spec,
                offsets,
                widths,
            },
        })
    }

    pub fn truth(&self) -> &GroundTruth {
        &self.truth
    }

    pub fn spec(&self) -> &PhantomSpec {
        &self.truth.spec
    }

    pub fn frame_count(&self) -> usize {
        self.truth.frame_count()
    }

    pub fn render_frame(&self, i: usize) -> Frame {
        let spec = &self.truth.spec;
        let (w, h) = (spec.width, spec.height);
        let band_lo = spec.finger_top as f64 - 0.5;
        let band_hi = spec.finger_bottom as f64 + 0.5;
        let mut rng = ChaCha8Rng::seed_from_u64(crate::veinmap::derive_seed(spec.seed, i as u64));
        let noise = Normal::new(0.0, spec.noise_sigma.max(f64::MIN_POSITIVE)).expect("sigma >= 0");
        let mut pixels = Vec::with_capacity(w * h);
        for y in 0..h {
            let finger = blurred_box(y as f64, band_lo, band_hi, 2.0);
            for x in 0..w {
                let mut shadow: f64 = 0.0;
                for k in 0..spec.vessels.len() {
                    let d = self.truth.distance(i, k, x as f64, y as f64);
                    let half = self.truth.drawn_width(i, k) / 2.0;
                    shadow += blurred_box(d, -half, half, 1.0);
                }
                let tissue = spec.tissue_level - (spec.tissue_level - spec.vessel_level) * shadow.min(1.0);
                let mut v = spec.background_level + finger * (tissue - spec.background_level);
                if spec.noise_sigma > 0.0 {
                    v += noise.sample(&mut rng);
                }
                pixels.push(v.clamp(0.0, 1.0));
            }
        }
        Frame::from_raw_unchecked(w, h, pixels)
    }
}

/// Cumulative uniform steps, reflected to stay within a quarter frame width
/// of the origin so the scene stays in view.
fn jitter_offsets(spec: &PhantomSpec, n: usize) -> Vec<f64> {
    let mut offsets = Vec::with_capacity(n);
    let j = spec.jitter_px_per_frame;
    let limit = spec.width as f64 / 4.0;
    let mut rng = ChaCha8Rng::seed_from_u64(crate::veinmap::derive_seed(spec.seed, u64::MAX));
    let mut o = 0.0f64;
    for i in 0..n {
        if i > 0 && j > 0.0 {
            o += rng.random_range(-j..=j);
            if o > limit {
                o = 2.0 * limit - o;
            } else if o < -limit {
                o = -2.0 * limit - o;
            }
        }
        offsets.push(o);
    }
    offsets
}

pub fn render_phantom(spec: &PhantomSpec) -> Result<(VideoSequence, GroundTruth)> {
    let phantom = Phantom::new(spec.clone())?;
    let frames: Vec<Frame> = (0..phantom.frame_count())
        .into_par_iter()
        .map(|i| phantom.render_frame(i))
        .collect();
    Ok((VideoSequence::new(frames, spec.fps)?, phantom.truth))
}
