//! Grayscale frames and frame sequences.
//!
//! Intensities are stored as `f64` in `[0, 1]`. Both extraction methods
//! differentiate intensity profiles, which is better conditioned on reals
//! than on 8-bit integers.

use crate::error::{Error, Result};

/// One grayscale image, row-major, intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl Frame {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension(format!("empty frame {width}x{height}")));
        }
        if pixels.len() != width * height {
            return Err(Error::Dimension(format!(
                "{} pixels for a {width}x{height} frame",
                pixels.len()
            )));
        }
        if let Some(bad) = pixels.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::param(format!("intensity {bad} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    /// Quantize back to 8 bits (round to nearest).
    pub fn denormalize(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .map(|&p| (p * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    }

    pub(crate) fn from_raw_unchecked(width: usize, height: usize, pixels: Vec<f64>) -> Self {
        debug_assert_eq!(pixels.len(), width * height);
        Self {
            width,
            height,
            pixels,
        }
    }
}

/// Map a grid of 8-bit intensities onto `[0, 1]` by dividing by 255.
pub fn normalize_frame<R: AsRef<[u8]>>(raw: &[R]) -> Result<Frame> {
    let height = raw.len();
    let width = raw.first().map(|r| r.as_ref().len()).unwrap_or(0);
    if height == 0 || width == 0 {
        return Err(Error::Dimension("empty raw grid".into()));
    }
    let mut pixels = Vec::with_capacity(width * height);
    for (y, row) in raw.iter().enumerate() {
        let row = row.as_ref();
        if row.len() != width {
            return Err(Error::Dimension(format!(
                "ragged grid: row {y} has {} pixels, expected {width}",
                row.len()
            )));
        }
        pixels.extend(row.iter().map(|&v| f64::from(v) / 255.0));
    }
    Ok(Frame::from_raw_unchecked(width, height, pixels))
}

/// Same as [`normalize_frame`] for a flat row-major buffer.
pub fn normalize_buffer(width: usize, height: usize, raw: &[u8]) -> Result<Frame> {
    if width == 0 || height == 0 || raw.len() != width * height {
        return Err(Error::Dimension(format!(
            "{} bytes for a {width}x{height} frame",
            raw.len()
        )));
    }
    let pixels = raw.iter().map(|&v| f64::from(v) / 255.0).collect();
    Ok(Frame::from_raw_unchecked(width, height, pixels))
}

/// Ordered frames with a known frame rate.
#[derive(Debug, Clone)]
pub struct VideoSequence {
    frames: Vec<Frame>,
    fps: f64,
}

impl VideoSequence {
    pub fn new(frames: Vec<Frame>, fps: f64) -> Result<Self> {
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(Error::param(format!("fps must be > 0, got {fps}")));
        }
        if let Some(first) = frames.first() {
            let dims = (first.width(), first.height());
            for (i, f) in frames.iter().enumerate() {
                if (f.width(), f.height()) != dims {
                    return Err(Error::Dimension(format!(
                        "frame {i} is {}x{}, expected {}x{}",
                        f.width(),
                        f.height(),
                        dims.0,
                        dims.1
                    )));
                }
            }
        }
        Ok(Self { frames, fps })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<Frame> {
        self.frames
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Capture wall time in seconds.
    pub fn duration_s(&self) -> f64 {
        self.frames.len() as f64 / self.fps
    }
}
