//! Loading frame directories into a [`VideoSequence`].
//!
//! Frames are ordered by lexicographic filename, so indices in filenames
//! must be zero-padded (`f0001.pgm`, not `f1.pgm`).

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame::{normalize_buffer, Frame, VideoSequence};
use crate::pgm;

/// Where to find frames and at what rate they were captured.
#[derive(Debug, Clone)]
pub struct SequenceManifest {
    pub directory: PathBuf,
    /// Shell-style pattern matched against file names, e.g. `*.pgm`.
    pub pattern: String,
    pub fps: f64,
}

impl SequenceManifest {
    pub fn new(directory: impl Into<PathBuf>, fps: f64) -> Self {
        Self {
            directory: directory.into(),
            pattern: "*".into(),
            fps,
        }
    }

    pub fn with_pattern(mut self, pattern: impl Into<String>) -> Self {
        self.pattern = pattern.into();
        self
    }
}

/// Matching `.pgm`/`.png` files in lexicographic order.
pub fn list_frames(manifest: &SequenceManifest) -> Result<Vec<PathBuf>> {
    let pattern = glob::Pattern::new(&manifest.pattern)
        .map_err(|e| Error::param(format!("bad pattern {:?}: {e}", manifest.pattern)))?;
    let entries = fs::read_dir(&manifest.directory).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::NotFound(format!("directory {}", manifest.directory.display()))
        } else {
            Error::Io(e)
        }
    })?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry?.path();
        if !path.is_file() || !is_frame_file(&path) {
            continue;
        }
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if pattern.matches(name) {
            files.push(path);
        }
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    if files.is_empty() {
        return Err(Error::NotFound(format!(
            "no frames matching {:?} in {}",
            manifest.pattern,
            manifest.directory.display()
        )));
    }
    Ok(files)
}

fn is_frame_file(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("pgm") | Some("png")
    )
}

pub fn load_sequence(manifest: &SequenceManifest) -> Result<VideoSequence> {
    if !(manifest.fps > 0.0 && manifest.fps.is_finite()) {
        return Err(Error::param(format!("fps must be > 0, got {}", manifest.fps)));
    }
    let files = list_frames(manifest)?;
    let frames = files
        .par_iter()
        .map(|p| load_frame(p))
        .collect::<Result<Vec<_>>>()?;
    VideoSequence::new(frames, manifest.fps)
}

pub fn load_frame(path: &Path) -> Result<Frame> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    let img = match ext.as_deref() {
        Some("png") => read_png(path)?,
        _ => pgm::read(path)?,
    };
    normalize_buffer(img.width, img.height, &img.data)
}

fn read_png(path: &Path) -> Result<pgm::GrayImage> {
    let file = fs::File::open(path)?;
    let decoder = png::Decoder::new(std::io::BufReader::new(file));
    let fmt_err = |e: png::DecodingError| Error::Format(format!("{}: {e}", path.display()));
    let mut reader = decoder.read_info().map_err(fmt_err)?;
    let (color, depth) = (reader.info().color_type, reader.info().bit_depth);
    if color != png::ColorType::Grayscale || depth != png::BitDepth::Eight {
        return Err(Error::Format(format!(
            "{}: expected 8-bit grayscale PNG, got {color:?} {depth:?}",
            path.display()
        )));
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Format(format!("{}: image too large", path.display())))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(fmt_err)?;
    let (width, height) = (info.width as usize, info.height as usize);
    buf.truncate(info.buffer_size());
    let data = if info.line_size == width {
        buf
    } else {
        buf.chunks(info.line_size)
            .flat_map(|row| row[..width].iter().copied())
            .collect()
    };
    Ok(pgm::GrayImage {
        width,
        height,
        data,
    })
}

/// Write an 8-bit grayscale PNG.
pub fn write_png(path: &Path, width: usize, height: usize, data: &[u8]) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut enc = png::Encoder::new(std::io::BufWriter::new(file), width as u32, height as u32);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Eight);
    let mut w = enc
        .write_header()
        .map_err(|e| Error::Format(e.to_string()))?;
    w.write_image_data(data)
        .map_err(|e| Error::Format(e.to_string()))?;
    Ok(())
}
