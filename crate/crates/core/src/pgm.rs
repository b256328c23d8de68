//! Binary PGM (P5, maxval 255) encode/decode.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

pub fn encode(width: usize, height: usize, data: &[u8]) -> Vec<u8> {
    assert_eq!(data.len(), width * height, "pgm buffer size mismatch");
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(data);
    out
}

pub fn write(path: &Path, width: usize, height: usize, data: &[u8]) -> Result<()> {
    fs::write(path, encode(width, height, data))?;
    Ok(())
}

pub fn read(path: &Path) -> Result<GrayImage> {
    let bytes = fs::read(path)?;
    decode(&bytes).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn decode(bytes: &[u8]) -> Result<GrayImage> {
    let mut pos = 0usize;
    let magic = next_token(bytes, &mut pos)?;
    if magic != b"P5" {
        return Err(Error::Format("not a binary PGM (P5)".into()));
    }
    let width = parse_num(next_token(bytes, &mut pos)?)?;
    let height = parse_num(next_token(bytes, &mut pos)?)?;
    let maxval = parse_num(next_token(bytes, &mut pos)?)?;
    if maxval != 255 {
        return Err(Error::Format(format!("maxval {maxval} unsupported, need 255")));
    }
    // exactly one whitespace byte separates the header from the raster
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::Format("truncated header".into()));
    }
    pos += 1;
    let n = width * height;
    if width == 0 || height == 0 {
        return Err(Error::Dimension(format!("empty image {width}x{height}")));
    }
    if bytes.len() < pos + n {
        return Err(Error::Format(format!(
            "raster has {} bytes, expected {n}",
            bytes.len() - pos
        )));
    }
    Ok(GrayImage {
        width,
        height,
        data: bytes[pos..pos + n].to_vec(),
    })
}

fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::Format("truncated header".into()));
    }
    Ok(&bytes[start..*pos])
}

fn parse_num(tok: &[u8]) -> Result<usize> {
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Format(format!("bad header number {:?}", String::from_utf8_lossy(tok))))
}
