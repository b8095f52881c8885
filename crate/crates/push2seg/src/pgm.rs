//! Binary PGM ("P5") for label images (16-bit big-endian, maxval 65535) and
//! appearance images (8-bit, maxval 255).

use std::path::Path;

use push2seg_core::{GrayImage, LabelImage};

use crate::error::{CliError, Result};
use crate::fsio::{read_bytes, write_atomic};

pub fn encode_label(img: &LabelImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n65535\n", img.width(), img.height()).into_bytes();
    out.reserve(img.as_slice().len() * 2);
    for &v in img.as_slice() {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out
}

pub fn encode_gray(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.as_slice());
    out
}

pub fn decode_label(bytes: &[u8]) -> Result<LabelImage, String> {
    let (w, h, maxval, data) = parse(bytes)?;
    if maxval != 65535 {
        return Err(format!("label maxval must be 65535, found {maxval}"));
    }
    if data.len() != w * h * 2 {
        return Err(format!("expected {} sample bytes, found {}", w * h * 2, data.len()));
    }
    let labels = data.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect();
    LabelImage::from_raw(w, h, labels).map_err(|e| e.to_string())
}

pub fn decode_gray(bytes: &[u8]) -> Result<GrayImage, String> {
    let (w, h, maxval, data) = parse(bytes)?;
    if maxval != 255 {
        return Err(format!("appearance maxval must be 255, found {maxval}"));
    }
    if data.len() != w * h {
        return Err(format!("expected {} sample bytes, found {}", w * h, data.len()));
    }
    GrayImage::from_raw(w, h, data.to_vec()).map_err(|e| e.to_string())
}

/// Header fields and the sample bytes. Comments (`#` to end of line) are
/// allowed between header tokens; exactly one whitespace byte follows maxval.
fn parse(bytes: &[u8]) -> Result<(usize, usize, usize, &[u8]), String> {
    let mut pos = 0;
    let mut fields = [0usize; 3];
    if bytes.get(..2) != Some(b"P5") {
        return Err("not a binary PGM (missing P5 magic)".into());
    }
    pos += 2;
    for field in &mut fields {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err("truncated header".into()),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err("malformed header".into());
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or("header value out of range")?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err("malformed header".into());
    }
    Ok((fields[0], fields[1], fields[2], &bytes[pos + 1..]))
}

pub fn read_label(path: &Path) -> Result<LabelImage> {
    decode_label(&read_bytes(path)?).map_err(|e| CliError::format(path, e))
}

pub fn read_gray(path: &Path) -> Result<GrayImage> {
    decode_gray(&read_bytes(path)?).map_err(|e| CliError::format(path, e))
}

pub fn write_label(path: &Path, img: &LabelImage) -> Result<()> {
    write_atomic(path, &encode_label(img))
}

pub fn write_gray(path: &Path, img: &GrayImage) -> Result<()> {
    write_atomic(path, &encode_gray(img))
}
