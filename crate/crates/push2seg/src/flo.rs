//! Middlebury `.flo` optical flow files: the float 202021.25 as a magic tag,
//! width and height as `i32`, then interleaved `(u, v)` `f32` pairs, all
//! little-endian.

use std::path::Path;

use push2seg_core::FlowField;

use crate::error::{CliError, Result};
use crate::fsio::{read_bytes, write_atomic};

pub const MAGIC: f32 = 202021.25;

pub fn encode(flow: &FlowField) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + flow.as_slice().len() * 8);
    out.extend_from_slice(&MAGIC.to_le_bytes());
    out.extend_from_slice(&(flow.width() as i32).to_le_bytes());
    out.extend_from_slice(&(flow.height() as i32).to_le_bytes());
    for [u, v] in flow.as_slice() {
        out.extend_from_slice(&u.to_le_bytes());
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<FlowField, String> {
    if bytes.len() < 12 {
        return Err("truncated header".into());
    }
    let word = |i: usize| [bytes[i], bytes[i + 1], bytes[i + 2], bytes[i + 3]];
    if f32::from_le_bytes(word(0)) != MAGIC {
        return Err("bad magic (expected 202021.25)".into());
    }
    let w = i32::from_le_bytes(word(4));
    let h = i32::from_le_bytes(word(8));
    if w < 0 || h < 0 {
        return Err(format!("negative size {w}x{h}"));
    }
    let (w, h) = (w as usize, h as usize);
    let body = &bytes[12..];
    if body.len() != w * h * 8 {
        return Err(format!("expected {} data bytes, found {}", w * h * 8, body.len()));
    }
    let uv = body
        .chunks_exact(8)
        .map(|c| {
            [
                f32::from_le_bytes([c[0], c[1], c[2], c[3]]),
                f32::from_le_bytes([c[4], c[5], c[6], c[7]]),
            ]
        })
        .collect();
    FlowField::from_raw(w, h, uv).map_err(|e| e.to_string())
}

pub fn read(path: &Path) -> Result<FlowField> {
    decode(&read_bytes(path)?).map_err(|e| CliError::format(path, e))
}

pub fn write(path: &Path, flow: &FlowField) -> Result<()> {
    write_atomic(path, &encode(flow))
}
