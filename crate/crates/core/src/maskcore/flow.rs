use alloc::vec;
use alloc::vec::Vec;

use super::mask::BinaryMask;
use crate::error::{Error, Result};
use crate::geom::round_half_up;

/// Dense per-pixel displacement `(u, v)` in pixels. Samples are `f32` so the
/// field round-trips through `.flo` files bit for bit.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    uv: Vec<[f32; 2]>,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self::constant(width, height, 0.0, 0.0)
    }

    pub fn constant(width: usize, height: usize, u: f32, v: f32) -> Self {
        FlowField {
            width,
            height,
            uv: vec![[u, v]; width * height],
        }
    }

    pub fn from_raw(width: usize, height: usize, uv: Vec<[f32; 2]>) -> Result<Self> {
        if uv.len() != width * height {
            return Err(Error::BufferLength {
                expected: width * height,
                actual: uv.len(),
            });
        }
        Ok(FlowField { width, height, uv })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn as_slice(&self) -> &[[f32; 2]] {
        &self.uv
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> (f32, f32) {
        let [u, v] = self.uv[y * self.width + x];
        (u, v)
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, u: f32, v: f32) {
        self.uv[y * self.width + x] = [u, v];
    }

    /// Chains `self` (a to b) with `next` (b to c). The lookup into `next`
    /// happens at the rounded landing pixel, clamped to the raster.
    pub fn compose(&self, next: &FlowField) -> Result<FlowField> {
        if self.dims() != next.dims() {
            return Err(Error::dims(self.dims(), next.dims()));
        }
        let (w, h) = self.dims();
        let mut out = FlowField::zeros(w, h);
        for y in 0..h {
            for x in 0..w {
                let (u, v) = self.get(x, y);
                let lx = clamp_index(x as f64 + u as f64, w);
                let ly = clamp_index(y as f64 + v as f64, h);
                let (u2, v2) = next.get(lx, ly);
                out.set(x, y, u + u2, v + v2);
            }
        }
        Ok(out)
    }

    /// Mean displacement magnitude over the members of `mask`; 0 for an
    /// empty mask.
    pub fn mean_magnitude(&self, mask: &BinaryMask) -> Result<f64> {
        if self.dims() != mask.dims() {
            return Err(Error::dims(self.dims(), mask.dims()));
        }
        let (mut sum, mut n) = (0.0, 0usize);
        for (x, y) in mask.iter() {
            let (u, v) = self.get(x, y);
            sum += libm::hypot(u as f64, v as f64);
            n += 1;
        }
        Ok(if n == 0 { 0.0 } else { sum / n as f64 })
    }
}

fn clamp_index(v: f64, len: usize) -> usize {
    let r = round_half_up(v);
    if r <= 0.0 {
        0
    } else if r >= (len - 1) as f64 {
        len - 1
    } else {
        r as usize
    }
}

/// Adjacent-frame flows of an episode: `forward[t]` maps frame `t` to `t+1`,
/// `backward[t]` maps frame `t+1` back to `t`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Flows {
    pub forward: Vec<FlowField>,
    pub backward: Vec<FlowField>,
}

impl Flows {
    pub fn new(forward: Vec<FlowField>, backward: Vec<FlowField>) -> Self {
        Flows { forward, backward }
    }

    pub fn forward(&self, t: usize) -> Result<&FlowField> {
        self.forward
            .get(t)
            .ok_or(Error::MissingFlow { from: t, to: t + 1 })
    }

    pub fn backward(&self, t: usize) -> Result<&FlowField> {
        self.backward
            .get(t)
            .ok_or(Error::MissingFlow { from: t + 1, to: t })
    }
}
