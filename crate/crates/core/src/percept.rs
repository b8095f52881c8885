//! Imperfect perception: an under-segmenting stand-in for a pre-trained
//! instance segmenter, and a block-matching optical flow estimator.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::config::{BlockMatchParams, SegmenterConfig};
use crate::error::{Error, Result};
use crate::maskcore::{BinaryMask, FlowField, Flows, GrayImage, LabelImage};

/// Per-frame detections `o_t^i`. Masks in a frame are disjoint and nonempty.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct InitialSegmentation {
    pub frames: Vec<Vec<BinaryMask>>,
}

impl InitialSegmentation {
    pub fn new(frames: Vec<Vec<BinaryMask>>) -> Self {
        InitialSegmentation { frames }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn mask(&self, frame: usize, index: usize) -> &BinaryMask {
        &self.frames[frame][index]
    }

    pub fn total_masks(&self) -> usize {
        self.frames.iter().map(Vec::len).sum()
    }

    /// Raster form with ids `1..=n_t` per frame.
    pub fn to_label_images(&self) -> Result<Vec<LabelImage>> {
        self.frames
            .iter()
            .map(|masks| {
                let (w, h) = masks.first().map(BinaryMask::dims).unwrap_or((0, 0));
                LabelImage::from_masks(w, h, masks)
            })
            .collect()
    }

    pub fn from_label_images(images: &[LabelImage]) -> Self {
        InitialSegmentation {
            frames: images
                .iter()
                .map(|img| img.masks().into_iter().map(|(_, m)| m).collect())
                .collect(),
        }
    }
}

/// Merge ground-truth objects that sit closer than `d_merge` pixels.
///
/// Two objects are linked when their Chebyshev pixel distance is at most
/// `d_merge` (fewer than `d_merge` empty pixels between them); linked groups
/// are merged transitively and each output mask is the union of the original
/// ground-truth masks in its group. Output order: largest area first, ties by
/// smallest `(y, x)` member. With `erosion_prob > 0` each output mask loses
/// its boundary ring with that probability, unless that would empty it.
pub fn undersegment<R: Rng + ?Sized>(
    gt: &LabelImage,
    cfg: &SegmenterConfig,
    rng: &mut R,
) -> Vec<BinaryMask> {
    let objects: Vec<BinaryMask> = gt.masks().into_iter().map(|(_, m)| m).collect();
    let n = objects.len();
    let mut parent: Vec<usize> = (0..n).collect();
    if cfg.d_merge > 0 {
        let grown: Vec<BinaryMask> = objects
            .iter()
            .map(|m| m.dilate(cfg.d_merge as usize))
            .collect();
        for (i, g) in grown.iter().enumerate() {
            for (j, o) in objects.iter().enumerate().skip(i + 1) {
                if g.intersects(o).expect("same raster") {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut groups: Vec<Option<BinaryMask>> = vec![None; n];
    for (i, m) in objects.iter().enumerate() {
        let r = find(&mut parent, i);
        match &mut groups[r] {
            Some(acc) => acc.union_with(m).expect("same raster"),
            slot => *slot = Some(m.clone()),
        }
    }
    let mut out: Vec<(usize, usize, BinaryMask)> = groups
        .into_iter()
        .flatten()
        .map(|m| {
            let (x, y) = m.iter().next().expect("nonempty");
            (m.area(), y * m.width() + x, m)
        })
        .collect();
    out.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    out.into_iter()
        .map(|(_, _, m)| {
            if cfg.erosion_prob > 0.0 && rng.gen_bool(cfg.erosion_prob) {
                let e = m.eroded();
                if !e.is_empty() {
                    return e;
                }
            }
            m
        })
        .collect()
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Dense flow by exhaustive block matching.
///
/// For each pixel the displacement within `[-search, search]^2` minimising
/// the sum of absolute differences over the in-bounds part of a
/// `patch x patch` window wins; samples of the second frame are clamped to
/// the raster. Ties prefer the smaller displacement magnitude, then the
/// smaller `(dy, dx)`.
pub fn estimate_flow_blockmatch(
    app_t: &GrayImage,
    app_t1: &GrayImage,
    patch: usize,
    search: usize,
) -> Result<FlowField> {
    if app_t.dims() != app_t1.dims() {
        return Err(Error::dims(app_t.dims(), app_t1.dims()));
    }
    if patch.is_multiple_of(2) {
        return Err(Error::invalid("patch", "must be odd"));
    }
    if search == 0 {
        return Err(Error::invalid("search", "must be >= 1"));
    }
    let (w, h) = app_t.dims();
    let half = (patch / 2) as i64;
    let s = search as i64;

    // Candidate displacements in tie-break order.
    let mut candidates: Vec<(i64, i64)> = Vec::with_capacity(((2 * s + 1) * (2 * s + 1)) as usize);
    for dy in -s..=s {
        for dx in -s..=s {
            candidates.push((dx, dy));
        }
    }
    candidates.sort_by_key(|&(dx, dy)| (dx * dx + dy * dy, dy, dx));

    // A pixel whose window is background in both frames scores 0 at zero
    // displacement, which is also the preferred candidate. Only the bounding
    // box of the remaining pixels needs searching.
    let a = app_t.as_slice();
    let b = app_t1.as_slice();
    let mut best = vec![(0i64, 0i64); w * h];
    let Some((fx0, fy0, fx1, fy1)) = foreground_box(a, b, w, h) else {
        return FlowField::from_raw(w, h, vec![[0.0, 0.0]; w * h]);
    };
    let bx0 = fx0.saturating_sub(half as usize);
    let by0 = fy0.saturating_sub(half as usize);
    let bx1 = (fx1 + half as usize).min(w - 1);
    let by1 = (fy1 + half as usize).min(h - 1);
    let ax0 = bx0.saturating_sub(half as usize);
    let ay0 = by0.saturating_sub(half as usize);
    let ax1 = (bx1 + half as usize).min(w - 1);
    let ay1 = (by1 + half as usize).min(h - 1);
    let (rw, rh) = (ax1 - ax0 + 1, ay1 - ay0 + 1);

    let mut best_cost = vec![u32::MAX; rw * rh];
    let mut integral = vec![0u32; (rw + 1) * (rh + 1)];
    for &(dx, dy) in &candidates {
        for ry in 0..rh {
            let y = ay0 + ry;
            let sy = (y as i64 + dy).clamp(0, h as i64 - 1) as usize;
            let src = &b[sy * w..(sy + 1) * w];
            let cur = &a[y * w..(y + 1) * w];
            let mut row = 0u32;
            for rx in 0..rw {
                let x = ax0 + rx;
                let sx = (x as i64 + dx).clamp(0, w as i64 - 1) as usize;
                row += cur[x].abs_diff(src[sx]) as u32;
                integral[(ry + 1) * (rw + 1) + rx + 1] = integral[ry * (rw + 1) + rx + 1] + row;
            }
        }
        for y in by0..=by1 {
            let y0 = (y as i64 - half).max(ay0 as i64) as usize - ay0;
            let y1 = ((y as i64 + half) as usize).min(ay1) + 1 - ay0;
            for x in bx0..=bx1 {
                let x0 = (x as i64 - half).max(ax0 as i64) as usize - ax0;
                let x1 = ((x as i64 + half) as usize).min(ax1) + 1 - ax0;
                let cost = integral[y1 * (rw + 1) + x1] + integral[y0 * (rw + 1) + x0]
                    - integral[y0 * (rw + 1) + x1]
                    - integral[y1 * (rw + 1) + x0];
                let i = (y - ay0) * rw + (x - ax0);
                // candidates arrive in tie-break order, so strict < keeps the
                // preferred one on equal cost
                if cost < best_cost[i] {
                    best_cost[i] = cost;
                    best[y * w + x] = (dx, dy);
                }
            }
        }
    }
    let uv = best.into_iter().map(|(dx, dy)| [dx as f32, dy as f32]).collect();
    FlowField::from_raw(w, h, uv)
}

/// Bounding box of pixels that are nonzero in either image.
fn foreground_box(a: &[u8], b: &[u8], w: usize, h: usize) -> Option<(usize, usize, usize, usize)> {
    let mut bx: Option<(usize, usize, usize, usize)> = None;
    for y in 0..h {
        for x in 0..w {
            if a[y * w + x] != 0 || b[y * w + x] != 0 {
                bx = Some(match bx {
                    None => (x, y, x, y),
                    Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
                });
            }
        }
    }
    bx
}

/// Block-matching flow in both directions for every adjacent frame pair.
pub fn blockmatch_flows(appearance: &[GrayImage], params: &BlockMatchParams) -> Result<Flows> {
    params.validate()?;
    let mut forward = Vec::with_capacity(appearance.len().saturating_sub(1));
    let mut backward = Vec::with_capacity(appearance.len().saturating_sub(1));
    for pair in appearance.windows(2) {
        forward.push(estimate_flow_blockmatch(&pair[0], &pair[1], params.patch, params.search)?);
        backward.push(estimate_flow_blockmatch(&pair[1], &pair[0], params.patch, params.search)?);
    }
    Ok(Flows::new(forward, backward))
}
