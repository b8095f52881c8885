use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use super::flow::FlowField;
use crate::error::{Error, Result};
use crate::geom::round_half_up;

/// A set of pixels on a `width` x `height` raster, stored as a row-major
/// bitset.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    words: Vec<u64>,
}

/// Inclusive pixel bounding box.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundingBox {
    pub min_x: usize,
    pub min_y: usize,
    pub max_x: usize,
    pub max_y: usize,
}

impl BoundingBox {
    pub fn center(&self) -> (f64, f64) {
        (
            (self.min_x + self.max_x) as f64 / 2.0,
            (self.min_y + self.max_y) as f64 / 2.0,
        )
    }
}

impl core::fmt::Debug for BinaryMask {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("BinaryMask")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("area", &self.area())
            .field("bbox", &self.bounding_box())
            .finish()
    }
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        BinaryMask {
            width,
            height,
            words: vec![0; (width * height).div_ceil(64)],
        }
    }

    pub fn from_pixels<I>(width: usize, height: usize, pixels: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut m = BinaryMask::new(width, height);
        for (x, y) in pixels {
            if x >= width || y >= height {
                return Err(Error::OutOfBounds {
                    x,
                    y,
                    width,
                    height,
                });
            }
            m.insert(x, y);
        }
        Ok(m)
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = BinaryMask::new(width, height);
        for y in 0..height {
            for x in 0..width {
                if f(x, y) {
                    m.insert(x, y);
                }
            }
        }
        m
    }

    /// Filled axis-aligned rectangle `[x0, x0+w) x [y0, y0+h)`, clipped.
    pub fn rect(width: usize, height: usize, x0: usize, y0: usize, w: usize, h: usize) -> Self {
        BinaryMask::from_fn(width, height, |x, y| {
            x >= x0 && x < x0 + w && y >= y0 && y < y0 + h
        })
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

    #[inline]
    pub fn contains(&self, x: usize, y: usize) -> bool {
        if x >= self.width || y >= self.height {
            return false;
        }
        let i = y * self.width + x;
        self.words[i >> 6] >> (i & 63) & 1 == 1
    }

    #[inline]
    pub fn insert(&mut self, x: usize, y: usize) {
        debug_assert!(x < self.width && y < self.height);
        let i = y * self.width + x;
        self.words[i >> 6] |= 1 << (i & 63);
    }

    #[inline]
    pub fn remove(&mut self, x: usize, y: usize) {
        let i = y * self.width + x;
        self.words[i >> 6] &= !(1 << (i & 63));
    }

    pub fn area(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Member pixels in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let width = self.width;
        self.words.iter().enumerate().flat_map(move |(wi, &word)| {
            let mut bits = word;
            core::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let b = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                let i = wi * 64 + b;
                Some((i % width, i / width))
            })
        })
    }

    fn check_dims(&self, other: &BinaryMask) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::dims(self.dims(), other.dims()));
        }
        Ok(())
    }

    fn zip_words(&self, other: &BinaryMask, f: impl Fn(u64, u64) -> u64) -> Result<BinaryMask> {
        self.check_dims(other)?;
        Ok(BinaryMask {
            width: self.width,
            height: self.height,
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn intersection_area(&self, other: &BinaryMask) -> Result<usize> {
        self.check_dims(other)?;
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum())
    }

    pub fn union(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.zip_words(other, |a, b| a | b)
    }

    pub fn intersection(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.zip_words(other, |a, b| a & b)
    }

    pub fn difference(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.zip_words(other, |a, b| a & !b)
    }

    pub fn union_with(&mut self, other: &BinaryMask) -> Result<()> {
        self.check_dims(other)?;
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
        Ok(())
    }

    pub fn intersects(&self, other: &BinaryMask) -> Result<bool> {
        self.check_dims(other)?;
        Ok(self.words.iter().zip(&other.words).any(|(a, b)| a & b != 0))
    }

    pub fn is_subset_of(&self, other: &BinaryMask) -> Result<bool> {
        self.check_dims(other)?;
        Ok(self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0))
    }

    /// Intersection over union. Two empty masks score 0 so an empty
    /// detection never counts as a match.
    pub fn iou(&self, other: &BinaryMask) -> Result<f64> {
        self.check_dims(other)?;
        let (mut inter, mut uni) = (0u64, 0u64);
        for (a, b) in self.words.iter().zip(&other.words) {
            inter += (a & b).count_ones() as u64;
            uni += (a | b).count_ones() as u64;
        }
        if uni == 0 {
            return Ok(0.0);
        }
        Ok(inter as f64 / uni as f64)
    }

    pub fn bounding_box(&self) -> Option<BoundingBox> {
        let mut it = self.iter();
        let (x, y) = it.next()?;
        let mut b = BoundingBox {
            min_x: x,
            min_y: y,
            max_x: x,
            max_y: y,
        };
        for (x, y) in it {
            b.min_x = b.min_x.min(x);
            b.max_x = b.max_x.max(x);
            b.max_y = y;
        }
        Some(b)
    }

    /// Arithmetic mean of member pixel coordinates.
    pub fn centroid(&self) -> Result<(f64, f64)> {
        let (mut sx, mut sy, mut n) = (0u64, 0u64, 0u64);
        for (x, y) in self.iter() {
            sx += x as u64;
            sy += y as u64;
            n += 1;
        }
        if n == 0 {
            return Err(Error::EmptyMask);
        }
        Ok((sx as f64 / n as f64, sy as f64 / n as f64))
    }

    /// Forward warp: each member `p` moves to `round(p + flow(p))`. Targets
    /// outside the raster are dropped; collisions merge.
    pub fn warp(&self, flow: &FlowField) -> Result<BinaryMask> {
        if self.dims() != flow.dims() {
            return Err(Error::dims(self.dims(), flow.dims()));
        }
        let mut out = BinaryMask::new(self.width, self.height);
        for (x, y) in self.iter() {
            let (u, v) = flow.get(x, y);
            let tx = round_half_up(x as f64 + u as f64);
            let ty = round_half_up(y as f64 + v as f64);
            if tx >= 0.0 && ty >= 0.0 && tx < self.width as f64 && ty < self.height as f64 {
                out.insert(tx as usize, ty as usize);
            }
        }
        Ok(out)
    }

    /// Hole-free warp using both flows of a frame pair. `fwd` maps this
    /// mask's frame to the target frame and `bwd` maps back. A pixel `q`
    /// next to the forward warp is kept when one of the four pixels around
    /// its preimage `q + bwd(q)` is a member `p` whose forward image rounds
    /// to within one pixel of `q`.
    pub fn warp_consistent(&self, fwd: &FlowField, bwd: &FlowField) -> Result<BinaryMask> {
        if bwd.dims() != fwd.dims() {
            return Err(Error::dims(fwd.dims(), bwd.dims()));
        }
        let splat = self.warp(fwd)?;
        let mut out = BinaryMask::new(self.width, self.height);
        let (w, h) = (self.width as f64, self.height as f64);
        for (qx, qy) in splat.dilate(1).iter() {
            let (u, v) = bwd.get(qx, qy);
            let zx = qx as f64 + u as f64;
            let zy = qy as f64 + v as f64;
            let xs = [libm::floor(zx), libm::ceil(zx)];
            let ys = [libm::floor(zy), libm::ceil(zy)];
            let hit = ys.iter().any(|&py| {
                xs.iter().any(|&px| {
                    if px < 0.0 || py < 0.0 || px >= w || py >= h {
                        return false;
                    }
                    let (px, py) = (px as usize, py as usize);
                    if !self.contains(px, py) {
                        return false;
                    }
                    let (fu, fv) = fwd.get(px, py);
                    let rx = round_half_up(px as f64 + fu as f64);
                    let ry = round_half_up(py as f64 + fv as f64);
                    libm::fabs(rx - qx as f64) <= 1.0 && libm::fabs(ry - qy as f64) <= 1.0
                })
            });
            if hit {
                out.insert(qx, qy);
            }
        }
        Ok(out)
    }

    /// Integer translation; pixels leaving the raster are dropped.
    pub fn translated(&self, dx: i64, dy: i64) -> BinaryMask {
        let mut out = BinaryMask::new(self.width, self.height);
        for (x, y) in self.iter() {
            let (tx, ty) = (x as i64 + dx, y as i64 + dy);
            if tx >= 0 && ty >= 0 && (tx as usize) < self.width && (ty as usize) < self.height {
                out.insert(tx as usize, ty as usize);
            }
        }
        out
    }

    /// Members with at least one 4-neighbour outside the mask. The raster
    /// border counts as outside.
    pub fn boundary(&self) -> BinaryMask {
        let mut out = BinaryMask::new(self.width, self.height);
        for (x, y) in self.iter() {
            let interior = x > 0
                && y > 0
                && x + 1 < self.width
                && y + 1 < self.height
                && self.contains(x - 1, y)
                && self.contains(x + 1, y)
                && self.contains(x, y - 1)
                && self.contains(x, y + 1);
            if !interior {
                out.insert(x, y);
            }
        }
        out
    }

    /// Removes the boundary ring (4-neighbourhood erosion).
    pub fn eroded(&self) -> BinaryMask {
        let b = self.boundary();
        self.difference(&b).expect("same dims")
    }

    /// Every pixel within Chebyshev distance `radius` of a member.
    pub fn dilate(&self, radius: usize) -> BinaryMask {
        if radius == 0 || self.is_empty() {
            return self.clone();
        }
        let (w, h) = self.dims();
        let horiz = running_any(w, h, radius, |x, y| self.contains(x, y), true);
        let vert = running_any(w, h, radius, |x, y| horiz[y * w + x], false);
        BinaryMask::from_fn(w, h, |x, y| vert[y * w + x])
    }

    /// 8-connected components, largest first; ties broken by the smallest
    /// `(y, x)` member.
    pub fn connected_components(&self) -> Vec<BinaryMask> {
        let (w, h) = self.dims();
        let mut seen = vec![false; w * h];
        let mut comps: Vec<(usize, usize, BinaryMask)> = Vec::new();
        let mut queue = VecDeque::new();
        for (sx, sy) in self.iter() {
            if seen[sy * w + sx] {
                continue;
            }
            let mut comp = BinaryMask::new(w, h);
            let mut area = 0;
            seen[sy * w + sx] = true;
            queue.push_back((sx, sy));
            while let Some((x, y)) = queue.pop_front() {
                comp.insert(x, y);
                area += 1;
                for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                    for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                        let i = ny * w + nx;
                        if !seen[i] && self.contains(nx, ny) {
                            seen[i] = true;
                            queue.push_back((nx, ny));
                        }
                    }
                }
            }
            comps.push((area, sy * w + sx, comp));
        }
        comps.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        comps.into_iter().map(|c| c.2).collect()
    }
}

/// One separable pass of a Chebyshev dilation: for every pixel, whether any
/// source pixel lies within `r` along the row (`along_x`) or column.
fn running_any(
    w: usize,
    h: usize,
    r: usize,
    src: impl Fn(usize, usize) -> bool,
    along_x: bool,
) -> Vec<bool> {
    let mut out = vec![false; w * h];
    let (lines, len) = if along_x { (h, w) } else { (w, h) };
    let mut prefix = vec![0u32; len + 1];
    for line in 0..lines {
        for k in 0..len {
            let v = if along_x { src(k, line) } else { src(line, k) };
            prefix[k + 1] = prefix[k] + v as u32;
        }
        for k in 0..len {
            let lo = k.saturating_sub(r);
            let hi = (k + r + 1).min(len);
            if prefix[hi] > prefix[lo] {
                let (x, y) = if along_x { (k, line) } else { (line, k) };
                out[y * w + x] = true;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn px(w: usize, h: usize, p: &[(usize, usize)]) -> BinaryMask {
        BinaryMask::from_pixels(w, h, p.iter().copied()).unwrap()
    }

    /// Brute-force set helpers used as oracles below.
    fn brute_iou(a: &BinaryMask, b: &BinaryMask) -> f64 {
        let (mut i, mut u) = (0, 0);
        for y in 0..a.height() {
            for x in 0..a.width() {
                let (p, q) = (a.contains(x, y), b.contains(x, y));
                i += (p && q) as usize;
                u += (p || q) as usize;
            }
        }
        if u == 0 {
            0.0
        } else {
            i as f64 / u as f64
        }
    }

    #[test]
    fn iou_cases() {
        let a = px(4, 4, &[(0, 0), (0, 1)]);
        let b = px(4, 4, &[(0, 1), (1, 1)]);
        assert_eq!(brute_iou(&a, &b), 1.0 / 3.0);
        assert_eq!(a.iou(&b).unwrap(), 1.0 / 3.0);
        assert_eq!(a.iou(&a).unwrap(), 1.0);
        let c = px(4, 4, &[(3, 3)]);
        assert_eq!(a.iou(&c).unwrap(), 0.0);
        let e = BinaryMask::new(4, 4);
        assert_eq!(e.iou(&e).unwrap(), 0.0);
        assert!(matches!(
            a.iou(&BinaryMask::new(5, 4)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn warp_identity_translation_and_clip() {
        let sq = BinaryMask::rect(32, 32, 4, 4, 4, 4);
        assert_eq!(sq.warp(&FlowField::zeros(32, 32)).unwrap(), sq);
        let moved = sq.warp(&FlowField::constant(32, 32, 5.0, 0.0)).unwrap();
        assert_eq!(moved, BinaryMask::rect(32, 32, 9, 4, 4, 4));

        // 4x4 square touching the right edge, flow +3 in x.
        let edge = BinaryMask::rect(32, 32, 27, 10, 4, 4);
        let warped = edge.warp(&FlowField::constant(32, 32, 3.0, 0.0)).unwrap();
        let expected_area = edge.iter().filter(|&(x, _)| x + 3 < 32).count();
        assert_eq!(expected_area, 8);
        assert_eq!(warped.area(), expected_area);
        assert!(sq.warp(&FlowField::zeros(8, 8)).is_err());
    }

    #[test]
    fn boundary_cases() {
        let one = px(8, 8, &[(3, 3)]);
        assert_eq!(one.boundary(), one);
        assert!(BinaryMask::new(8, 8).boundary().is_empty());
        let sq = BinaryMask::rect(8, 8, 2, 2, 4, 4);
        // oracle: members with any 4-neighbour outside
        let ring: Vec<_> = sq
            .iter()
            .filter(|&(x, y)| {
                [(0i64, 1i64), (0, -1), (1, 0), (-1, 0)].iter().any(|(dx, dy)| {
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    nx < 0 || ny < 0 || !sq.contains(nx as usize, ny as usize)
                })
            })
            .collect();
        assert_eq!(ring.len(), 12);
        assert_eq!(sq.boundary(), px(8, 8, &ring));
        // full raster: border is boundary
        let full = BinaryMask::rect(3, 3, 0, 0, 3, 3);
        assert_eq!(full.boundary().area(), 8);
    }

    #[test]
    fn dilate_cases() {
        let one = px(9, 9, &[(4, 4)]);
        assert_eq!(one.dilate(0), one);
        assert_eq!(one.dilate(1), BinaryMask::rect(9, 9, 3, 3, 3, 3));
        let corner = BinaryMask::rect(9, 9, 0, 0, 2, 2);
        let oracle = BinaryMask::from_fn(9, 9, |x, y| {
            corner
                .iter()
                .any(|(cx, cy)| x.abs_diff(cx).max(y.abs_diff(cy)) <= 2)
        });
        assert_eq!(oracle.area(), 16);
        assert_eq!(corner.dilate(2), oracle);
    }

    #[test]
    fn components_cases() {
        assert!(BinaryMask::new(8, 8).connected_components().is_empty());
        let two = BinaryMask::rect(16, 16, 0, 0, 3, 3)
            .union(&BinaryMask::rect(16, 16, 8, 8, 4, 4))
            .unwrap();
        let comps = two.connected_components();
        assert_eq!(comps.len(), 2);
        assert_eq!(comps[0].area(), 16);
        assert_eq!(comps[1].area(), 9);
        let diag = px(4, 4, &[(0, 0), (1, 1)]);
        assert_eq!(diag.connected_components().len(), 1);
        // equal areas: smaller (y, x) first
        let pair = px(6, 6, &[(4, 0), (0, 4)]);
        let c = pair.connected_components();
        assert!(c[0].contains(4, 0));
    }

    #[test]
    fn centroid_cases() {
        assert_eq!(px(8, 8, &[(3, 7)]).centroid().unwrap(), (3.0, 7.0));
        assert_eq!(
            BinaryMask::rect(8, 8, 0, 0, 2, 2).centroid().unwrap(),
            (0.5, 0.5)
        );
        let l = px(4, 4, &[(0, 0), (1, 0), (0, 1)]);
        let (cx, cy) = l.centroid().unwrap();
        assert!((cx - 1.0 / 3.0).abs() < 1e-15 && (cy - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(BinaryMask::new(2, 2).centroid(), Err(Error::EmptyMask));
    }

    #[test]
    fn from_pixels_rejects_out_of_bounds() {
        assert!(matches!(
            BinaryMask::from_pixels(4, 4, [(4, 0)]),
            Err(Error::OutOfBounds { .. })
        ));
    }

    fn arb_mask(w: usize, h: usize) -> impl Strategy<Value = BinaryMask> {
        proptest::collection::vec(any::<bool>(), w * h)
            .prop_map(move |bits| BinaryMask::from_fn(w, h, |x, y| bits[y * w + x]))
    }

    proptest! {
        #[test]
        fn iou_symmetric_and_bounded(a in arb_mask(13, 7), b in arb_mask(13, 7)) {
            let ab = a.iou(&b).unwrap();
            prop_assert_eq!(ab, b.iou(&a).unwrap());
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert_eq!(ab, brute_iou(&a, &b));
            if !a.is_empty() {
                prop_assert_eq!(a.iou(&a).unwrap(), 1.0);
            }
        }

        #[test]
        fn dilate_monotone(m in arb_mask(12, 9), r1 in 0usize..4, r2 in 0usize..4) {
            let (lo, hi) = (r1.min(r2), r1.max(r2));
            prop_assert!(m.is_subset_of(&m.dilate(lo)).unwrap());
            prop_assert!(m.dilate(lo).is_subset_of(&m.dilate(hi)).unwrap());
        }

        #[test]
        fn components_partition(m in arb_mask(11, 11)) {
            let comps = m.connected_components();
            let mut acc = BinaryMask::new(11, 11);
            for (i, c) in comps.iter().enumerate() {
                prop_assert!(!acc.intersects(c).unwrap());
                acc.union_with(c).unwrap();
                if i > 0 {
                    prop_assert!(comps[i - 1].area() >= c.area());
                }
            }
            prop_assert_eq!(acc, m);
        }

        #[test]
        fn boundary_subset_without_interior(m in arb_mask(10, 8)) {
            let b = m.boundary();
            prop_assert!(b.is_subset_of(&m).unwrap());
            for (x, y) in b.iter() {
                let interior = x > 0 && y > 0 && x < 9 && y < 7
                    && m.contains(x - 1, y) && m.contains(x + 1, y)
                    && m.contains(x, y - 1) && m.contains(x, y + 1);
                prop_assert!(!interior);
            }
        }

        #[test]
        fn integer_translation_warp_exact(m in arb_mask(16, 16), dx in -3i64..4, dy in -3i64..4) {
            let flow = FlowField::constant(16, 16, dx as f32, dy as f32);
            prop_assert_eq!(m.warp(&flow).unwrap(), m.translated(dx, dy));
        }
    }
}
