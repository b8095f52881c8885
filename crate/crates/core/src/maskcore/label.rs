use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use super::mask::BinaryMask;
use crate::error::{Error, Result};

/// Per-pixel instance ids, 0 is background.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelImage {
    width: usize,
    height: usize,
    labels: Vec<u16>,
}

impl LabelImage {
    pub fn new(width: usize, height: usize) -> Self {
        LabelImage {
            width,
            height,
            labels: vec![0; width * height],
        }
    }

    pub fn from_raw(width: usize, height: usize, labels: Vec<u16>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::BufferLength {
                expected: width * height,
                actual: labels.len(),
            });
        }
        Ok(LabelImage {
            width,
            height,
            labels,
        })
    }

    /// Rasterises `masks` with ids `1..=masks.len()`. Later masks overwrite
    /// earlier ones where they overlap.
    pub fn from_masks(width: usize, height: usize, masks: &[BinaryMask]) -> Result<Self> {
        let mut img = LabelImage::new(width, height);
        for (i, m) in masks.iter().enumerate() {
            img.paint(m, (i + 1) as u16)?;
        }
        Ok(img)
    }

    pub fn paint(&mut self, mask: &BinaryMask, id: u16) -> Result<()> {
        if mask.dims() != self.dims() {
            return Err(Error::dims(self.dims(), mask.dims()));
        }
        for (x, y) in mask.iter() {
            self.labels[y * self.width + x] = id;
        }
        Ok(())
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

    pub fn as_slice(&self) -> &[u16] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u16 {
        self.labels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, id: u16) {
        self.labels[y * self.width + x] = id;
    }

    /// Distinct nonzero ids, ascending.
    pub fn ids(&self) -> Vec<u16> {
        let mut seen = BTreeMap::new();
        for &l in &self.labels {
            if l != 0 {
                seen.insert(l, ());
            }
        }
        seen.into_keys().collect()
    }

    pub fn mask(&self, id: u16) -> BinaryMask {
        let w = self.width;
        BinaryMask::from_fn(self.width, self.height, |x, y| self.labels[y * w + x] == id)
    }

    /// One mask per nonzero id, ascending by id.
    pub fn masks(&self) -> Vec<(u16, BinaryMask)> {
        let mut by_id: BTreeMap<u16, BinaryMask> = BTreeMap::new();
        for y in 0..self.height {
            for x in 0..self.width {
                let l = self.get(x, y);
                if l != 0 {
                    by_id
                        .entry(l)
                        .or_insert_with(|| BinaryMask::new(self.width, self.height))
                        .insert(x, y);
                }
            }
        }
        by_id.into_iter().collect()
    }

    pub fn foreground(&self) -> BinaryMask {
        let w = self.width;
        BinaryMask::from_fn(self.width, self.height, |x, y| self.labels[y * w + x] != 0)
    }
}

/// 8-bit single-channel image (appearance frames).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize) -> Self {
        GrayImage {
            width,
            height,
            data: vec![0; width * height],
        }
    }

    pub fn from_raw(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::BufferLength {
                expected: width * height,
                actual: data.len(),
            });
        }
        Ok(GrayImage {
            width,
            height,
            data,
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

    pub fn as_slice(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.data[y * self.width + x] = v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn masks_disjoint_and_cover_foreground(
            raw in proptest::collection::vec(0u16..4, 9 * 7)
        ) {
            let img = LabelImage::from_raw(9, 7, raw).unwrap();
            let masks = img.masks();
            let mut acc = BinaryMask::new(9, 7);
            for (id, m) in &masks {
                prop_assert!(!acc.intersects(m).unwrap());
                acc.union_with(m).unwrap();
                prop_assert_eq!(m, &img.mask(*id));
            }
            prop_assert_eq!(acc, img.foreground());
            prop_assert_eq!(masks.iter().map(|m| m.0).collect::<Vec<_>>(), img.ids());
        }
    }

    #[test]
    fn from_masks_assigns_sequential_ids() {
        let a = BinaryMask::rect(6, 6, 0, 0, 2, 2);
        let b = BinaryMask::rect(6, 6, 3, 3, 2, 2);
        let img = LabelImage::from_masks(6, 6, &[a.clone(), b]).unwrap();
        assert_eq!(img.ids(), vec![1, 2]);
        assert_eq!(img.mask(1), a);
        assert!(LabelImage::from_raw(2, 2, vec![0; 5]).is_err());
    }
}
