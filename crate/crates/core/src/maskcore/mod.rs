//! Pixel-level primitives: binary masks, label rasters, dense flow fields.

mod flow;
mod label;
mod mask;

pub use flow::{FlowField, Flows};
pub use label::{GrayImage, LabelImage};
pub use mask::{BinaryMask, BoundingBox};
