//! Core algorithms for generating instance segmentation labels from robot
//! pushing sequences.
//!
//! A simulated robot pushes clustered objects on a planar table. An imperfect
//! segmenter under-segments objects that are close together; flow-based
//! tracking and mask propagation then recover one mask per object for every
//! frame. The crate also carries the evaluation metrics and an analytic
//! top-down grasp planner with a table-clearing benchmark.
//!
//! Everything here is pure computation on in-memory values: the crate is
//! `no_std` and only needs `alloc`. File formats, the episode directory
//! layout and the command-line tool live in the `push2seg` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod config;
pub mod error;
pub mod eval;
pub mod geom;
pub mod grasp;
pub mod maskcore;
pub mod percept;
pub mod propagate;
pub mod sim;
pub mod track;

pub use config::{FlowMode, LabelParams, PipelineConfig, SegmenterConfig};
pub use error::{Error, Result};
pub use geom::Vec2;
pub use maskcore::{BinaryMask, FlowField, Flows, GrayImage, LabelImage};
