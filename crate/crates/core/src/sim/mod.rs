//! Planar tabletop pushing simulator.
//!
//! Objects are rigid discs and rectangles on a pixel grid. Pixel centres sit
//! at integer coordinates and a pixel belongs to an object when its centre
//! lies inside the closed footprint.

mod episode;
mod object;
mod push;
mod sample;
mod scene;

pub use episode::{Episode, PushRecord, run_episode, run_episode_from_scene};
pub use object::{Aabb, ObjectShape, ObjectState};
pub use push::{PushAction, PushOutcome, apply_push, select_push};
pub use sample::{sample_scene, sample_shape};
pub use scene::{Scene, appearance, footprint_pixels, oracle_flow};

pub(crate) use push::resolve_target;
