use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {a_width}x{a_height} vs {b_width}x{b_height}")]
    DimensionMismatch {
        a_width: usize,
        a_height: usize,
        b_width: usize,
        b_height: usize,
    },
    #[error("pixel ({x}, {y}) outside {width}x{height} raster")]
    OutOfBounds {
        x: usize,
        y: usize,
        width: usize,
        height: usize,
    },
    #[error("raster buffer has {actual} samples, expected {expected}")]
    BufferLength { expected: usize, actual: usize },
    #[error("mask is empty")]
    EmptyMask,
    #[error("mask area {area} is too small for grasp planning (need at least 3)")]
    DegenerateMask { area: usize },
    #[error("invalid value for `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
    #[error("object id sets differ between scenes")]
    IdMismatch,
    #[error("unknown object id {0}")]
    UnknownObject(u16),
    #[error("no nonempty mask to select")]
    NoTargets,
    #[error("mask index {index} out of range ({len} masks)")]
    MaskIndex { index: usize, len: usize },
    #[error("frames {a} and {b} are not adjacent")]
    NonAdjacentFrames { a: usize, b: usize },
    #[error("missing flow for frame pair {from} -> {to}")]
    MissingFlow { from: usize, to: usize },
    #[error("overlap still unresolved after {0} separation moves")]
    UnresolvableOverlap(usize),
    #[error("could not place object {index} after {attempts} attempts")]
    PlacementFailed { index: usize, attempts: usize },
}

impl Error {
    pub(crate) fn dims(a: (usize, usize), b: (usize, usize)) -> Self {
        Error::DimensionMismatch {
            a_width: a.0,
            a_height: a.1,
            b_width: b.0,
            b_height: b.1,
        }
    }

    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }
}
