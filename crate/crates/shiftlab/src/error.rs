//! Crate-wide error type.

/// Errors produced by construction and update operations.
///
/// Pure arithmetic (similarities, schedules, losses) never fails; errors come
/// from invalid inputs at the boundaries of the pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid box (cx={cx}, cy={cy}, w={w}, h={h}): extents must be positive and all fields finite")]
    InvalidBox { cx: f64, cy: f64, w: f64, h: f64 },

    #[error("similarity matrix expects {expected} values for {rows}x{cols}, got {got}")]
    MatrixShape {
        rows: usize,
        cols: usize,
        expected: usize,
        got: usize,
    },

    #[error("non-finite similarity at ({row}, {col})")]
    NonFiniteEntry { row: usize, col: usize },

    #[error("{what} must not be empty")]
    EmptyInput { what: &'static str },

    #[error("{what}: length mismatch ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("bag refers to ground-truth index {gt_index}, but the state holds {len} boxes")]
    BagIndexOutOfRange { gt_index: usize, len: usize },

    #[error("duplicate bag for ground-truth index {gt_index}")]
    DuplicateBag { gt_index: usize },

    #[error("grid shape mismatch: expected {expected_h}x{expected_w}x{expected_c}, got {got_h}x{got_w}x{got_c}")]
    GridShape {
        expected_h: usize,
        expected_w: usize,
        expected_c: usize,
        got_h: usize,
        got_w: usize,
        got_c: usize,
    },

    #[error("grid values length {got} does not match {h}x{w}x{c}")]
    GridLen {
        h: usize,
        w: usize,
        c: usize,
        got: usize,
    },

    #[error("non-finite grid value at index {index}")]
    NonFiniteGrid { index: usize },

    #[error(
        "field {field_w}x{field_h} too small to place {n_objects} objects with margin {margin:.1}"
    )]
    FieldTooSmall {
        field_w: f64,
        field_h: f64,
        n_objects: usize,
        margin: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
