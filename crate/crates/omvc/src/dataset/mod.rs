//! Dataset definition, validation and chunked streaming.

pub mod indicator;
pub mod manifest;
pub mod matrix_io;
pub mod stream;

pub use indicator::IndicatorMatrix;
pub use manifest::{Manifest, Storage, ViewSpec};
pub use stream::{
    simulate_missing, ChunkBatch, ChunkView, MultiViewSource, RunningViewStats, ViewStats,
    COLD_START_WEIGHT,
};
