//! Synthetic driving-scene dataset generation and object-detection evaluation.
//!
//! The pipeline mirrors how a virtual dataset is produced from map data:
//! [`mapio`] parses OpenStreetMap extracts into a metric road/building layout,
//! [`worldgen`] builds the 3D city and animates traffic, [`render`] rasterizes
//! deterministic RGB/depth/instance/class buffers, [`groundtruth`] derives
//! per-object annotations and dense optical flow, [`dataset`] persists
//! VOC-style datasets with statistics and surgery operations, and [`eval`]
//! scores detections with PASCAL-VOC average precision.

pub mod dataset;
pub mod eval;
pub mod geom;
pub mod groundtruth;
pub mod mapio;
pub mod render;
pub mod worldgen;

mod seed;

pub use seed::{frame_seed, mix64, DEFAULT_SEED};
