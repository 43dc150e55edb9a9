//! Deterministic link-level simulator for vision-assisted user clustering
//! in mmWave-NOMA downlinks.
//!
//! The library builds DFT beam codebooks over single-path channels, renders
//! a raster "camera" surrogate of classroom-style scenes, trains a small
//! beam-index classifier from CSI-labeled rasters, clusters users by best
//! beam with SIC power allocation, and compares the spectral efficiency of
//! CSI-driven, stale-CSI and camera-driven scheduling under seeded,
//! bit-reproducible experiments.

pub mod channel;
pub mod clustering;
pub mod dataset;
pub mod error;
pub mod noma_phy;
pub mod pipeline;
pub mod predictor;
pub mod rng;
pub mod scene;
pub mod types;

pub use error::{Result, SimError};
