//! Panoramic dental radiograph synthesis from CBCT voxel volumes.
//!
//! The pipeline detects the jaw from maximum intensity projections, corrects
//! sagittal tilt, fits an elliptical focal trough and rotation trajectory to
//! the jaw outline, sweeps a fan of pencil beams across the trough, and turns
//! each beam's attenuation into one panorama column.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod image;
pub mod metrics;
pub mod volume;
pub mod geometry;
pub mod jawdetect;
pub mod render;
pub mod phantom;
pub mod config;
pub mod pipeline;
