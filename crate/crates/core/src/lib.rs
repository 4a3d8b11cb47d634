//! Radar point extraction, detection targets, and multi-object tracking.
//!
//! `no_std` with `alloc`. File formats and the command-line front end live
//! in the `radtrack` crate.

#![no_std]

extern crate alloc;

pub mod assign;
pub mod cfar;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod jde;
pub mod kalman;
pub mod metrics;
pub mod sim;
pub mod targets;
pub mod tracker;

pub use error::{Error, Result};
pub use geometry::{diou_cost, iou_3d, iou_bev, Box3D};
pub use grid::{CartesianGridSpec, GridSpec, PolarGridSpec, RadarTensor};
pub use targets::LabelObject;
pub use tracker::{Detection, MultiClassTracker, Tracker, TrackerConfig};
