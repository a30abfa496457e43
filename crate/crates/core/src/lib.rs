//! Offline multi-face tracking for low frame-rate photo-streams.
//!
//! The engine turns per-frame face detections into per-person trajectory
//! prototypes: every detection seeds a tracklet that is propagated across
//! the whole sequence by patch similarity, mutually overlapping tracklets
//! are grouped into extended bags-of-tracklets, each reliable bag yields a
//! consensus prototype with per-frame confidence and occlusion flags, and
//! the result is scored with CLEAR MOT metrics when ground truth exists.
//!
//! A deterministic synthetic generator plus an oracle scoring engine let
//! the whole pipeline run and be tested without image data.

// index-heavy numeric code; ranged loops mirror the math
#![allow(clippy::needless_range_loop)]

pub mod ebot;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod io;
pub mod matching;
pub mod model;
pub mod pipeline;
pub mod prototype;
pub mod render;
pub mod synthetic;
pub mod tracklet;

pub use error::{Error, Result};
pub use geometry::{intersection_area, iou, BoundingBox};
pub use model::{is_trackable_segment, FrameDetections, Seed, Sequence};
