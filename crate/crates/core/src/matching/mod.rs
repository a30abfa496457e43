//! Patch-similarity engines behind one scoring interface.
//!
//! Three engines cover the pipeline's needs: the warp engine matches real
//! pixels, the score-matrix engine replays dumped scores, and the oracle
//! engine scores against synthetic ground truth. All scores lie in [0, 1]
//! and are deterministic for fixed inputs.

mod descriptor;
mod hsv;
mod matrix;
mod oracle;
mod warp;

pub use descriptor::{cell_similarity, compute_descriptor, Descriptor, DescriptorParams, GrayF32};
pub use hsv::{hsv_prefilter, rgb_to_hsv, HsvHistogram, DEFAULT_HSV_THRESHOLD, HSV_BINS};
pub use matrix::{MatrixRecord, ScoreMatrixEngine};
pub use oracle::OracleEngine;
pub use warp::{quadrant_warp_score, warp_score_1d, WarpResult};

use std::fmt;
use std::str::FromStr;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::model::Seed;

/// Engine selector, as it appears in configs and on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineKind {
    Warp,
    Matrix,
    Oracle,
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            EngineKind::Warp => "warp",
            EngineKind::Matrix => "matrix",
            EngineKind::Oracle => "oracle",
        };
        f.write_str(name)
    }
}

impl FromStr for EngineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "warp" => Ok(EngineKind::Warp),
            "matrix" => Ok(EngineKind::Matrix),
            "oracle" => Ok(EngineKind::Oracle),
            other => Err(Error::InvalidConfig(format!(
                "unknown engine {other:?}, expected warp | matrix | oracle"
            ))),
        }
    }
}

/// Tunables for the pixel-based warp engine.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpParams {
    pub descriptor: DescriptorParams,
    /// Quadrant search radius in pixels; `None` derives it from the seed box
    /// as a quarter of its larger dimension.
    pub radius: Option<f64>,
    pub hsv_threshold: f64,
}

impl Default for WarpParams {
    fn default() -> Self {
        Self {
            descriptor: DescriptorParams::default(),
            radius: None,
            hsv_threshold: DEFAULT_HSV_THRESHOLD,
        }
    }
}

/// Pixel-matching engine holding the sequence frames.
#[derive(Debug, Clone)]
pub struct WarpEngine {
    gray: Vec<GrayF32>,
    color: Vec<RgbImage>,
    params: WarpParams,
}

impl WarpEngine {
    pub fn new(frames: Vec<RgbImage>, params: WarpParams) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::EngineRequiresImages);
        }
        params.descriptor.validate()?;
        let gray = frames.iter().map(GrayF32::from_rgb).collect();
        Ok(Self {
            gray,
            color: frames,
            params,
        })
    }

    pub fn frame_count(&self) -> usize {
        self.gray.len()
    }

    fn effective_radius(&self, seed: &Seed) -> f64 {
        self.params
            .radius
            .unwrap_or_else(|| seed.bbox.w.max(seed.bbox.h) / 4.0)
    }

    /// HSV prefilter then quadrant warp scoring; candidates rejected by the
    /// prefilter keep their slot with score 0.
    pub fn score_candidates(
        &self,
        seed: &Seed,
        frame_index: usize,
        candidates: &[BoundingBox],
    ) -> Result<Vec<(BoundingBox, f64)>> {
        let length = self.gray.len();
        if seed.seed_frame >= length {
            return Err(Error::FrameOutOfRange {
                frame: seed.seed_frame,
                length,
            });
        }
        if frame_index >= length {
            return Err(Error::FrameOutOfRange {
                frame: frame_index,
                length,
            });
        }

        let reference = compute_descriptor(
            &self.gray[seed.seed_frame],
            &seed.bbox,
            &self.params.descriptor,
        )?;
        let seed_hist =
            HsvHistogram::from_image_region(&self.color[seed.seed_frame], &seed.bbox);
        let radius = self.effective_radius(seed);

        let mut scored = Vec::with_capacity(candidates.len());
        for cand in candidates {
            let hist = HsvHistogram::from_image_region(&self.color[frame_index], cand);
            if seed_hist.intersection(&hist) < self.params.hsv_threshold {
                scored.push((*cand, 0.0));
                continue;
            }
            let score =
                match quadrant_warp_score(&reference, &self.gray[frame_index], cand, radius) {
                    Ok(result) => result.score,
                    Err(Error::OutOfBounds) | Err(Error::EmptyPatch) => 0.0,
                    Err(e) => return Err(e),
                };
            scored.push((*cand, score));
        }
        Ok(scored)
    }
}

/// The one scoring interface the tracker propagates through.
#[derive(Debug, Clone)]
pub enum SimilarityEngine {
    Warp(WarpEngine),
    Matrix(ScoreMatrixEngine),
    Oracle(OracleEngine),
}

impl SimilarityEngine {
    pub fn kind(&self) -> EngineKind {
        match self {
            SimilarityEngine::Warp(_) => EngineKind::Warp,
            SimilarityEngine::Matrix(_) => EngineKind::Matrix,
            SimilarityEngine::Oracle(_) => EngineKind::Oracle,
        }
    }

    /// One score in [0, 1] per candidate, in candidate order.
    pub fn score_candidates(
        &self,
        seed: &Seed,
        frame_index: usize,
        candidates: &[BoundingBox],
    ) -> Result<Vec<(BoundingBox, f64)>> {
        match self {
            SimilarityEngine::Warp(engine) => {
                engine.score_candidates(seed, frame_index, candidates)
            }
            SimilarityEngine::Matrix(engine) => {
                Ok(engine.score_candidates(seed, frame_index, candidates))
            }
            SimilarityEngine::Oracle(engine) => {
                Ok(engine.score_candidates(seed, frame_index, candidates))
            }
        }
    }
}
