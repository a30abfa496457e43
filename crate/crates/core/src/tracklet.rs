//! Candidate-window generation and bidirectional seed propagation.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::BoundingBox;
use crate::matching::SimilarityEngine;
use crate::model::{Seed, Sequence};

/// One bounding box per frame of the sequence, grown from a single seed.
/// `boxes[seed.seed_frame]` is the seed box itself with score 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Tracklet {
    pub id: usize,
    pub seed: Seed,
    pub boxes: Vec<BoundingBox>,
    pub scores: Vec<f64>,
}

impl Tracklet {
    pub fn span(&self) -> usize {
        self.boxes.len()
    }
}

/// Sample windows for one frame. Always contains every detector box present
/// in that frame.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub frame_index: usize,
    pub windows: Vec<BoundingBox>,
}

/// Sliding-window geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateParams {
    /// Stride as a fraction of the smaller seed dimension.
    pub stride_frac: f64,
    /// Window sizes as fractions of the seed size.
    pub scales: Vec<f64>,
}

impl Default for CandidateParams {
    fn default() -> Self {
        Self {
            stride_frac: 0.25,
            scales: vec![0.8, 1.0, 1.25],
        }
    }
}

/// Enumerates seeds from a sequence's detections in frame order, then
/// detection order, with sequential tracklet ids.
pub fn collect_seeds(seq: &Sequence) -> Vec<Seed> {
    let mut seeds = Vec::new();
    for frame in &seq.frames {
        for bbox in &frame.boxes {
            seeds.push(Seed {
                tracklet_id: seeds.len(),
                seed_frame: frame.frame_index,
                bbox: *bbox,
            });
        }
    }
    seeds
}

/// Builds the candidate set for one frame: detector boxes first, then a
/// sliding-window sweep per scale, deduplicated on exact coordinates.
///
/// Window positions run from the frame origin at the given stride while the
/// window fits; when it does not fit at all, a single origin-anchored window
/// clipped to the frame keeps the set non-empty.
pub fn generate_candidates(
    seq: &Sequence,
    seed: &Seed,
    frame_index: usize,
    params: &CandidateParams,
) -> CandidateSet {
    let (frame_w, frame_h) = seq.frame_size;
    let stride = (params.stride_frac * seed.bbox.w.min(seed.bbox.h)).max(1e-9);

    let mut windows = Vec::new();
    let mut seen: HashSet<[u64; 4]> = HashSet::new();
    let mut push = |bbox: BoundingBox, out: &mut Vec<BoundingBox>| {
        if seen.insert(bbox.key_bits()) {
            out.push(bbox);
        }
    };

    for bbox in &seq.frames[frame_index].boxes {
        push(*bbox, &mut windows);
    }

    for &scale in &params.scales {
        let w = (scale * seed.bbox.w).min(frame_w);
        let h = (scale * seed.bbox.h).min(frame_h);
        let max_x = frame_w - w;
        let max_y = frame_h - h;
        let steps_x = if max_x >= 0.0 {
            (max_x / stride + 1e-9).floor() as usize
        } else {
            0
        };
        let steps_y = if max_y >= 0.0 {
            (max_y / stride + 1e-9).floor() as usize
        } else {
            0
        };
        for iy in 0..=steps_y {
            for ix in 0..=steps_x {
                let bbox = BoundingBox {
                    x: ix as f64 * stride,
                    y: iy as f64 * stride,
                    w,
                    h,
                };
                push(bbox, &mut windows);
            }
        }
    }

    CandidateSet {
        frame_index,
        windows,
    }
}

/// Propagates one seed across the whole sequence: every frame other than the
/// seed frame takes the argmax-score candidate, with ties broken toward the
/// canonically smallest box. Every frame receives a box; occlusion handling
/// downstream decides which ones to suppress.
pub fn propagate_seed(
    engine: &SimilarityEngine,
    seq: &Sequence,
    seed: &Seed,
    params: &CandidateParams,
) -> Result<Tracklet> {
    let mut boxes = Vec::with_capacity(seq.length);
    let mut scores = Vec::with_capacity(seq.length);
    for frame_index in 0..seq.length {
        if frame_index == seed.seed_frame {
            boxes.push(seed.bbox);
            scores.push(1.0);
            continue;
        }
        let candidates = generate_candidates(seq, seed, frame_index, params);
        let scored = engine.score_candidates(seed, frame_index, &candidates.windows)?;
        let (best_box, best_score) = scored
            .iter()
            .fold(None::<(BoundingBox, f64)>, |best, &(bbox, score)| {
                match best {
                    None => Some((bbox, score)),
                    Some((bb, bs)) => {
                        if score > bs
                            || (score == bs && bbox.cmp_canonical(&bb) == std::cmp::Ordering::Less)
                        {
                            Some((bbox, score))
                        } else {
                            Some((bb, bs))
                        }
                    }
                }
            })
            .expect("candidate set is never empty");
        boxes.push(best_box);
        scores.push(best_score);
    }
    Ok(Tracklet {
        id: seed.tracklet_id,
        seed: *seed,
        boxes,
        scores,
    })
}

/// Propagates all seeds concurrently and returns the tracklets in id order.
pub fn propagate_all(
    engine: &SimilarityEngine,
    seq: &Sequence,
    seeds: &[Seed],
    params: &CandidateParams,
) -> Result<Vec<Tracklet>> {
    seeds
        .par_iter()
        .map(|seed| propagate_seed(engine, seq, seed, params))
        .collect()
}
