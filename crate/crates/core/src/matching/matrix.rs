//! Precomputed score-matrix engine: replays stored scores bit-exactly so
//! the downstream pipeline is testable without image data.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::geometry::BoundingBox;
use crate::model::Seed;

/// One dumped record: all candidate scores for a (tracklet, frame) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRecord {
    pub tracklet_id: usize,
    pub frame: usize,
    /// Entries are [x, y, w, h, score].
    pub scores: Vec<[f64; 5]>,
}

/// Looks scores up by (tracklet id, frame, exact box bits); anything not in
/// the matrix scores 0.
#[derive(Debug, Clone, Default)]
pub struct ScoreMatrixEngine {
    map: HashMap<(usize, usize, [u64; 4]), f64>,
}

impl ScoreMatrixEngine {
    pub fn from_records(records: impl IntoIterator<Item = MatrixRecord>) -> Self {
        let mut map = HashMap::new();
        for record in records {
            for entry in record.scores {
                let bbox = BoundingBox {
                    x: entry[0],
                    y: entry[1],
                    w: entry[2],
                    h: entry[3],
                };
                map.insert((record.tracklet_id, record.frame, bbox.key_bits()), entry[4]);
            }
        }
        Self { map }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn score_candidates(
        &self,
        seed: &Seed,
        frame_index: usize,
        candidates: &[BoundingBox],
    ) -> Vec<(BoundingBox, f64)> {
        candidates
            .iter()
            .map(|cand| {
                let score = self
                    .map
                    .get(&(seed.tracklet_id, frame_index, cand.key_bits()))
                    .copied()
                    .unwrap_or(0.0);
                (*cand, score)
            })
            .collect()
    }
}
