//! Ground-truth-backed similarity engine for synthetic experiments.

use crate::evaluation::GroundTruth;
use crate::geometry::{iou, BoundingBox};
use crate::model::Seed;

/// One identity's trajectory as the oracle sees it.
#[derive(Debug, Clone)]
struct OracleTrack {
    id: String,
    boxes: Vec<Option<BoundingBox>>,
    occluded: Vec<bool>,
}

/// Scores a candidate as its IoU with the seed identity's ground-truth box
/// plus optional Gaussian jitter, clamped to [0, 1]. Frames where the
/// identity is occluded score exactly zero, as do all frames of seeds that
/// overlap no identity at their seed frame.
///
/// Noise is a pure function of (engine seed, tracklet id, frame, box), so
/// repeated calls are bit-identical.
#[derive(Debug, Clone)]
pub struct OracleEngine {
    tracks: Vec<OracleTrack>,
    score_noise: f64,
    rng_seed: u64,
}

impl OracleEngine {
    pub fn from_ground_truth(gt: &GroundTruth, score_noise: f64, rng_seed: u64) -> Self {
        let length = gt.frames.len();
        let mut ids: Vec<String> = Vec::new();
        for frame in &gt.frames {
            for face in frame {
                if !ids.contains(&face.id) {
                    ids.push(face.id.clone());
                }
            }
        }
        ids.sort();
        let mut tracks = Vec::with_capacity(ids.len());
        for id in ids {
            let mut boxes = vec![None; length];
            let mut occluded = vec![false; length];
            for (k, frame) in gt.frames.iter().enumerate() {
                if let Some(face) = frame.iter().find(|f| f.id == id) {
                    boxes[k] = Some(face.bbox);
                    occluded[k] = face.occluded;
                }
            }
            tracks.push(OracleTrack {
                id,
                boxes,
                occluded,
            });
        }
        Self {
            tracks,
            score_noise,
            rng_seed,
        }
    }

    /// Identity whose visible ground-truth box best overlaps the seed box at
    /// the seed frame; ties go to the lexicographically smallest id, and a
    /// seed overlapping nobody has no identity.
    fn resolve_identity(&self, seed: &Seed) -> Option<usize> {
        let mut best = 0.0;
        let mut best_idx = None;
        for (idx, track) in self.tracks.iter().enumerate() {
            let Some(Some(gt_box)) = track.boxes.get(seed.seed_frame) else {
                continue;
            };
            if track.occluded[seed.seed_frame] {
                continue;
            }
            let overlap = iou(&seed.bbox, gt_box);
            if overlap > best {
                best = overlap;
                best_idx = Some(idx);
            }
        }
        best_idx
    }

    pub fn identity_of(&self, seed: &Seed) -> Option<&str> {
        self.resolve_identity(seed)
            .map(|idx| self.tracks[idx].id.as_str())
    }

    fn noise(&self, tracklet_id: usize, frame: usize, bbox: &BoundingBox) -> f64 {
        if self.score_noise == 0.0 {
            return 0.0;
        }
        let mut h = self.rng_seed;
        h = mix64(h, tracklet_id as u64);
        h = mix64(h, frame as u64);
        for bits in bbox.key_bits() {
            h = mix64(h, bits);
        }
        // Box-Muller over two hash-derived uniforms
        let u1 = ((mix64(h, 1) >> 11) as f64 + 1.0) / (1u64 << 53) as f64;
        let u2 = (mix64(h, 2) >> 11) as f64 / (1u64 << 53) as f64;
        let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
        self.score_noise * z
    }

    pub fn score_candidates(
        &self,
        seed: &Seed,
        frame_index: usize,
        candidates: &[BoundingBox],
    ) -> Vec<(BoundingBox, f64)> {
        let identity = self.resolve_identity(seed);
        candidates
            .iter()
            .map(|cand| {
                let score = match identity {
                    None => 0.0,
                    Some(idx) => {
                        let track = &self.tracks[idx];
                        match track.boxes.get(frame_index) {
                            Some(Some(gt_box)) if !track.occluded[frame_index] => {
                                let raw = iou(cand, gt_box)
                                    + self.noise(seed.tracklet_id, frame_index, cand);
                                raw.clamp(0.0, 1.0)
                            }
                            _ => 0.0,
                        }
                    }
                };
                (*cand, score)
            })
            .collect()
    }
}

/// splitmix64-style combiner, stable across platforms and releases.
fn mix64(state: u64, value: u64) -> u64 {
    let mut z = state
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(value.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::GtFace;

    fn bb(x: f64, y: f64, w: f64, h: f64) -> BoundingBox {
        BoundingBox::new(x, y, w, h).unwrap()
    }

    fn two_person_gt() -> GroundTruth {
        // p0 walks right along the top, p1 sits bottom-right; p0 occluded at frame 2
        let mut frames = Vec::new();
        for k in 0..4usize {
            frames.push(vec![
                GtFace {
                    id: "p0".into(),
                    bbox: bb(10.0 + k as f64, 10.0, 10.0, 10.0),
                    occluded: k == 2,
                },
                GtFace {
                    id: "p1".into(),
                    bbox: bb(60.0, 60.0, 10.0, 10.0),
                    occluded: false,
                },
            ]);
        }
        GroundTruth { frames }
    }

    #[test]
    fn true_box_outscores_other_identity() {
        let gt = two_person_gt();
        let engine = OracleEngine::from_ground_truth(&gt, 0.0, 1);
        let seed = Seed {
            tracklet_id: 0,
            seed_frame: 0,
            bbox: bb(10.0, 10.0, 10.0, 10.0),
        };
        let scored = engine.score_candidates(
            &seed,
            1,
            &[bb(11.0, 10.0, 10.0, 10.0), bb(60.0, 60.0, 10.0, 10.0)],
        );
        assert_eq!(scored[0].1, 1.0);
        assert_eq!(scored[1].1, 0.0);
    }

    #[test]
    fn occluded_frames_score_zero_without_noise() {
        let gt = two_person_gt();
        let engine = OracleEngine::from_ground_truth(&gt, 0.5, 1);
        let seed = Seed {
            tracklet_id: 3,
            seed_frame: 0,
            bbox: bb(10.0, 10.0, 10.0, 10.0),
        };
        let scored = engine.score_candidates(&seed, 2, &[bb(12.0, 10.0, 10.0, 10.0)]);
        assert_eq!(scored[0].1, 0.0);
    }

    #[test]
    fn identity_less_seed_scores_zero_everywhere() {
        let gt = two_person_gt();
        let engine = OracleEngine::from_ground_truth(&gt, 0.3, 1);
        let seed = Seed {
            tracklet_id: 5,
            seed_frame: 0,
            bbox: bb(90.0, 90.0, 8.0, 8.0),
        };
        assert_eq!(engine.identity_of(&seed), None);
        for k in 0..4 {
            let scored = engine.score_candidates(&seed, k, &[bb(10.0, 10.0, 10.0, 10.0)]);
            assert_eq!(scored[0].1, 0.0);
        }
    }

    #[test]
    fn noise_is_deterministic_and_bounded() {
        let gt = two_person_gt();
        let engine = OracleEngine::from_ground_truth(&gt, 0.05, 42);
        let seed = Seed {
            tracklet_id: 1,
            seed_frame: 0,
            bbox: bb(10.0, 10.0, 10.0, 10.0),
        };
        let cands = vec![bb(12.0, 10.0, 10.0, 10.0), bb(30.0, 10.0, 10.0, 10.0)];
        let a = engine.score_candidates(&seed, 1, &cands);
        let b = engine.score_candidates(&seed, 1, &cands);
        assert_eq!(a, b);
        for (_, s) in a {
            assert!((0.0..=1.0).contains(&s));
        }
    }
}
