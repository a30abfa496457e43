//! Consensus prototype extraction, occlusion estimation, and confidence.

use serde::{Deserialize, Serialize};

use crate::ebot::EBoT;
use crate::error::{Error, Result};
use crate::geometry::{intersection_area, BoundingBox};

pub const DEFAULT_OCCLUSION_THRESHOLD: f64 = 0.12;
pub const DEFAULT_BETA: f64 = 1.0;

/// How raw match scores are brought into [0, 1] before confidence math.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Divide by the bag-wide maximum (default).
    #[default]
    MaxScale,
    /// Affine map of the bag-wide range onto [0, 1].
    MinMax,
    /// Keep raw scores.
    None,
}

/// Occlusion and confidence tunables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceConfig {
    /// Occlusion threshold L; frame confidences below it are zeroed.
    pub occlusion_threshold: f64,
    /// Occlusion penalty control in the prototype-confidence weight.
    pub beta: f64,
    pub normalization: Normalization,
}

impl Default for ConfidenceConfig {
    fn default() -> Self {
        Self {
            occlusion_threshold: DEFAULT_OCCLUSION_THRESHOLD,
            beta: DEFAULT_BETA,
            normalization: Normalization::MaxScale,
        }
    }
}

/// Per-frame consensus track extracted from one bag.
///
/// After refinement, `occluded[k]` is true exactly when
/// `frame_confidence[k]` is zero (for a positive threshold).
#[derive(Debug, Clone, PartialEq)]
pub struct Prototype {
    pub ebot_id: usize,
    pub boxes: Vec<BoundingBox>,
    pub frame_confidence: Vec<f64>,
    pub occluded: Vec<bool>,
    pub confidence: f64,
}

impl Prototype {
    pub fn span(&self) -> usize {
        self.boxes.len()
    }

    pub fn occluded_count(&self) -> usize {
        self.occluded.iter().filter(|&&o| o).count()
    }

    /// The box this prototype emits at frame `k`, none on occluded frames.
    pub fn emitted_box(&self, k: usize) -> Option<&BoundingBox> {
        if self.occluded[k] {
            None
        } else {
            Some(&self.boxes[k])
        }
    }
}

/// Per-bag confidence summary for reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BagConfidenceReport {
    pub ebot_id: usize,
    pub prototype_confidence: f64,
    pub member_confidences: Vec<f64>,
    /// Whether the prototype beats every member; reported, not guaranteed.
    pub prototype_dominates: bool,
}

/// Per frame, picks the member box with the largest summed intersection
/// with all other members' boxes in that frame. Ties go to the member with
/// the higher own match score, then to the lower member position.
pub fn extract_prototype(bag: &EBoT) -> Result<Vec<BoundingBox>> {
    if bag.tracklets.is_empty() {
        return Err(Error::EmptyBag);
    }
    let span = bag.tracklets[0].span();
    let m = bag.tracklets.len();
    let mut boxes = Vec::with_capacity(span);
    for k in 0..span {
        let mut best_i = 0;
        let mut best_sum = f64::NEG_INFINITY;
        for i in 0..m {
            let mut sum = 0.0;
            for j in 0..m {
                if i != j {
                    sum += intersection_area(&bag.tracklets[i].boxes[k], &bag.tracklets[j].boxes[k]);
                }
            }
            let score = bag.tracklets[i].scores[k];
            let best_score = bag.tracklets[best_i].scores[k];
            let better = sum > best_sum
                || (sum == best_sum && score > best_score)
                || (sum == best_sum
                    && score == best_score
                    && bag.tracklets[i].id < bag.tracklets[best_i].id);
            if i == 0 || better {
                best_sum = sum;
                best_i = i;
            }
        }
        boxes.push(bag.tracklets[best_i].boxes[k]);
    }
    Ok(boxes)
}

/// Normalized per-tracklet per-frame scores, rows aligned with the bag's
/// tracklets. Degenerate bags whose scores are all equal normalize to 1.
pub fn normalize_scores(bag: &EBoT, mode: Normalization) -> Vec<Vec<f64>> {
    let rows: Vec<&[f64]> = bag.tracklets.iter().map(|t| t.scores.as_slice()).collect();
    let all = rows.iter().flat_map(|r| r.iter().copied());
    let max = all.clone().fold(f64::NEG_INFINITY, f64::max);
    let min = all.fold(f64::INFINITY, f64::min);
    rows.iter()
        .map(|row| {
            row.iter()
                .map(|&s| match mode {
                    Normalization::None => s,
                    Normalization::MaxScale => {
                        if max > 0.0 {
                            s / max
                        } else {
                            1.0
                        }
                    }
                    Normalization::MinMax => {
                        if max > min {
                            (s - min) / (max - min)
                        } else {
                            1.0
                        }
                    }
                })
                .collect()
        })
        .collect()
}

/// Frame confidence: mean of the members' normalized scores at frame `k`.
pub fn frame_confidence(normalized: &[Vec<f64>], k: usize) -> f64 {
    let sum: f64 = normalized.iter().map(|row| row[k]).sum();
    sum / normalized.len() as f64
}

/// Zeroes confidences below the threshold and flags those frames occluded.
/// A confidence exactly at the threshold survives.
pub fn estimate_occlusions(confidences: &[f64], l: f64) -> (Vec<f64>, Vec<bool>) {
    let mut refined = Vec::with_capacity(confidences.len());
    let mut occluded = Vec::with_capacity(confidences.len());
    for &c in confidences {
        if c >= l {
            refined.push(c);
            occluded.push(false);
        } else {
            refined.push(0.0);
            occluded.push(true);
        }
    }
    (refined, occluded)
}

/// Occlusion-penalized mean confidence: the mean of the refined frame
/// confidences times `max(1 + beta * ln((n - z) / n), 0)`. A fully occluded
/// track has confidence zero by convention.
pub fn prototype_confidence(refined: &[f64], z: usize, beta: f64) -> f64 {
    let n = refined.len();
    if n == 0 || z >= n {
        return 0.0;
    }
    let mean = refined.iter().sum::<f64>() / n as f64;
    let weight = (1.0 + beta * ((n - z) as f64 / n as f64).ln()).max(0.0);
    mean * weight
}

/// Confidence of a single member tracklet: its own normalized scores run
/// through the same refinement and weighting as the prototype.
pub fn tracklet_confidence(normalized_row: &[f64], l: f64, beta: f64) -> f64 {
    let (refined, occluded) = estimate_occlusions(normalized_row, l);
    let z = occluded.iter().filter(|&&o| o).count();
    prototype_confidence(&refined, z, beta)
}

/// Median of per-sequence medians of occluded-frame confidences; the
/// calibration that produced the default threshold.
pub fn calibrate_threshold(training: &[Vec<f64>]) -> Result<f64> {
    if training.is_empty() || training.iter().any(|seq| seq.is_empty()) {
        return Err(Error::EmptyTraining);
    }
    let medians: Vec<f64> = training.iter().map(|seq| median(seq)).collect();
    Ok(median(&medians))
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Runs the whole prototype stage for one bag.
pub fn build_prototype(bag: &EBoT, cfg: &ConfidenceConfig) -> Result<(Prototype, BagConfidenceReport)> {
    let boxes = extract_prototype(bag)?;
    let normalized = normalize_scores(bag, cfg.normalization);
    let span = boxes.len();
    let confidences: Vec<f64> = (0..span).map(|k| frame_confidence(&normalized, k)).collect();
    let (refined, occluded) = estimate_occlusions(&confidences, cfg.occlusion_threshold);
    let z = occluded.iter().filter(|&&o| o).count();
    let confidence = prototype_confidence(&refined, z, cfg.beta);

    let member_confidences: Vec<f64> = normalized
        .iter()
        .map(|row| tracklet_confidence(row, cfg.occlusion_threshold, cfg.beta))
        .collect();
    let best_member = member_confidences
        .iter()
        .fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let report = BagConfidenceReport {
        ebot_id: bag.id,
        prototype_confidence: confidence,
        member_confidences,
        prototype_dominates: confidence >= best_member,
    };

    Ok((
        Prototype {
            ebot_id: bag.id,
            boxes,
            frame_confidence: refined,
            occluded,
            confidence,
        },
        report,
    ))
}
