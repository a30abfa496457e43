//! CLEAR MOT scoring of prototypes against ground truth.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{intersection_area, iou, BoundingBox};
use crate::prototype::Prototype;

pub const DEFAULT_IOU_MATCH_THRESHOLD: f64 = 0.2;

/// One annotated face in one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtFace {
    pub id: String,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    #[serde(default)]
    pub occluded: bool,
}

/// Ground truth indexed by frame. An identity appears at most once per
/// frame; occluded entries keep their box but are invisible to matching.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    pub frames: Vec<Vec<GtFace>>,
}

impl GroundTruth {
    pub fn validate(&self) -> Result<()> {
        for (k, faces) in self.frames.iter().enumerate() {
            for (i, face) in faces.iter().enumerate() {
                if faces[i + 1..].iter().any(|other| other.id == face.id) {
                    return Err(Error::InvalidSequence {
                        id: face.id.clone(),
                        message: format!("identity appears twice in frame {k}"),
                    });
                }
            }
        }
        Ok(())
    }

    /// Visible (non-occluded) faces at frame `k`.
    pub fn visible(&self, k: usize) -> impl Iterator<Item = &GtFace> {
        self.frames[k].iter().filter(|f| !f.occluded)
    }

    /// Count of faces to be tracked at frame `k`.
    pub fn count_at(&self, k: usize) -> usize {
        self.visible(k).count()
    }

    pub fn total_count(&self) -> usize {
        (0..self.frames.len()).map(|k| self.count_at(k)).sum()
    }

    /// All identities, sorted.
    pub fn identities(&self) -> Vec<String> {
        let mut ids: Vec<String> = Vec::new();
        for frame in &self.frames {
            for face in frame {
                if !ids.contains(&face.id) {
                    ids.push(face.id.clone());
                }
            }
        }
        ids.sort();
        ids
    }

    fn visible_box(&self, id: &str, k: usize) -> Option<&BoundingBox> {
        self.frames[k]
            .iter()
            .find(|f| f.id == id && !f.occluded)
            .map(|f| &f.bbox)
    }
}

/// Per-frame penalty counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameCounts {
    pub fp: usize,
    #[serde(rename = "fn")]
    pub false_negatives: usize,
    pub ids: usize,
}

/// CLEAR MOT report for one sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotReport {
    pub motp: f64,
    pub mota: f64,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub false_negatives: usize,
    pub ids: usize,
    pub total_gt: usize,
    pub per_frame: Vec<FrameCounts>,
    /// Frames where each track's box intersects its identity's box (M_s).
    pub matched_frames: Vec<Vec<usize>>,
    /// Identity assigned to each track, if any.
    pub assignment: Vec<Option<String>>,
}

/// Plain-text table with one row per report, percentage columns.
pub fn format_table(rows: &[(&str, &MotReport)]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<44} {:>8} {:>8} {:>8} {:>8} {:>8}\n",
        "Method", "MOTP", "MOTA", "FP", "FN", "IDS"
    ));
    for (label, report) in rows {
        let pct = |count: usize| 100.0 * count as f64 / report.total_gt as f64;
        out.push_str(&format!(
            "{:<44} {:>7.2}% {:>7.2}% {:>7.2}% {:>7.2}% {:>7.2}%\n",
            label,
            100.0 * report.motp,
            100.0 * report.mota,
            pct(report.fp),
            pct(report.false_negatives),
            pct(report.ids),
        ));
    }
    out
}

/// Greedy global assignment of prototypes to identities, maximizing the
/// summed per-frame IoU between emitted boxes and visible ground truth.
/// Pairs with zero affinity stay unassigned. Ties prefer the lower
/// prototype index, then the lexicographically smaller identity.
pub fn match_tracks_to_gt(prototypes: &[Prototype], gt: &GroundTruth) -> Vec<Option<String>> {
    let ids = gt.identities();
    let frames = gt.frames.len();
    let mut affinity = vec![vec![0.0f64; ids.len()]; prototypes.len()];
    for (p, proto) in prototypes.iter().enumerate() {
        for (j, id) in ids.iter().enumerate() {
            let mut sum = 0.0;
            for k in 0..frames.min(proto.span()) {
                if let (Some(track_box), Some(gt_box)) =
                    (proto.emitted_box(k), gt.visible_box(id, k))
                {
                    sum += iou(track_box, gt_box);
                }
            }
            affinity[p][j] = sum;
        }
    }

    let mut assignment: Vec<Option<String>> = vec![None; prototypes.len()];
    let mut id_taken = vec![false; ids.len()];
    let mut proto_done = vec![false; prototypes.len()];
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for p in 0..prototypes.len() {
            if proto_done[p] {
                continue;
            }
            for j in 0..ids.len() {
                if id_taken[j] || affinity[p][j] <= 0.0 {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((score, bp, bj)) => {
                        affinity[p][j] > score
                            || (affinity[p][j] == score && (p, j) < (bp, bj))
                    }
                };
                if better {
                    best = Some((affinity[p][j], p, j));
                }
            }
        }
        match best {
            Some((_, p, j)) => {
                assignment[p] = Some(ids[j].clone());
                proto_done[p] = true;
                id_taken[j] = true;
            }
            None => break,
        }
    }
    assignment
}

/// Mean IoU over all (track, frame) pairs where the emitted box intersects
/// its assigned identity's box; 0 when no such pair exists.
pub fn motp(
    prototypes: &[Prototype],
    gt: &GroundTruth,
    assignment: &[Option<String>],
) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (proto, assigned) in prototypes.iter().zip(assignment) {
        let Some(id) = assigned else { continue };
        for k in 0..gt.frames.len().min(proto.span()) {
            if let (Some(track_box), Some(gt_box)) = (proto.emitted_box(k), gt.visible_box(id, k))
            {
                if intersection_area(track_box, gt_box) > 0.0 {
                    sum += iou(track_box, gt_box);
                    count += 1;
                }
            }
        }
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Full CLEAR MOT accounting.
///
/// Per frame: a ground-truth face with no emitted box at the IoU threshold
/// is a false negative; an emitted box overlapping no face is a false
/// positive; an emitted box that misses its own identity but overlaps some
/// other face is an identity switch.
pub fn mota(
    prototypes: &[Prototype],
    gt: &GroundTruth,
    assignment: &[Option<String>],
    iou_match_threshold: f64,
) -> Result<MotReport> {
    let total_gt = gt.total_count();
    if total_gt == 0 {
        return Err(Error::NoGroundTruth);
    }

    let frames = gt.frames.len();
    let mut per_frame = Vec::with_capacity(frames);
    let mut matched_frames: Vec<Vec<usize>> = vec![Vec::new(); prototypes.len()];
    let (mut fp_total, mut fn_total, mut ids_total) = (0usize, 0usize, 0usize);

    for k in 0..frames {
        let visible: Vec<&GtFace> = gt.visible(k).collect();
        let emitted: Vec<(usize, &BoundingBox)> = prototypes
            .iter()
            .enumerate()
            .filter(|(_, p)| k < p.span())
            .filter_map(|(p, proto)| proto.emitted_box(k).map(|b| (p, b)))
            .collect();

        // false negatives: faces covered by no emitted box
        let mut fn_k = 0usize;
        for face in &visible {
            let covered = emitted
                .iter()
                .any(|(_, b)| iou(b, &face.bbox) >= iou_match_threshold);
            if !covered {
                fn_k += 1;
            }
        }

        // classify each emitted box: own identity, another face, or nothing
        let mut fp_k = 0usize;
        let mut ids_k = 0usize;
        for &(p, track_box) in &emitted {
            let own = assignment[p].as_deref();
            let matches_own = own
                .and_then(|id| gt.visible_box(id, k))
                .map(|gt_box| iou(track_box, gt_box) >= iou_match_threshold)
                .unwrap_or(false);
            if matches_own {
                if let Some(id) = own {
                    if let Some(gt_box) = gt.visible_box(id, k) {
                        if intersection_area(track_box, gt_box) > 0.0 {
                            matched_frames[p].push(k);
                        }
                    }
                }
                continue;
            }
            let matches_other = visible.iter().any(|face| {
                Some(face.id.as_str()) != own
                    && iou(track_box, &face.bbox) >= iou_match_threshold
            });
            if matches_other {
                ids_k += 1;
            } else {
                fp_k += 1;
            }
            // a box that misses its own identity can still intersect it
            if let Some(id) = own {
                if let Some(gt_box) = gt.visible_box(id, k) {
                    if intersection_area(track_box, gt_box) > 0.0 {
                        matched_frames[p].push(k);
                    }
                }
            }
        }

        fp_total += fp_k;
        fn_total += fn_k;
        ids_total += ids_k;
        per_frame.push(FrameCounts {
            fp: fp_k,
            false_negatives: fn_k,
            ids: ids_k,
        });
    }

    let mota = 1.0 - (fp_total + fn_total + ids_total) as f64 / total_gt as f64;
    let motp_value = motp(prototypes, gt, assignment);
    Ok(MotReport {
        motp: motp_value,
        mota,
        fp: fp_total,
        false_negatives: fn_total,
        ids: ids_total,
        total_gt,
        per_frame,
        matched_frames,
        assignment: assignment.to_vec(),
    })
}
