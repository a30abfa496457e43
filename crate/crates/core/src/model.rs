//! Sequence and detection data model plus the trackable-segment gate.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

/// Detector output for one frame. `boxes` may be empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameDetections {
    #[serde(rename = "frame")]
    pub frame_index: usize,
    pub boxes: Vec<BoundingBox>,
}

/// A temporal segment with per-frame detections, ready for tracking.
///
/// `frames` always holds exactly `length` entries, indexed 0..length-1.
/// `frame_size` is (width, height) in pixels and bounds candidate windows.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub id: String,
    pub length: usize,
    pub frames: Vec<FrameDetections>,
    pub image_paths: Option<Vec<PathBuf>>,
    pub frame_size: (f64, f64),
}

impl Sequence {
    /// Builds a sequence from per-frame records. Records may arrive in any
    /// order; frames without a record get an empty detection list. Duplicate
    /// or out-of-range frame indices are rejected.
    pub fn new(
        id: impl Into<String>,
        length: usize,
        records: Vec<FrameDetections>,
        image_paths: Option<Vec<PathBuf>>,
        frame_size: (f64, f64),
    ) -> Result<Self> {
        let id = id.into();
        if length == 0 {
            return Err(Error::InvalidSequence {
                id,
                message: "length must be >= 1".into(),
            });
        }
        if let Some(paths) = &image_paths {
            if paths.len() != length {
                return Err(Error::InvalidSequence {
                    id,
                    message: format!("{} image paths for {} frames", paths.len(), length),
                });
            }
        }
        if frame_size.0 <= 0.0 || frame_size.1 <= 0.0 {
            return Err(Error::InvalidSequence {
                id,
                message: "frame size must be positive".into(),
            });
        }
        let mut frames: Vec<FrameDetections> = (0..length)
            .map(|frame_index| FrameDetections {
                frame_index,
                boxes: Vec::new(),
            })
            .collect();
        let mut seen = vec![false; length];
        for record in records {
            let k = record.frame_index;
            if k >= length {
                return Err(Error::InvalidSequence {
                    id,
                    message: format!("frame index {k} outside 0..{length}"),
                });
            }
            if seen[k] {
                return Err(Error::InvalidSequence {
                    id,
                    message: format!("duplicate frame index {k}"),
                });
            }
            seen[k] = true;
            frames[k] = record;
        }
        Ok(Self {
            id,
            length,
            frames,
            image_paths,
            frame_size,
        })
    }

    /// Number of frames with at least one detection.
    pub fn frames_with_detections(&self) -> usize {
        self.frames.iter().filter(|f| !f.boxes.is_empty()).count()
    }

    /// Fraction of frames that contain at least one detection.
    pub fn detection_ratio(&self) -> f64 {
        self.frames_with_detections() as f64 / self.length as f64
    }
}

/// A face detection chosen as the origin of one tracklet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Seed {
    pub tracklet_id: usize,
    pub seed_frame: usize,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
}

/// True when enough frames carry detections for tracking to be worthwhile.
///
/// The comparison is inclusive: a ratio exactly at the threshold keeps the
/// segment.
pub fn is_trackable_segment(seq: &Sequence, ratio_threshold: f64) -> bool {
    seq.detection_ratio() >= ratio_threshold
}

pub const DEFAULT_TRACKABLE_RATIO: f64 = 0.5;

#[cfg(test)]
mod tests {
    use super::*;

    fn bb(x: f64, y: f64, w: f64, h: f64) -> BoundingBox {
        BoundingBox::new(x, y, w, h).unwrap()
    }

    fn seq_with_faces(total: usize, with_faces: usize) -> Sequence {
        let records = (0..with_faces)
            .map(|k| FrameDetections {
                frame_index: k,
                boxes: vec![bb(1.0, 1.0, 5.0, 5.0)],
            })
            .collect();
        Sequence::new("s", total, records, None, (100.0, 100.0)).unwrap()
    }

    #[test]
    fn gate_above_threshold() {
        assert!(is_trackable_segment(&seq_with_faces(10, 6), 0.5));
    }

    #[test]
    fn gate_no_faces() {
        assert!(!is_trackable_segment(&seq_with_faces(10, 0), 0.5));
    }

    #[test]
    fn gate_boundary_is_inclusive() {
        assert!(is_trackable_segment(&seq_with_faces(10, 5), 0.5));
    }

    #[test]
    fn gate_monotone_in_detections() {
        // adding a detection to an empty frame never flips true -> false
        for with in 0..10 {
            let before = is_trackable_segment(&seq_with_faces(10, with), 0.5);
            let after = is_trackable_segment(&seq_with_faces(10, with + 1), 0.5);
            assert!(!before || after);
        }
    }

    #[test]
    fn sequence_fills_missing_frames() {
        let records = vec![FrameDetections {
            frame_index: 2,
            boxes: vec![bb(0.0, 0.0, 4.0, 4.0)],
        }];
        let seq = Sequence::new("s", 4, records, None, (50.0, 50.0)).unwrap();
        assert_eq!(seq.frames.len(), 4);
        assert!(seq.frames[0].boxes.is_empty());
        assert_eq!(seq.frames[2].boxes.len(), 1);
        assert_eq!(seq.frames[3].frame_index, 3);
    }

    #[test]
    fn sequence_rejects_duplicates_and_out_of_range() {
        let dup = vec![
            FrameDetections {
                frame_index: 1,
                boxes: vec![],
            },
            FrameDetections {
                frame_index: 1,
                boxes: vec![],
            },
        ];
        assert!(Sequence::new("s", 3, dup, None, (10.0, 10.0)).is_err());
        let oob = vec![FrameDetections {
            frame_index: 9,
            boxes: vec![],
        }];
        assert!(Sequence::new("s", 3, oob, None, (10.0, 10.0)).is_err());
        assert!(Sequence::new("s", 0, vec![], None, (10.0, 10.0)).is_err());
    }
}
