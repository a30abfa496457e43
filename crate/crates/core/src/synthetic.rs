//! Deterministic synthetic photo-stream generator with ground truth, a
//! simulated detector, and an oracle engine. Stands in for real wearable
//! camera data in tests and experiments.

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{GroundTruth, GtFace};
use crate::geometry::{intersection_area, BoundingBox};
use crate::matching::OracleEngine;
use crate::model::{FrameDetections, Sequence};

const PLACEMENT_ATTEMPTS: usize = 100;

/// Occlusion of one person over the half-open frame range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OcclusionInterval {
    pub person: usize,
    pub start: usize,
    pub end: usize,
}

/// Generator knobs. All randomness flows from `rng_seed`, so equal configs
/// produce bit-identical output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub num_frames: usize,
    pub num_persons: usize,
    /// Square frame side in pixels.
    pub frame_size: f64,
    /// Maximum per-axis step as a fraction of the frame side (abrupt motion).
    pub jump_scale: f64,
    /// Probability that a visible face goes undetected in a frame.
    pub detector_miss_rate: f64,
    /// Expected count of spurious detector boxes per frame (Poisson).
    pub false_positive_rate: f64,
    /// Detection perturbation as a fraction of box size.
    pub detection_jitter: f64,
    pub occlusion_intervals: Vec<OcclusionInterval>,
    pub rng_seed: u64,
    /// Standard deviation of the oracle's score jitter.
    pub score_noise: f64,
    /// Also produce rendered frames.
    pub render: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            num_frames: 25,
            num_persons: 2,
            frame_size: 128.0,
            jump_scale: 0.2,
            detector_miss_rate: 0.0,
            false_positive_rate: 0.0,
            detection_jitter: 0.05,
            occlusion_intervals: Vec::new(),
            rng_seed: 0,
            score_noise: 0.0,
            render: false,
        }
    }
}

impl GenConfig {
    fn validate(&self) -> Result<()> {
        if self.num_frames == 0 {
            return Err(Error::InvalidConfig("num_frames must be >= 1".into()));
        }
        if !(1..=4).contains(&self.num_persons) {
            return Err(Error::InvalidConfig("num_persons must be in 1..=4".into()));
        }
        for rate in [
            self.detector_miss_rate,
            self.false_positive_rate.min(1.0),
            self.detection_jitter,
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::InvalidConfig("rates must lie in [0, 1]".into()));
            }
        }
        for interval in &self.occlusion_intervals {
            if interval.person >= self.num_persons || interval.start >= interval.end {
                return Err(Error::InvalidConfig(format!(
                    "bad occlusion interval {interval:?}"
                )));
            }
        }
        Ok(())
    }

    fn occluded(&self, person: usize, frame: usize) -> bool {
        self.occlusion_intervals
            .iter()
            .any(|iv| iv.person == person && (iv.start..iv.end).contains(&frame))
    }
}

/// Everything one synthetic run produces.
#[derive(Debug, Clone)]
pub struct SyntheticSequence {
    pub sequence: Sequence,
    pub ground_truth: GroundTruth,
    pub oracle: OracleEngine,
    pub frames: Option<Vec<RgbImage>>,
}

/// Generates one sequence: persons follow bounded random jumps while staying
/// disjoint and in-frame, the detector drops and fabricates boxes, occluded
/// persons are flagged and never detected, and the oracle scores candidates
/// against the generated ground truth.
pub fn generate_sequence(cfg: &GenConfig) -> Result<SyntheticSequence> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let side = cfg.frame_size;

    // person box sizes
    let sizes: Vec<(f64, f64)> = (0..cfg.num_persons)
        .map(|_| {
            let w = side * rng.gen_range(0.11..0.16);
            let h = w * rng.gen_range(0.95..1.15);
            (w, h)
        })
        .collect();

    // initial placement, mutually disjoint
    let mut positions: Vec<BoundingBox> = Vec::with_capacity(cfg.num_persons);
    for &(w, h) in &sizes {
        let placed = place_disjoint(&mut rng, side, w, h, &positions, None)?;
        positions.push(placed);
    }

    let mut gt_frames: Vec<Vec<GtFace>> = Vec::with_capacity(cfg.num_frames);
    let mut detections: Vec<FrameDetections> = Vec::with_capacity(cfg.num_frames);
    let jump = cfg.jump_scale * side;

    for k in 0..cfg.num_frames {
        if k > 0 {
            for p in 0..cfg.num_persons {
                let (w, h) = sizes[p];
                let previous = positions[p];
                let others: Vec<BoundingBox> = positions
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != p)
                    .map(|(_, b)| *b)
                    .collect();
                positions[p] =
                    place_disjoint(&mut rng, side, w, h, &others, Some((previous, jump)))?;
            }
        }

        let mut faces = Vec::with_capacity(cfg.num_persons);
        let mut boxes = Vec::new();
        for p in 0..cfg.num_persons {
            let occluded = cfg.occluded(p, k);
            faces.push(GtFace {
                id: format!("p{p}"),
                bbox: positions[p],
                occluded,
            });
            if occluded {
                continue;
            }
            if cfg.detector_miss_rate > 0.0 && rng.gen_bool(cfg.detector_miss_rate) {
                continue;
            }
            boxes.push(jittered(&mut rng, &positions[p], cfg.detection_jitter, side));
        }

        let fp_count = if cfg.false_positive_rate > 0.0 {
            Poisson::new(cfg.false_positive_rate)
                .expect("positive rate")
                .sample(&mut rng) as usize
        } else {
            0
        };
        for _ in 0..fp_count {
            let w = side * rng.gen_range(0.10..0.16);
            let h = w * rng.gen_range(0.95..1.15);
            let x = rng.gen_range(0.0..(side - w));
            let y = rng.gen_range(0.0..(side - h));
            boxes.push(BoundingBox { x, y, w, h });
        }

        gt_frames.push(faces);
        detections.push(FrameDetections {
            frame_index: k,
            boxes,
        });
    }

    let ground_truth = GroundTruth { frames: gt_frames };
    let oracle = OracleEngine::from_ground_truth(&ground_truth, cfg.score_noise, cfg.rng_seed);
    let frames = cfg
        .render
        .then(|| render_frames(cfg, &ground_truth));
    let sequence = Sequence::new(
        format!("synth-{}", cfg.rng_seed),
        cfg.num_frames,
        detections,
        None,
        (side, side),
    )?;

    Ok(SyntheticSequence {
        sequence,
        ground_truth,
        oracle,
        frames,
    })
}

fn place_disjoint(
    rng: &mut ChaCha8Rng,
    side: f64,
    w: f64,
    h: f64,
    others: &[BoundingBox],
    step_from: Option<(BoundingBox, f64)>,
) -> Result<BoundingBox> {
    for _ in 0..PLACEMENT_ATTEMPTS {
        let (x, y) = match step_from {
            None => (rng.gen_range(0.0..(side - w)), rng.gen_range(0.0..(side - h))),
            Some((previous, jump)) => {
                let x = (previous.x + rng.gen_range(-jump..jump)).clamp(0.0, side - w);
                let y = (previous.y + rng.gen_range(-jump..jump)).clamp(0.0, side - h);
                (x, y)
            }
        };
        let candidate = BoundingBox { x, y, w, h };
        if others
            .iter()
            .all(|other| intersection_area(&candidate, other) == 0.0)
        {
            return Ok(candidate);
        }
    }
    Err(Error::PlacementFailed {
        attempts: PLACEMENT_ATTEMPTS,
    })
}

fn jittered(rng: &mut ChaCha8Rng, gt: &BoundingBox, jitter: f64, side: f64) -> BoundingBox {
    if jitter == 0.0 {
        return *gt;
    }
    let w = gt.w * (1.0 + rng.gen_range(-jitter..jitter));
    let h = gt.h * (1.0 + rng.gen_range(-jitter..jitter));
    let x = (gt.x + rng.gen_range(-jitter..jitter) * gt.w).clamp(0.0, side - w);
    let y = (gt.y + rng.gen_range(-jitter..jitter) * gt.h).clamp(0.0, side - h);
    BoundingBox { x, y, w, h }
}

/// Distinct flat colors with a gradient border, drawn over a textured
/// background; enough structure for gradient-histogram matching.
const PERSON_COLORS: [[u8; 3]; 4] = [
    [210, 60, 50],
    [60, 90, 210],
    [60, 190, 90],
    [220, 190, 60],
];

fn render_frames(cfg: &GenConfig, gt: &GroundTruth) -> Vec<RgbImage> {
    let side = cfg.frame_size.ceil() as u32;
    gt.frames
        .iter()
        .map(|faces| {
            let mut img = RgbImage::from_fn(side, side, |x, y| {
                let n = texture(cfg.rng_seed, x, y);
                Rgb([92 + (n % 40) as u8, 96 + (n / 40 % 40) as u8, 90 + (n / 1600 % 40) as u8])
            });
            for (p, face) in faces.iter().enumerate() {
                if face.occluded {
                    continue;
                }
                draw_person(&mut img, &face.bbox, PERSON_COLORS[p % PERSON_COLORS.len()]);
            }
            img
        })
        .collect()
}

fn texture(seed: u64, x: u32, y: u32) -> u64 {
    let mut z = seed
        .wrapping_add((x as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add((y as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^ (z >> 31)
}

fn draw_person(img: &mut RgbImage, bbox: &BoundingBox, color: [u8; 3]) {
    let x0 = bbox.x.round().max(0.0) as u32;
    let y0 = bbox.y.round().max(0.0) as u32;
    let x1 = (bbox.right().round() as u32).min(img.width());
    let y1 = (bbox.bottom().round() as u32).min(img.height());
    if x1 <= x0 || y1 <= y0 {
        return;
    }
    let border = 3u32;
    for y in y0..y1 {
        for x in x0..x1 {
            let d = (x - x0)
                .min(x1 - 1 - x)
                .min(y - y0)
                .min(y1 - 1 - y);
            let px = img.get_pixel_mut(x, y);
            if d < border {
                let t = (d + 1) as f32 / (border + 1) as f32;
                for c in 0..3 {
                    px.0[c] = (color[c] as f32 * t + px.0[c] as f32 * (1.0 - t)) as u8;
                }
            } else {
                px.0 = color;
            }
        }
    }
}
