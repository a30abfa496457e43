//! HSV color histograms and the candidate prefilter.

use image::RgbImage;

use crate::geometry::BoundingBox;

/// Bin counts for hue, saturation, value.
pub const HSV_BINS: (usize, usize, usize) = (8, 8, 4);

/// L1-normalized HSV histogram of a patch (all-zero when the patch is empty).
#[derive(Debug, Clone, PartialEq)]
pub struct HsvHistogram {
    bins: Vec<f64>,
}

/// RGB bytes to (h, s, v) with h in [0, 360), s and v in [0, 1].
pub fn rgb_to_hsv(r: u8, g: u8, b: u8) -> (f64, f64, f64) {
    let r = r as f64 / 255.0;
    let g = g as f64 / 255.0;
    let b = b as f64 / 255.0;
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;

    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let s = if max == 0.0 { 0.0 } else { delta / max };
    (h, s, max)
}

impl HsvHistogram {
    /// Histogram over the integer pixels of `bbox` clamped to the image.
    pub fn from_image_region(img: &RgbImage, bbox: &BoundingBox) -> Self {
        let (hb, sb, vb) = HSV_BINS;
        let mut bins = vec![0.0f64; hb * sb * vb];
        let x0 = bbox.x.max(0.0).round() as u32;
        let y0 = bbox.y.max(0.0).round() as u32;
        let x1 = (bbox.right().min(img.width() as f64).round() as u32).min(img.width());
        let y1 = (bbox.bottom().min(img.height() as f64).round() as u32).min(img.height());
        let mut count = 0.0;
        for y in y0..y1 {
            for x in x0..x1 {
                let [r, g, b] = img.get_pixel(x, y).0;
                let (h, s, v) = rgb_to_hsv(r, g, b);
                let hi = ((h / 360.0 * hb as f64) as usize).min(hb - 1);
                let si = ((s * sb as f64) as usize).min(sb - 1);
                let vi = ((v * vb as f64) as usize).min(vb - 1);
                bins[(hi * sb + si) * vb + vi] += 1.0;
                count += 1.0;
            }
        }
        if count > 0.0 {
            for v in &mut bins {
                *v /= count;
            }
        }
        Self { bins }
    }

    /// Histogram intersection, in [0, 1] for L1-normalized inputs.
    pub fn intersection(&self, other: &Self) -> f64 {
        self.bins
            .iter()
            .zip(other.bins.iter())
            .map(|(a, b)| a.min(*b))
            .sum()
    }
}

/// Keeps the candidates whose histogram intersection with the seed patch
/// reaches `threshold`. Order is preserved, so the output is a subsequence
/// of the input.
pub fn hsv_prefilter(
    seed: &HsvHistogram,
    candidates: &[(BoundingBox, HsvHistogram)],
    threshold: f64,
) -> Vec<BoundingBox> {
    candidates
        .iter()
        .filter(|(_, hist)| seed.intersection(hist) >= threshold)
        .map(|(bbox, _)| *bbox)
        .collect()
}

pub const DEFAULT_HSV_THRESHOLD: f64 = 0.5;

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;

    fn bb(x: f64, y: f64, w: f64, h: f64) -> BoundingBox {
        BoundingBox::new(x, y, w, h).unwrap()
    }

    fn flat_image(width: u32, height: u32, color: [u8; 3]) -> RgbImage {
        RgbImage::from_pixel(width, height, Rgb(color))
    }

    #[test]
    fn exact_copy_is_kept_with_intersection_one() {
        let img = flat_image(20, 20, [200, 30, 30]);
        let seed = HsvHistogram::from_image_region(&img, &bb(0.0, 0.0, 10.0, 10.0));
        let cand_box = bb(5.0, 5.0, 10.0, 10.0);
        let cand = HsvHistogram::from_image_region(&img, &cand_box);
        assert_eq!(seed.intersection(&cand), 1.0);
        let kept = hsv_prefilter(&seed, &[(cand_box, cand)], 0.5);
        assert_eq!(kept, vec![cand_box]);
    }

    #[test]
    fn zero_threshold_keeps_everything() {
        let red = flat_image(10, 10, [255, 0, 0]);
        let blue = flat_image(10, 10, [0, 0, 255]);
        let seed = HsvHistogram::from_image_region(&red, &bb(0.0, 0.0, 10.0, 10.0));
        let candidates = vec![
            (
                bb(0.0, 0.0, 5.0, 5.0),
                HsvHistogram::from_image_region(&blue, &bb(0.0, 0.0, 5.0, 5.0)),
            ),
            (
                bb(2.0, 2.0, 5.0, 5.0),
                HsvHistogram::from_image_region(&red, &bb(2.0, 2.0, 5.0, 5.0)),
            ),
        ];
        assert_eq!(hsv_prefilter(&seed, &candidates, 0.0).len(), 2);
    }

    #[test]
    fn all_red_seed_rejects_all_blue_candidate() {
        let red = flat_image(10, 10, [255, 0, 0]);
        let blue = flat_image(10, 10, [0, 0, 255]);
        let region = bb(0.0, 0.0, 10.0, 10.0);
        let seed = HsvHistogram::from_image_region(&red, &region);
        let cand = HsvHistogram::from_image_region(&blue, &region);
        assert!(seed.intersection(&cand) < 1e-12);
        assert!(hsv_prefilter(&seed, &[(region, cand)], 0.5).is_empty());
    }

    #[test]
    fn output_is_a_subsequence_of_input() {
        let red = flat_image(30, 30, [255, 0, 0]);
        let blue = flat_image(30, 30, [0, 0, 255]);
        let region = bb(0.0, 0.0, 8.0, 8.0);
        let seed = HsvHistogram::from_image_region(&red, &region);
        let mut candidates = Vec::new();
        for i in 0..10 {
            let b = bb(i as f64, 0.0, 8.0, 8.0);
            let img = if i % 3 == 0 { &blue } else { &red };
            candidates.push((b, HsvHistogram::from_image_region(img, &b)));
        }
        let kept = hsv_prefilter(&seed, &candidates, 0.5);
        let mut cursor = 0;
        for k in &kept {
            let pos = candidates[cursor..]
                .iter()
                .position(|(b, _)| b == k)
                .expect("kept box must appear after the previous one");
            cursor += pos + 1;
        }
        assert_eq!(kept.len(), 6);
    }

    #[test]
    fn empty_region_yields_zero_histogram() {
        let img = flat_image(10, 10, [9, 9, 9]);
        let h = HsvHistogram::from_image_region(&img, &bb(50.0, 50.0, 5.0, 5.0));
        let full = HsvHistogram::from_image_region(&img, &bb(0.0, 0.0, 10.0, 10.0));
        assert_eq!(h.intersection(&full), 0.0);
    }
}
