//! Axis-aligned bounding boxes and overlap measures.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned rectangle in continuous pixel coordinates.
///
/// Intersection uses half-open interval semantics `[x, x + w)`, so boxes that
/// merely touch along an edge do not overlap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 4]", try_from = "[f64; 4]")]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        let finite = x.is_finite() && y.is_finite() && w.is_finite() && h.is_finite();
        if !finite || w <= 0.0 || h <= 0.0 {
            return Err(Error::InvalidBox { w, h });
        }
        Ok(Self { x, y, w, h })
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            x: self.x + dx,
            y: self.y + dy,
            ..*self
        }
    }

    /// Canonical ordering for deterministic tie-breaks: (y, x, w, h).
    pub fn cmp_canonical(&self, other: &Self) -> Ordering {
        let a = [self.y, self.x, self.w, self.h];
        let b = [other.y, other.x, other.w, other.h];
        for (l, r) in a.iter().zip(b.iter()) {
            match l.total_cmp(r) {
                Ordering::Equal => continue,
                ord => return ord,
            }
        }
        Ordering::Equal
    }

    /// Exact bit pattern, used for dedup keys and score-matrix lookups.
    pub fn key_bits(&self) -> [u64; 4] {
        [
            self.x.to_bits(),
            self.y.to_bits(),
            self.w.to_bits(),
            self.h.to_bits(),
        ]
    }
}

impl From<BoundingBox> for [f64; 4] {
    fn from(b: BoundingBox) -> Self {
        [b.x, b.y, b.w, b.h]
    }
}

impl TryFrom<[f64; 4]> for BoundingBox {
    type Error = Error;

    fn try_from(v: [f64; 4]) -> Result<Self> {
        BoundingBox::new(v[0], v[1], v[2], v[3])
    }
}

/// Overlap area of two boxes, zero when disjoint. Symmetric.
pub fn intersection_area(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let ow = a.right().min(b.right()) - a.x.max(b.x);
    let oh = a.bottom().min(b.bottom()) - a.y.max(b.y);
    if ow > 0.0 && oh > 0.0 {
        ow * oh
    } else {
        0.0
    }
}

/// Intersection over union, in [0, 1]. Equals 1 iff the boxes coincide.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    if a == b {
        return 1.0;
    }
    let inter = intersection_area(a, b);
    if inter <= 0.0 {
        return 0.0;
    }
    (inter / (a.area() + b.area() - inter)).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bb(x: f64, y: f64, w: f64, h: f64) -> BoundingBox {
        BoundingBox::new(x, y, w, h).unwrap()
    }

    fn random_box(rng: &mut impl Rng) -> BoundingBox {
        bb(
            rng.gen_range(-20.0..80.0),
            rng.gen_range(-20.0..80.0),
            rng.gen_range(0.5..40.0),
            rng.gen_range(0.5..40.0),
        )
    }

    #[test]
    fn intersection_self() {
        let a = bb(0.0, 0.0, 10.0, 10.0);
        assert_eq!(intersection_area(&a, &a), 100.0);
    }

    #[test]
    fn intersection_disjoint() {
        let a = bb(0.0, 0.0, 10.0, 10.0);
        let b = bb(20.0, 20.0, 5.0, 5.0);
        assert_eq!(intersection_area(&a, &b), 0.0);
    }

    #[test]
    fn intersection_half_overlap() {
        // overlap width 5 x height 10
        let a = bb(0.0, 0.0, 10.0, 10.0);
        let b = bb(5.0, 0.0, 10.0, 10.0);
        assert_eq!(intersection_area(&a, &b), 50.0);
        assert_eq!(intersection_area(&b, &a), 50.0);
    }

    #[test]
    fn adjacent_boxes_do_not_intersect() {
        // half-open semantics: touching edges share no area
        let a = bb(0.0, 0.0, 10.0, 10.0);
        let b = bb(10.0, 0.0, 10.0, 10.0);
        assert_eq!(intersection_area(&a, &b), 0.0);
        assert_eq!(iou(&a, &b), 0.0);
    }

    #[test]
    fn iou_identical() {
        let a = bb(3.0, 4.0, 12.0, 7.0);
        assert_eq!(iou(&a, &a), 1.0);
    }

    #[test]
    fn iou_disjoint() {
        let a = bb(0.0, 0.0, 10.0, 10.0);
        let b = bb(100.0, 100.0, 10.0, 10.0);
        assert_eq!(iou(&a, &b), 0.0);
    }

    #[test]
    fn iou_one_third() {
        let a = bb(0.0, 0.0, 10.0, 10.0);
        let b = bb(5.0, 0.0, 10.0, 10.0);
        assert_eq!(iou(&a, &b), 50.0 / 150.0);
    }

    #[test]
    fn iou_symmetric_fuzz() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let a = random_box(&mut rng);
            let b = random_box(&mut rng);
            assert_eq!(iou(&a, &b), iou(&b, &a));
            assert_eq!(iou(&a, &a), 1.0);
            let cap = intersection_area(&a, &b);
            assert!(cap <= a.area().min(b.area()) + 1e-12);
            assert!((0.0..=1.0).contains(&iou(&a, &b)));
        }
    }

    #[test]
    fn rejects_degenerate_boxes() {
        assert!(BoundingBox::new(0.0, 0.0, 0.0, 10.0).is_err());
        assert!(BoundingBox::new(0.0, 0.0, 10.0, -1.0).is_err());
        assert!(BoundingBox::new(f64::NAN, 0.0, 10.0, 10.0).is_err());
    }

    #[test]
    fn serde_as_array() {
        let a = bb(1.0, 2.0, 3.0, 4.0);
        let s = serde_json::to_string(&a).unwrap();
        assert_eq!(s, "[1.0,2.0,3.0,4.0]");
        let back: BoundingBox = serde_json::from_str(&s).unwrap();
        assert_eq!(back, a);
        assert!(serde_json::from_str::<BoundingBox>("[0,0,0,5]").is_err());
    }
}
