//! Grouping tracklets into extended bags-of-tracklets and the density gate.

use crate::error::{Error, Result};
use crate::geometry::iou;
use crate::tracklet::Tracklet;

pub const DEFAULT_GROUPING_THRESHOLD: f64 = 0.2;
pub const DEFAULT_DENSITY_THRESHOLD: f64 = 0.2;

/// A disjoint group of mutually overlapping tracklets, presumed to cover a
/// single person. `density` relates the member count to the sequence length.
#[derive(Debug, Clone, PartialEq)]
pub struct EBoT {
    pub id: usize,
    pub tracklets: Vec<Tracklet>,
    pub density: f64,
    pub reliable: bool,
}

/// Frame-wise mean IoU between two tracklets of equal span.
pub fn tracklet_similarity(a: &Tracklet, b: &Tracklet) -> Result<f64> {
    if a.span() != b.span() {
        return Err(Error::SpanMismatch {
            left: a.span(),
            right: b.span(),
        });
    }
    let sum: f64 = a
        .boxes
        .iter()
        .zip(b.boxes.iter())
        .map(|(x, y)| iou(x, y))
        .sum();
    Ok(sum / a.span() as f64)
}

/// Mean similarity of `t` to every tracklet in the bag.
pub fn ebot_similarity(t: &Tracklet, bag: &EBoT) -> Result<f64> {
    mean_similarity(t, &bag.tracklets)
}

fn mean_similarity(t: &Tracklet, members: &[Tracklet]) -> Result<f64> {
    if members.is_empty() {
        return Err(Error::EmptyBag);
    }
    let mut sum = 0.0;
    for member in members {
        sum += tracklet_similarity(t, member)?;
    }
    Ok(sum / members.len() as f64)
}

/// Greedy grouping: the first tracklet (by seed frame, then canonical seed
/// box) opens a bag, the rest are sorted by similarity to that tracklet in
/// descending order, and each joins the first bag whose mean similarity
/// reaches the threshold, otherwise opens a new one. The result partitions
/// the input.
pub fn group_tracklets(tracklets: Vec<Tracklet>, sim_threshold: f64) -> Result<Vec<EBoT>> {
    if tracklets.is_empty() {
        return Ok(Vec::new());
    }
    let span = tracklets[0].span();

    let mut ordered = tracklets;
    ordered.sort_by(|a, b| {
        a.seed
            .seed_frame
            .cmp(&b.seed.seed_frame)
            .then_with(|| a.seed.bbox.cmp_canonical(&b.seed.bbox))
    });

    let anchor = ordered.remove(0);
    let mut rest: Vec<(f64, Tracklet)> = Vec::with_capacity(ordered.len());
    for t in ordered {
        let sim = tracklet_similarity(&t, &anchor)?;
        rest.push((sim, t));
    }
    // stable sort keeps the deterministic pre-order on ties
    rest.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut bags: Vec<Vec<Tracklet>> = vec![vec![anchor]];
    for (_, t) in rest {
        let mut target = None;
        for (i, bag) in bags.iter().enumerate() {
            if mean_similarity(&t, bag)? >= sim_threshold {
                target = Some(i);
                break;
            }
        }
        match target {
            Some(i) => bags[i].push(t),
            None => bags.push(vec![t]),
        }
    }

    Ok(bags
        .into_iter()
        .enumerate()
        .map(|(id, members)| EBoT {
            id,
            density: members.len() as f64 / span as f64,
            reliable: false,
        tracklets: members,
        })
        .collect())
}

/// Recomputes densities against the sequence length and flags each bag.
pub fn assess_reliability(
    bags: &mut [EBoT],
    seq_len: usize,
    density_threshold: f64,
) -> Result<()> {
    if seq_len == 0 {
        return Err(Error::EmptySequence);
    }
    for bag in bags.iter_mut() {
        bag.density = bag.tracklets.len() as f64 / seq_len as f64;
        bag.reliable = bag.density >= density_threshold;
    }
    Ok(())
}

/// Keeps only the reliable bags, ids preserved.
pub fn filter_reliable(
    mut bags: Vec<EBoT>,
    seq_len: usize,
    density_threshold: f64,
) -> Result<Vec<EBoT>> {
    assess_reliability(&mut bags, seq_len, density_threshold)?;
    Ok(bags.into_iter().filter(|b| b.reliable).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BoundingBox;
    use crate::model::Seed;

    fn bb(x: f64, y: f64, w: f64, h: f64) -> BoundingBox {
        BoundingBox::new(x, y, w, h).unwrap()
    }

    fn tracklet(id: usize, seed_frame: usize, boxes: Vec<BoundingBox>) -> Tracklet {
        let scores = vec![1.0; boxes.len()];
        Tracklet {
            id,
            seed: Seed {
                tracklet_id: id,
                seed_frame,
                bbox: boxes[seed_frame],
            },
            boxes,
            scores,
        }
    }

    #[test]
    fn similarity_of_identical_tracklets_is_one() {
        let t = tracklet(0, 0, vec![bb(0.0, 0.0, 10.0, 10.0), bb(5.0, 5.0, 10.0, 10.0)]);
        assert_eq!(tracklet_similarity(&t, &t).unwrap(), 1.0);
    }

    #[test]
    fn similarity_of_disjoint_tracklets_is_zero() {
        let a = tracklet(0, 0, vec![bb(0.0, 0.0, 5.0, 5.0), bb(0.0, 0.0, 5.0, 5.0)]);
        let b = tracklet(1, 0, vec![bb(50.0, 50.0, 5.0, 5.0), bb(60.0, 60.0, 5.0, 5.0)]);
        assert_eq!(tracklet_similarity(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn similarity_averages_frame_ious() {
        // frame 0: IoU 1/3, frame 1: identical boxes
        let a = tracklet(0, 0, vec![bb(0.0, 0.0, 10.0, 10.0), bb(0.0, 0.0, 10.0, 10.0)]);
        let b = tracklet(1, 0, vec![bb(5.0, 0.0, 10.0, 10.0), bb(0.0, 0.0, 10.0, 10.0)]);
        let s = tracklet_similarity(&a, &b).unwrap();
        assert!((s - (1.0 / 3.0 + 1.0) / 2.0).abs() < 1e-12);
        assert_eq!(s, tracklet_similarity(&b, &a).unwrap());
    }

    #[test]
    fn span_mismatch_is_an_error() {
        let a = tracklet(0, 0, vec![bb(0.0, 0.0, 5.0, 5.0)]);
        let b = tracklet(1, 0, vec![bb(0.0, 0.0, 5.0, 5.0), bb(0.0, 0.0, 5.0, 5.0)]);
        assert!(matches!(
            tracklet_similarity(&a, &b),
            Err(Error::SpanMismatch { .. })
        ));
    }

    #[test]
    fn ebot_similarity_examples() {
        // duplicate member: similarity 1
        let t = tracklet(0, 0, vec![bb(0.0, 0.0, 10.0, 10.0)]);
        let dup = EBoT {
            id: 0,
            tracklets: vec![t.clone()],
            density: 1.0,
            reliable: false,
        };
        assert_eq!(ebot_similarity(&t, &dup).unwrap(), 1.0);

        // members at S = 0.4 (nested box, area ratio) and S = 0 average to 0.2
        let m1 = tracklet(1, 0, vec![bb(0.0, 0.0, 8.0, 5.0)]);
        let m2 = tracklet(2, 0, vec![bb(70.0, 70.0, 10.0, 10.0)]);
        assert_eq!(tracklet_similarity(&t, &m1).unwrap(), 0.4);
        let bag = EBoT {
            id: 1,
            tracklets: vec![m1, m2],
            density: 1.0,
            reliable: false,
        };
        assert_eq!(ebot_similarity(&t, &bag).unwrap(), 0.2);

        // bag of disjoint tracklets scores 0
        let far = tracklet(3, 0, vec![bb(90.0, 90.0, 5.0, 5.0)]);
        let disjoint = EBoT {
            id: 2,
            tracklets: vec![far],
            density: 1.0,
            reliable: false,
        };
        assert_eq!(ebot_similarity(&t, &disjoint).unwrap(), 0.0);

        let empty = EBoT {
            id: 3,
            tracklets: vec![],
            density: 0.0,
            reliable: false,
        };
        assert!(matches!(ebot_similarity(&t, &empty), Err(Error::EmptyBag)));
    }

    #[test]
    fn identical_tracklets_form_one_bag() {
        let boxes = vec![bb(0.0, 0.0, 10.0, 10.0), bb(2.0, 0.0, 10.0, 10.0)];
        let bags = group_tracklets(
            vec![tracklet(0, 0, boxes.clone()), tracklet(1, 1, boxes)],
            0.2,
        )
        .unwrap();
        assert_eq!(bags.len(), 1);
        assert_eq!(bags[0].tracklets.len(), 2);
    }

    #[test]
    fn disjoint_tracklets_open_separate_bags() {
        let a = tracklet(0, 0, vec![bb(0.0, 0.0, 5.0, 5.0), bb(0.0, 0.0, 5.0, 5.0)]);
        let b = tracklet(1, 0, vec![bb(50.0, 50.0, 5.0, 5.0), bb(50.0, 50.0, 5.0, 5.0)]);
        let bags = group_tracklets(vec![a, b], 0.2).unwrap();
        assert_eq!(bags.len(), 2);
        assert!(bags.iter().all(|b| b.tracklets.len() == 1));
    }

    #[test]
    fn grouping_is_a_partition() {
        // three clusters of near-identical tracklets, interleaved ids
        let mut input = Vec::new();
        for i in 0..9usize {
            let cluster = i % 3;
            let base = 30.0 * cluster as f64;
            let jitter = (i / 3) as f64 * 0.5;
            let boxes = vec![
                bb(base + jitter, base, 10.0, 10.0),
                bb(base, base + jitter, 10.0, 10.0),
                bb(base + 1.0, base + 1.0, 10.0, 10.0),
            ];
            input.push(tracklet(i, i % 3, boxes));
        }
        let bags = group_tracklets(input, 0.2).unwrap();
        let mut seen: Vec<usize> = bags
            .iter()
            .flat_map(|b| b.tracklets.iter().map(|t| t.id))
            .collect();
        seen.sort();
        assert_eq!(seen, (0..9).collect::<Vec<_>>());
        assert_eq!(bags.len(), 3);
        for bag in &bags {
            assert_eq!(bag.tracklets.len(), 3);
        }
    }

    #[test]
    fn empty_input_gives_empty_output() {
        assert!(group_tracklets(vec![], 0.2).unwrap().is_empty());
    }

    #[test]
    fn density_gate_examples() {
        let member = tracklet(0, 0, vec![bb(0.0, 0.0, 5.0, 5.0)]);
        let bag_of = |n: usize, id: usize| EBoT {
            id,
            tracklets: vec![member.clone(); n],
            density: 0.0,
            reliable: false,
        };

        // 5 of 25 sits exactly at the threshold and is kept
        let kept = filter_reliable(vec![bag_of(5, 0)], 25, 0.2).unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].density, 0.2);
        assert!(kept[0].reliable);

        // 1 of 25 is discarded
        assert!(filter_reliable(vec![bag_of(1, 0)], 25, 0.2)
            .unwrap()
            .is_empty());

        // single-frame sequence: density 1, kept
        let kept = filter_reliable(vec![bag_of(1, 0)], 1, 0.2).unwrap();
        assert_eq!(kept[0].density, 1.0);

        assert!(matches!(
            filter_reliable(vec![bag_of(1, 0)], 0, 0.2),
            Err(Error::EmptySequence)
        ));
    }

    #[test]
    fn reliable_bags_meet_the_member_floor() {
        let member = tracklet(0, 0, vec![bb(0.0, 0.0, 5.0, 5.0)]);
        for seq_len in [1usize, 7, 25, 40] {
            for n in 1..=seq_len {
                let bags = vec![EBoT {
                    id: 0,
                    tracklets: vec![member.clone(); n],
                    density: 0.0,
                    reliable: false,
                }];
                let kept = filter_reliable(bags, seq_len, 0.2).unwrap();
                if !kept.is_empty() {
                    let floor = (0.2 * seq_len as f64).ceil() as usize;
                    assert!(kept[0].tracklets.len() >= floor);
                }
            }
        }
    }

    #[test]
    fn bag_ids_are_preserved_by_filtering() {
        let near = tracklet(0, 0, vec![bb(0.0, 0.0, 5.0, 5.0)]);
        let far = tracklet(1, 0, vec![bb(50.0, 50.0, 5.0, 5.0)]);
        let mut bags = group_tracklets(vec![near.clone(), far, near], 0.2).unwrap();
        assess_reliability(&mut bags, 2, 0.2).unwrap();
        let kept = filter_reliable(bags, 2, 1.0).unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].id, 0);
        assert_eq!(kept[0].tracklets.len(), 2);
    }
}
