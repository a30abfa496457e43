//! Warp scoring: the 1D dynamic-programming alignment and the
//! quadrant-shift patch matcher built on top of it.

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::matching::descriptor::{cell_similarity, compute_descriptor, Descriptor, GrayF32};

/// Outcome of a warp search. `score` is the mean per-element similarity
/// under the chosen alignment and always lies in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct WarpResult {
    pub score: f64,
    /// Map from reference element index to target element index.
    pub warp: Vec<usize>,
    /// Chosen pixel shift per quadrant; all zero for the 1D alignment.
    pub quadrant_shifts: [(i64, i64); 4],
}

/// Optimal 1D warp between two equal-length descriptor lists.
///
/// Feasible warps are monotone non-decreasing maps `w` with
/// `|w(i) - i| <= slack`; the returned score maximizes the mean
/// `cell_similarity(reference[i], target[w(i)])` over that set, found by
/// dynamic programming. Ties resolve to the smallest target indices.
pub fn warp_score_1d(
    reference: &[Vec<f64>],
    target: &[Vec<f64>],
    slack: usize,
) -> Result<WarpResult> {
    let n = reference.len();
    if n != target.len() {
        return Err(Error::DescriptorLengthMismatch {
            left: n,
            right: target.len(),
        });
    }
    if n == 0 {
        return Err(Error::EmptyDescriptor);
    }

    let window = |i: usize| -> (usize, usize) {
        let lo = i.saturating_sub(slack);
        let hi = (i + slack).min(n - 1);
        (lo, hi)
    };

    // dp[j] = best accumulated similarity for element i ending with w(i) = j
    let mut dp = vec![f64::NEG_INFINITY; n];
    let mut parents: Vec<Vec<usize>> = vec![vec![0; n]; n];
    let (lo0, hi0) = window(0);
    for j in lo0..=hi0 {
        dp[j] = cell_similarity(&reference[0], &target[j])?;
    }

    for i in 1..n {
        let (lo, hi) = window(i);
        let (plo, phi) = window(i - 1);
        let mut next = vec![f64::NEG_INFINITY; n];
        for j in lo..=hi {
            // best predecessor with w(i-1) <= j, smallest index on ties
            let mut best = f64::NEG_INFINITY;
            let mut best_j = usize::MAX;
            for pj in plo..=phi.min(j) {
                if dp[pj] > best {
                    best = dp[pj];
                    best_j = pj;
                }
            }
            if best_j == usize::MAX {
                continue;
            }
            next[j] = best + cell_similarity(&reference[i], &target[j])?;
            parents[i][j] = best_j;
        }
        dp = next;
    }

    let (lo_last, hi_last) = window(n - 1);
    let mut best = f64::NEG_INFINITY;
    let mut best_j = lo_last;
    for j in lo_last..=hi_last {
        if dp[j] > best {
            best = dp[j];
            best_j = j;
        }
    }

    let mut warp = vec![0; n];
    warp[n - 1] = best_j;
    for i in (1..n).rev() {
        warp[i - 1] = parents[i][warp[i]];
    }

    Ok(WarpResult {
        score: best / n as f64,
        warp,
        quadrant_shifts: [(0, 0); 4],
    })
}

/// Quadrant-shift matcher: each of the four quadrants of the reference
/// searches integer shifts of the target sampling box independently and
/// keeps its best mean cell similarity; the total score is the mean of the
/// four quadrant maxima.
///
/// Shifts that push the target box fully outside the image are skipped; if
/// every shift is infeasible the call fails with an out-of-bounds error.
pub fn quadrant_warp_score(
    reference: &Descriptor,
    target_image: &GrayF32,
    target_box: &BoundingBox,
    radius: f64,
) -> Result<WarpResult> {
    let r = radius.max(0.0).floor() as i64;
    let mut quadrant_best = [f64::NEG_INFINITY; 4];
    let mut quadrant_shifts = [(0i64, 0i64); 4];
    let mut any_feasible = false;

    for dy in -r..=r {
        for dx in -r..=r {
            let shifted = target_box.translated(dx as f64, dy as f64);
            let target = match compute_descriptor(target_image, &shifted, &reference.params) {
                Ok(d) => d,
                Err(Error::EmptyPatch) => continue,
                Err(e) => return Err(e),
            };
            any_feasible = true;
            for q in 0..4 {
                let cells = reference.quadrant_cells(q);
                let mut sum = 0.0;
                for &cell in &cells {
                    sum += cell_similarity(&reference.cells[cell], &target.cells[cell])?;
                }
                let mean = sum / cells.len() as f64;
                if mean > quadrant_best[q] {
                    quadrant_best[q] = mean;
                    quadrant_shifts[q] = (dx, dy);
                }
            }
        }
    }

    if !any_feasible {
        return Err(Error::OutOfBounds);
    }

    let score = quadrant_best.iter().sum::<f64>() / 4.0;
    let grid = reference.params.grid;
    Ok(WarpResult {
        score,
        warp: (0..grid * grid).collect(),
        quadrant_shifts,
    })
}
