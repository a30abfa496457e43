//! Gradient-orientation patch descriptors and the per-cell similarity.
//!
//! A patch is resampled to a fixed lattice, so descriptors of boxes with
//! different sizes are always comparable cell-for-cell.

use image::RgbImage;

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

/// Grayscale raster with f32 samples and clamped bilinear access.
#[derive(Debug, Clone)]
pub struct GrayF32 {
    pub width: usize,
    pub height: usize,
    data: Vec<f32>,
}

impl GrayF32 {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), width * height);
        Self {
            width,
            height,
            data,
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    /// Rec. 601 luma from an RGB image.
    pub fn from_rgb(img: &RgbImage) -> Self {
        let (w, h) = (img.width() as usize, img.height() as usize);
        let mut data = Vec::with_capacity(w * h);
        for p in img.pixels() {
            let [r, g, b] = p.0;
            data.push(0.299 * r as f32 + 0.587 * g as f32 + 0.114 * b as f32);
        }
        Self::new(w, h, data)
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    /// Bilinear sample at continuous coordinates, clamped at the borders.
    pub fn bilinear(&self, x: f64, y: f64) -> f64 {
        let max_x = (self.width - 1) as f64;
        let max_y = (self.height - 1) as f64;
        let x = x.clamp(0.0, max_x);
        let y = y.clamp(0.0, max_y);
        let x0 = x.floor();
        let y0 = y.floor();
        let x1 = (x0 + 1.0).min(max_x);
        let y1 = (y0 + 1.0).min(max_y);
        let fx = x - x0;
        let fy = y - y0;
        let v00 = self.get(x0 as usize, y0 as usize) as f64;
        let v10 = self.get(x1 as usize, y0 as usize) as f64;
        let v01 = self.get(x0 as usize, y1 as usize) as f64;
        let v11 = self.get(x1 as usize, y1 as usize) as f64;
        v00 * (1.0 - fx) * (1.0 - fy)
            + v10 * fx * (1.0 - fy)
            + v01 * (1.0 - fx) * fy
            + v11 * fx * fy
    }
}

/// Descriptor layout: a `grid` x `grid` arrangement of orientation
/// histograms, each with `bins` entries, sampled at
/// `samples_per_cell` x `samples_per_cell` points per cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescriptorParams {
    pub grid: usize,
    pub bins: usize,
    pub samples_per_cell: usize,
}

impl Default for DescriptorParams {
    fn default() -> Self {
        Self {
            grid: 4,
            bins: 8,
            samples_per_cell: 4,
        }
    }
}

impl DescriptorParams {
    pub fn validate(&self) -> Result<()> {
        if self.grid == 0 || !self.grid.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "descriptor grid must be even and positive, got {}",
                self.grid
            )));
        }
        if self.bins == 0 || self.samples_per_cell == 0 {
            return Err(Error::InvalidConfig(
                "descriptor bins and samples_per_cell must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Grid of gradient-orientation histograms describing one patch.
#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor {
    pub params: DescriptorParams,
    /// Row-major cells, `grid * grid` entries of `bins` values each.
    pub cells: Vec<Vec<f64>>,
    pub patch_origin: (f64, f64),
    pub patch_size: (f64, f64),
}

impl Descriptor {
    /// Cell indices of quadrant `q` (0 top-left, 1 top-right, 2 bottom-left,
    /// 3 bottom-right), row-major within the quadrant.
    pub fn quadrant_cells(&self, q: usize) -> Vec<usize> {
        let g = self.params.grid;
        let half = g / 2;
        let (r0, c0) = match q {
            0 => (0, 0),
            1 => (0, half),
            2 => (half, 0),
            3 => (half, half),
            _ => panic!("quadrant index out of range"),
        };
        let mut cells = Vec::with_capacity(half * half);
        for r in r0..r0 + half {
            for c in c0..c0 + half {
                cells.push(r * g + c);
            }
        }
        cells
    }
}

/// Computes the descriptor of `bbox` on `img`.
///
/// The box is clamped to the image; a clamp that leaves no area is an error.
/// The patch is bilinearly resampled to a fixed lattice, gradients come from
/// central differences on that lattice, and each cell histogram is
/// L2-normalized unless it is all-zero.
pub fn compute_descriptor(
    img: &GrayF32,
    bbox: &BoundingBox,
    params: &DescriptorParams,
) -> Result<Descriptor> {
    params.validate()?;
    let x0 = bbox.x.max(0.0);
    let y0 = bbox.y.max(0.0);
    let x1 = bbox.right().min(img.width as f64);
    let y1 = bbox.bottom().min(img.height as f64);
    let (pw, ph) = (x1 - x0, y1 - y0);
    if pw <= 0.0 || ph <= 0.0 {
        return Err(Error::EmptyPatch);
    }

    let side = params.grid * params.samples_per_cell;
    let mut patch = vec![0.0f64; side * side];
    for r in 0..side {
        let sy = y0 + (r as f64 + 0.5) * ph / side as f64 - 0.5;
        for c in 0..side {
            let sx = x0 + (c as f64 + 0.5) * pw / side as f64 - 0.5;
            patch[r * side + c] = img.bilinear(sx, sy);
        }
    }

    let at = |r: usize, c: usize| patch[r * side + c];
    let mut cells = vec![vec![0.0f64; params.bins]; params.grid * params.grid];
    let two_pi = std::f64::consts::TAU;
    for r in 0..side {
        for c in 0..side {
            let gx = at(r, (c + 1).min(side - 1)) - at(r, c.saturating_sub(1));
            let gy = at((r + 1).min(side - 1), c) - at(r.saturating_sub(1), c);
            let magnitude = (gx * gx + gy * gy).sqrt();
            if magnitude == 0.0 {
                continue;
            }
            let mut angle = gy.atan2(gx);
            if angle < 0.0 {
                angle += two_pi;
            }
            // linear interpolation between the two nearest orientation bins
            let pos = angle / two_pi * params.bins as f64 - 0.5;
            let low = pos.floor();
            let frac = pos - low;
            let b0 = (low.rem_euclid(params.bins as f64)) as usize % params.bins;
            let b1 = (b0 + 1) % params.bins;
            let cell =
                (r / params.samples_per_cell) * params.grid + (c / params.samples_per_cell);
            cells[cell][b0] += magnitude * (1.0 - frac);
            cells[cell][b1] += magnitude * frac;
        }
    }

    for hist in &mut cells {
        let norm = hist.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in hist.iter_mut() {
                *v /= norm;
            }
        }
    }

    Ok(Descriptor {
        params: *params,
        cells,
        patch_origin: (x0, y0),
        patch_size: (pw, ph),
    })
}

/// Non-negative cosine similarity between two histograms, clamped to [0, 1].
///
/// Two all-zero histograms count as a perfect match (identical featureless
/// regions); exactly one all-zero histogram scores 0.
pub fn cell_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::BinMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    match (na == 0.0, nb == 0.0) {
        (true, true) => Ok(1.0),
        (true, false) | (false, true) => Ok(0.0),
        (false, false) if a == b => Ok(1.0),
        (false, false) => {
            let dot = a.iter().zip(b.iter()).map(|(x, y)| x * y).sum::<f64>();
            Ok((dot / (na * nb)).clamp(0.0, 1.0))
        }
    }
}
