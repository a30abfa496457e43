//! Overlay rendering: per-prototype colored boxes on the sequence frames.

use std::path::{Path, PathBuf};

use image::RgbImage;

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::io::{load_image, save_ppm};
use crate::model::Sequence;
use crate::prototype::Prototype;

/// Fixed palette so prototype colors are stable across runs.
pub const PALETTE: [[u8; 3]; 8] = [
    [255, 0, 0],
    [0, 200, 0],
    [0, 80, 255],
    [255, 220, 0],
    [255, 0, 255],
    [0, 220, 220],
    [255, 128, 0],
    [255, 255, 255],
];

const STROKE: i64 = 2;

/// Draws a 2-pixel rectangle outline, clipped to the image.
pub fn draw_box_outline(img: &mut RgbImage, bbox: &BoundingBox, color: [u8; 3]) {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let x0 = bbox.x.round() as i64;
    let y0 = bbox.y.round() as i64;
    let x1 = bbox.right().round() as i64 - 1;
    let y1 = bbox.bottom().round() as i64 - 1;
    let mut put = |x: i64, y: i64| {
        if (0..w).contains(&x) && (0..h).contains(&y) {
            img.get_pixel_mut(x as u32, y as u32).0 = color;
        }
    };
    for ring in 0..STROKE {
        let (rx0, ry0, rx1, ry1) = (x0 + ring, y0 + ring, x1 - ring, y1 - ring);
        if rx1 < rx0 || ry1 < ry0 {
            break;
        }
        for x in rx0..=rx1 {
            put(x, ry0);
            put(x, ry1);
        }
        for y in ry0..=ry1 {
            put(rx0, y);
            put(rx1, y);
        }
    }
}

fn overlay_frame(base: &RgbImage, prototypes: &[Prototype], k: usize) -> RgbImage {
    let mut img = base.clone();
    for (idx, proto) in prototypes.iter().enumerate() {
        if k >= proto.span() {
            continue;
        }
        if let Some(bbox) = proto.emitted_box(k) {
            draw_box_outline(&mut img, bbox, PALETTE[idx % PALETTE.len()]);
        }
    }
    img
}

/// Renders one PPM per frame into `out_dir`. Occluded frames draw no box
/// for that prototype. Fails up front if any frame image is missing,
/// listing every absent path.
pub fn render_overlays(
    seq: &Sequence,
    prototypes: &[Prototype],
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    let image_paths = seq
        .image_paths
        .as_ref()
        .ok_or(Error::EngineRequiresImages)?;
    let missing: Vec<PathBuf> = image_paths
        .iter()
        .filter(|p| !p.exists())
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingFrames(missing));
    }

    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut outputs = Vec::with_capacity(seq.length);
    for (k, path) in image_paths.iter().enumerate() {
        let base = load_image(path)?;
        let rendered = overlay_frame(&base, prototypes, k);
        let out_path = out_dir.join(format!("frame_{k:05}.ppm"));
        save_ppm(&out_path, &rendered)?;
        outputs.push(out_path);
    }
    Ok(outputs)
}
