//! File formats: manifests, detection and ground-truth JSONL, stage dumps,
//! and PNM image helpers.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use image::RgbImage;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::ebot::EBoT;
use crate::error::{Error, Result};
use crate::evaluation::{GroundTruth, GtFace, MotReport};
use crate::geometry::BoundingBox;
use crate::matching::MatrixRecord;
use crate::model::{FrameDetections, Seed, Sequence};
use crate::prototype::Prototype;
use crate::tracklet::Tracklet;

/// Oracle-engine parameters carried by a manifest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleParams {
    pub score_noise: f64,
    pub rng_seed: u64,
}

/// Sequence manifest. Paths are interpreted relative to the manifest file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub id: String,
    pub length: usize,
    pub detections: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub images: Option<Vec<PathBuf>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ground_truth: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub frame_size: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub score_matrix: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub oracle: Option<OracleParams>,
}

impl Manifest {
    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&p);
            }
        };
        fix(&mut self.detections);
        if let Some(images) = &mut self.images {
            images.iter_mut().for_each(fix);
        }
        if let Some(gt) = &mut self.ground_truth {
            fix(gt);
        }
        if let Some(m) = &mut self.score_matrix {
            fix(m);
        }
    }
}

/// Loads one manifest or a JSON array of them; relative paths are resolved
/// against the manifest's directory.
pub fn load_manifests(path: &Path) -> Result<Vec<Manifest>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let mut manifests: Vec<Manifest> = if text.trim_start().starts_with('[') {
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))?
    } else {
        vec![serde_json::from_str(&text)
            .map_err(|e| Error::parse(path, e.line(), e.to_string()))?]
    };
    for m in &mut manifests {
        m.resolve(&base);
    }
    Ok(manifests)
}

pub fn save_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut items = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let item =
            serde_json::from_str(&line).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        items.push(item);
    }
    Ok(items)
}

fn write_jsonl<'a, T: Serialize + 'a>(
    path: &Path,
    items: impl IntoIterator<Item = &'a T>,
) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    for item in items {
        let line = serde_json::to_string(item).expect("record serializes");
        writeln!(writer, "{line}").map_err(|e| Error::io(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

// --- detections -----------------------------------------------------------

pub fn load_detections(path: &Path) -> Result<Vec<FrameDetections>> {
    read_jsonl(path)
}

pub fn save_detections(path: &Path, frames: &[FrameDetections]) -> Result<()> {
    write_jsonl(path, frames)
}

/// Loads the full sequence a manifest describes. The frame size comes from
/// the manifest, else from the first image, else from the detection
/// envelope.
pub fn load_sequence(manifest: &Manifest) -> Result<Sequence> {
    let records = load_detections(&manifest.detections)?;
    let frame_size = match manifest.frame_size {
        Some(size) => size,
        None => match &manifest.images {
            Some(paths) if !paths.is_empty() => {
                let img = load_image(&paths[0])?;
                (img.width() as f64, img.height() as f64)
            }
            _ => {
                let mut w: f64 = 0.0;
                let mut h: f64 = 0.0;
                for record in &records {
                    for b in &record.boxes {
                        w = w.max(b.right());
                        h = h.max(b.bottom());
                    }
                }
                if w <= 0.0 || h <= 0.0 {
                    return Err(Error::InvalidSequence {
                        id: manifest.id.clone(),
                        message: "cannot infer frame size: no frame_size, images, or detections"
                            .into(),
                    });
                }
                (w, h)
            }
        },
    };
    Sequence::new(
        manifest.id.clone(),
        manifest.length,
        records,
        manifest.images.clone(),
        frame_size,
    )
}

// --- ground truth ----------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct GtFrameRecord {
    frame: usize,
    faces: Vec<GtFace>,
}

pub fn load_ground_truth(path: &Path, length: usize) -> Result<GroundTruth> {
    let records: Vec<GtFrameRecord> = read_jsonl(path)?;
    let mut frames = vec![Vec::new(); length];
    for record in records {
        if record.frame >= length {
            return Err(Error::parse(
                path,
                0,
                format!("ground-truth frame {} outside 0..{length}", record.frame),
            ));
        }
        frames[record.frame] = record.faces;
    }
    let gt = GroundTruth { frames };
    gt.validate()?;
    Ok(gt)
}

pub fn save_ground_truth(path: &Path, gt: &GroundTruth) -> Result<()> {
    let records: Vec<GtFrameRecord> = gt
        .frames
        .iter()
        .enumerate()
        .map(|(frame, faces)| GtFrameRecord {
            frame,
            faces: faces.clone(),
        })
        .collect();
    write_jsonl(path, &records)
}

// --- score matrix ----------------------------------------------------------

pub fn load_score_matrix(path: &Path) -> Result<Vec<MatrixRecord>> {
    read_jsonl(path)
}

pub fn save_score_matrix(path: &Path, records: &[MatrixRecord]) -> Result<()> {
    write_jsonl(path, records)
}

// --- tracklet dump ----------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum TrackletRecord {
    Frame {
        tracklet: usize,
        frame: usize,
        #[serde(rename = "box")]
        bbox: BoundingBox,
        score: f64,
    },
    Header {
        tracklet: usize,
        seed_frame: usize,
        #[serde(rename = "seed_box")]
        seed_box: BoundingBox,
    },
}

pub fn save_tracklets(path: &Path, tracklets: &[Tracklet]) -> Result<()> {
    let mut records = Vec::new();
    for t in tracklets {
        records.push(TrackletRecord::Header {
            tracklet: t.id,
            seed_frame: t.seed.seed_frame,
            seed_box: t.seed.bbox,
        });
        for (k, (bbox, score)) in t.boxes.iter().zip(t.scores.iter()).enumerate() {
            records.push(TrackletRecord::Frame {
                tracklet: t.id,
                frame: k,
                bbox: *bbox,
                score: *score,
            });
        }
    }
    write_jsonl(path, &records)
}

pub fn load_tracklets(path: &Path) -> Result<Vec<Tracklet>> {
    let records: Vec<TrackletRecord> = read_jsonl(path)?;
    let mut ids: Vec<usize> = Vec::new();
    for r in &records {
        let id = match r {
            TrackletRecord::Frame { tracklet, .. } => *tracklet,
            TrackletRecord::Header { tracklet, .. } => *tracklet,
        };
        if !ids.contains(&id) {
            ids.push(id);
        }
    }
    ids.sort_unstable();

    let mut tracklets = Vec::with_capacity(ids.len());
    for id in ids {
        let mut seed: Option<Seed> = None;
        let mut rows: Vec<(usize, BoundingBox, f64)> = Vec::new();
        for r in &records {
            match r {
                TrackletRecord::Header {
                    tracklet,
                    seed_frame,
                    seed_box,
                } if *tracklet == id => {
                    seed = Some(Seed {
                        tracklet_id: id,
                        seed_frame: *seed_frame,
                        bbox: *seed_box,
                    });
                }
                TrackletRecord::Frame {
                    tracklet,
                    frame,
                    bbox,
                    score,
                } if *tracklet == id => rows.push((*frame, *bbox, *score)),
                _ => {}
            }
        }
        rows.sort_by_key(|(frame, _, _)| *frame);
        let contiguous = rows.iter().enumerate().all(|(i, (frame, _, _))| i == *frame);
        if rows.is_empty() || !contiguous {
            return Err(Error::parse(
                path,
                0,
                format!("tracklet {id} has missing or duplicated frames"),
            ));
        }
        let seed = seed.ok_or_else(|| {
            Error::parse(path, 0, format!("tracklet {id} is missing its seed record"))
        })?;
        tracklets.push(Tracklet {
            id,
            seed,
            boxes: rows.iter().map(|(_, b, _)| *b).collect(),
            scores: rows.iter().map(|(_, _, s)| *s).collect(),
        });
    }
    Ok(tracklets)
}

// --- eBoT dump ---------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EbotRecord {
    pub ebot: usize,
    pub density: f64,
    pub reliable: bool,
    pub tracklets: Vec<usize>,
}

pub fn save_ebots(path: &Path, bags: &[EBoT]) -> Result<()> {
    let records: Vec<EbotRecord> = bags
        .iter()
        .map(|b| EbotRecord {
            ebot: b.id,
            density: b.density,
            reliable: b.reliable,
            tracklets: b.tracklets.iter().map(|t| t.id).collect(),
        })
        .collect();
    let text = serde_json::to_string_pretty(&records).expect("records serialize");
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_ebots(path: &Path) -> Result<Vec<EbotRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))
}

/// Rebuilds bags from an eBoT dump plus the tracklets it refers to.
pub fn assemble_ebots(records: &[EbotRecord], tracklets: &[Tracklet]) -> Result<Vec<EBoT>> {
    records
        .iter()
        .map(|record| {
            let members = record
                .tracklets
                .iter()
                .map(|id| {
                    tracklets
                        .iter()
                        .find(|t| t.id == *id)
                        .cloned()
                        .ok_or_else(|| {
                            Error::InvalidConfig(format!(
                                "ebot {} references unknown tracklet {id}",
                                record.ebot
                            ))
                        })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(EBoT {
                id: record.ebot,
                tracklets: members,
                density: record.density,
                reliable: record.reliable,
            })
        })
        .collect()
}

// --- prototypes ---------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum ProtoRecord {
    Frame {
        ebot: usize,
        frame: usize,
        #[serde(rename = "box")]
        bbox: Option<BoundingBox>,
        confidence: f64,
    },
    Summary {
        ebot: usize,
        prototype_confidence: f64,
        occluded_frames: usize,
    },
}

pub fn save_prototypes(path: &Path, prototypes: &[Prototype]) -> Result<()> {
    let mut records = Vec::new();
    for p in prototypes {
        for k in 0..p.span() {
            records.push(ProtoRecord::Frame {
                ebot: p.ebot_id,
                frame: k,
                bbox: p.emitted_box(k).copied(),
                confidence: p.frame_confidence[k],
            });
        }
        records.push(ProtoRecord::Summary {
            ebot: p.ebot_id,
            prototype_confidence: p.confidence,
            occluded_frames: p.occluded_count(),
        });
    }
    write_jsonl(path, &records)
}

/// Occluded frames come back with a placeholder box; only the occlusion
/// flag and confidence are meaningful there.
pub fn load_prototypes(path: &Path) -> Result<Vec<Prototype>> {
    let records: Vec<ProtoRecord> = read_jsonl(path)?;
    let mut ids: Vec<usize> = Vec::new();
    for r in &records {
        let id = match r {
            ProtoRecord::Frame { ebot, .. } | ProtoRecord::Summary { ebot, .. } => *ebot,
        };
        if !ids.contains(&id) {
            ids.push(id);
        }
    }
    ids.sort_unstable();

    let placeholder = BoundingBox {
        x: 0.0,
        y: 0.0,
        w: 1.0,
        h: 1.0,
    };
    let mut prototypes = Vec::with_capacity(ids.len());
    for id in ids {
        let mut rows: Vec<(usize, Option<BoundingBox>, f64)> = Vec::new();
        let mut confidence = 0.0;
        for r in &records {
            match r {
                ProtoRecord::Frame {
                    ebot,
                    frame,
                    bbox,
                    confidence,
                } if *ebot == id => rows.push((*frame, *bbox, *confidence)),
                ProtoRecord::Summary {
                    ebot,
                    prototype_confidence,
                    ..
                } if *ebot == id => confidence = *prototype_confidence,
                _ => {}
            }
        }
        rows.sort_by_key(|(frame, _, _)| *frame);
        let contiguous = rows.iter().enumerate().all(|(i, (frame, _, _))| i == *frame);
        if rows.is_empty() || !contiguous {
            return Err(Error::parse(
                path,
                0,
                format!("prototype {id} has missing or duplicated frames"),
            ));
        }
        prototypes.push(Prototype {
            ebot_id: id,
            boxes: rows.iter().map(|(_, b, _)| b.unwrap_or(placeholder)).collect(),
            frame_confidence: rows.iter().map(|(_, _, c)| *c).collect(),
            occluded: rows.iter().map(|(_, b, _)| b.is_none()).collect(),
            confidence,
        });
    }
    Ok(prototypes)
}

// --- reports -------------------------------------------------------------------

pub fn save_report(path: &Path, report: &MotReport) -> Result<()> {
    let text = serde_json::to_string_pretty(report).expect("report serializes");
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

// --- images ----------------------------------------------------------------------

pub fn load_image(path: &Path) -> Result<RgbImage> {
    let img = image::open(path).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(img.to_rgb8())
}

/// Binary PPM (P6) with a fixed header layout, byte-stable across runs.
pub fn save_ppm(path: &Path, img: &RgbImage) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    write!(writer, "P6\n{} {}\n255\n", img.width(), img.height())
        .map_err(|e| Error::io(path, e))?;
    writer.write_all(img.as_raw()).map_err(|e| Error::io(path, e))?;
    writer.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::TempDir;

    fn bb(x: f64, y: f64, w: f64, h: f64) -> BoundingBox {
        BoundingBox::new(x, y, w, h).unwrap()
    }

    #[test]
    fn detections_round_trip() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("det.jsonl");
        let frames = vec![
            FrameDetections {
                frame_index: 0,
                boxes: vec![bb(1.0, 2.0, 3.0, 4.0)],
            },
            FrameDetections {
                frame_index: 1,
                boxes: vec![],
            },
        ];
        save_detections(&path, &frames).unwrap();
        assert_eq!(load_detections(&path).unwrap(), frames);
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.lines().next().unwrap().contains("\"frame\":0"));
    }

    #[test]
    fn tracklet_dump_round_trip() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("tracklets.jsonl");
        let t = Tracklet {
            id: 3,
            seed: Seed {
                tracklet_id: 3,
                seed_frame: 1,
                bbox: bb(5.0, 5.0, 4.0, 4.0),
            },
            boxes: vec![bb(4.0, 4.0, 4.0, 4.0), bb(5.0, 5.0, 4.0, 4.0)],
            scores: vec![0.5, 1.0],
        };
        save_tracklets(&path, std::slice::from_ref(&t)).unwrap();
        assert_eq!(load_tracklets(&path).unwrap(), vec![t]);
    }

    #[test]
    fn prototype_dump_round_trips_occlusions_as_null() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("prototypes.jsonl");
        let p = Prototype {
            ebot_id: 0,
            boxes: vec![bb(1.0, 1.0, 2.0, 2.0), bb(2.0, 2.0, 2.0, 2.0)],
            frame_confidence: vec![0.8, 0.0],
            occluded: vec![false, true],
            confidence: 0.4,
        };
        save_prototypes(&path, std::slice::from_ref(&p)).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"box\":null"));
        assert!(text.contains("\"prototype_confidence\":0.4"));
        let back = load_prototypes(&path).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].occluded, p.occluded);
        assert_eq!(back[0].frame_confidence, p.frame_confidence);
        assert_eq!(back[0].confidence, p.confidence);
        assert_eq!(back[0].emitted_box(0), Some(&p.boxes[0]));
        assert_eq!(back[0].emitted_box(1), None);
    }

    #[test]
    fn manifest_resolves_relative_paths() {
        let dir = TempDir::new().unwrap();
        let nested = dir.path().join("data");
        fs::create_dir(&nested).unwrap();
        let manifest = Manifest {
            id: "s".into(),
            length: 2,
            detections: "det.jsonl".into(),
            images: None,
            ground_truth: Some("gt.jsonl".into()),
            frame_size: Some((64.0, 64.0)),
            score_matrix: None,
            oracle: Some(OracleParams {
                score_noise: 0.05,
                rng_seed: 7,
            }),
        };
        let path = nested.join("manifest.json");
        save_manifest(&path, &manifest).unwrap();
        let loaded = load_manifests(&path).unwrap();
        assert_eq!(loaded.len(), 1);
        assert_eq!(loaded[0].detections, nested.join("det.jsonl"));
        assert_eq!(loaded[0].ground_truth, Some(nested.join("gt.jsonl")));
        assert_eq!(loaded[0].oracle, manifest.oracle);
    }

    #[test]
    fn manifest_array_is_accepted() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("manifests.json");
        fs::write(
            &path,
            r#"[{"id":"a","length":1,"detections":"a.jsonl"},
                {"id":"b","length":2,"detections":"b.jsonl"}]"#,
        )
        .unwrap();
        let loaded = load_manifests(&path).unwrap();
        assert_eq!(loaded.len(), 2);
        assert_eq!(loaded[1].id, "b");
    }

    #[test]
    fn missing_file_and_bad_json_have_distinct_errors() {
        let dir = TempDir::new().unwrap();
        let missing = dir.path().join("nope.jsonl");
        assert!(matches!(
            load_detections(&missing),
            Err(Error::Io { .. })
        ));
        let bad = dir.path().join("bad.jsonl");
        fs::write(&bad, "{not json}\n").unwrap();
        assert!(matches!(load_detections(&bad), Err(Error::Parse { .. })));
    }

    #[test]
    fn ppm_writer_is_byte_stable_and_readable() {
        let dir = TempDir::new().unwrap();
        let path1 = dir.path().join("a.ppm");
        let path2 = dir.path().join("b.ppm");
        let img = RgbImage::from_fn(7, 5, |x, y| image::Rgb([x as u8, y as u8, 200]));
        save_ppm(&path1, &img).unwrap();
        save_ppm(&path2, &img).unwrap();
        assert_eq!(fs::read(&path1).unwrap(), fs::read(&path2).unwrap());
        let back = load_image(&path1).unwrap();
        assert_eq!(back.as_raw(), img.as_raw());
    }

    #[test]
    fn ground_truth_round_trip() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("gt.jsonl");
        let gt = GroundTruth {
            frames: vec![
                vec![GtFace {
                    id: "p0".into(),
                    bbox: bb(1.0, 1.0, 4.0, 4.0),
                    occluded: false,
                }],
                vec![GtFace {
                    id: "p0".into(),
                    bbox: bb(2.0, 1.0, 4.0, 4.0),
                    occluded: true,
                }],
            ],
        };
        save_ground_truth(&path, &gt).unwrap();
        assert_eq!(load_ground_truth(&path, 2).unwrap(), gt);
    }
}
