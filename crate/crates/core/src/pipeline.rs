//! End-to-end driver: gate, track, group, extract, evaluate, render.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ebot::{assess_reliability, group_tracklets, EBoT};
use crate::error::{Error, Result};
use crate::evaluation::{format_table, match_tracks_to_gt, mota, GroundTruth, MotReport};
use crate::io::{
    self, load_ground_truth, load_image, load_manifests, load_score_matrix, load_sequence,
    Manifest,
};
use crate::matching::{
    DescriptorParams, EngineKind, MatrixRecord, OracleEngine, ScoreMatrixEngine,
    SimilarityEngine, WarpEngine, WarpParams, DEFAULT_HSV_THRESHOLD,
};
use crate::model::{is_trackable_segment, Sequence, DEFAULT_TRACKABLE_RATIO};
use crate::prototype::{
    build_prototype, BagConfidenceReport, ConfidenceConfig, Normalization, Prototype,
    DEFAULT_BETA, DEFAULT_OCCLUSION_THRESHOLD,
};
use crate::render::render_overlays;
use crate::tracklet::{collect_seeds, generate_candidates, propagate_all, CandidateParams};

/// All pipeline knobs. Defaults reproduce the method's published constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub trackable_ratio: f64,
    pub grouping_threshold: f64,
    pub density_threshold: f64,
    /// Occlusion threshold L; 0 disables occlusion estimation.
    pub occlusion_threshold: f64,
    pub beta: f64,
    pub hsv_threshold: f64,
    pub iou_match_threshold: f64,
    pub engine: EngineKind,
    pub stride_frac: f64,
    pub scales: Vec<f64>,
    /// Quadrant search radius; none derives it from the seed size.
    pub radius: Option<f64>,
    pub normalization: Normalization,
    /// Worker threads for multi-sequence runs; 0 uses all cores.
    pub workers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            trackable_ratio: DEFAULT_TRACKABLE_RATIO,
            grouping_threshold: crate::ebot::DEFAULT_GROUPING_THRESHOLD,
            density_threshold: crate::ebot::DEFAULT_DENSITY_THRESHOLD,
            occlusion_threshold: DEFAULT_OCCLUSION_THRESHOLD,
            beta: DEFAULT_BETA,
            hsv_threshold: DEFAULT_HSV_THRESHOLD,
            iou_match_threshold: crate::evaluation::DEFAULT_IOU_MATCH_THRESHOLD,
            engine: EngineKind::Warp,
            stride_frac: 0.25,
            scales: vec![0.8, 1.0, 1.25],
            radius: None,
            normalization: Normalization::MaxScale,
            workers: 0,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("config serializes");
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn candidate_params(&self) -> CandidateParams {
        CandidateParams {
            stride_frac: self.stride_frac,
            scales: self.scales.clone(),
        }
    }

    pub fn confidence_config(&self) -> ConfidenceConfig {
        ConfidenceConfig {
            occlusion_threshold: self.occlusion_threshold,
            beta: self.beta,
            normalization: self.normalization,
        }
    }

    pub fn warp_params(&self) -> WarpParams {
        WarpParams {
            descriptor: DescriptorParams::default(),
            radius: self.radius,
            hsv_threshold: self.hsv_threshold,
        }
    }
}

/// Builds the configured engine from a manifest's resources.
pub fn build_engine(manifest: &Manifest, config: &PipelineConfig) -> Result<SimilarityEngine> {
    match config.engine {
        EngineKind::Warp => {
            let paths = manifest
                .images
                .as_ref()
                .filter(|p| !p.is_empty())
                .ok_or(Error::EngineRequiresImages)?;
            let frames = paths
                .iter()
                .map(|p| load_image(p))
                .collect::<Result<Vec<_>>>()?;
            Ok(SimilarityEngine::Warp(WarpEngine::new(
                frames,
                config.warp_params(),
            )?))
        }
        EngineKind::Matrix => {
            let path = manifest
                .score_matrix
                .as_ref()
                .ok_or(Error::EngineRequiresMatrix)?;
            let records = load_score_matrix(path)?;
            Ok(SimilarityEngine::Matrix(ScoreMatrixEngine::from_records(
                records,
            )))
        }
        EngineKind::Oracle => {
            let path = manifest
                .ground_truth
                .as_ref()
                .ok_or(Error::EngineRequiresGroundTruth)?;
            let gt = load_ground_truth(path, manifest.length)?;
            let params = manifest.oracle.unwrap_or(io::OracleParams {
                score_noise: 0.0,
                rng_seed: 0,
            });
            Ok(SimilarityEngine::Oracle(OracleEngine::from_ground_truth(
                &gt,
                params.score_noise,
                params.rng_seed,
            )))
        }
    }
}

/// What one sequence produced.
#[derive(Debug, Clone)]
pub struct SequenceOutcome {
    pub id: String,
    /// True when the trackable gate rejected the sequence.
    pub skipped: bool,
    pub detection_ratio: f64,
    pub out_dir: PathBuf,
    pub reliable_bags: usize,
    pub report: Option<MotReport>,
}

/// In-memory result of the tracking stages, before evaluation.
#[derive(Debug, Clone)]
pub struct TrackingResult {
    pub bags: Vec<EBoT>,
    pub reliable: Vec<EBoT>,
    pub prototypes: Vec<Prototype>,
    pub confidence_reports: Vec<BagConfidenceReport>,
}

/// Seeds, propagation, grouping, and prototype extraction for one sequence.
pub fn track_sequence(
    seq: &Sequence,
    engine: &SimilarityEngine,
    config: &PipelineConfig,
) -> Result<TrackingResult> {
    let seeds = collect_seeds(seq);
    let tracklets = propagate_all(engine, seq, &seeds, &config.candidate_params())?;
    let mut bags = group_tracklets(tracklets, config.grouping_threshold)?;
    assess_reliability(&mut bags, seq.length, config.density_threshold)?;
    let reliable: Vec<EBoT> = bags.iter().filter(|b| b.reliable).cloned().collect();

    let cfg = config.confidence_config();
    let mut prototypes = Vec::with_capacity(reliable.len());
    let mut confidence_reports = Vec::with_capacity(reliable.len());
    for bag in &reliable {
        let (proto, report) = build_prototype(bag, &cfg)?;
        prototypes.push(proto);
        confidence_reports.push(report);
    }
    Ok(TrackingResult {
        bags,
        reliable,
        prototypes,
        confidence_reports,
    })
}

/// Evaluates prototypes against ground truth with the configured threshold.
pub fn evaluate(
    prototypes: &[Prototype],
    gt: &GroundTruth,
    config: &PipelineConfig,
) -> Result<MotReport> {
    let assignment = match_tracks_to_gt(prototypes, gt);
    mota(prototypes, gt, &assignment, config.iou_match_threshold)
}

fn table_label(config: &PipelineConfig) -> &'static str {
    if config.occlusion_threshold > 0.0 {
        "eBoT (prototype, occlusions excluded)"
    } else {
        "eBoT (prototype, occlusions not excluded)"
    }
}

/// Runs the full pipeline for one manifest, writing all artifacts under
/// `out_root/<sequence id>/`. A sequence failing the trackable gate is
/// skipped with a logged reason and produces no artifacts.
pub fn run_sequence(
    manifest: &Manifest,
    config: &PipelineConfig,
    out_root: &Path,
) -> Result<SequenceOutcome> {
    let seq = load_sequence(manifest)?;
    let ratio = seq.detection_ratio();
    let out_dir = out_root.join(&seq.id);

    if !is_trackable_segment(&seq, config.trackable_ratio) {
        log::info!(
            "[gate] {}: untrackable (ratio {:.2} < {:.2})",
            seq.id,
            ratio,
            config.trackable_ratio
        );
        return Ok(SequenceOutcome {
            id: seq.id.clone(),
            skipped: true,
            detection_ratio: ratio,
            out_dir,
            reliable_bags: 0,
            report: None,
        });
    }
    log::info!(
        "[gate] {}: trackable (ratio {:.2} >= {:.2})",
        seq.id,
        ratio,
        config.trackable_ratio
    );

    std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    let engine = build_engine(manifest, config)?;
    let result = track_sequence(&seq, &engine, config)?;
    log::info!(
        "[track] {}: {} tracklets propagated",
        seq.id,
        result.bags.iter().map(|b| b.tracklets.len()).sum::<usize>(),
    );
    log::info!(
        "[group] {}: {} bags, {} reliable",
        seq.id,
        result.bags.len(),
        result.reliable.len()
    );

    let all_tracklets: Vec<_> = result
        .bags
        .iter()
        .flat_map(|b| b.tracklets.iter().cloned())
        .collect();
    let mut sorted_tracklets = all_tracklets;
    sorted_tracklets.sort_by_key(|t| t.id);
    io::save_tracklets(&out_dir.join("tracklets.jsonl"), &sorted_tracklets)?;
    io::save_ebots(&out_dir.join("ebots.json"), &result.bags)?;
    io::save_prototypes(&out_dir.join("prototypes.jsonl"), &result.prototypes)?;
    let confidence_text = serde_json::to_string_pretty(&result.confidence_reports)
        .expect("reports serialize");
    let confidence_path = out_dir.join("confidence.json");
    std::fs::write(&confidence_path, confidence_text)
        .map_err(|e| Error::io(&confidence_path, e))?;
    for report in &result.confidence_reports {
        log::info!(
            "[prototype] {}: ebot {} confidence {:.4} dominates_members={}",
            seq.id,
            report.ebot_id,
            report.prototype_confidence,
            report.prototype_dominates
        );
    }

    let report = match &manifest.ground_truth {
        Some(path) => {
            let gt = load_ground_truth(path, manifest.length)?;
            let report = evaluate(&result.prototypes, &gt, config)?;
            io::save_report(&out_dir.join("report.json"), &report)?;
            let table = format_table(&[(table_label(config), &report)]);
            let table_path = out_dir.join("table.txt");
            std::fs::write(&table_path, &table).map_err(|e| Error::io(&table_path, e))?;
            log::info!(
                "[eval] {}: MOTP {:.4} MOTA {:.4} FP {} FN {} IDS {}",
                seq.id,
                report.motp,
                report.mota,
                report.fp,
                report.false_negatives,
                report.ids
            );
            Some(report)
        }
        None => None,
    };

    if seq.image_paths.is_some() {
        let overlay_dir = out_dir.join("overlays");
        let frames = render_overlays(&seq, &result.prototypes, &overlay_dir)?;
        log::info!("[render] {}: {} overlay frames", seq.id, frames.len());
    }

    Ok(SequenceOutcome {
        id: seq.id.clone(),
        skipped: false,
        detection_ratio: ratio,
        out_dir,
        reliable_bags: result.reliable.len(),
        report,
    })
}

/// Runs every sequence in the manifest file, in parallel up to the
/// configured worker count, writing artifacts under `out_root`.
pub fn run_pipeline(
    manifest_path: &Path,
    config: &PipelineConfig,
    out_root: &Path,
) -> Result<Vec<SequenceOutcome>> {
    let manifests = load_manifests(manifest_path)?;
    std::fs::create_dir_all(out_root).map_err(|e| Error::io(out_root, e))?;
    let run = || {
        manifests
            .par_iter()
            .map(|m| run_sequence(m, config, out_root))
            .collect::<Result<Vec<_>>>()
    };
    if config.workers > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("cannot build thread pool: {e}")))?;
        pool.install(run)
    } else {
        run()
    }
}

/// Scores every candidate window of every seed with the oracle and returns
/// the records the score-matrix engine replays. Seed frames are skipped;
/// propagation never queries them.
pub fn export_score_matrix(
    seq: &Sequence,
    oracle: &OracleEngine,
    params: &CandidateParams,
) -> Vec<MatrixRecord> {
    let seeds = collect_seeds(seq);
    let mut records = Vec::new();
    for seed in &seeds {
        for frame_index in 0..seq.length {
            if frame_index == seed.seed_frame {
                continue;
            }
            let candidates = generate_candidates(seq, seed, frame_index, params);
            let scored = oracle.score_candidates(seed, frame_index, &candidates.windows);
            records.push(MatrixRecord {
                tracklet_id: seed.tracklet_id,
                frame: frame_index,
                scores: scored
                    .iter()
                    .map(|(b, s)| [b.x, b.y, b.w, b.h, *s])
                    .collect(),
            });
        }
    }
    records
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{generate_sequence, GenConfig, OcclusionInterval};
    use tempfile::TempDir;

    fn oracle_config() -> PipelineConfig {
        PipelineConfig {
            engine: EngineKind::Oracle,
            ..PipelineConfig::default()
        }
    }

    fn write_synthetic(dir: &Path, cfg: &GenConfig) -> Manifest {
        let out = generate_sequence(cfg).unwrap();
        let det = dir.join("detections.jsonl");
        let gt = dir.join("gt.jsonl");
        io::save_detections(&det, &out.sequence.frames).unwrap();
        io::save_ground_truth(&gt, &out.ground_truth).unwrap();
        Manifest {
            id: out.sequence.id.clone(),
            length: out.sequence.length,
            detections: det,
            images: None,
            ground_truth: Some(gt),
            frame_size: Some(out.sequence.frame_size),
            score_matrix: None,
            oracle: Some(io::OracleParams {
                score_noise: cfg.score_noise,
                rng_seed: cfg.rng_seed,
            }),
        }
    }

    #[test]
    fn config_round_trips_through_json() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("config.json");
        let config = PipelineConfig {
            engine: EngineKind::Matrix,
            radius: Some(3.0),
            scales: vec![1.0],
            workers: 2,
            ..PipelineConfig::default()
        };
        config.save(&path).unwrap();
        assert_eq!(PipelineConfig::load(&path).unwrap(), config);
    }

    #[test]
    fn defaults_carry_the_published_constants() {
        let c = PipelineConfig::default();
        assert_eq!(c.trackable_ratio, 0.5);
        assert_eq!(c.grouping_threshold, 0.2);
        assert_eq!(c.density_threshold, 0.2);
        assert_eq!(c.occlusion_threshold, 0.12);
        assert_eq!(c.beta, 1.0);
        assert_eq!(c.hsv_threshold, 0.5);
        assert_eq!(c.iou_match_threshold, 0.2);
    }

    #[test]
    fn full_oracle_run_writes_all_artifacts() {
        let dir = TempDir::new().unwrap();
        let gen = GenConfig {
            num_persons: 2,
            detector_miss_rate: 0.2,
            false_positive_rate: 0.05,
            score_noise: 0.05,
            occlusion_intervals: vec![OcclusionInterval {
                person: 0,
                start: 10,
                end: 13,
            }],
            rng_seed: 31,
            ..GenConfig::default()
        };
        let manifest = write_synthetic(dir.path(), &gen);
        let out_root = dir.path().join("out");
        let outcome = run_sequence(&manifest, &oracle_config(), &out_root).unwrap();
        assert!(!outcome.skipped);
        assert!(outcome.report.is_some());
        for artifact in [
            "tracklets.jsonl",
            "ebots.json",
            "prototypes.jsonl",
            "confidence.json",
            "report.json",
            "table.txt",
        ] {
            let path = outcome.out_dir.join(artifact);
            assert!(path.exists(), "missing {artifact}");
        }
        // artifacts parse back
        let tracklets = io::load_tracklets(&outcome.out_dir.join("tracklets.jsonl")).unwrap();
        assert!(!tracklets.is_empty());
        let ebots = io::load_ebots(&outcome.out_dir.join("ebots.json")).unwrap();
        assert!(!ebots.is_empty());
        let prototypes =
            io::load_prototypes(&outcome.out_dir.join("prototypes.jsonl")).unwrap();
        assert_eq!(prototypes.len(), outcome.reliable_bags);
        assert_eq!(outcome.reliable_bags, 2);
    }

    #[test]
    fn untrackable_sequence_is_skipped() {
        let dir = TempDir::new().unwrap();
        // 2 of 10 frames with detections: ratio 0.2 below the 0.5 gate
        let gen = GenConfig {
            num_persons: 1,
            num_frames: 10,
            detector_miss_rate: 0.0,
            occlusion_intervals: vec![OcclusionInterval {
                person: 0,
                start: 0,
                end: 8,
            }],
            rng_seed: 8,
            ..GenConfig::default()
        };
        let manifest = write_synthetic(dir.path(), &gen);
        let out_root = dir.path().join("out");
        let outcome = run_sequence(&manifest, &oracle_config(), &out_root).unwrap();
        assert!(outcome.skipped);
        assert!((outcome.detection_ratio - 0.2).abs() < 1e-12);
        assert!(!outcome.out_dir.exists());
    }

    #[test]
    fn matrix_engine_reproduces_oracle_tracklets() {
        let dir = TempDir::new().unwrap();
        let gen = GenConfig {
            num_frames: 12,
            num_persons: 2,
            detector_miss_rate: 0.1,
            score_noise: 0.05,
            rng_seed: 77,
            ..GenConfig::default()
        };
        let out = generate_sequence(&gen).unwrap();
        let config = PipelineConfig {
            stride_frac: 0.5,
            scales: vec![0.9, 1.0],
            ..oracle_config()
        };
        let records =
            export_score_matrix(&out.sequence, &out.oracle, &config.candidate_params());
        let matrix_path = dir.path().join("scores.jsonl");
        io::save_score_matrix(&matrix_path, &records).unwrap();

        let oracle_engine = SimilarityEngine::Oracle(out.oracle.clone());
        let matrix_engine = SimilarityEngine::Matrix(ScoreMatrixEngine::from_records(
            io::load_score_matrix(&matrix_path).unwrap(),
        ));
        let by_oracle = track_sequence(&out.sequence, &oracle_engine, &config).unwrap();
        let by_matrix = track_sequence(&out.sequence, &matrix_engine, &config).unwrap();
        assert_eq!(by_oracle.prototypes, by_matrix.prototypes);
    }

    #[test]
    fn engine_requirements_produce_distinct_errors() {
        let manifest = Manifest {
            id: "s".into(),
            length: 2,
            detections: "unused.jsonl".into(),
            images: None,
            ground_truth: None,
            frame_size: Some((32.0, 32.0)),
            score_matrix: None,
            oracle: None,
        };
        let with_engine = |engine| PipelineConfig {
            engine,
            ..PipelineConfig::default()
        };
        assert!(matches!(
            build_engine(&manifest, &with_engine(EngineKind::Warp)),
            Err(Error::EngineRequiresImages)
        ));
        assert!(matches!(
            build_engine(&manifest, &with_engine(EngineKind::Matrix)),
            Err(Error::EngineRequiresMatrix)
        ));
        assert!(matches!(
            build_engine(&manifest, &with_engine(EngineKind::Oracle)),
            Err(Error::EngineRequiresGroundTruth)
        ));
    }
}
