//! Command-line driver for the tracking pipeline.

use std::error::Error as StdError;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ebot::ebot::{assess_reliability, group_tracklets};
use ebot::error::{Error, Result};
use ebot::evaluation::format_table;
use ebot::io::{self, Manifest, OracleParams};
use ebot::matching::EngineKind;
use ebot::model::is_trackable_segment;
use ebot::pipeline::{
    build_engine, evaluate, export_score_matrix, run_pipeline, PipelineConfig,
};
use ebot::prototype::build_prototype;
use ebot::render::render_overlays;
use ebot::synthetic::{generate_sequence, GenConfig, OcclusionInterval};
use ebot::tracklet::{collect_seeds, propagate_all};

#[derive(Parser)]
#[command(
    name = "ebot",
    version,
    about = "Offline multi-face tracking for low frame-rate photo-streams"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Pipeline configuration JSON; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Similarity engine: warp | matrix | oracle.
    #[arg(long)]
    engine: Option<String>,
    /// Worker threads for multi-sequence runs (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
}

impl ConfigArgs {
    fn load(&self) -> Result<PipelineConfig> {
        let mut config = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        if let Some(engine) = &self.engine {
            config.engine = engine.parse::<EngineKind>()?;
        }
        if let Some(workers) = self.workers {
            config.workers = workers;
        }
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Report the trackable-segment gate verdict for each sequence.
    Gate {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Propagate seeds into full-length tracklets.
    Track {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Group a tracklet dump into extended bags-of-tracklets.
    Group {
        #[arg(long)]
        tracklets: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract prototypes with occlusion estimation from an eBoT dump.
    Prototype {
        #[arg(long)]
        ebots: PathBuf,
        #[arg(long)]
        tracklets: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score prototypes against ground truth with CLEAR MOT metrics.
    Eval {
        #[arg(long)]
        prototypes: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic sequence with detections and ground truth.
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// RNG seed; fixed seeds reproduce bit-identical sequences.
        #[arg(long)]
        seed: Option<u64>,
        /// Generator configuration JSON; flags override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        frames: Option<usize>,
        #[arg(long)]
        persons: Option<usize>,
        #[arg(long)]
        miss_rate: Option<f64>,
        #[arg(long)]
        fp_rate: Option<f64>,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        jump: Option<f64>,
        #[arg(long)]
        frame_size: Option<f64>,
        /// Occlusion interval person:start:end (half-open), repeatable.
        #[arg(long = "occlude")]
        occlusions: Vec<String>,
        /// Render PPM frames so the warp engine can run on the output.
        #[arg(long)]
        render: bool,
        /// Also dump an oracle score matrix for the matrix engine.
        #[arg(long)]
        export_matrix: bool,
        /// Pipeline configuration whose window geometry the matrix export
        /// has to match; defaults are used when omitted.
        #[arg(long)]
        pipeline_config: Option<PathBuf>,
    },
    /// Draw prototype overlays on the sequence frames.
    Render {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        prototypes: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run gate, track, group, prototype, eval, and render end to end.
    All {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("EBOT_LOG", "info"))
        .format(|buf, record| {
            use std::io::Write;
            writeln!(buf, "{} {}", record.level(), record.args())
        })
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = e.source();
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gate { manifest, config } => cmd_gate(&manifest, &config.load()?),
        Command::Track {
            manifest,
            config,
            out,
        } => cmd_track(&manifest, &config.load()?, &out),
        Command::Group {
            tracklets,
            config,
            out,
        } => cmd_group(&tracklets, &config.load()?, &out),
        Command::Prototype {
            ebots,
            tracklets,
            config,
            out,
        } => cmd_prototype(&ebots, &tracklets, &config.load()?, &out),
        Command::Eval {
            prototypes,
            manifest,
            config,
            out,
        } => cmd_eval(&prototypes, &manifest, &config.load()?, &out),
        Command::Synth {
            out,
            seed,
            config,
            frames,
            persons,
            miss_rate,
            fp_rate,
            noise,
            jump,
            frame_size,
            occlusions,
            render,
            export_matrix,
            pipeline_config,
        } => {
            let mut gen = match config {
                Some(path) => {
                    let text =
                        std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                    serde_json::from_str(&text)
                        .map_err(|e| Error::parse(&path, e.line(), e.to_string()))?
                }
                None => GenConfig::default(),
            };
            if let Some(v) = seed {
                gen.rng_seed = v;
            }
            if let Some(v) = frames {
                gen.num_frames = v;
            }
            if let Some(v) = persons {
                gen.num_persons = v;
            }
            if let Some(v) = miss_rate {
                gen.detector_miss_rate = v;
            }
            if let Some(v) = fp_rate {
                gen.false_positive_rate = v;
            }
            if let Some(v) = noise {
                gen.score_noise = v;
            }
            if let Some(v) = jump {
                gen.jump_scale = v;
            }
            if let Some(v) = frame_size {
                gen.frame_size = v;
            }
            if render {
                gen.render = true;
            }
            for spec in &occlusions {
                gen.occlusion_intervals.push(parse_occlusion(spec)?);
            }
            let pipeline = match pipeline_config {
                Some(path) => PipelineConfig::load(&path)?,
                None => PipelineConfig::default(),
            };
            cmd_synth(&gen, export_matrix, &pipeline, &out)
        }
        Command::Render {
            manifest,
            prototypes,
            out,
        } => cmd_render(&manifest, &prototypes, &out),
        Command::All {
            manifest,
            config,
            out,
        } => cmd_all(&manifest, &config.load()?, &out),
    }
}

fn parse_occlusion(spec: &str) -> Result<OcclusionInterval> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || {
        Error::InvalidConfig(format!(
            "bad occlusion spec {spec:?}, expected person:start:end"
        ))
    };
    if parts.len() != 3 {
        return Err(bad());
    }
    Ok(OcclusionInterval {
        person: parts[0].parse().map_err(|_| bad())?,
        start: parts[1].parse().map_err(|_| bad())?,
        end: parts[2].parse().map_err(|_| bad())?,
    })
}

fn cmd_gate(manifest_path: &Path, config: &PipelineConfig) -> Result<()> {
    for manifest in io::load_manifests(manifest_path)? {
        let seq = io::load_sequence(&manifest)?;
        let ratio = seq.detection_ratio();
        let trackable = is_trackable_segment(&seq, config.trackable_ratio);
        if trackable {
            log::info!(
                "[gate] {}: trackable (ratio {:.2} >= {:.2})",
                seq.id,
                ratio,
                config.trackable_ratio
            );
        } else {
            log::info!(
                "[gate] {}: untrackable (ratio {:.2} < {:.2})",
                seq.id,
                ratio,
                config.trackable_ratio
            );
        }
        println!(
            "{}\tratio {:.2}\t{}",
            seq.id,
            ratio,
            if trackable { "trackable" } else { "untrackable" }
        );
    }
    Ok(())
}

fn cmd_track(manifest_path: &Path, config: &PipelineConfig, out: &Path) -> Result<()> {
    for manifest in io::load_manifests(manifest_path)? {
        let seq = io::load_sequence(&manifest)?;
        let engine = build_engine(&manifest, config)?;
        let seeds = collect_seeds(&seq);
        let tracklets = propagate_all(&engine, &seq, &seeds, &config.candidate_params())?;
        let dir = out.join(&seq.id);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let path = dir.join("tracklets.jsonl");
        io::save_tracklets(&path, &tracklets)?;
        log::info!("[track] {}: {} tracklets -> {}", seq.id, tracklets.len(), path.display());
        println!("{}", path.display());
    }
    Ok(())
}

fn cmd_group(tracklets_path: &Path, config: &PipelineConfig, out: &Path) -> Result<()> {
    let tracklets = io::load_tracklets(tracklets_path)?;
    let seq_len = tracklets.first().map(|t| t.span()).unwrap_or(1);
    let mut bags = group_tracklets(tracklets, config.grouping_threshold)?;
    assess_reliability(&mut bags, seq_len, config.density_threshold)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let path = out.join("ebots.json");
    io::save_ebots(&path, &bags)?;
    log::info!(
        "[group] {} bags, {} reliable -> {}",
        bags.len(),
        bags.iter().filter(|b| b.reliable).count(),
        path.display()
    );
    println!("{}", path.display());
    Ok(())
}

fn cmd_prototype(
    ebots_path: &Path,
    tracklets_path: &Path,
    config: &PipelineConfig,
    out: &Path,
) -> Result<()> {
    let tracklets = io::load_tracklets(tracklets_path)?;
    let records = io::load_ebots(ebots_path)?;
    let bags = io::assemble_ebots(&records, &tracklets)?;
    let cfg = config.confidence_config();
    let mut prototypes = Vec::new();
    let mut reports = Vec::new();
    for bag in bags.iter().filter(|b| b.reliable) {
        let (proto, report) = build_prototype(bag, &cfg)?;
        prototypes.push(proto);
        reports.push(report);
    }
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let path = out.join("prototypes.jsonl");
    io::save_prototypes(&path, &prototypes)?;
    let confidence_path = out.join("confidence.json");
    let text = serde_json::to_string_pretty(&reports).expect("reports serialize");
    std::fs::write(&confidence_path, text).map_err(|e| Error::io(&confidence_path, e))?;
    log::info!("[prototype] {} prototypes -> {}", prototypes.len(), path.display());
    println!("{}", path.display());
    Ok(())
}

fn cmd_eval(
    prototypes_path: &Path,
    manifest_path: &Path,
    config: &PipelineConfig,
    out: &Path,
) -> Result<()> {
    let manifests = io::load_manifests(manifest_path)?;
    let manifest = manifests.first().ok_or_else(|| {
        Error::InvalidConfig("eval needs a manifest with ground truth".into())
    })?;
    let gt_path = manifest.ground_truth.as_ref().ok_or(Error::NoGroundTruth)?;
    let gt = io::load_ground_truth(gt_path, manifest.length)?;
    let prototypes = io::load_prototypes(prototypes_path)?;
    let report = evaluate(&prototypes, &gt, config)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    io::save_report(&out.join("report.json"), &report)?;
    let label = if config.occlusion_threshold > 0.0 {
        "eBoT (prototype, occlusions excluded)"
    } else {
        "eBoT (prototype, occlusions not excluded)"
    };
    let table = format_table(&[(label, &report)]);
    let table_path = out.join("table.txt");
    std::fs::write(&table_path, &table).map_err(|e| Error::io(&table_path, e))?;
    print!("{table}");
    Ok(())
}

fn cmd_synth(
    gen: &GenConfig,
    export_matrix: bool,
    pipeline: &PipelineConfig,
    out: &Path,
) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let result = generate_sequence(gen)?;
    io::save_detections(&out.join("detections.jsonl"), &result.sequence.frames)?;
    io::save_ground_truth(&out.join("gt.jsonl"), &result.ground_truth)?;

    let images = match &result.frames {
        Some(frames) => {
            let frame_dir = out.join("frames");
            std::fs::create_dir_all(&frame_dir).map_err(|e| Error::io(&frame_dir, e))?;
            let mut paths = Vec::with_capacity(frames.len());
            for (k, frame) in frames.iter().enumerate() {
                let rel = PathBuf::from("frames").join(format!("frame_{k:05}.ppm"));
                io::save_ppm(&out.join(&rel), frame)?;
                paths.push(rel);
            }
            Some(paths)
        }
        None => None,
    };

    let score_matrix = if export_matrix {
        let records = export_score_matrix(
            &result.sequence,
            &result.oracle,
            &pipeline.candidate_params(),
        );
        let rel = PathBuf::from("scores.jsonl");
        io::save_score_matrix(&out.join(&rel), &records)?;
        Some(rel)
    } else {
        None
    };

    let manifest = Manifest {
        id: result.sequence.id.clone(),
        length: result.sequence.length,
        detections: "detections.jsonl".into(),
        images,
        ground_truth: Some("gt.jsonl".into()),
        frame_size: Some(result.sequence.frame_size),
        score_matrix,
        oracle: Some(OracleParams {
            score_noise: gen.score_noise,
            rng_seed: gen.rng_seed,
        }),
    };
    let manifest_path = out.join("manifest.json");
    io::save_manifest(&manifest_path, &manifest)?;
    log::info!(
        "[synth] {}: {} frames, {} persons -> {}",
        result.sequence.id,
        gen.num_frames,
        gen.num_persons,
        manifest_path.display()
    );
    println!("{}", manifest_path.display());
    Ok(())
}

fn cmd_render(manifest_path: &Path, prototypes_path: &Path, out: &Path) -> Result<()> {
    let manifests = io::load_manifests(manifest_path)?;
    let manifest = manifests
        .first()
        .ok_or_else(|| Error::InvalidConfig("render needs one manifest".into()))?;
    let seq = io::load_sequence(manifest)?;
    let prototypes = io::load_prototypes(prototypes_path)?;
    let frames = render_overlays(&seq, &prototypes, out)?;
    log::info!("[render] {}: {} frames -> {}", seq.id, frames.len(), out.display());
    println!("{} frames", frames.len());
    Ok(())
}

fn cmd_all(manifest_path: &Path, config: &PipelineConfig, out: &Path) -> Result<()> {
    let outcomes = run_pipeline(manifest_path, config, out)?;
    for outcome in &outcomes {
        if outcome.skipped {
            println!(
                "{}\tskipped (untrackable, ratio {:.2})",
                outcome.id, outcome.detection_ratio
            );
            continue;
        }
        match &outcome.report {
            Some(report) => println!(
                "{}\t{} prototypes\tMOTP {:.4}\tMOTA {:.4}\tFP {}\tFN {}\tIDS {}",
                outcome.id,
                outcome.reliable_bags,
                report.motp,
                report.mota,
                report.fp,
                report.false_negatives,
                report.ids
            ),
            None => println!("{}\t{} prototypes", outcome.id, outcome.reliable_bags),
        }
    }
    Ok(())
}
