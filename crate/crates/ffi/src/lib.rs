//! C ABI for the tracking engine: an opaque context handle, status codes,
//! and a per-context last-error message.
//!
//! Every entry point is panic-safe; failures come back as `EbotStatus`
//! values with details available through `ebot_context_last_error`.

use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use ebot::error::Error;
use ebot::geometry::BoundingBox;
use ebot::pipeline::{run_pipeline, PipelineConfig};
use ebot::prototype::prototype_confidence;
use ebot::synthetic::{generate_sequence, GenConfig};

/// Outcome of an FFI call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EbotStatus {
    EbotOk = 0,
    EbotNullArgument = 1,
    EbotInvalidUtf8 = 2,
    EbotIoError = 3,
    EbotParseError = 4,
    EbotInvalidInput = 5,
    EbotEngineMismatch = 6,
    EbotNoGroundTruth = 7,
    EbotInternalError = 8,
    EbotPanic = 9,
}

/// Opaque pipeline handle: owns a configuration and the last error text.
pub struct EbotContext {
    config: PipelineConfig,
    last_error: CString,
}

impl EbotContext {
    fn set_error(&mut self, message: &str) {
        self.last_error = CString::new(message.replace('\0', "?"))
            .unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    }
}

fn status_of(error: &Error) -> EbotStatus {
    match error {
        Error::Io { .. } | Error::MissingFrames(_) => EbotStatus::EbotIoError,
        Error::Parse { .. } => EbotStatus::EbotParseError,
        Error::EngineRequiresImages
        | Error::EngineRequiresMatrix
        | Error::EngineRequiresGroundTruth => EbotStatus::EbotEngineMismatch,
        Error::NoGroundTruth => EbotStatus::EbotNoGroundTruth,
        Error::InvalidBox { .. }
        | Error::InvalidSequence { .. }
        | Error::InvalidConfig(_)
        | Error::EmptyPatch
        | Error::BinMismatch { .. }
        | Error::DescriptorLengthMismatch { .. }
        | Error::EmptyDescriptor
        | Error::OutOfBounds
        | Error::FrameOutOfRange { .. }
        | Error::SpanMismatch { .. }
        | Error::EmptyBag
        | Error::EmptySequence
        | Error::EmptyTraining
        | Error::PlacementFailed { .. }
        | Error::Image { .. } => EbotStatus::EbotInvalidInput,
    }
}

/// # Safety
/// `ptr` must be null or a NUL-terminated string valid for the call.
unsafe fn read_str<'a>(ptr: *const c_char) -> Result<&'a str, EbotStatus> {
    if ptr.is_null() {
        return Err(EbotStatus::EbotNullArgument);
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| EbotStatus::EbotInvalidUtf8)
}

fn guarded(ctx: &mut EbotContext, body: impl FnOnce(&mut EbotContext) -> EbotStatus) -> EbotStatus {
    match catch_unwind(AssertUnwindSafe(|| body(ctx))) {
        Ok(status) => status,
        Err(_) => {
            ctx.set_error("panic inside the engine");
            EbotStatus::EbotPanic
        }
    }
}

/// Version of the engine as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ebot_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Creates a context with the default configuration. Free with
/// `ebot_context_free`.
#[no_mangle]
pub extern "C" fn ebot_context_new() -> *mut EbotContext {
    Box::into_raw(Box::new(EbotContext {
        config: PipelineConfig::default(),
        last_error: CString::new("").unwrap(),
    }))
}

/// Replaces the context configuration with the given JSON document.
///
/// # Safety
/// `ctx` must come from `ebot_context_new` and not yet be freed;
/// `config_json` must be null or a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ebot_context_configure(
    ctx: *mut EbotContext,
    config_json: *const c_char,
) -> EbotStatus {
    let Some(ctx) = ctx.as_mut() else {
        return EbotStatus::EbotNullArgument;
    };
    guarded(ctx, |ctx| {
        let text = match read_str(config_json) {
            Ok(t) => t,
            Err(status) => {
                ctx.set_error("config_json is null or not UTF-8");
                return status;
            }
        };
        match serde_json::from_str::<PipelineConfig>(text) {
            Ok(config) => {
                ctx.config = config;
                EbotStatus::EbotOk
            }
            Err(e) => {
                ctx.set_error(&format!("malformed config json: {e}"));
                EbotStatus::EbotParseError
            }
        }
    })
}

/// Serializes the context configuration; the caller frees the string with
/// `ebot_string_free`. Returns null only on internal failure.
///
/// # Safety
/// `ctx` must come from `ebot_context_new` and not yet be freed.
#[no_mangle]
pub unsafe extern "C" fn ebot_context_config_json(ctx: *const EbotContext) -> *mut c_char {
    let Some(ctx) = ctx.as_ref() else {
        return std::ptr::null_mut();
    };
    let text = serde_json::to_string_pretty(&ctx.config).expect("config serializes");
    CString::new(text)
        .map(CString::into_raw)
        .unwrap_or(std::ptr::null_mut())
}

/// Last error message of the context, empty when no call has failed. The
/// pointer stays valid until the next failing call on the same context.
///
/// # Safety
/// `ctx` must come from `ebot_context_new` and not yet be freed.
#[no_mangle]
pub unsafe extern "C" fn ebot_context_last_error(ctx: *const EbotContext) -> *const c_char {
    match ctx.as_ref() {
        Some(ctx) => ctx.last_error.as_ptr(),
        None => std::ptr::null(),
    }
}

/// Runs the full pipeline for every sequence in the manifest, writing
/// artifacts under `out_dir`.
///
/// # Safety
/// `ctx` must come from `ebot_context_new` and not yet be freed; the path
/// arguments must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn ebot_context_run(
    ctx: *mut EbotContext,
    manifest_path: *const c_char,
    out_dir: *const c_char,
) -> EbotStatus {
    let Some(ctx) = ctx.as_mut() else {
        return EbotStatus::EbotNullArgument;
    };
    let (manifest, out) = match (read_str(manifest_path), read_str(out_dir)) {
        (Ok(m), Ok(o)) => (m.to_owned(), o.to_owned()),
        (Err(status), _) | (_, Err(status)) => {
            ctx.set_error("manifest_path or out_dir is null or not UTF-8");
            return status;
        }
    };
    guarded(ctx, |ctx| {
        match run_pipeline(Path::new(&manifest), &ctx.config, Path::new(&out)) {
            Ok(_) => EbotStatus::EbotOk,
            Err(e) => {
                ctx.set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Generates a synthetic sequence (generator config as JSON, null for the
/// defaults) and writes detections, ground truth, and a manifest under
/// `out_dir`.
///
/// # Safety
/// Same contract as `ebot_context_run`; `gen_config_json` may be null.
#[no_mangle]
pub unsafe extern "C" fn ebot_context_synthesize(
    ctx: *mut EbotContext,
    gen_config_json: *const c_char,
    out_dir: *const c_char,
) -> EbotStatus {
    let Some(ctx) = ctx.as_mut() else {
        return EbotStatus::EbotNullArgument;
    };
    let gen: GenConfig = if gen_config_json.is_null() {
        GenConfig::default()
    } else {
        match read_str(gen_config_json) {
            Ok(text) => match serde_json::from_str(text) {
                Ok(gen) => gen,
                Err(e) => {
                    ctx.set_error(&format!("malformed generator json: {e}"));
                    return EbotStatus::EbotParseError;
                }
            },
            Err(status) => {
                ctx.set_error("gen_config_json is not UTF-8");
                return status;
            }
        }
    };
    let out = match read_str(out_dir) {
        Ok(o) => o.to_owned(),
        Err(status) => {
            ctx.set_error("out_dir is null or not UTF-8");
            return status;
        }
    };
    guarded(ctx, |ctx| match write_synthetic(&gen, Path::new(&out)) {
        Ok(()) => EbotStatus::EbotOk,
        Err(e) => {
            ctx.set_error(&e.to_string());
            status_of(&e)
        }
    })
}

fn write_synthetic(gen: &GenConfig, out: &Path) -> Result<(), Error> {
    use ebot::io;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let result = generate_sequence(gen)?;
    io::save_detections(&out.join("detections.jsonl"), &result.sequence.frames)?;
    io::save_ground_truth(&out.join("gt.jsonl"), &result.ground_truth)?;
    let manifest = io::Manifest {
        id: result.sequence.id.clone(),
        length: result.sequence.length,
        detections: "detections.jsonl".into(),
        images: None,
        ground_truth: Some("gt.jsonl".into()),
        frame_size: Some(result.sequence.frame_size),
        score_matrix: None,
        oracle: Some(io::OracleParams {
            score_noise: gen.score_noise,
            rng_seed: gen.rng_seed,
        }),
    };
    io::save_manifest(&out.join("manifest.json"), &manifest)
}

/// Frees the context.
///
/// # Safety
/// `ctx` must come from `ebot_context_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ebot_context_free(ctx: *mut EbotContext) {
    if !ctx.is_null() {
        drop(Box::from_raw(ctx));
    }
}

/// Frees a string returned by this library.
///
/// # Safety
/// `s` must come from an allocation-returning function of this library and
/// not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ebot_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Intersection over union of two boxes given as x, y, width, height.
/// Returns -1.0 when either box has a non-positive or non-finite extent.
#[no_mangle]
pub extern "C" fn ebot_iou(
    ax: f64,
    ay: f64,
    aw: f64,
    ah: f64,
    bx: f64,
    by: f64,
    bw: f64,
    bh: f64,
) -> f64 {
    match (
        BoundingBox::new(ax, ay, aw, ah),
        BoundingBox::new(bx, by, bw, bh),
    ) {
        (Ok(a), Ok(b)) => ebot::geometry::iou(&a, &b),
        _ => -1.0,
    }
}

/// Occlusion-penalized track confidence over `len` refined per-frame
/// values with `occluded` occluded frames. Returns -1.0 on null input or
/// when `occluded` exceeds `len`.
///
/// # Safety
/// `refined` must point to `len` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn ebot_prototype_confidence(
    refined: *const f64,
    len: usize,
    occluded: usize,
    beta: f64,
) -> f64 {
    if refined.is_null() || occluded > len {
        return -1.0;
    }
    let values = std::slice::from_raw_parts(refined, len);
    prototype_confidence(values, occluded, beta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cstr(s: &str) -> CString {
        CString::new(s).unwrap()
    }

    #[test]
    fn version_is_a_readable_string() {
        let v = unsafe { CStr::from_ptr(ebot_version()) };
        assert!(!v.to_str().unwrap().is_empty());
    }

    #[test]
    fn context_lifecycle_and_config_round_trip() {
        let ctx = ebot_context_new();
        let json = unsafe { ebot_context_config_json(ctx) };
        assert!(!json.is_null());
        let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
        assert!(text.contains("trackable_ratio"));

        let modified = text.replace("\"workers\": 0", "\"workers\": 2");
        let status = unsafe { ebot_context_configure(ctx, cstr(&modified).as_ptr()) };
        assert_eq!(status, EbotStatus::EbotOk);

        unsafe {
            ebot_string_free(json);
            ebot_context_free(ctx);
        }
    }

    #[test]
    fn bad_config_reports_parse_error_with_message() {
        let ctx = ebot_context_new();
        let status = unsafe { ebot_context_configure(ctx, cstr("{nope").as_ptr()) };
        assert_eq!(status, EbotStatus::EbotParseError);
        let msg = unsafe { CStr::from_ptr(ebot_context_last_error(ctx)) };
        assert!(msg.to_str().unwrap().contains("malformed config json"));
        unsafe { ebot_context_free(ctx) };
    }

    #[test]
    fn null_arguments_are_rejected() {
        let ctx = ebot_context_new();
        let status = unsafe { ebot_context_configure(ctx, std::ptr::null()) };
        assert_eq!(status, EbotStatus::EbotNullArgument);
        let status = unsafe {
            ebot_context_run(std::ptr::null_mut(), std::ptr::null(), std::ptr::null())
        };
        assert_eq!(status, EbotStatus::EbotNullArgument);
        unsafe { ebot_context_free(ctx) };
    }

    #[test]
    fn synthesize_then_run_produces_artifacts() {
        let dir = tempfile::TempDir::new().unwrap();
        let seq_dir = dir.path().join("seq");
        let out_dir = dir.path().join("out");
        let ctx = ebot_context_new();

        let gen = r#"{"num_persons": 2, "detector_miss_rate": 0.2, "score_noise": 0.05, "rng_seed": 5}"#;
        let status = unsafe {
            ebot_context_synthesize(
                ctx,
                cstr(gen).as_ptr(),
                cstr(seq_dir.to_str().unwrap()).as_ptr(),
            )
        };
        assert_eq!(status, EbotStatus::EbotOk);

        let config = r#"{"engine": "oracle"}"#;
        let status = unsafe { ebot_context_configure(ctx, cstr(config).as_ptr()) };
        assert_eq!(status, EbotStatus::EbotOk);

        let manifest = seq_dir.join("manifest.json");
        let status = unsafe {
            ebot_context_run(
                ctx,
                cstr(manifest.to_str().unwrap()).as_ptr(),
                cstr(out_dir.to_str().unwrap()).as_ptr(),
            )
        };
        assert_eq!(status, EbotStatus::EbotOk);
        assert!(out_dir.join("synth-5/prototypes.jsonl").exists());
        assert!(out_dir.join("synth-5/report.json").exists());
        unsafe { ebot_context_free(ctx) };
    }

    #[test]
    fn run_on_missing_manifest_reports_io_error() {
        let ctx = ebot_context_new();
        let status = unsafe {
            ebot_context_run(
                ctx,
                cstr("/nonexistent/manifest.json").as_ptr(),
                cstr("/tmp/ebot-ffi-nowhere").as_ptr(),
            )
        };
        assert_eq!(status, EbotStatus::EbotIoError);
        let msg = unsafe { CStr::from_ptr(ebot_context_last_error(ctx)) };
        assert!(msg.to_str().unwrap().contains("i/o error"));
        unsafe { ebot_context_free(ctx) };
    }

    #[test]
    fn iou_spot_values() {
        assert_eq!(ebot_iou(0.0, 0.0, 10.0, 10.0, 5.0, 0.0, 10.0, 10.0), 50.0 / 150.0);
        assert_eq!(ebot_iou(0.0, 0.0, 10.0, 10.0, 0.0, 0.0, 10.0, 10.0), 1.0);
        assert_eq!(ebot_iou(0.0, 0.0, 0.0, 10.0, 0.0, 0.0, 10.0, 10.0), -1.0);
    }

    #[test]
    fn confidence_spot_value_through_the_abi() {
        let mut refined = vec![0.5; 8];
        refined.extend([0.0, 0.0]);
        let value =
            unsafe { ebot_prototype_confidence(refined.as_ptr(), refined.len(), 2, 1.0) };
        assert!((value - 0.31075).abs() < 1e-5);
        let bad = unsafe { ebot_prototype_confidence(std::ptr::null(), 3, 0, 1.0) };
        assert_eq!(bad, -1.0);
    }
}
