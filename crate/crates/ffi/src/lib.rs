//! C ABI over `segpose`.
//!
//! Every fallible function returns a [`SegposeStatus`]; on failure a
//! description is available from [`segpose_last_error`] on the same thread.
//! Handles are opaque and must be released with the matching `_free`.
//! Point buffers are packed `x y z` triples of `double`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::ptr;

use segpose::alignment::alignment_score;
use segpose::cli::load_objects;
use segpose::config::ConfigFile;
use segpose::kdtree::KdTree;
use segpose::model::cache::load_or_build;
use segpose::model::{build_object_model, load_mesh, CropParams};
use segpose::pipeline::{CameraOdometry, Frame, FrameReport, Mode, Pipeline, PipelineConfig, Status};
use segpose::scene::{CameraIntrinsics, DepthImage, LabelImage};
use segpose::{Error, Point3, PointCloud, RigidTransform};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SegposeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    EmptyInput = 3,
    Io = 4,
    Parse = 5,
    Config = 6,
    Numerical = 7,
    Panic = 8,
    OutOfRange = 9,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SegposeMode {
    Acquisition = 0,
    Tracking = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SegposeObjectStatus {
    Acquired = 0,
    BelowThreshold = 1,
    Tracked = 2,
    Rejected = 3,
    Occluded = 4,
    Lost = 5,
    Failed = 6,
}

/// Pinhole parameters in pixels.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct SegposeIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

/// One object's outcome for a frame. `pose` is `qw qx qy qz tx ty tz`,
/// model to camera, valid when `has_pose` is nonzero. `crop_id` is -1 when no
/// crop applies; `position_variance` is NaN outside tracking.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct SegposeObjectPose {
    pub class_id: u8,
    pub mode: SegposeMode,
    pub status: SegposeObjectStatus,
    pub crop_id: i64,
    pub has_pose: i32,
    pub pose: [f64; 7],
    pub score: f64,
    pub position_variance: f64,
}

/// Opaque pose estimator.
pub struct SegposeEngine {
    pipeline: Pipeline,
    crop_params: CropParams,
}

/// Opaque per-frame result.
pub struct SegposeFrameResult {
    report: FrameReport,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> SegposeStatus {
    match e {
        Error::EmptyCloud | Error::EmptyCandidate | Error::EmptyMesh | Error::EmptySegment(_) | Error::EmptyCrop(_) => {
            SegposeStatus::EmptyInput
        }
        Error::Degenerate(_) | Error::NoCorrespondences { .. } => SegposeStatus::Numerical,
        Error::DimensionMismatch { .. } | Error::InvalidArgument(_) | Error::UnitSanity { .. } => {
            SegposeStatus::InvalidArgument
        }
        Error::Parse { .. } => SegposeStatus::Parse,
        Error::Config(_) => SegposeStatus::Config,
        Error::Io { .. } | Error::Image { .. } => SegposeStatus::Io,
    }
}

/// Runs `f`, converting errors and panics into a status plus message.
fn guard(f: impl FnOnce() -> Result<(), (SegposeStatus, String)>) -> SegposeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            SegposeStatus::Ok
        }
        Ok(Err((s, m))) => {
            set_error(&m);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("internal panic: {msg}"));
            SegposeStatus::Panic
        }
    }
}

fn lift<T>(r: segpose::Result<T>) -> Result<T, (SegposeStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (SegposeStatus, String) {
    (SegposeStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> (SegposeStatus, String) {
    (SegposeStatus::InvalidArgument, msg.into())
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, (SegposeStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = CStr::from_ptr(p).to_str().map_err(|_| invalid(format!("{what} is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn points_arg(p: *const f64, n: usize, what: &str) -> Result<PointCloud, (SegposeStatus, String)> {
    if n == 0 {
        return lift(PointCloud::new(Vec::new()));
    }
    if p.is_null() {
        return Err(null(what));
    }
    let flat = std::slice::from_raw_parts(p, n.checked_mul(3).ok_or_else(|| invalid("point count overflows"))?);
    let pts = flat.chunks_exact(3).map(|c| Point3::new(c[0], c[1], c[2])).collect();
    lift(PointCloud::new(pts))
}

/// Message for the most recent failure on this thread; empty after success.
/// The pointer stays valid until the next call into this library on the
/// same thread.
#[no_mangle]
pub extern "C" fn segpose_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn segpose_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Fraction of `candidate` points with a `scene` point within `tau` meters.
///
/// # Safety
/// `candidate` and `scene` must point to `3 * count` doubles; `out_score`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn segpose_alignment_score(
    candidate: *const f64,
    candidate_count: usize,
    scene: *const f64,
    scene_count: usize,
    tau: f64,
    out_score: *mut f64,
) -> SegposeStatus {
    guard(|| {
        if out_score.is_null() {
            return Err(null("out_score"));
        }
        let cand = points_arg(candidate, candidate_count, "candidate")?;
        let scene = points_arg(scene, scene_count, "scene")?;
        let tree = lift(KdTree::build(&scene))?;
        let s = lift(alignment_score(&cand, &tree, tau))?;
        *out_score = s.value;
        Ok(())
    })
}

/// Creates an engine. `config_path` may be null for default parameters and
/// no objects; otherwise it is read for `[pipeline]`, `[crops]` and
/// `[object]` sections exactly like the command-line `run` config.
///
/// # Safety
/// `intrinsics` and `out_engine` must be valid pointers; `config_path` null
/// or a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn segpose_engine_new(
    config_path: *const c_char,
    intrinsics: *const SegposeIntrinsics,
    out_engine: *mut *mut SegposeEngine,
) -> SegposeStatus {
    guard(|| {
        if out_engine.is_null() {
            return Err(null("out_engine"));
        }
        *out_engine = ptr::null_mut();
        if intrinsics.is_null() {
            return Err(null("intrinsics"));
        }
        let k = &*intrinsics;
        let k = CameraIntrinsics::new(k.fx, k.fy, k.cx, k.cy, k.width as usize, k.height as usize)
            .map_err(|e| invalid(e.to_string()))?;
        let (cfg_file, base) = if config_path.is_null() {
            (lift(ConfigFile::parse(""))?, PathBuf::new())
        } else {
            let p = path_arg(config_path, "config_path")?;
            let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
            (lift(ConfigFile::load(&p))?, base)
        };
        let cfg = lift(PipelineConfig::from_config(&cfg_file))?;
        let crop_params = CropParams { n_views: cfg.n_crops, ..CropParams::default() };
        let lib = lift(load_objects(&cfg_file, &base, &crop_params))?;
        let mut pipeline = lift(Pipeline::new(cfg, k))?;
        for m in lib.models.into_values() {
            lift(pipeline.add_object(m))?;
        }
        *out_engine = Box::into_raw(Box::new(SegposeEngine { pipeline, crop_params }));
        Ok(())
    })
}

/// Loads a mesh (OBJ or PLY, meters) for `class_id` and builds its crops.
/// With a non-null `cache_dir` the crops are read from or written to it.
///
/// # Safety
/// `engine` must come from [`segpose_engine_new`]; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn segpose_engine_add_mesh(
    engine: *mut SegposeEngine,
    mesh_path: *const c_char,
    class_id: u8,
    cache_dir: *const c_char,
) -> SegposeStatus {
    guard(|| {
        let engine = engine.as_mut().ok_or_else(|| null("engine"))?;
        let mesh = lift(load_mesh(&path_arg(mesh_path, "mesh_path")?, class_id))?;
        let model = if cache_dir.is_null() {
            lift(build_object_model(&mesh, &engine.crop_params))?
        } else {
            lift(load_or_build(&mesh, &engine.crop_params, &path_arg(cache_dir, "cache_dir")?))?
        };
        lift(engine.pipeline.add_object(model))
    })
}

/// Forgets all tracking state; objects return to acquisition.
///
/// # Safety
/// `engine` must come from [`segpose_engine_new`].
#[no_mangle]
pub unsafe extern "C" fn segpose_engine_reset(engine: *mut SegposeEngine) -> SegposeStatus {
    guard(|| {
        engine.as_mut().ok_or_else(|| null("engine"))?.pipeline.reset();
        Ok(())
    })
}

/// Processes one frame. `depth` holds `width * height` meters (0 or NaN for
/// no reading), `labels` the matching class ids. `camera_motion` is the
/// current camera pose in the previous camera frame (`qw qx qy qz tx ty tz`)
/// or null for a static camera; `dt` is the time since the previous frame.
///
/// # Safety
/// Buffers must have the stated sizes; `out_result` must be writable.
#[no_mangle]
pub unsafe extern "C" fn segpose_engine_process_frame(
    engine: *mut SegposeEngine,
    depth: *const f32,
    labels: *const u8,
    width: u32,
    height: u32,
    camera_motion: *const f64,
    dt: f64,
    out_result: *mut *mut SegposeFrameResult,
) -> SegposeStatus {
    guard(|| {
        if out_result.is_null() {
            return Err(null("out_result"));
        }
        *out_result = ptr::null_mut();
        let engine = engine.as_mut().ok_or_else(|| null("engine"))?;
        if depth.is_null() {
            return Err(null("depth"));
        }
        if labels.is_null() {
            return Err(null("labels"));
        }
        let (w, h) = (width as usize, height as usize);
        let n = w.checked_mul(h).ok_or_else(|| invalid("image size overflows"))?;
        let depth = DepthImage { width: w, height: h, data: std::slice::from_raw_parts(depth, n).to_vec() };
        let labels = LabelImage { width: w, height: h, data: std::slice::from_raw_parts(labels, n).to_vec() };
        let motion = if camera_motion.is_null() {
            RigidTransform::identity()
        } else {
            lift(RigidTransform::from_seven(std::slice::from_raw_parts(camera_motion, 7)))?
        };
        let frame = Frame { depth, labels, odometry: CameraOdometry { motion, dt } };
        let report = lift(engine.pipeline.process_frame(&frame))?;
        *out_result = Box::into_raw(Box::new(SegposeFrameResult { report }));
        Ok(())
    })
}

/// Number of objects reported in `result`; 0 for null.
///
/// # Safety
/// `result` must be null or come from [`segpose_engine_process_frame`].
#[no_mangle]
pub unsafe extern "C" fn segpose_result_count(result: *const SegposeFrameResult) -> usize {
    result.as_ref().map_or(0, |r| r.report.objects.len())
}

/// Copies the `index`-th object of `result` into `out`.
///
/// # Safety
/// `result` must come from [`segpose_engine_process_frame`]; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn segpose_result_object(
    result: *const SegposeFrameResult,
    index: usize,
    out: *mut SegposeObjectPose,
) -> SegposeStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let o = r.report.objects.get(index).ok_or_else(|| {
            (SegposeStatus::OutOfRange, format!("index {index} out of range for {} objects", r.report.objects.len()))
        })?;
        *out = SegposeObjectPose {
            class_id: o.class_id,
            mode: match o.mode {
                Mode::Acquisition => SegposeMode::Acquisition,
                Mode::Tracking => SegposeMode::Tracking,
            },
            status: match o.status {
                Status::Acquired => SegposeObjectStatus::Acquired,
                Status::BelowThreshold => SegposeObjectStatus::BelowThreshold,
                Status::Tracked => SegposeObjectStatus::Tracked,
                Status::Rejected => SegposeObjectStatus::Rejected,
                Status::Occluded => SegposeObjectStatus::Occluded,
                Status::Lost => SegposeObjectStatus::Lost,
                Status::Error(_) => SegposeObjectStatus::Failed,
            },
            crop_id: o.crop_id.map_or(-1, |c| c as i64),
            has_pose: o.pose.is_some() as i32,
            pose: o.pose.map_or([f64::NAN; 7], |p| p.to_seven()),
            score: o.score,
            position_variance: o.position_variance.unwrap_or(f64::NAN),
        };
        Ok(())
    })
}

/// # Safety
/// `result` must be null or come from [`segpose_engine_process_frame`] and
/// not have been freed.
#[no_mangle]
pub unsafe extern "C" fn segpose_result_free(result: *mut SegposeFrameResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// # Safety
/// `engine` must be null or come from [`segpose_engine_new`] and not have
/// been freed.
#[no_mangle]
pub unsafe extern "C" fn segpose_engine_free(engine: *mut SegposeEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}
