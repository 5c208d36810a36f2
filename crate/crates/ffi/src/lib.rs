//! C ABI for qoe3d.
//!
//! Every function returns a [`Qoe3dStatus`]. On failure the message is kept
//! per thread and can be read with [`qoe3d_last_error`]. Handles are opaque
//! and must be released with their matching `_free` function. Buffers handed
//! out by the library are released with [`qoe3d_buffer_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use chrono::Utc;
use qoe3d::analysis::{krocc, plcc, rmse, srocc, AnalysisError, TrapPair, MAX_TRAP_DIFFERENCE};
use qoe3d::asset_io::{compute_bounds, normalize_model, pack_geometry, parse_model, AssetError, FormatHint, Model3D};
use qoe3d::session::{build_playlist, canonical_json, ExperimentConfig, Judgment, Manifest, SessionError, SessionState};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Qoe3dStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ParseError = 3,
    DegenerateModel = 4,
    InvalidInput = 5,
    SessionRejected = 6,
    Io = 7,
    Panic = 99,
}

/// Bytes owned by the library. `data[len]` is always a NUL byte, so JSON
/// results can be read as C strings.
#[repr(C)]
#[derive(Debug)]
pub struct Qoe3dBuffer {
    pub data: *mut u8,
    pub len: usize,
}

/// A parsed model.
pub struct Qoe3dModel(Model3D);

/// A running participant session with its journal.
pub struct Qoe3dSession {
    state: SessionState,
    participant: String,
}

struct Failure(Qoe3dStatus, String);

type FfiResult = Result<(), Failure>;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> FfiResult) -> Qoe3dStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            Qoe3dStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            Qoe3dStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(Qoe3dStatus::NullPointer, format!("{what} is null"))
}

impl From<AssetError> for Failure {
    fn from(e: AssetError) -> Self {
        let status = match e {
            AssetError::DegenerateModel => Qoe3dStatus::DegenerateModel,
            _ => Qoe3dStatus::ParseError,
        };
        Failure(status, e.to_string())
    }
}

impl From<AnalysisError> for Failure {
    fn from(e: AnalysisError) -> Self {
        Failure(Qoe3dStatus::InvalidInput, e.to_string())
    }
}

impl From<SessionError> for Failure {
    fn from(e: SessionError) -> Self {
        let status = match e {
            SessionError::Io { .. } | SessionError::ResultPathNotWritable { .. } | SessionError::JournalWriteFailure(_) => {
                Qoe3dStatus::Io
            }
            SessionError::OutOfOrderTrial { .. }
            | SessionError::DuplicateJudgment { .. }
            | SessionError::ScoreOutOfRange { .. }
            | SessionError::StimulusMismatch { .. }
            | SessionError::SessionHalted => Qoe3dStatus::SessionRejected,
            _ => Qoe3dStatus::InvalidInput,
        };
        Failure(status, e.to_string())
    }
}

unsafe fn slice<'a, T>(ptr: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn c_str<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if ptr.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| Failure(Qoe3dStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> FfiResult {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn buffer(mut bytes: Vec<u8>) -> Qoe3dBuffer {
    let len = bytes.len();
    bytes.push(0);
    let data = Box::into_raw(bytes.into_boxed_slice()) as *mut u8;
    Qoe3dBuffer { data, len }
}

/// Message of the last failed call on this thread, or an empty string. The
/// pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn qoe3d_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qoe3d_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Releases a buffer returned by the library. Passing a zeroed buffer is a
/// no-op.
///
/// # Safety
/// `buf` must be null or point to a buffer filled in by this library that
/// has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn qoe3d_buffer_free(buf: *mut Qoe3dBuffer) {
    if buf.is_null() || (*buf).data.is_null() {
        return;
    }
    let b = &mut *buf;
    drop(Box::from_raw(std::ptr::slice_from_raw_parts_mut(b.data, b.len + 1)));
    b.data = std::ptr::null_mut();
    b.len = 0;
}

/// Parses PLY or OBJ bytes. `format` is 0 for auto-detection, 1 for PLY and
/// 2 for OBJ.
///
/// # Safety
/// `data` must point to `len` readable bytes and `out` to writable storage
/// for one handle.
#[no_mangle]
pub unsafe extern "C" fn qoe3d_model_parse(
    data: *const u8,
    len: usize,
    format: u32,
    out: *mut *mut Qoe3dModel,
) -> Qoe3dStatus {
    guard(|| {
        let bytes = slice(data, len, "data")?;
        let hint = match format {
            0 => FormatHint::Auto,
            1 => FormatHint::Ply,
            2 => FormatHint::Obj,
            other => return Err(Failure(Qoe3dStatus::InvalidArgument, format!("unknown format {other}"))),
        };
        if out.is_null() {
            return Err(null("out"));
        }
        let model = parse_model(bytes, hint)?;
        write_out(out, Box::into_raw(Box::new(Qoe3dModel(model))), "out")
    })
}

/// # Safety
/// `model` must be null or a handle from [`qoe3d_model_parse`].
#[no_mangle]
pub unsafe extern "C" fn qoe3d_model_free(model: *mut Qoe3dModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn qoe3d_model_counts(
    model: *const Qoe3dModel,
    points: *mut usize,
    faces: *mut usize,
) -> Qoe3dStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        write_out(points, m.0.point_count(), "points")?;
        write_out(faces, m.0.faces().len(), "faces")
    })
}

/// Axis-aligned bounds into `min[3]` and `max[3]`.
///
/// # Safety
/// `model` must be a live handle; `min` and `max` must hold 3 doubles each.
#[no_mangle]
pub unsafe extern "C" fn qoe3d_model_bounds(model: *const Qoe3dModel, min: *mut f64, max: *mut f64) -> Qoe3dStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if min.is_null() || max.is_null() {
            return Err(null("min/max"));
        }
        let bb = compute_bounds(&m.0);
        std::ptr::copy_nonoverlapping(bb.min.as_ptr(), min, 3);
        std::ptr::copy_nonoverlapping(bb.max.as_ptr(), max, 3);
        Ok(())
    })
}

/// Centers the model at the origin and scales its longest bounding-box edge
/// to 1, in place.
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn qoe3d_model_normalize(model: *mut Qoe3dModel) -> Qoe3dStatus {
    guard(|| {
        let m = model.as_mut().ok_or_else(|| null("model"))?;
        m.0 = normalize_model(&m.0)?;
        Ok(())
    })
}

/// Packed geometry bytes of the model.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qoe3d_model_pack(model: *const Qoe3dModel, out: *mut Qoe3dBuffer) -> Qoe3dStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        write_out(out, buffer(pack_geometry(&m.0).to_bytes()), "out")
    })
}

/// Hex SHA-256 of the packed geometry, written to `out` as 64 characters
/// plus a NUL byte.
///
/// # Safety
/// `model` must be a live handle and `out` must hold 65 bytes.
#[no_mangle]
pub unsafe extern "C" fn qoe3d_model_content_hash(model: *const Qoe3dModel, out: *mut c_char) -> Qoe3dStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let hash = pack_geometry(&m.0).content_hash();
        std::ptr::copy_nonoverlapping(hash.as_ptr() as *const c_char, out, 64);
        *out.add(64) = 0;
        Ok(())
    })
}

type Metric = fn(&[f64], &[f64]) -> Result<f64, AnalysisError>;

unsafe fn metric(f: Metric, a: *const f64, b: *const f64, n: usize, out: *mut f64) -> Qoe3dStatus {
    guard(|| {
        let a = slice(a, n, "a")?;
        let b = slice(b, n, "b")?;
        if out.is_null() {
            return Err(null("out"));
        }
        write_out(out, f(a, b)?, "out")
    })
}

/// Spearman rank-order correlation of two length-`n` vectors.
///
/// # Safety
/// `a` and `b` must hold `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qoe3d_srocc(a: *const f64, b: *const f64, n: usize, out: *mut f64) -> Qoe3dStatus {
    metric(srocc, a, b, n, out)
}

/// Pearson linear correlation.
///
/// # Safety
/// As for [`qoe3d_srocc`].
#[no_mangle]
pub unsafe extern "C" fn qoe3d_plcc(a: *const f64, b: *const f64, n: usize, out: *mut f64) -> Qoe3dStatus {
    metric(plcc, a, b, n, out)
}

/// Kendall rank correlation (tau-b).
///
/// # Safety
/// As for [`qoe3d_srocc`].
#[no_mangle]
pub unsafe extern "C" fn qoe3d_krocc(a: *const f64, b: *const f64, n: usize, out: *mut f64) -> Qoe3dStatus {
    metric(krocc, a, b, n, out)
}

/// Root mean squared error.
///
/// # Safety
/// As for [`qoe3d_srocc`].
#[no_mangle]
pub unsafe extern "C" fn qoe3d_rmse(a: *const f64, b: *const f64, n: usize, out: *mut f64) -> Qoe3dStatus {
    metric(rmse, a, b, n, out)
}

/// Applies the trap rule to one subject's `n` trap pairs. `rejected` is set
/// to 1 when any pair differs by more than 2.
///
/// # Safety
/// `first` and `repeat` must hold `n` values; `rejected` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qoe3d_screen_traps(
    first: *const u32,
    repeat: *const u32,
    n: usize,
    rejected: *mut u8,
) -> Qoe3dStatus {
    guard(|| {
        let first = slice(first, n, "first")?;
        let repeat = slice(repeat, n, "repeat")?;
        let any = first.iter().zip(repeat).any(|(&f, &r)| {
            TrapPair {
                stimulus_id: String::new(),
                first: f,
                repeat: r,
            }
            .difference()
                > MAX_TRAP_DIFFERENCE
        });
        write_out(rejected, u8::from(any), "rejected")
    })
}

unsafe fn load_inputs(
    manifest_json: *const c_char,
    base_dir: *const c_char,
    config_json: *const c_char,
) -> Result<(Manifest, ExperimentConfig), Failure> {
    let manifest = Manifest::from_json(c_str(manifest_json, "manifest_json")?, Path::new(c_str(base_dir, "base_dir")?))?;
    let config = ExperimentConfig::from_json(c_str(config_json, "config_json")?)?;
    Ok((manifest, config))
}

/// Builds the playlist for a manifest and config (both JSON) and returns it
/// as canonical JSON.
///
/// # Safety
/// The strings must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qoe3d_playlist_json(
    manifest_json: *const c_char,
    base_dir: *const c_char,
    config_json: *const c_char,
    out: *mut Qoe3dBuffer,
) -> Qoe3dStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let (manifest, config) = load_inputs(manifest_json, base_dir, config_json)?;
        config.validate()?;
        let playlist = build_playlist(&manifest, &config)?;
        write_out(out, buffer(canonical_json(&playlist).into_bytes()), "out")
    })
}

/// Starts a session, or resumes it when the participant's journal exists.
///
/// # Safety
/// The strings must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qoe3d_session_open(
    manifest_json: *const c_char,
    base_dir: *const c_char,
    config_json: *const c_char,
    out: *mut *mut Qoe3dSession,
) -> Qoe3dStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let (manifest, config) = load_inputs(manifest_json, base_dir, config_json)?;
        let state = SessionState::open(&manifest, &config)?;
        let session = Qoe3dSession {
            state,
            participant: config.participant_name,
        };
        write_out(out, Box::into_raw(Box::new(session)), "out")
    })
}

/// # Safety
/// `session` must be null or a handle from [`qoe3d_session_open`].
#[no_mangle]
pub unsafe extern "C" fn qoe3d_session_free(session: *mut Qoe3dSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

/// Index of the next trial to judge, or -1 when the session is finished.
/// `total` receives the playlist length.
///
/// # Safety
/// `session` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn qoe3d_session_progress(
    session: *const Qoe3dSession,
    next: *mut i64,
    total: *mut u32,
) -> Qoe3dStatus {
    guard(|| {
        let s = session.as_ref().ok_or_else(|| null("session"))?;
        write_out(next, s.state.next_index().map_or(-1, i64::from), "next")?;
        write_out(total, s.state.playlist().len() as u32, "total")
    })
}

/// Journals a judgment for the current trial.
///
/// # Safety
/// `session` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn qoe3d_session_record(
    session: *mut Qoe3dSession,
    trial_index: u32,
    score: u32,
    view_time_ms: u64,
) -> Qoe3dStatus {
    guard(|| {
        let s = session.as_mut().ok_or_else(|| null("session"))?;
        let trial = s.state.playlist().trial(trial_index).ok_or_else(|| {
            Failure(
                Qoe3dStatus::SessionRejected,
                format!("trial {trial_index} is not in the playlist"),
            )
        })?;
        let judgment = Judgment {
            trial_index,
            stimulus_id: trial.stimulus_id.clone(),
            score,
            view_time_ms,
            wall_clock: Utc::now(),
            participant_name: s.participant.clone(),
        };
        s.state.record(judgment)?;
        Ok(())
    })
}
