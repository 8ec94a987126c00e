//! C ABI over the phantomgen toolkit: opaque handles, integer status codes,
//! and a thread-local last-error message. Every entry point catches panics.
//!
//! Handle lifetime: every `*_load`/`*_new`/`*_from_*` output must be released
//! with the matching `*_free`. Returned pointers are never shared between
//! handles; all functions are safe to call from multiple threads as long as
//! a single handle is not mutated concurrently.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use phantomgen::cli::series_to_video;
use phantomgen::diffusion::{cosine_schedule, load_checkpoint, sample, DenoiserModel};
use phantomgen::efd::{
    encode_video, invert_norm, read_series_csv, write_series_csv, EfdSeries, NormStats,
};
use phantomgen::geometry::{load_mvb1, save_mvb1, MaskFrame, MaskVideo};
use phantomgen::metrics::{dtw_distance, feature_curves};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgStatus {
    PgOk = 0,
    PgErrNullArgument = 1,
    PgErrInvalidArgument = 2,
    PgErrUtf8 = 3,
    PgErrIo = 4,
    PgErrGeometry = 5,
    PgErrEfd = 6,
    PgErrDiffusion = 7,
    PgErrMetrics = 8,
    PgErrPanic = 9,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(status: PgStatus, message: impl std::fmt::Display) -> PgStatus {
    let text = CString::new(message.to_string()).unwrap_or_else(|_| CString::new("error").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = text);
    status
}

/// Message for the most recent error on this thread. The pointer stays valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn pg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Mask video handle (sequence of equally sized binary frames).
pub struct PgMaskVideo {
    inner: MaskVideo,
}

/// EFD coefficient series handle (4d channels by T frames).
pub struct PgEfdSeries {
    inner: EfdSeries,
}

/// Trained generator handle: denoiser weights plus the normalization and
/// geometry needed to emit mask videos.
pub struct PgModel {
    model: DenoiserModel,
    stats: NormStats,
    d: usize,
    n_points: usize,
    k_steps: usize,
    canvas: (u32, u32),
}

fn guard(status: impl FnOnce() -> PgStatus + std::panic::UnwindSafe) -> PgStatus {
    match catch_unwind(status) {
        Ok(s) => s,
        Err(_) => set_error(PgStatus::PgErrPanic, "internal panic"),
    }
}

unsafe fn path_from(ptr: *const c_char) -> Result<std::path::PathBuf, PgStatus> {
    if ptr.is_null() {
        return Err(set_error(PgStatus::PgErrNullArgument, "null path"));
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(Path::new(s).to_path_buf()),
        Err(e) => Err(set_error(PgStatus::PgErrUtf8, e)),
    }
}

macro_rules! nonnull {
    ($ptr:expr) => {
        if $ptr.is_null() {
            return set_error(PgStatus::PgErrNullArgument, concat!(stringify!($ptr), " is null"));
        }
    };
}

// ---- mask videos ----

/// Loads an MVB1 container.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pg_mask_video_load(path: *const c_char, out: *mut *mut PgMaskVideo) -> PgStatus {
    nonnull!(out);
    let path = match path_from(path) {
        Ok(p) => p,
        Err(s) => return s,
    };
    guard(AssertUnwindSafe(|| match load_mvb1(&path) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(PgMaskVideo { inner }));
            PgStatus::PgOk
        }
        Err(e) => set_error(PgStatus::PgErrIo, e),
    }))
}

/// Saves an MVB1 container.
///
/// # Safety
/// `video` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pg_mask_video_save(video: *const PgMaskVideo, path: *const c_char) -> PgStatus {
    nonnull!(video);
    let path = match path_from(path) {
        Ok(p) => p,
        Err(s) => return s,
    };
    guard(AssertUnwindSafe(|| match save_mvb1(&(*video).inner, &path) {
        Ok(()) => PgStatus::PgOk,
        Err(e) => set_error(PgStatus::PgErrIo, e),
    }))
}

/// Builds a video from `t * h * w` bytes (0 or 1), frame-major, row-major.
///
/// # Safety
/// `bits` must point to at least `t * h * w` bytes; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pg_mask_video_from_bits(
    t: u32,
    h: u32,
    w: u32,
    bits: *const u8,
    out: *mut *mut PgMaskVideo,
) -> PgStatus {
    nonnull!(bits);
    nonnull!(out);
    guard(AssertUnwindSafe(|| {
        if t == 0 || h == 0 || w == 0 {
            return set_error(PgStatus::PgErrInvalidArgument, "dimensions must be positive");
        }
        let frame_len = (h * w) as usize;
        let slice = std::slice::from_raw_parts(bits, t as usize * frame_len);
        let frames: Vec<MaskFrame> = slice
            .chunks_exact(frame_len)
            .map(|chunk| MaskFrame::from_bits(w, h, chunk))
            .collect();
        match MaskVideo::new(frames) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(PgMaskVideo { inner }));
                PgStatus::PgOk
            }
            Err(e) => set_error(PgStatus::PgErrGeometry, e),
        }
    }))
}

/// Frame count; 0 when the handle is null.
///
/// # Safety
/// `video` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pg_mask_video_frames(video: *const PgMaskVideo) -> u32 {
    if video.is_null() {
        return 0;
    }
    (*video).inner.len() as u32
}

/// # Safety
/// `video` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pg_mask_video_width(video: *const PgMaskVideo) -> u32 {
    if video.is_null() {
        return 0;
    }
    (*video).inner.width()
}

/// # Safety
/// `video` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pg_mask_video_height(video: *const PgMaskVideo) -> u32 {
    if video.is_null() {
        return 0;
    }
    (*video).inner.height()
}

/// Copies one frame's bytes (row-major, 0/1) into `buf` of length `len`.
///
/// # Safety
/// `buf` must point to at least `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn pg_mask_video_frame_bits(
    video: *const PgMaskVideo,
    index: u32,
    buf: *mut u8,
    len: usize,
) -> PgStatus {
    nonnull!(video);
    nonnull!(buf);
    guard(AssertUnwindSafe(|| {
        let v = &(*video).inner;
        let Some(frame) = v.frames().get(index as usize) else {
            return set_error(PgStatus::PgErrInvalidArgument, "frame index out of range");
        };
        if len < frame.bits().len() {
            return set_error(PgStatus::PgErrInvalidArgument, "buffer too small");
        }
        std::ptr::copy_nonoverlapping(frame.bits().as_ptr(), buf, frame.bits().len());
        PgStatus::PgOk
    }))
}

/// # Safety
/// `video` must be null or an owned handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn pg_mask_video_free(video: *mut PgMaskVideo) {
    if !video.is_null() {
        drop(Box::from_raw(video));
    }
}

// ---- EFD series ----

/// Encodes a mask video at harmonic order `d` with `n_points` resampled
/// contour points per frame.
///
/// # Safety
/// `video` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pg_encode_video(
    video: *const PgMaskVideo,
    d: usize,
    n_points: usize,
    out: *mut *mut PgEfdSeries,
) -> PgStatus {
    nonnull!(video);
    nonnull!(out);
    guard(AssertUnwindSafe(|| match encode_video(&(*video).inner, d, n_points) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(PgEfdSeries { inner }));
            PgStatus::PgOk
        }
        Err(e) => set_error(PgStatus::PgErrEfd, e),
    }))
}

/// # Safety
/// `series` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pg_series_channels(series: *const PgEfdSeries) -> u32 {
    if series.is_null() {
        return 0;
    }
    (*series).inner.channel_count() as u32
}

/// # Safety
/// `series` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pg_series_len(series: *const PgEfdSeries) -> u32 {
    if series.is_null() {
        return 0;
    }
    (*series).inner.len() as u32
}

/// Copies the row-major channels x T coefficient matrix into `buf`.
///
/// # Safety
/// `buf` must point to at least `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn pg_series_values(
    series: *const PgEfdSeries,
    buf: *mut f64,
    len: usize,
) -> PgStatus {
    nonnull!(series);
    nonnull!(buf);
    guard(AssertUnwindSafe(|| {
        let flat = (*series).inner.to_flat();
        if len < flat.len() {
            return set_error(PgStatus::PgErrInvalidArgument, "buffer too small");
        }
        std::ptr::copy_nonoverlapping(flat.as_ptr(), buf, flat.len());
        PgStatus::PgOk
    }))
}

/// Builds a series from a row-major channels x T matrix with channels = 4d.
///
/// # Safety
/// `values` must point to at least `4 * d * t` doubles.
#[no_mangle]
pub unsafe extern "C" fn pg_series_from_values(
    d: usize,
    t: usize,
    values: *const f64,
    out: *mut *mut PgEfdSeries,
) -> PgStatus {
    nonnull!(values);
    nonnull!(out);
    guard(AssertUnwindSafe(|| {
        let slice = std::slice::from_raw_parts(values, 4 * d * t);
        match EfdSeries::from_flat(d, t, slice) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(PgEfdSeries { inner }));
                PgStatus::PgOk
            }
            Err(e) => set_error(PgStatus::PgErrEfd, e),
        }
    }))
}

/// Decodes, centers on an h x w canvas, rasterizes, and cleans up topology.
///
/// # Safety
/// `series` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pg_series_to_video(
    series: *const PgEfdSeries,
    h: u32,
    w: u32,
    n_points: usize,
    out: *mut *mut PgMaskVideo,
) -> PgStatus {
    nonnull!(series);
    nonnull!(out);
    guard(AssertUnwindSafe(|| match series_to_video(&(*series).inner, (w, h), n_points) {
        Ok((inner, _)) => {
            *out = Box::into_raw(Box::new(PgMaskVideo { inner }));
            PgStatus::PgOk
        }
        Err(e) => set_error(PgStatus::PgErrGeometry, e),
    }))
}

/// # Safety
/// `path` must be a NUL-terminated string; `series` a live handle.
#[no_mangle]
pub unsafe extern "C" fn pg_series_save_csv(series: *const PgEfdSeries, path: *const c_char) -> PgStatus {
    nonnull!(series);
    let path = match path_from(path) {
        Ok(p) => p,
        Err(s) => return s,
    };
    guard(AssertUnwindSafe(|| match write_series_csv(&(*series).inner, &path) {
        Ok(()) => PgStatus::PgOk,
        Err(e) => set_error(PgStatus::PgErrIo, e),
    }))
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pg_series_load_csv(path: *const c_char, out: *mut *mut PgEfdSeries) -> PgStatus {
    nonnull!(out);
    let path = match path_from(path) {
        Ok(p) => p,
        Err(s) => return s,
    };
    guard(AssertUnwindSafe(|| match read_series_csv(&path) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(PgEfdSeries { inner }));
            PgStatus::PgOk
        }
        Err(e) => set_error(PgStatus::PgErrIo, e),
    }))
}

/// # Safety
/// `series` must be null or an owned handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn pg_series_free(series: *mut PgEfdSeries) {
    if !series.is_null() {
        drop(Box::from_raw(series));
    }
}

// ---- generator models ----

fn extras_usize(extras: &BTreeMap<String, String>, key: &str, default: usize) -> usize {
    extras.get(key).and_then(|v| v.parse().ok()).unwrap_or(default)
}

/// Loads an EFDM checkpoint with its embedded normalization stats.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pg_model_load(path: *const c_char, out: *mut *mut PgModel) -> PgStatus {
    nonnull!(out);
    let path = match path_from(path) {
        Ok(p) => p,
        Err(s) => return s,
    };
    guard(AssertUnwindSafe(|| {
        let (model, extras) = match load_checkpoint(&path) {
            Ok(x) => x,
            Err(e) => return set_error(PgStatus::PgErrDiffusion, e),
        };
        let channels = model.cfg.channels;
        let mut mins = Vec::with_capacity(channels);
        let mut maxs = Vec::with_capacity(channels);
        for i in 0..channels {
            let (Some(lo), Some(hi)) = (
                extras.get(&format!("norm.min.{i}")).and_then(|v| v.parse().ok()),
                extras.get(&format!("norm.max.{i}")).and_then(|v| v.parse().ok()),
            ) else {
                return set_error(PgStatus::PgErrDiffusion, format!("checkpoint missing norm stats for channel {i}"));
            };
            mins.push(lo);
            maxs.push(hi);
        }
        let stats = match NormStats::new(mins, maxs) {
            Ok(s) => s,
            Err(e) => return set_error(PgStatus::PgErrDiffusion, e),
        };
        let handle = PgModel {
            d: extras_usize(&extras, "d", channels / 4),
            n_points: extras_usize(&extras, "n_points", 128),
            k_steps: extras_usize(&extras, "k_steps", 200),
            canvas: (
                extras_usize(&extras, "canvas_w", 96) as u32,
                extras_usize(&extras, "canvas_h", 96) as u32,
            ),
            model,
            stats,
        };
        *out = Box::into_raw(Box::new(handle));
        PgStatus::PgOk
    }))
}

/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pg_model_channels(model: *const PgModel) -> u32 {
    if model.is_null() {
        return 0;
    }
    (*model).model.cfg.channels as u32
}

/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pg_model_seq_len(model: *const PgModel) -> u32 {
    if model.is_null() {
        return 0;
    }
    (*model).model.cfg.seq_len as u32
}

/// Samples one EFD series (denormalized, pixel units). `t_len` 0 uses the
/// training length.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pg_model_sample_series(
    model: *const PgModel,
    t_len: usize,
    seed: u64,
    out: *mut *mut PgEfdSeries,
) -> PgStatus {
    nonnull!(model);
    nonnull!(out);
    guard(AssertUnwindSafe(|| {
        let m = &*model;
        let t = if t_len == 0 { m.model.cfg.seq_len } else { t_len };
        let sched = cosine_schedule(m.k_steps);
        let z = match sample(&m.model, &sched, t, m.model.cfg.channels, seed) {
            Ok(z) => z,
            Err(e) => return set_error(PgStatus::PgErrDiffusion, e),
        };
        let normed = match EfdSeries::from_flat(m.d, t, &z.data) {
            Ok(s) => s,
            Err(e) => return set_error(PgStatus::PgErrEfd, e),
        };
        match invert_norm(&normed, &m.stats) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(PgEfdSeries { inner }));
                PgStatus::PgOk
            }
            Err(e) => set_error(PgStatus::PgErrEfd, e),
        }
    }))
}

/// Samples one phantom mask video (sample, denormalize, decode, rasterize).
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pg_model_generate_video(
    model: *const PgModel,
    t_len: usize,
    seed: u64,
    out: *mut *mut PgMaskVideo,
) -> PgStatus {
    nonnull!(model);
    nonnull!(out);
    let mut series: *mut PgEfdSeries = std::ptr::null_mut();
    let status = pg_model_sample_series(model, t_len, seed, &mut series);
    if status != PgStatus::PgOk {
        return status;
    }
    let m = &*model;
    let status = pg_series_to_video(series, m.canvas.1, m.canvas.0, m.n_points, out);
    pg_series_free(series);
    status
}

/// # Safety
/// `model` must be null or an owned handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn pg_model_free(model: *mut PgModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

// ---- metrics ----

/// Normalized DTW distance between two curves.
///
/// # Safety
/// `x` and `y` must point to `x_len` / `y_len` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pg_dtw_distance(
    x: *const f64,
    x_len: usize,
    y: *const f64,
    y_len: usize,
    out: *mut f64,
) -> PgStatus {
    nonnull!(x);
    nonnull!(y);
    nonnull!(out);
    guard(AssertUnwindSafe(|| {
        let xs = std::slice::from_raw_parts(x, x_len);
        let ys = std::slice::from_raw_parts(y, y_len);
        match dtw_distance(xs, ys) {
            Ok(v) => {
                *out = v;
                PgStatus::PgOk
            }
            Err(e) => set_error(PgStatus::PgErrMetrics, e),
        }
    }))
}

/// Feature ids accepted by [`pg_feature_curve`].
pub const PG_FEATURE_AREA: u32 = 0;
pub const PG_FEATURE_ROUNDNESS: u32 = 1;
pub const PG_FEATURE_ELONGATION: u32 = 2;
pub const PG_FEATURE_CONVEXITY: u32 = 3;

/// Writes one morphological feature curve (length = frame count) into `buf`;
/// frames that fail the phantom predicate yield NaN.
///
/// # Safety
/// `buf` must point to at least `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn pg_feature_curve(
    video: *const PgMaskVideo,
    feature: u32,
    buf: *mut f64,
    len: usize,
) -> PgStatus {
    nonnull!(video);
    nonnull!(buf);
    guard(AssertUnwindSafe(|| {
        let v = &(*video).inner;
        if len < v.len() {
            return set_error(PgStatus::PgErrInvalidArgument, "buffer too small");
        }
        let idx = match feature {
            PG_FEATURE_AREA => 0,
            PG_FEATURE_ROUNDNESS => 1,
            PG_FEATURE_ELONGATION => 2,
            PG_FEATURE_CONVEXITY => 3,
            other => {
                return set_error(PgStatus::PgErrInvalidArgument, format!("unknown feature id {other}"))
            }
        };
        let curves = feature_curves(v);
        for (i, value) in curves[idx].values.iter().enumerate() {
            *buf.add(i) = value.unwrap_or(f64::NAN);
        }
        PgStatus::PgOk
    }))
}
