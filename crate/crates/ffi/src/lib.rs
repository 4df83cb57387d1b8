//! C ABI for the co-saliency engine.
//!
//! Build a group with [`cosal_group_new`], add images and their input maps,
//! call [`cosal_run`], then read maps back from the returned result. Every
//! fallible call returns a [`CosalStatus`]; the message of the most recent
//! failure on the calling thread is available from [`cosal_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cosal::{DepthMap, Error, GroupImage, ImageGroup, InputSaliencySet, PipelineConfig, PixelMap, RgbImage};

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CosalStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    EmptyGroup = 4,
    OutOfRange = 5,
    BufferTooSmall = 6,
    Failed = 7,
    Panic = 8,
}

/// Pipeline parameters. Obtain defaults from [`cosal_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosalConfig {
    pub n_superpixels: u32,
    pub k_roots: u32,
    pub kappa: u32,
    pub i_max: u32,
    pub t1: f64,
    pub t2: f64,
    pub sigma2: f64,
    pub zeta: f64,
    pub beta2: f64,
    pub row_normalize: bool,
}

impl From<&PipelineConfig> for CosalConfig {
    fn from(c: &PipelineConfig) -> Self {
        Self {
            n_superpixels: c.n_superpixels as u32,
            k_roots: c.k_roots as u32,
            kappa: c.kappa as u32,
            i_max: c.i_max as u32,
            t1: c.t1,
            t2: c.t2,
            sigma2: c.sigma2,
            zeta: c.zeta,
            beta2: c.beta2,
            row_normalize: c.row_normalize,
        }
    }
}

impl From<&CosalConfig> for PipelineConfig {
    fn from(c: &CosalConfig) -> Self {
        Self {
            n_superpixels: c.n_superpixels as usize,
            k_roots: c.k_roots as usize,
            kappa: c.kappa as usize,
            i_max: c.i_max as usize,
            t1: c.t1,
            t2: c.t2,
            sigma2: c.sigma2,
            zeta: c.zeta,
            beta2: c.beta2,
            row_normalize: c.row_normalize,
            methods: Vec::new(),
        }
    }
}

/// An image group under construction. Opaque.
pub struct CosalGroup {
    group: ImageGroup,
}

/// Output maps of one run. Opaque.
pub struct CosalResult {
    maps: Vec<PixelMap>,
    iterations: Vec<u32>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> CosalStatus {
    match err {
        Error::DimensionMismatch { .. } | Error::BufferLength { .. } | Error::ImageTooSmall { .. } => {
            CosalStatus::DimensionMismatch
        }
        Error::InvalidParameter(_) | Error::InvalidInput(_) => CosalStatus::InvalidArgument,
        Error::EmptyGroup => CosalStatus::EmptyGroup,
        _ => CosalStatus::Failed,
    }
}

struct Fail(CosalStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn fail(status: CosalStatus, msg: &str) -> Fail {
    Fail(status, msg.to_owned())
}

/// Runs `f`, converting errors and panics into a status and a stored message.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CosalStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CosalStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("panic: {msg}"));
            CosalStatus::Panic
        }
    }
}

fn pixel_count(width: u32, height: u32) -> Result<usize, Fail> {
    (width as usize)
        .checked_mul(height as usize)
        .ok_or_else(|| fail(CosalStatus::InvalidArgument, "image dimensions overflow"))
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cosal_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cosal_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn cosal_config_default() -> CosalConfig {
    CosalConfig::from(&PipelineConfig::default())
}

#[no_mangle]
pub extern "C" fn cosal_group_new() -> *mut CosalGroup {
    Box::into_raw(Box::new(CosalGroup { group: ImageGroup::default() }))
}

/// # Safety
/// `group` must be NULL or a pointer from [`cosal_group_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cosal_group_free(group: *mut CosalGroup) {
    if !group.is_null() {
        drop(Box::from_raw(group));
    }
}

/// Number of images added so far; 0 for NULL.
///
/// # Safety
/// `group` must be NULL or a live group handle.
#[no_mangle]
pub unsafe extern "C" fn cosal_group_len(group: *const CosalGroup) -> usize {
    group.as_ref().map_or(0, |g| g.group.len())
}

/// Adds an image. `rgb` holds `width * height * 3` bytes, row-major RGB.
/// `depth` is NULL (RGB-only) or `width * height` raw depth values of any
/// finite range; they are min-max normalized. The new image index is written
/// to `out_index` when it is not NULL.
///
/// # Safety
/// `group` must be a live group handle; `rgb` and a non-NULL `depth` must
/// point to buffers of the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn cosal_group_add_image(
    group: *mut CosalGroup,
    rgb: *const u8,
    width: u32,
    height: u32,
    depth: *const f64,
    out_index: *mut u32,
) -> CosalStatus {
    guard(|| {
        let g = group.as_mut().ok_or_else(|| fail(CosalStatus::NullPointer, "group is NULL"))?;
        if rgb.is_null() {
            return Err(fail(CosalStatus::NullPointer, "rgb is NULL"));
        }
        let n = pixel_count(width, height)?;
        let (w, h) = (width as usize, height as usize);
        let bytes = std::slice::from_raw_parts(rgb, n * 3);
        let rgb = RgbImage::from_packed(w, h, bytes)?;
        let depth = if depth.is_null() {
            None
        } else {
            Some(DepthMap::from_raw(w, h, std::slice::from_raw_parts(depth, n))?)
        };
        let index = g.group.len();
        g.group.images.push(GroupImage {
            name: format!("image{index}"),
            rgb,
            depth,
            ground_truth: None,
            saliency: InputSaliencySet::new(),
        });
        if let Some(out) = out_index.as_mut() {
            *out = index as u32;
        }
        Ok(())
    })
}

/// Adds one 8-bit input saliency map (`width * height` bytes, same size as
/// the image) to image `index` under the given method name.
///
/// # Safety
/// `group` must be a live group handle, `method` a NUL-terminated string and
/// `map` a buffer of the image's pixel count.
#[no_mangle]
pub unsafe extern "C" fn cosal_group_add_saliency(
    group: *mut CosalGroup,
    index: u32,
    method: *const c_char,
    map: *const u8,
) -> CosalStatus {
    guard(|| {
        let g = group.as_mut().ok_or_else(|| fail(CosalStatus::NullPointer, "group is NULL"))?;
        if method.is_null() || map.is_null() {
            return Err(fail(CosalStatus::NullPointer, "method or map is NULL"));
        }
        let method = CStr::from_ptr(method)
            .to_str()
            .map_err(|_| fail(CosalStatus::InvalidArgument, "method name is not UTF-8"))?;
        let img = g
            .group
            .images
            .get_mut(index as usize)
            .ok_or_else(|| fail(CosalStatus::OutOfRange, "image index out of range"))?;
        let (w, h) = (img.rgb.width(), img.rgb.height());
        let bytes = std::slice::from_raw_parts(map, w * h);
        img.saliency.push(method, PixelMap::from_gray8(w, h, bytes)?);
        Ok(())
    })
}

/// Runs the pipeline. `config` may be NULL for defaults. On success a new
/// result handle is written to `out`; release it with [`cosal_result_free`].
///
/// # Safety
/// `group` must be a live group handle, `config` NULL or valid, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn cosal_run(
    group: *const CosalGroup,
    config: *const CosalConfig,
    out: *mut *mut CosalResult,
) -> CosalStatus {
    guard(|| {
        let g = group.as_ref().ok_or_else(|| fail(CosalStatus::NullPointer, "group is NULL"))?;
        if out.is_null() {
            return Err(fail(CosalStatus::NullPointer, "out is NULL"));
        }
        let config = config.as_ref().map_or_else(PipelineConfig::default, PipelineConfig::from);
        let run = cosal::run_group(&g.group, &config)?;
        let result = CosalResult {
            maps: run.final_maps,
            iterations: run.iterations_used.iter().map(|&t| t as u32).collect(),
        };
        *out = Box::into_raw(Box::new(result));
        Ok(())
    })
}

/// # Safety
/// `result` must be NULL or a pointer from [`cosal_run`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cosal_result_free(result: *mut CosalResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// # Safety
/// `result` must be NULL or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn cosal_result_len(result: *const CosalResult) -> usize {
    result.as_ref().map_or(0, |r| r.maps.len())
}

/// Copies the final map of image `index` as 8-bit grayscale into `buffer`,
/// which must hold at least `width * height` bytes (`capacity`).
///
/// # Safety
/// `result` must be a live result handle and `buffer` writable for `capacity` bytes.
#[no_mangle]
pub unsafe extern "C" fn cosal_result_copy_map(
    result: *const CosalResult,
    index: u32,
    buffer: *mut u8,
    capacity: usize,
) -> CosalStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| fail(CosalStatus::NullPointer, "result is NULL"))?;
        if buffer.is_null() {
            return Err(fail(CosalStatus::NullPointer, "buffer is NULL"));
        }
        let map = r
            .maps
            .get(index as usize)
            .ok_or_else(|| fail(CosalStatus::OutOfRange, "image index out of range"))?;
        let bytes = map.to_gray8();
        if capacity < bytes.len() {
            return Err(Fail(
                CosalStatus::BufferTooSmall,
                format!("buffer holds {capacity} bytes, map needs {}", bytes.len()),
            ));
        }
        ptr::copy_nonoverlapping(bytes.as_ptr(), buffer, bytes.len());
        Ok(())
    })
}

/// Iterations run for image `index`, written to `out`.
///
/// # Safety
/// `result` must be a live result handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn cosal_result_iterations(result: *const CosalResult, index: u32, out: *mut u32) -> CosalStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| fail(CosalStatus::NullPointer, "result is NULL"))?;
        let out = out.as_mut().ok_or_else(|| fail(CosalStatus::NullPointer, "out is NULL"))?;
        *out = *r
            .iterations
            .get(index as usize)
            .ok_or_else(|| fail(CosalStatus::OutOfRange, "image index out of range"))?;
        Ok(())
    })
}

/// Weighted F-measure of a precision/recall pair.
#[no_mangle]
pub extern "C" fn cosal_f_measure(precision: f64, recall: f64, beta2: f64) -> f64 {
    cosal::evaluation::f_measure(precision, recall, beta2)
}

/// ROC AUC of an 8-bit map against an 8-bit mask (foreground above 127).
///
/// # Safety
/// `map` and `ground_truth` must each hold `width * height` bytes; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cosal_auc(
    map: *const u8,
    ground_truth: *const u8,
    width: u32,
    height: u32,
    out: *mut f64,
) -> CosalStatus {
    guard(|| {
        if map.is_null() || ground_truth.is_null() || out.is_null() {
            return Err(fail(CosalStatus::NullPointer, "NULL argument"));
        }
        let n = pixel_count(width, height)?;
        let (w, h) = (width as usize, height as usize);
        let m = PixelMap::from_gray8(w, h, std::slice::from_raw_parts(map, n))?;
        let g = PixelMap::mask_from_gray8(w, h, std::slice::from_raw_parts(ground_truth, n))?;
        *out = cosal::evaluation::auc(&m, &g)?;
        Ok(())
    })
}
