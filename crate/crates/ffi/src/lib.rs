//! C interface to the `mlcraist` super-resolution library.
//!
//! Images cross the boundary as contiguous planar `f32` buffers in
//! `(batch, channels, height, width)` order with values in `[0, 1]`.
//! Every function returns an [`MlcrStatus`]; on failure the message is
//! available from [`mlcr_last_error_message`] on the same thread.
//! Panics never cross the boundary and are reported as
//! [`MlcrStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use mlcraist::blocks::AfbMode;
use mlcraist::{checkpoint, metrics, ops, Error, MlCraist, ModelConfig, Tensor};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MlcrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    NonFinite = 4,
    Format = 5,
    Io = 6,
    Panic = 7,
}

/// Feature fusion used for the high-frequency bands.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MlcrAfbMode {
    Attention = 0,
    Add = 1,
    Concat = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MlcrConfig {
    pub scale: u32,
    pub width: u32,
    pub n_scatb: u32,
    pub heads: u32,
    pub window: u32,
    pub dwt_levels: u32,
    /// One of the [`MlcrAfbMode`] values.
    pub afb_mode: u32,
    pub use_cab: bool,
    pub use_lhfib: bool,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MlcrScores {
    pub psnr_y: f64,
    pub ssim_y: f64,
    pub epi: f64,
}

/// Opaque model handle.
pub struct MlcrModel {
    inner: MlCraist,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(MlcrStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidArgument(_) => MlcrStatus::InvalidArgument,
            Error::Config(_) => MlcrStatus::Config,
            Error::NonFinite(_) => MlcrStatus::NonFinite,
            Error::Format(_) => MlcrStatus::Format,
            Error::Io { .. } | Error::Image { .. } => MlcrStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(MlcrStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MlcrStatus {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| p.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "panic".into());
        Err(Failure(MlcrStatus::Panic, msg))
    });
    match outcome {
        Ok(()) => {
            set_last_error("");
            MlcrStatus::Ok
        }
        Err(Failure(status, msg)) => {
            set_last_error(&msg);
            status
        }
    }
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure(MlcrStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

fn numel(dims: [usize; 4]) -> Result<usize, Failure> {
    dims.iter()
        .try_fold(1usize, |a, &d| a.checked_mul(d))
        .filter(|&n| n > 0)
        .ok_or_else(|| invalid(format!("bad dimensions {dims:?}")))
}

/// Copy a caller buffer into a tensor.
unsafe fn read_tensor(p: *const f32, dims: [usize; 4], what: &str) -> Result<Tensor, Failure> {
    non_null(p, what)?;
    let n = numel(dims)?;
    let data = std::slice::from_raw_parts(p, n).to_vec();
    Ok(Tensor::from_vec(dims, data)?)
}

unsafe fn write_tensor(t: &Tensor, p: *mut f32, len: usize, what: &str) -> Result<(), Failure> {
    non_null(p, what)?;
    if len != t.numel() {
        return Err(invalid(format!("{what} holds {len} values but {} are needed", t.numel())));
    }
    std::slice::from_raw_parts_mut(p, len).copy_from_slice(t.data());
    Ok(())
}

unsafe fn path_arg<'a>(p: *const c_char) -> Result<&'a Path, Failure> {
    non_null(p, "path")?;
    CStr::from_ptr(p)
        .to_str()
        .map(Path::new)
        .map_err(|_| invalid("path is not valid UTF-8"))
}

unsafe fn model_ref<'a>(m: *const MlcrModel) -> Result<&'a MlCraist, Failure> {
    non_null(m, "model")?;
    Ok(&(*m).inner)
}

fn to_config(c: &MlcrConfig) -> Result<ModelConfig, Failure> {
    let afb_mode = match c.afb_mode {
        m if m == MlcrAfbMode::Attention as u32 => AfbMode::Attention,
        m if m == MlcrAfbMode::Add as u32 => AfbMode::Add,
        m if m == MlcrAfbMode::Concat as u32 => AfbMode::Concat,
        m => return Err(Failure(MlcrStatus::Config, format!("unknown fusion mode {m}"))),
    };
    Ok(ModelConfig {
        scale: c.scale as usize,
        width: c.width as usize,
        n_scatb: c.n_scatb as usize,
        heads: c.heads as usize,
        window: c.window as usize,
        dwt_levels: c.dwt_levels as usize,
        afb_mode,
        use_cab: c.use_cab,
        use_lhfib: c.use_lhfib,
    })
}

fn from_config(c: &ModelConfig) -> MlcrConfig {
    MlcrConfig {
        scale: c.scale as u32,
        width: c.width as u32,
        n_scatb: c.n_scatb as u32,
        heads: c.heads as u32,
        window: c.window as u32,
        dwt_levels: c.dwt_levels as u32,
        afb_mode: match c.afb_mode {
            AfbMode::Attention => MlcrAfbMode::Attention,
            AfbMode::Add => MlcrAfbMode::Add,
            AfbMode::Concat => MlcrAfbMode::Concat,
        } as u32,
        use_cab: c.use_cab,
        use_lhfib: c.use_lhfib,
    }
}

/// Message for the most recent failure on this thread; empty after a
/// success. Valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn mlcr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// The default 64-channel configuration for `scale`.
///
/// # Safety
/// `out` must point to writable memory for one `MlcrConfig`.
#[no_mangle]
pub unsafe extern "C" fn mlcr_config_default(scale: u32, out: *mut MlcrConfig) -> MlcrStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = from_config(&ModelConfig::full(scale as usize));
        Ok(())
    })
}

/// Create a freshly initialized model. Free it with [`mlcr_model_free`].
///
/// # Safety
/// `config` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mlcr_model_new(config: *const MlcrConfig, seed: u64, out: *mut *mut MlcrModel) -> MlcrStatus {
    guard(|| {
        non_null(config, "config")?;
        non_null(out, "out")?;
        let inner = MlCraist::new(to_config(&*config)?, seed)?;
        *out = Box::into_raw(Box::new(MlcrModel { inner }));
        Ok(())
    })
}

/// Load a checkpoint. Free the result with [`mlcr_model_free`].
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mlcr_model_load(path: *const c_char, out: *mut *mut MlcrModel) -> MlcrStatus {
    guard(|| {
        non_null(out, "out")?;
        let inner = checkpoint::load(path_arg(path)?)?;
        *out = Box::into_raw(Box::new(MlcrModel { inner }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn mlcr_model_save(model: *const MlcrModel, path: *const c_char) -> MlcrStatus {
    guard(|| Ok(checkpoint::save(model_ref(model)?, path_arg(path)?)?))
}

/// Release a model. Null is ignored.
///
/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mlcr_model_free(model: *mut MlcrModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mlcr_model_config(model: *const MlcrModel, out: *mut MlcrConfig) -> MlcrStatus {
    guard(|| {
        let m = model_ref(model)?;
        non_null(out, "out")?;
        *out = from_config(&m.config);
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mlcr_model_param_count(model: *const MlcrModel, out: *mut u64) -> MlcrStatus {
    guard(|| {
        let m = model_ref(model)?;
        non_null(out, "out")?;
        *out = m.param_count() as u64;
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mlcr_model_scale(model: *const MlcrModel, out: *mut u32) -> MlcrStatus {
    guard(|| {
        let m = model_ref(model)?;
        non_null(out, "out")?;
        *out = m.scale() as u32;
        Ok(())
    })
}

/// Upscale `batch` RGB images of `height` x `width`. `output` must hold
/// exactly `batch * 3 * (s * height) * (s * width)` values.
///
/// # Safety
/// Buffers must be valid for the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn mlcr_upscale(
    model: *const MlcrModel,
    input: *const f32,
    batch: usize,
    height: usize,
    width: usize,
    output: *mut f32,
    output_len: usize,
) -> MlcrStatus {
    guard(|| {
        let m = model_ref(model)?;
        let x = read_tensor(input, [batch, 3, height, width], "input")?;
        let y = m.forward(&x)?;
        write_tensor(&y, output, output_len, "output")
    })
}

/// Bicubic resampling of `(batch, channels, height, width)` to
/// `out_height` x `out_width`.
///
/// # Safety
/// Buffers must be valid for the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn mlcr_bicubic_resize(
    input: *const f32,
    batch: usize,
    channels: usize,
    height: usize,
    width: usize,
    out_height: usize,
    out_width: usize,
    output: *mut f32,
    output_len: usize,
) -> MlcrStatus {
    guard(|| {
        let x = read_tensor(input, [batch, channels, height, width], "input")?;
        let y = ops::bicubic_resize(&x, out_height, out_width)?;
        write_tensor(&y, output, output_len, "output")
    })
}

/// One level of the orthonormal Haar transform. `height` and `width` must
/// be even; each band buffer holds `batch * channels * height/2 * width/2`
/// values.
///
/// # Safety
/// Buffers must be valid for the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn mlcr_dwt2_haar(
    input: *const f32,
    batch: usize,
    channels: usize,
    height: usize,
    width: usize,
    ll: *mut f32,
    lh: *mut f32,
    hl: *mut f32,
    hh: *mut f32,
) -> MlcrStatus {
    guard(|| {
        let x = read_tensor(input, [batch, channels, height, width], "input")?;
        let bands = mlcraist::dwt2_haar(&x)?;
        let len = bands.ll.numel();
        write_tensor(&bands.ll, ll, len, "ll")?;
        write_tensor(&bands.lh, lh, len, "lh")?;
        write_tensor(&bands.hl, hl, len, "hl")?;
        write_tensor(&bands.hh, hh, len, "hh")
    })
}

/// Inverse of [`mlcr_dwt2_haar`]; `height` and `width` are the band sizes
/// and `output` holds `batch * channels * 2height * 2width` values.
///
/// # Safety
/// Buffers must be valid for the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn mlcr_idwt2_haar(
    ll: *const f32,
    lh: *const f32,
    hl: *const f32,
    hh: *const f32,
    batch: usize,
    channels: usize,
    height: usize,
    width: usize,
    output: *mut f32,
    output_len: usize,
) -> MlcrStatus {
    guard(|| {
        let dims = [batch, channels, height, width];
        let bands = mlcraist::SubBandSet {
            ll: read_tensor(ll, dims, "ll")?,
            lh: read_tensor(lh, dims, "lh")?,
            hl: read_tensor(hl, dims, "hl")?,
            hh: read_tensor(hh, dims, "hh")?,
        };
        write_tensor(&mlcraist::idwt2_haar(&bands)?, output, output_len, "output")
    })
}

/// PSNR in dB (peak 1) over all values; identical inputs give +infinity.
///
/// # Safety
/// `a` and `b` must each hold `batch * channels * height * width` values.
#[no_mangle]
pub unsafe extern "C" fn mlcr_psnr(
    a: *const f32,
    b: *const f32,
    batch: usize,
    channels: usize,
    height: usize,
    width: usize,
    out: *mut f64,
) -> MlcrStatus {
    guard(|| {
        let dims = [batch, channels, height, width];
        let v = metrics::psnr(&read_tensor(a, dims, "a")?, &read_tensor(b, dims, "b")?)?;
        non_null(out, "out")?;
        *out = v;
        Ok(())
    })
}

/// Mean SSIM over every plane; planes must be at least 11x11.
///
/// # Safety
/// `a` and `b` must each hold `batch * channels * height * width` values.
#[no_mangle]
pub unsafe extern "C" fn mlcr_ssim(
    a: *const f32,
    b: *const f32,
    batch: usize,
    channels: usize,
    height: usize,
    width: usize,
    out: *mut f64,
) -> MlcrStatus {
    guard(|| {
        let dims = [batch, channels, height, width];
        let v = metrics::ssim(&read_tensor(a, dims, "a")?, &read_tensor(b, dims, "b")?)?;
        non_null(out, "out")?;
        *out = v;
        Ok(())
    })
}

/// Luma PSNR, SSIM and edge index of RGB `sr` against `gt` after removing
/// `border` pixels from each side.
///
/// # Safety
/// `sr` and `gt` must each hold `batch * 3 * height * width` values.
#[no_mangle]
pub unsafe extern "C" fn mlcr_evaluate(
    sr: *const f32,
    gt: *const f32,
    batch: usize,
    height: usize,
    width: usize,
    border: usize,
    out: *mut MlcrScores,
) -> MlcrStatus {
    guard(|| {
        let dims = [batch, 3, height, width];
        let s = metrics::evaluate(&read_tensor(sr, dims, "sr")?, &read_tensor(gt, dims, "gt")?, border)?;
        non_null(out, "out")?;
        *out = MlcrScores {
            psnr_y: s.psnr_y,
            ssim_y: s.ssim_y,
            epi: s.epi,
        };
        Ok(())
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mlcr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
