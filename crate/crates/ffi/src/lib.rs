//! C ABI over `locnet-core`: dataset generation and I/O, checkpoint loading,
//! prediction and scoring.
//!
//! Every function returns a [`LocnetStatus`]. On failure the message is kept
//! per thread and can be read with [`locnet_last_error`]. Objects cross the
//! boundary as opaque pointers that must be released with their `_free`
//! function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use locnet_core::channel::path_loss;
use locnet_core::dataset::{self, build_dataset, Dataset, DatasetSpec, Encoding};
use locnet_core::eval::{evaluate, predict};
use locnet_core::locnet::{load_checkpoint, param_count, Checkpoint};
use locnet_core::scenario::ScenarioConfig;
use locnet_core::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocnetStatus {
    Ok = 0,
    InvalidArgument = 1,
    Config = 2,
    Shape = 3,
    Format = 4,
    Numeric = 5,
    Io = 6,
    NullPointer = 7,
    Panic = 8,
}

/// Encoded dataset.
pub struct LocnetDataset(Dataset);

/// Trained model with the encoding it expects.
pub struct LocnetModel(Checkpoint);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

fn status_of(err: &Error) -> LocnetStatus {
    match err {
        Error::Config(_) => LocnetStatus::Config,
        Error::InvalidArgument(_) => LocnetStatus::InvalidArgument,
        Error::Shape(_) => LocnetStatus::Shape,
        Error::Format(_) => LocnetStatus::Format,
        Error::Numeric(_) => LocnetStatus::Numeric,
        Error::Io(_) => LocnetStatus::Io,
    }
}

enum Failure {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> LocnetStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_error("");
            LocnetStatus::Ok
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(&format!("null pointer passed as {what}"));
            LocnetStatus::NullPointer
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic");
            LocnetStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn out_slot<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(Failure::Null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Error::InvalidArgument("path is not valid UTF-8".into()))?;
    Ok(PathBuf::from(s))
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn locnet_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn locnet_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// InF path loss in dB for a 3-D distance in metres and a carrier in GHz.
///
/// # Safety
/// `out_db` must be null or point to writable memory for one `double`.
#[no_mangle]
pub unsafe extern "C" fn locnet_path_loss_db(d_3d_m: f64, carrier_ghz: f64, out_db: *mut f64) -> LocnetStatus {
    guard(|| {
        let out = out_slot(out_db, "out_db")?;
        *out = path_loss(d_3d_m, carrier_ghz)?;
        Ok(())
    })
}

/// Simulates `n_samples` UEs on the laptop-scale layout (8 TRPs, 64 taps)
/// with every TRP present and clean labels. `encoding` is 0 (CIR),
/// 1 (CIR+RSRP) or 2 (CIR+RSRP+ratio).
///
/// # Safety
/// `out` must be null or point to writable memory for one pointer.
#[no_mangle]
pub unsafe extern "C" fn locnet_dataset_generate(
    encoding: u8,
    n_samples: usize,
    seed: u64,
    out: *mut *mut LocnetDataset,
) -> LocnetStatus {
    guard(|| {
        let slot = out_slot(out, "out")?;
        *slot = ptr::null_mut();
        let scenario = ScenarioConfig::desk();
        let spec = DatasetSpec::simple(Encoding::from_id(encoding)?, scenario.n_trp, n_samples, seed);
        let ds = build_dataset(&spec, &scenario)?;
        *slot = Box::into_raw(Box::new(LocnetDataset(ds)));
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must point to writable
/// memory for one pointer.
#[no_mangle]
pub unsafe extern "C" fn locnet_dataset_load(path: *const c_char, out: *mut *mut LocnetDataset) -> LocnetStatus {
    guard(|| {
        let slot = out_slot(out, "out")?;
        *slot = ptr::null_mut();
        let ds = dataset::load(&path_arg(path)?)?;
        *slot = Box::into_raw(Box::new(LocnetDataset(ds)));
        Ok(())
    })
}

/// # Safety
/// `ds` must come from this library and not be freed; `path` must be a
/// NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn locnet_dataset_save(ds: *const LocnetDataset, path: *const c_char) -> LocnetStatus {
    guard(|| {
        let ds = borrow(ds, "dataset")?;
        dataset::save(&ds.0, &path_arg(path)?)?;
        Ok(())
    })
}

/// Sample count and `[rows, taps, channels]` of one sample.
///
/// # Safety
/// `ds` must be a live dataset handle; `out_len` must be writable and
/// `out_dims` must point to three writable `size_t`.
#[no_mangle]
pub unsafe extern "C" fn locnet_dataset_shape(
    ds: *const LocnetDataset,
    out_len: *mut usize,
    out_dims: *mut usize,
) -> LocnetStatus {
    guard(|| {
        let ds = borrow(ds, "dataset")?;
        *out_slot(out_len, "out_len")? = ds.0.len();
        if out_dims.is_null() {
            return Err(Failure::Null("out_dims"));
        }
        std::slice::from_raw_parts_mut(out_dims, 3).copy_from_slice(&ds.0.dims);
        Ok(())
    })
}

/// Releases a dataset; null is ignored.
///
/// # Safety
/// `ds` must be null or a handle from this library that was not freed yet.
#[no_mangle]
pub unsafe extern "C" fn locnet_dataset_free(ds: *mut LocnetDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Loads a checkpoint written by the training tool.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must point to writable
/// memory for one pointer.
#[no_mangle]
pub unsafe extern "C" fn locnet_model_load(path: *const c_char, out: *mut *mut LocnetModel) -> LocnetStatus {
    guard(|| {
        let slot = out_slot(out, "out")?;
        *slot = ptr::null_mut();
        let ckpt = load_checkpoint(&path_arg(path)?)?;
        *slot = Box::into_raw(Box::new(LocnetModel(ckpt)));
        Ok(())
    })
}

/// # Safety
/// `model` must be a live model handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn locnet_model_param_count(model: *const LocnetModel, out: *mut usize) -> LocnetStatus {
    guard(|| {
        let m = borrow(model, "model")?;
        *out_slot(out, "out")? = param_count(&m.0.model);
        Ok(())
    })
}

fn check_encoding(m: &LocnetModel, ds: &LocnetDataset) -> Result<(), Failure> {
    if m.0.encoding != ds.0.encoding {
        return Err(Error::InvalidArgument(format!(
            "model was trained on {} inputs but the dataset is encoded as {}",
            m.0.encoding, ds.0.encoding
        ))
        .into());
    }
    Ok(())
}

/// Writes `(x, y)` per sample into `out_xy`, which must hold
/// `2 * capacity_samples` doubles.
///
/// # Safety
/// `model` and `ds` must be live handles; `out_xy` must point to
/// `2 * capacity_samples` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn locnet_model_predict(
    model: *mut LocnetModel,
    ds: *const LocnetDataset,
    out_xy: *mut f64,
    capacity_samples: usize,
) -> LocnetStatus {
    guard(|| {
        let m = out_slot(model, "model")?;
        let ds = borrow(ds, "dataset")?;
        check_encoding(m, ds)?;
        if out_xy.is_null() {
            return Err(Failure::Null("out_xy"));
        }
        if capacity_samples < ds.0.len() {
            return Err(Error::InvalidArgument(format!(
                "output holds {} samples, dataset has {}",
                capacity_samples,
                ds.0.len()
            ))
            .into());
        }
        let preds = predict(&mut m.0.model, &ds.0, 256)?;
        let out = std::slice::from_raw_parts_mut(out_xy, 2 * preds.len());
        for (dst, p) in out.chunks_exact_mut(2).zip(&preds) {
            dst.copy_from_slice(p);
        }
        Ok(())
    })
}

/// 90th-percentile horizontal error in metres. `clean_labels` non-zero
/// scores against the noise-free positions.
///
/// # Safety
/// `model` and `ds` must be live handles; `out_p90_m` must be writable.
#[no_mangle]
pub unsafe extern "C" fn locnet_model_p90(
    model: *mut LocnetModel,
    ds: *const LocnetDataset,
    clean_labels: i32,
    out_p90_m: *mut f64,
) -> LocnetStatus {
    guard(|| {
        let m = out_slot(model, "model")?;
        let ds = borrow(ds, "dataset")?;
        check_encoding(m, ds)?;
        let out = out_slot(out_p90_m, "out_p90_m")?;
        *out = evaluate(&mut m.0.model, &ds.0, clean_labels != 0)?.p90_m;
        Ok(())
    })
}

/// Releases a model; null is ignored.
///
/// # Safety
/// `model` must be null or a handle from this library that was not freed yet.
#[no_mangle]
pub unsafe extern "C" fn locnet_model_free(model: *mut LocnetModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
