//! C ABI over `crgan`.
//!
//! Every function returns a [`CrganStatus`]; results come back through out
//! pointers. On failure the message is kept per thread and read with
//! [`crgan_last_error_message`]. Objects are opaque handles created by a
//! `*_new`/`*_load` function and released with the matching `*_free`.
//!
//! Matrices are row-major `double` arrays in the library's feature-major
//! layout: a batch of `n` points of dimension `d` is `d` rows of `n` values.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use crgan::checkpoint::Checkpoint;
use crgan::config::RunConfig;
use crgan::metrics::{frechet_distance_samples, mode_report};
use crgan::model::Generator;
use crgan::train::{generate, mixture, train};
use crgan::{CRHead, Error, GmmSpec, Rng, Stream, Tensor};

/// Result code of every exported function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CrganStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    Domain = 4,
    Numeric = 5,
    Config = 6,
    Checkpoint = 7,
    Io = 8,
    Divergence = 9,
    Panic = 10,
}

/// Coverage statistics of generated points against the eight-mode ring.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CrganModeReport {
    pub modes_covered: usize,
    pub high_quality_fraction: f64,
}

/// A cascading-rejection head with fixed weights (no spectral normalization).
pub struct CrganCrHead {
    head: CRHead,
}

/// A generator restored from a training checkpoint.
pub struct CrganGenerator {
    generator: Generator,
    spec: GmmSpec,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> CrganStatus {
    match err {
        Error::Dimension { .. } => CrganStatus::Dimension,
        Error::Domain(_) => CrganStatus::Domain,
        Error::Contract(_) => CrganStatus::InvalidArgument,
        Error::DegenerateWeight { .. } | Error::NonFinite(_) | Error::Numeric(_) => CrganStatus::Numeric,
        Error::Config(_) => CrganStatus::Config,
        Error::Checkpoint(_) => CrganStatus::Checkpoint,
        Error::Divergence { .. } => CrganStatus::Divergence,
        Error::Io(_) => CrganStatus::Io,
    }
}

enum Fail {
    Null(&'static str),
    Invalid(String),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CrganStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CrganStatus::Ok,
        Ok(Err(Fail::Null(name))) => {
            set_error(format!("null pointer: {name}"));
            CrganStatus::NullPointer
        }
        Ok(Err(Fail::Invalid(msg))) => {
            set_error(msg);
            CrganStatus::InvalidArgument
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            CrganStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, name: &'static str) -> Result<*const T, Fail> {
    if p.is_null() {
        Err(Fail::Null(name))
    } else {
        Ok(p)
    }
}

unsafe fn input<'a>(p: *const f64, len: usize, name: &'static str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    Ok(slice::from_raw_parts(non_null(p, name)?, len))
}

unsafe fn output<'a, T>(p: *mut T, len: usize, name: &'static str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    Ok(slice::from_raw_parts_mut(non_null(p, name)? as *mut T, len))
}

unsafe fn c_str<'a>(p: *const c_char, name: &'static str) -> Result<&'a str, Fail> {
    CStr::from_ptr(non_null(p, name)?)
        .to_str()
        .map_err(|_| Fail::Invalid(format!("{name} is not valid UTF-8")))
}

/// Message of the last failed call on this thread, or NULL if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn crgan_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn crgan_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// `out = v − (w·v / w·w)·w` for vectors of length `len`.
///
/// # Safety
/// `v`, `w` and `out` must each point to `len` doubles; `out` may alias neither input.
#[no_mangle]
pub unsafe extern "C" fn crgan_reject(v: *const f64, w: *const f64, len: usize, out: *mut f64) -> CrganStatus {
    guard(|| {
        let v = input(v, len, "v")?;
        let w = input(w, len, "w")?;
        let out = output(out, len, "out")?;
        out.copy_from_slice(&crgan::cr_head::reject(v, w)?);
        Ok(())
    })
}

/// Creates a head from `n_scores × feature_dim` row-major weights.
///
/// # Safety
/// `weights` must point to `n_scores * feature_dim` doubles and `out` to a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn crgan_cr_head_new(
    weights: *const f64,
    n_scores: usize,
    feature_dim: usize,
    out: *mut *mut CrganCrHead,
) -> CrganStatus {
    guard(|| {
        let out = output(out, 1, "out")?;
        let data = input(weights, n_scores * feature_dim, "weights")?.to_vec();
        let head = CRHead::from_weights(Tensor::from_vec(n_scores, feature_dim, data)?, false)?;
        out[0] = Box::into_raw(Box::new(CrganCrHead { head }));
        Ok(())
    })
}

/// Scores a `feature_dim × batch` feature matrix into `n_scores × batch` scores.
///
/// # Safety
/// `head` must come from [`crgan_cr_head_new`]; `features` must hold
/// `feature_dim * batch` doubles and `scores` room for `n_scores * batch`.
#[no_mangle]
pub unsafe extern "C" fn crgan_cr_head_scores(
    head: *const CrganCrHead,
    features: *const f64,
    batch: usize,
    scores: *mut f64,
) -> CrganStatus {
    guard(|| {
        let head = &(*non_null(head, "head")?).head;
        let (n, c) = (head.num_scores(), head.feature_dim());
        let v = Tensor::from_vec(c, batch, input(features, c * batch, "features")?.to_vec())?;
        let s = head.scores(&v)?;
        output(scores, n * batch, "scores")?.copy_from_slice(s.data());
        Ok(())
    })
}

/// Number of scores `N` produced by `head`.
///
/// # Safety
/// `head` must come from [`crgan_cr_head_new`]; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn crgan_cr_head_num_scores(head: *const CrganCrHead, out: *mut usize) -> CrganStatus {
    guard(|| {
        let head = &(*non_null(head, "head")?).head;
        output(out, 1, "out")?[0] = head.num_scores();
        Ok(())
    })
}

/// Releases a head. NULL is ignored.
///
/// # Safety
/// `head` must come from [`crgan_cr_head_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn crgan_cr_head_free(head: *mut CrganCrHead) {
    if !head.is_null() {
        drop(Box::from_raw(head));
    }
}

/// Fréchet distance between Gaussian fits of two `dim × n` sample matrices.
///
/// # Safety
/// `a` must hold `dim * n_a` doubles, `b` `dim * n_b` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn crgan_frechet_distance(
    a: *const f64,
    n_a: usize,
    b: *const f64,
    n_b: usize,
    dim: usize,
    out: *mut f64,
) -> CrganStatus {
    guard(|| {
        let ta = Tensor::from_vec(dim, n_a, input(a, dim * n_a, "a")?.to_vec())?;
        let tb = Tensor::from_vec(dim, n_b, input(b, dim * n_b, "b")?.to_vec())?;
        output(out, 1, "out")?[0] = frechet_distance_samples(&ta, &tb)?;
        Ok(())
    })
}

/// Mode coverage of `2 × n` points against the eight-mode ring (radius 2, σ 0.05).
///
/// # Safety
/// `points` must hold `2 * n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn crgan_mode_report_ring8(
    points: *const f64,
    n: usize,
    out: *mut CrganModeReport,
) -> CrganStatus {
    guard(|| {
        let t = Tensor::from_vec(2, n, input(points, 2 * n, "points")?.to_vec())?;
        let r = mode_report(&t, &GmmSpec::ring8(), None)?;
        output(out, 1, "out")?[0] = CrganModeReport {
            modes_covered: r.modes_covered,
            high_quality_fraction: r.high_quality_fraction,
        };
        Ok(())
    })
}

/// Loads the generator stored in a checkpoint file.
///
/// # Safety
/// `path` must be a NUL-terminated UTF-8 string; `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn crgan_generator_load(path: *const c_char, out: *mut *mut CrganGenerator) -> CrganStatus {
    guard(|| {
        let out = output(out, 1, "out")?;
        let ckpt = Checkpoint::load(Path::new(c_str(path, "path")?))?;
        let cfg = RunConfig::parse(&ckpt.config_text)?;
        out[0] = Box::into_raw(Box::new(CrganGenerator {
            generator: ckpt.generator,
            spec: mixture(&cfg),
        }));
        Ok(())
    })
}

/// Whether the generator takes class labels (1) or not (0).
///
/// # Safety
/// `generator` must come from [`crgan_generator_load`]; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn crgan_generator_is_conditional(
    generator: *const CrganGenerator,
    out: *mut i32,
) -> CrganStatus {
    guard(|| {
        let g = &*non_null(generator, "generator")?;
        output(out, 1, "out")?[0] = g.generator.is_conditional() as i32;
        Ok(())
    })
}

/// Draws `n` points into `points` (`2 × n`). For a conditional generator the
/// sampled labels go to `labels` when it is non-NULL.
///
/// # Safety
/// `generator` must come from [`crgan_generator_load`]; `points` must have
/// room for `2 * n` doubles and `labels`, if non-NULL, for `n` values.
#[no_mangle]
pub unsafe extern "C" fn crgan_generator_sample(
    generator: *const CrganGenerator,
    n: usize,
    seed: u64,
    points: *mut f64,
    labels: *mut usize,
) -> CrganStatus {
    guard(|| {
        let g = &*non_null(generator, "generator")?;
        let out = output(points, 2 * n, "points")?;
        let batch = generate(&g.generator, &g.spec, n, &mut Rng::new(seed, Stream::Eval))?;
        out.copy_from_slice(batch.points.data());
        if let (Some(l), false) = (&batch.labels, labels.is_null()) {
            output(labels, n, "labels")?.copy_from_slice(l);
        }
        Ok(())
    })
}

/// Releases a generator. NULL is ignored.
///
/// # Safety
/// `generator` must come from [`crgan_generator_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn crgan_generator_free(generator: *mut CrganGenerator) {
    if !generator.is_null() {
        drop(Box::from_raw(generator));
    }
}

/// Trains one run from `key=value` config text and reports its final metrics.
///
/// # Safety
/// `config_text` must be a NUL-terminated UTF-8 string; `final_fd` and
/// `final_report` must be writable.
#[no_mangle]
pub unsafe extern "C" fn crgan_train(
    config_text: *const c_char,
    final_fd: *mut f64,
    final_report: *mut CrganModeReport,
) -> CrganStatus {
    guard(|| {
        let cfg = RunConfig::parse(c_str(config_text, "config_text")?)?;
        let fd_out = output(final_fd, 1, "final_fd")?;
        let report_out = output(final_report, 1, "final_report")?;
        let log = train(&cfg)?;
        fd_out[0] = log.final_fd();
        report_out[0] = CrganModeReport {
            modes_covered: log.final_report().modes_covered,
            high_quality_fraction: log.final_report().high_quality_fraction,
        };
        Ok(())
    })
}
