//! C ABI for redrisk.
//!
//! Objects cross the boundary as opaque handles that the caller frees with
//! the matching `*_free` function. Every fallible call returns an
//! [`RrStatus`]; the message for the most recent failure on the calling
//! thread is available from [`rr_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use redrisk::cohort::{generate_synthetic_cohort, load_cohort, save_cohort, CohortDataset, CohortFormat, SyntheticConfig};
use redrisk::config::{parse_and_validate_config, Config};
use redrisk::eval::{auc_mann_whitney, confusion_metrics, run_to_dir, scores_to_csv, ModelArchive, ScoreRow};
use redrisk::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ConfigError = 3,
    DataError = 4,
    IoError = 5,
    OutOfRange = 6,
    Panic = 7,
}

/// A loaded or generated cohort.
pub struct RrCohort(CohortDataset);

/// A model archive written by an experiment run.
pub struct RrArchive(ModelArchive);

/// Scores produced by [`rr_archive_score`].
pub struct RrScores(Vec<ScoreRow>);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> RrStatus {
    match e {
        Error::Config(_) => RrStatus::ConfigError,
        Error::Io { .. } => RrStatus::IoError,
        Error::Cell { source, .. } => status_of(source),
        _ => RrStatus::DataError,
    }
}

enum Failure {
    Status(RrStatus, String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn null() -> Failure {
    Failure::Status(RrStatus::NullPointer, "unexpected null pointer".into())
}

/// Runs `f`, recording the message of any error or panic.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> RrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RrStatus::Ok,
        Ok(Err(Failure::Status(s, m))) => {
            set_error(&m);
            s
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic");
            RrStatus::Panic
        }
    }
}

unsafe fn opt_str<'a>(p: *const c_char) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Some)
        .map_err(|_| Failure::Status(RrStatus::InvalidUtf8, "string argument is not UTF-8".into()))
}

unsafe fn req_str<'a>(p: *const c_char) -> Result<&'a str, Failure> {
    opt_str(p)?.ok_or_else(null)
}

unsafe fn slice<'a, T>(p: *const T, n: usize) -> Result<&'a [T], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null());
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn write<T>(p: *mut T, v: T) {
    if !p.is_null() {
        *p = v;
    }
}

fn cohort_format(path: &str, format: Option<&str>) -> Result<CohortFormat, Failure> {
    Ok(match format {
        Some(f) => f.parse()?,
        None => CohortFormat::detect(path.as_ref())?,
    })
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Generates a synthetic cohort. `synthetic_toml` holds the body of a
/// `[cohort.synthetic]` section, or null for defaults.
///
/// # Safety
/// `synthetic_toml` is null or a valid C string; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rr_cohort_generate(
    synthetic_toml: *const c_char,
    seed: u64,
    out: *mut *mut RrCohort,
) -> RrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let cfg: SyntheticConfig = match opt_str(synthetic_toml)? {
            Some(t) => toml_synthetic(t)?,
            None => SyntheticConfig::default(),
        };
        cfg.validate()?;
        let ds = generate_synthetic_cohort(&cfg, seed)?;
        *out = Box::into_raw(Box::new(RrCohort(ds)));
        Ok(())
    })
}

fn toml_synthetic(text: &str) -> Result<SyntheticConfig, Failure> {
    let wrapped = format!("[cohort.synthetic]\n{text}");
    Ok(Config::from_toml(&wrapped)?.cohort.synthetic)
}

/// Loads a cohort file. `format` is `event-lines`, `cohort-archive` or null
/// to detect it.
///
/// # Safety
/// `path` is a valid C string, `format` is null or a valid C string, `out`
/// is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rr_cohort_load(
    path: *const c_char,
    format: *const c_char,
    out: *mut *mut RrCohort,
) -> RrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let path = req_str(path)?;
        let format = cohort_format(path, opt_str(format)?)?;
        let ds = load_cohort(path.as_ref(), format)?;
        ds.validate()?;
        *out = Box::into_raw(Box::new(RrCohort(ds)));
        Ok(())
    })
}

/// # Safety
/// `cohort` is a live handle; `path` and `format` as for [`rr_cohort_load`],
/// except that a null `format` means `event-lines`.
#[no_mangle]
pub unsafe extern "C" fn rr_cohort_save(
    cohort: *const RrCohort,
    path: *const c_char,
    format: *const c_char,
) -> RrStatus {
    guard(|| {
        let c = cohort.as_ref().ok_or_else(null)?;
        let path = req_str(path)?;
        let format = match opt_str(format)? {
            Some(f) => f.parse()?,
            None => CohortFormat::EventLines,
        };
        save_cohort(&c.0, path.as_ref(), format)?;
        Ok(())
    })
}

/// Patient and assessment counts of a cohort.
///
/// # Safety
/// `cohort` is a live handle; the out pointers are valid or null.
#[no_mangle]
pub unsafe extern "C" fn rr_cohort_counts(
    cohort: *const RrCohort,
    patients: *mut usize,
    assessments: *mut usize,
) -> RrStatus {
    guard(|| {
        let c = cohort.as_ref().ok_or_else(null)?;
        write(patients, c.0.patients.len());
        write(assessments, c.0.n_assessments());
        Ok(())
    })
}

/// # Safety
/// `cohort` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rr_cohort_free(cohort: *mut RrCohort) {
    if !cohort.is_null() {
        drop(Box::from_raw(cohort));
    }
}

/// Mann-Whitney AUC with its 95% interval. Labels are +1 / -1.
///
/// # Safety
/// `labels` and `scores` point to `n` readable values; out pointers are
/// valid or null.
#[no_mangle]
pub unsafe extern "C" fn rr_auc(
    labels: *const i8,
    scores: *const f64,
    n: usize,
    auc: *mut f64,
    ci_lo: *mut f64,
    ci_hi: *mut f64,
) -> RrStatus {
    guard(|| {
        let r = auc_mann_whitney(slice(labels, n)?, slice(scores, n)?)?;
        write(auc, r.auc);
        write(ci_lo, r.ci_lo);
        write(ci_hi, r.ci_hi);
        Ok(())
    })
}

/// Recall, precision and F-measure of +1 / -1 predictions.
///
/// # Safety
/// `labels` and `predicted` point to `n` readable values; out pointers are
/// valid or null.
#[no_mangle]
pub unsafe extern "C" fn rr_confusion(
    labels: *const i8,
    predicted: *const i8,
    n: usize,
    recall: *mut f64,
    precision: *mut f64,
    f_measure: *mut f64,
) -> RrStatus {
    guard(|| {
        let m = confusion_metrics(slice(labels, n)?, slice(predicted, n)?)?;
        write(recall, m.recall);
        write(precision, m.precision);
        write(f_measure, m.f_measure);
        Ok(())
    })
}

/// Runs the experiment protocol into `out_dir`. A null `config_path` runs
/// the default configuration. `n_rows` receives the metric row count.
///
/// # Safety
/// `config_path` is null or a valid C string, `out_dir` is a valid C string,
/// `n_rows` is valid or null.
#[no_mangle]
pub unsafe extern "C" fn rr_run_experiment(
    config_path: *const c_char,
    out_dir: *const c_char,
    n_rows: *mut usize,
) -> RrStatus {
    guard(|| {
        let out_dir = PathBuf::from(req_str(out_dir)?);
        let config_path = opt_str(config_path)?.map(PathBuf::from);
        let (cfg, bytes) = match &config_path {
            Some(p) => parse_and_validate_config(p)?,
            None => (Config::default(), Vec::new()),
        };
        let (_, report) = run_to_dir(&cfg, config_path.as_deref(), &bytes, &out_dir)?;
        write(n_rows, report.rows.len());
        Ok(())
    })
}

/// # Safety
/// `path` is a valid C string; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rr_archive_load(path: *const c_char, out: *mut *mut RrArchive) -> RrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let a = ModelArchive::load(req_str(path)?.as_ref())?;
        *out = Box::into_raw(Box::new(RrArchive(a)));
        Ok(())
    })
}

/// Number of fitted models in an archive.
///
/// # Safety
/// `archive` is a live handle; `n` is valid or null.
#[no_mangle]
pub unsafe extern "C" fn rr_archive_model_count(archive: *const RrArchive, n: *mut usize) -> RrStatus {
    guard(|| {
        let a = archive.as_ref().ok_or_else(null)?;
        write(n, a.0.models.len());
        Ok(())
    })
}

/// # Safety
/// `archive` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rr_archive_free(archive: *mut RrArchive) {
    if !archive.is_null() {
        drop(Box::from_raw(archive));
    }
}

/// Scores every assessment of `cohort` with every archived model.
///
/// # Safety
/// `archive` and `cohort` are live handles; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rr_archive_score(
    archive: *const RrArchive,
    cohort: *const RrCohort,
    out: *mut *mut RrScores,
) -> RrStatus {
    guard(|| {
        let a = archive.as_ref().ok_or_else(null)?;
        let c = cohort.as_ref().ok_or_else(null)?;
        if out.is_null() {
            return Err(null());
        }
        let rows = a.0.score(&c.0)?;
        *out = Box::into_raw(Box::new(RrScores(rows)));
        Ok(())
    })
}

/// # Safety
/// `scores` is a live handle; `n` is valid or null.
#[no_mangle]
pub unsafe extern "C" fn rr_scores_len(scores: *const RrScores, n: *mut usize) -> RrStatus {
    guard(|| {
        let s = scores.as_ref().ok_or_else(null)?;
        write(n, s.0.len());
        Ok(())
    })
}

/// Horizon, score and label of row `i`.
///
/// # Safety
/// `scores` is a live handle; out pointers are valid or null.
#[no_mangle]
pub unsafe extern "C" fn rr_scores_get(
    scores: *const RrScores,
    i: usize,
    horizon_days: *mut u32,
    score: *mut f64,
    label: *mut i8,
) -> RrStatus {
    guard(|| {
        let s = scores.as_ref().ok_or_else(null)?;
        let r = s.0.get(i).ok_or_else(|| {
            Failure::Status(RrStatus::OutOfRange, format!("row {i} of {}", s.0.len()))
        })?;
        write(horizon_days, r.horizon_days);
        write(score, r.score);
        write(label, r.label);
        Ok(())
    })
}

/// Writes the scores as CSV.
///
/// # Safety
/// `scores` is a live handle; `path` is a valid C string.
#[no_mangle]
pub unsafe extern "C" fn rr_scores_write_csv(scores: *const RrScores, path: *const c_char) -> RrStatus {
    guard(|| {
        let s = scores.as_ref().ok_or_else(null)?;
        let path = req_str(path)?;
        std::fs::write(path, scores_to_csv(&s.0)).map_err(|e| Error::Io {
            path: path.into(),
            source: e,
        })?;
        Ok(())
    })
}

/// # Safety
/// `scores` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rr_scores_free(scores: *mut RrScores) {
    if !scores.is_null() {
        drop(Box::from_raw(scores));
    }
}
