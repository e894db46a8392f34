//! C ABI over the screening engine.
//!
//! Handles are opaque pointers owned by the caller and released with the
//! matching `*_free`. Every fallible call returns an `FrStatus`; on failure
//! `fr_last_error()` describes the problem until the next call on the same
//! thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fastread::active::{ActiveError, Learner, Phase, ReviewState, TreatmentCode, TreatmentConfig};
use fastread::corpus::{Corpus, Relevance};
use fastread::eval::{self, EvalError, SimulationData};
use fastread::features::{FeatureMatrix, TfidfVectorizer};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Corpus = 4,
    Review = 5,
    Exhausted = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrPhase {
    Random = 0,
    Uncertainty = 1,
    Certainty = 2,
}

impl From<Phase> for FrPhase {
    fn from(p: Phase) -> Self {
        match p {
            Phase::Random => FrPhase::Random,
            Phase::Uncertainty => FrPhase::Uncertainty,
            Phase::Certainty => FrPhase::Certainty,
        }
    }
}

/// Outcome of one simulated review.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FrSimSummary {
    pub candidates: usize,
    pub relevant: usize,
    pub x95: usize,
    pub wss95: f64,
    pub missed: usize,
}

/// A loaded candidate-study list.
pub struct FrCorpus {
    inner: Corpus,
}

/// An interactive review over a corpus.
pub struct FrReview {
    learner: Learner,
    state: ReviewState,
    features: FeatureMatrix,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Failure(FrStatus, String);

impl From<ActiveError> for Failure {
    fn from(e: ActiveError) -> Self {
        let status = match e {
            ActiveError::Exhausted => FrStatus::Exhausted,
            ActiveError::UnknownStudy(_) | ActiveError::InvalidCode(_) | ActiveError::InvalidConfig(_) => {
                FrStatus::InvalidArgument
            }
            _ => FrStatus::Review,
        };
        Failure(status, e.to_string())
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        let status = match e {
            EvalError::Active(inner) => return inner.into(),
            EvalError::Unlabeled(_) | EvalError::NoRelevant => FrStatus::Corpus,
            _ => FrStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> FrStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FrStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            FrStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(FrStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(FrStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure(FrStatus::NullPointer, format!("{what} is null")))
}

unsafe fn mut_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| Failure(FrStatus::NullPointer, format!("{what} is null")))
}

fn parse_code(s: &str) -> Result<TreatmentCode, Failure> {
    s.parse::<TreatmentCode>().map_err(Failure::from)
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn fr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a CSV file with the standard study columns.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fr_corpus_load_csv(path: *const c_char, out: *mut *mut FrCorpus) -> FrStatus {
    guard(|| {
        let out = mut_arg(out, "out")?;
        let path = str_arg(path, "path")?;
        let corpus = Corpus::load_csv(path).map_err(|e| {
            let status = match e {
                fastread::corpus::CorpusError::Io(_) => FrStatus::Io,
                _ => FrStatus::Corpus,
            };
            Failure(status, format!("{path}: {e}"))
        })?;
        *out = Box::into_raw(Box::new(FrCorpus { inner: corpus }));
        Ok(())
    })
}

/// # Safety
/// `corpus` must be a live handle; `out_len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fr_corpus_len(corpus: *const FrCorpus, out_len: *mut usize) -> FrStatus {
    guard(|| {
        *mut_arg(out_len, "out_len")? = ref_arg(corpus, "corpus")?.inner.len();
        Ok(())
    })
}

/// Number of studies labeled relevant, or an error if the corpus has no
/// labels.
///
/// # Safety
/// `corpus` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fr_corpus_relevant(corpus: *const FrCorpus, out: *mut usize) -> FrStatus {
    guard(|| {
        let c = &ref_arg(corpus, "corpus")?.inner;
        let out = mut_arg(out, "out")?;
        match c.stats().relevant {
            Some(r) => {
                *out = r;
                Ok(())
            }
            None => Err(Failure(FrStatus::Corpus, "corpus has no labels".into())),
        }
    })
}

/// # Safety
/// `corpus` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fr_corpus_free(corpus: *mut FrCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// Starts a review of `corpus` with `treatment` (e.g. "HUTM" or "linear").
/// The corpus handle may be freed afterwards.
///
/// # Safety
/// `corpus` must be a live handle, `treatment` a NUL-terminated string and
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fr_review_new(
    corpus: *const FrCorpus,
    treatment: *const c_char,
    seed: u64,
    out: *mut *mut FrReview,
) -> FrStatus {
    guard(|| {
        let out = mut_arg(out, "out")?;
        let corpus = &ref_arg(corpus, "corpus")?.inner;
        let code = parse_code(str_arg(treatment, "treatment")?)?;
        let features = TfidfVectorizer::default()
            .fit_transform(corpus)
            .map_err(|e| Failure(FrStatus::Corpus, e.to_string()))?
            .1;
        *out = Box::into_raw(Box::new(FrReview {
            learner: Learner::new(code, TreatmentConfig::default()),
            state: ReviewState::new(corpus.len(), seed),
            features,
        }));
        Ok(())
    })
}

/// Selects up to `cap` studies to review next, writing their ids to `ids`
/// and the count to `out_len`. Returns `Exhausted` when nothing is left.
///
/// # Safety
/// `review` must be a live handle; `ids` must have room for `cap` values;
/// `out_len` and `out_phase` must be writable (`out_phase` may be null).
#[no_mangle]
pub unsafe extern "C" fn fr_review_next(
    review: *mut FrReview,
    ids: *mut usize,
    cap: usize,
    out_len: *mut usize,
    out_phase: *mut FrPhase,
) -> FrStatus {
    guard(|| {
        let r = mut_arg(review, "review")?;
        let out_len = mut_arg(out_len, "out_len")?;
        if cap == 0 {
            return Err(Failure(FrStatus::InvalidArgument, "cap must be positive".into()));
        }
        if ids.is_null() {
            return Err(Failure(FrStatus::NullPointer, "ids is null".into()));
        }
        let step = r.learner.step(&mut r.state, &r.features, cap)?;
        let dst = std::slice::from_raw_parts_mut(ids, cap);
        dst[..step.query.ids.len()].copy_from_slice(&step.query.ids);
        *out_len = step.query.ids.len();
        if let Some(p) = out_phase.as_mut() {
            *p = step.query.phase.into();
        }
        Ok(())
    })
}

/// Records a decision; re-labeling overwrites.
///
/// # Safety
/// `review` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fr_review_label(review: *mut FrReview, id: usize, relevant: bool) -> FrStatus {
    guard(|| {
        let r = mut_arg(review, "review")?;
        let label = if relevant {
            Relevance::Relevant
        } else {
            Relevance::Irrelevant
        };
        r.state.set_label(id, label)?;
        Ok(())
    })
}

/// # Safety
/// `review` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn fr_review_status(
    review: *const FrReview,
    found: *mut usize,
    coded: *mut usize,
    total: *mut usize,
) -> FrStatus {
    guard(|| {
        let r = ref_arg(review, "review")?;
        *mut_arg(found, "found")? = r.state.n_relevant();
        *mut_arg(coded, "coded")? = r.state.n_labeled();
        *mut_arg(total, "total")? = r.state.n_studies();
        Ok(())
    })
}

/// # Safety
/// `review` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fr_review_free(review: *mut FrReview) {
    if !review.is_null() {
        drop(Box::from_raw(review));
    }
}

/// Simulates one review of a fully labeled corpus until `target_recall` of
/// the relevant studies are found.
///
/// # Safety
/// `corpus` must be a live handle, `treatment` a NUL-terminated string and
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fr_simulate(
    corpus: *const FrCorpus,
    treatment: *const c_char,
    seed: u64,
    target_recall: f64,
    out: *mut FrSimSummary,
) -> FrStatus {
    guard(|| {
        let out = mut_arg(out, "out")?;
        let corpus = &ref_arg(corpus, "corpus")?.inner;
        let code = parse_code(str_arg(treatment, "treatment")?)?;
        let config = TreatmentConfig {
            target_recall,
            ..TreatmentConfig::default()
        };
        let data = if code.is_linear() {
            SimulationData::labels_only(corpus)?
        } else {
            SimulationData::from_corpus(corpus, &TfidfVectorizer::default())?
        };
        let r = eval::simulate(&data, code, &config, seed)?;
        *out = FrSimSummary {
            candidates: r.candidates,
            relevant: r.relevant,
            x95: r.x95,
            wss95: r.wss95,
            missed: r.missed.len(),
        };
        Ok(())
    })
}

/// `0.95 - x95 / pool`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fr_wss_at_95(x95: usize, pool: usize, out: *mut f64) -> FrStatus {
    guard(|| {
        let out = mut_arg(out, "out")?;
        *out = eval::wss_at_95(x95, pool)?;
        Ok(())
    })
}
