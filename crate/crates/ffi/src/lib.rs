//! C ABI over the egots library.
//!
//! Objects cross the boundary as opaque heap handles that the caller frees
//! with the matching `*_free` function. Every fallible call returns an
//! [`EgotsStatus`]; on failure the message is kept per thread and can be read
//! with [`egots_last_error`]. Output handles are written only on success.
//! Panics are caught at the boundary and reported as `EGOTS_PANIC`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use egots::knngraph::{knn_stomp_cross_with, knn_stomp_self_with, BuildOptions, GraphMode, KnnGraph};
use egots::knnclassify::knn_predict;
use egots::metrics::{median_foreground_length, onset_f1};
use egots::postprocess::smooth_labels;
use egots::trainer::{infer, Model};
use egots::{Error, LabelSeries, TimeSeries};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EgotsStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// Bad sizes, indices or settings.
    InvalidArgument = 2,
    /// Malformed file contents or inputs that disagree with each other.
    Data = 3,
    Io = 4,
    Numerical = 5,
    Panic = 6,
}

pub struct EgotsSeries(TimeSeries);
pub struct EgotsLabels(LabelSeries);
pub struct EgotsGraph(KnnGraph);
pub struct EgotsModel(Model);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EgotsScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub n_pred_onsets: usize,
    pub n_true_onsets: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> EgotsStatus {
    match e {
        Error::Bounds(_) | Error::Shape(_) | Error::Config(_) => EgotsStatus::InvalidArgument,
        Error::Io { .. } => EgotsStatus::Io,
        Error::Numerical(_) => EgotsStatus::Numerical,
        _ => EgotsStatus::Data,
    }
}

enum Fail {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

type FfiResult<T> = Result<T, Fail>;

fn guard(f: impl FnOnce() -> FfiResult<()>) -> EgotsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            EgotsStatus::Ok
        }
        Ok(Err(Fail::Null(name))) => {
            set_error(format!("`{name}` must not be null"));
            EgotsStatus::NullPointer
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            EgotsStatus::Panic
        }
    }
}

unsafe fn refer<'a, T>(p: *const T, name: &'static str) -> FfiResult<&'a T> {
    p.as_ref().ok_or(Fail::Null(name))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, name: &'static str) -> FfiResult<&'a [T]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn c_path(p: *const c_char, name: &'static str) -> FfiResult<PathBuf> {
    if p.is_null() {
        return Err(Fail::Null(name));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Error::Config(format!("`{name}` is not valid UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> FfiResult<()> {
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn check_out<T>(out: *mut *mut T) -> FfiResult<()> {
    if out.is_null() {
        Err(Fail::Null("out"))
    } else {
        Ok(())
    }
}

fn threads(n: usize) -> BuildOptions {
    BuildOptions { threads: (n > 0).then_some(n) }
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Message of the last failed call on this thread, or null after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn egots_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn egots_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Series from `n_dims` rows of `len` values, stored row-major in `data`.
#[no_mangle]
pub unsafe extern "C" fn egots_series_new(data: *const f64, n_dims: usize, len: usize, out: *mut *mut EgotsSeries) -> EgotsStatus {
    guard(|| {
        check_out(out)?;
        let total = n_dims
            .checked_mul(len)
            .ok_or_else(|| Error::Config("n_dims × len overflows".into()))?;
        let values = slice(data, total, "data")?;
        let dims = if len == 0 { vec![Vec::new(); n_dims] } else { values.chunks(len).map(<[f64]>::to_vec).collect() };
        put(out, EgotsSeries(TimeSeries::new("ffi", dims)?))
    })
}

#[no_mangle]
pub unsafe extern "C" fn egots_series_read_csv(path: *const c_char, out: *mut *mut EgotsSeries) -> EgotsStatus {
    guard(|| {
        check_out(out)?;
        put(out, EgotsSeries(TimeSeries::read_csv(c_path(path, "path")?)?))
    })
}

/// Length of the series, 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn egots_series_len(series: *const EgotsSeries) -> usize {
    series.as_ref().map_or(0, |s| s.0.len())
}

#[no_mangle]
pub unsafe extern "C" fn egots_series_n_dims(series: *const EgotsSeries) -> usize {
    series.as_ref().map_or(0, |s| s.0.n_dims())
}

#[no_mangle]
pub unsafe extern "C" fn egots_series_free(series: *mut EgotsSeries) {
    free(series)
}

/// Label series over classes `0..n_classes`; 0 is background.
/// `n_classes = 0` infers it from the largest label.
#[no_mangle]
pub unsafe extern "C" fn egots_labels_new(labels: *const usize, len: usize, n_classes: usize, out: *mut *mut EgotsLabels) -> EgotsStatus {
    guard(|| {
        check_out(out)?;
        let v = slice(labels, len, "labels")?.to_vec();
        let l = if n_classes == 0 { LabelSeries::inferred(v) } else { LabelSeries::new(v, n_classes)? };
        put(out, EgotsLabels(l))
    })
}

#[no_mangle]
pub unsafe extern "C" fn egots_labels_read_csv(path: *const c_char, out: *mut *mut EgotsLabels) -> EgotsStatus {
    guard(|| {
        check_out(out)?;
        put(out, EgotsLabels(LabelSeries::read_csv(c_path(path, "path")?)?))
    })
}

#[no_mangle]
pub unsafe extern "C" fn egots_labels_write_csv(labels: *const EgotsLabels, path: *const c_char) -> EgotsStatus {
    guard(|| Ok(refer(labels, "labels")?.0.write_csv(c_path(path, "path")?)?))
}

#[no_mangle]
pub unsafe extern "C" fn egots_labels_len(labels: *const EgotsLabels) -> usize {
    labels.as_ref().map_or(0, |l| l.0.len())
}

#[no_mangle]
pub unsafe extern "C" fn egots_labels_n_classes(labels: *const EgotsLabels) -> usize {
    labels.as_ref().map_or(0, |l| l.0.n_classes())
}

/// Copies the labels into `buf`, which must hold `cap >= len` entries.
#[no_mangle]
pub unsafe extern "C" fn egots_labels_copy(labels: *const EgotsLabels, buf: *mut usize, cap: usize) -> EgotsStatus {
    guard(|| {
        let l = refer(labels, "labels")?.0.labels();
        if cap < l.len() {
            return Err(Error::Bounds(format!("buffer holds {cap} labels, need {}", l.len())).into());
        }
        if !l.is_empty() {
            if buf.is_null() {
                return Err(Fail::Null("buf"));
            }
            ptr::copy_nonoverlapping(l.as_ptr(), buf, l.len());
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn egots_labels_free(labels: *mut EgotsLabels) {
    free(labels)
}

/// Self-join k-NN graph with the exclusion zone. `threads = 0` uses all cores.
#[no_mangle]
pub unsafe extern "C" fn egots_graph_self(series: *const EgotsSeries, m: usize, k: usize, threads_: usize, out: *mut *mut EgotsGraph) -> EgotsStatus {
    guard(|| {
        check_out(out)?;
        let g = knn_stomp_self_with(&refer(series, "series")?.0, m, k, threads(threads_))?;
        put(out, EgotsGraph(g))
    })
}

/// Graph from each `query` subsequence to its k nearest `target` subsequences.
#[no_mangle]
pub unsafe extern "C" fn egots_graph_cross(
    query: *const EgotsSeries,
    target: *const EgotsSeries,
    m: usize,
    k: usize,
    threads_: usize,
    out: *mut *mut EgotsGraph,
) -> EgotsStatus {
    guard(|| {
        check_out(out)?;
        let g = knn_stomp_cross_with(&refer(query, "query")?.0, &refer(target, "target")?.0, m, k, threads(threads_))?;
        put(out, EgotsGraph(g))
    })
}

#[no_mangle]
pub unsafe extern "C" fn egots_graph_load(path: *const c_char, out: *mut *mut EgotsGraph) -> EgotsStatus {
    guard(|| {
        check_out(out)?;
        put(out, EgotsGraph(KnnGraph::load(c_path(path, "path")?)?))
    })
}

#[no_mangle]
pub unsafe extern "C" fn egots_graph_save(graph: *const EgotsGraph, path: *const c_char) -> EgotsStatus {
    guard(|| Ok(refer(graph, "graph")?.0.save(c_path(path, "path")?)?))
}

#[no_mangle]
pub unsafe extern "C" fn egots_graph_n_rows(graph: *const EgotsGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.0.n_rows())
}

#[no_mangle]
pub unsafe extern "C" fn egots_graph_k(graph: *const EgotsGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.0.k())
}

#[no_mangle]
pub unsafe extern "C" fn egots_graph_m(graph: *const EgotsGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.0.m())
}

/// 1 for a self-join graph, 0 for a cross graph or a null handle.
#[no_mangle]
pub unsafe extern "C" fn egots_graph_is_self(graph: *const EgotsGraph) -> c_int {
    graph.as_ref().map_or(0, |g| c_int::from(g.0.mode() == GraphMode::SelfJoin))
}

/// Writes the `k` neighbor starts of `row`, nearest first, into `buf`.
#[no_mangle]
pub unsafe extern "C" fn egots_graph_row(graph: *const EgotsGraph, row: usize, buf: *mut usize, cap: usize) -> EgotsStatus {
    guard(|| {
        let g = &refer(graph, "graph")?.0;
        if row >= g.n_rows() {
            return Err(Error::Bounds(format!("row {row} of {}", g.n_rows())).into());
        }
        if cap < g.k() {
            return Err(Error::Bounds(format!("buffer holds {cap} entries, need {}", g.k())).into());
        }
        if buf.is_null() {
            return Err(Fail::Null("buf"));
        }
        let r = g.row(row);
        ptr::copy_nonoverlapping(r.as_ptr(), buf, r.len());
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn egots_graph_free(graph: *mut EgotsGraph) {
    free(graph)
}

/// Majority vote over the first `k_use` neighbors of each row.
#[no_mangle]
pub unsafe extern "C" fn egots_knn_predict(
    graph: *const EgotsGraph,
    train_labels: *const EgotsLabels,
    k_use: usize,
    out: *mut *mut EgotsLabels,
) -> EgotsStatus {
    guard(|| {
        check_out(out)?;
        let p = knn_predict(&refer(graph, "graph")?.0, &refer(train_labels, "train_labels")?.0, k_use)?;
        put(out, EgotsLabels(p))
    })
}

/// Temporal-consistency smoothing with window `w` (1 leaves labels unchanged).
#[no_mangle]
pub unsafe extern "C" fn egots_smooth(labels: *const EgotsLabels, window: usize, out: *mut *mut EgotsLabels) -> EgotsStatus {
    guard(|| {
        check_out(out)?;
        let l = &refer(labels, "labels")?.0;
        put(out, EgotsLabels(LabelSeries::new(smooth_labels(l.labels(), window)?, l.n_classes())?))
    })
}

/// Onset-based scores. `m_med = 0` uses the median foreground run of `truth`.
#[no_mangle]
pub unsafe extern "C" fn egots_onset_f1(
    pred: *const EgotsLabels,
    truth: *const EgotsLabels,
    m_med: usize,
    out: *mut EgotsScores,
) -> EgotsStatus {
    guard(|| {
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let truth = refer(truth, "truth")?.0.labels();
        let m_med = if m_med == 0 { median_foreground_length(truth)? } else { m_med };
        let s = onset_f1(refer(pred, "pred")?.0.labels(), truth, m_med)?;
        *out = EgotsScores {
            precision: s.precision,
            recall: s.recall,
            f1: s.f1,
            n_pred_onsets: s.n_pred_onsets,
            n_true_onsets: s.n_true_onsets,
        };
        Ok(())
    })
}

/// Loads an `EGOW` checkpoint written by `egots train`.
#[no_mangle]
pub unsafe extern "C" fn egots_model_load(path: *const c_char, out: *mut *mut EgotsModel) -> EgotsStatus {
    guard(|| {
        check_out(out)?;
        put(out, EgotsModel(Model::load(c_path(path, "path")?)?))
    })
}

/// Smoothing window the checkpoint selected on validation data.
#[no_mangle]
pub unsafe extern "C" fn egots_model_window(model: *const EgotsModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.manifest.window)
}

#[no_mangle]
pub unsafe extern "C" fn egots_model_m(model: *const EgotsModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.manifest.m)
}

/// Predicts one label per test subsequence. Nonzero `smooth` applies the
/// checkpoint's window.
#[no_mangle]
pub unsafe extern "C" fn egots_infer(
    model: *const EgotsModel,
    test: *const EgotsSeries,
    train: *const EgotsSeries,
    train_labels: *const EgotsLabels,
    threads_: usize,
    smooth: c_int,
    out: *mut *mut EgotsLabels,
) -> EgotsStatus {
    guard(|| {
        check_out(out)?;
        let model = &refer(model, "model")?.0;
        let labels = refer(train_labels, "train_labels")?.0.clone().with_n_classes(model.manifest.n_classes)?;
        let mut pred = infer(&refer(test, "test")?.0, &refer(train, "train")?.0, &labels, model, threads(threads_).threads)?;
        if smooth != 0 {
            pred = model.smooth(&pred)?;
        }
        put(out, EgotsLabels(pred))
    })
}

#[no_mangle]
pub unsafe extern "C" fn egots_model_free(model: *mut EgotsModel) {
    free(model)
}
