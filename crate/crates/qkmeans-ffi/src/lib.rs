//! C ABI for the query K-means library.
//!
//! Datasets travel as opaque handles; every fallible call returns a status
//! code and writes results through out-pointers. Strings returned by this
//! library must be released with `qkm_string_free`, dataset handles with
//! `qkm_dataset_free`.

use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::ptr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qkmeans::bounds;
use qkmeans::datagen::{
    generate, read_dataset, write_dataset, DatasetHeader, GroundTruth, MixtureSpec,
};
use qkmeans::geometry::Dataset;
use qkmeans::noiseless::{run_noiseless, SeedConfig};
use qkmeans::noisy::{run_noisy, run_noisy_outlier, ScaleMode};
use qkmeans::oracle::OracleSession;
use qkmeans::outlier::{run_outlier, GammaMode};

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QkmStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    Infeasible = 3,
    IoError = 4,
    AlgorithmError = 5,
}

/// Algorithm selector for `qkm_run`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QkmAlgorithm {
    Noiseless = 0,
    Outlier = 1,
    Noisy = 2,
    NoisyOutlier = 3,
}

/// Constant-factor preset for the noisy algorithms.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QkmScale {
    Paper = 0,
    Desk = 1,
}

/// Opaque dataset handle: points, hidden ground truth, and file header.
pub struct QkmDataset {
    dataset: Dataset,
    truth: GroundTruth,
    header: DatasetHeader,
}

/// Library version as a static NUL-terminated string; do not free.
#[no_mangle]
pub extern "C" fn qkm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Release a string allocated by this library. NULL is a no-op.
///
/// # Safety
/// `s` must come from a `qkm_*` call that documents this free function, and
/// must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qkm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Release a dataset handle. NULL is a no-op.
///
/// # Safety
/// `handle` must come from `qkm_dataset_generate` or `qkm_dataset_load` and
/// must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qkm_dataset_free(handle: *mut QkmDataset) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

fn export_string(s: String) -> *mut c_char {
    CString::new(s).map_or(ptr::null_mut(), CString::into_raw)
}

/// Generate a synthetic mixture dataset; writes a fresh handle to `out`.
///
/// # Safety
/// `out` must be a valid pointer to a `QkmDataset*` slot.
#[no_mangle]
pub unsafe extern "C" fn qkm_dataset_generate(
    n: usize,
    k: usize,
    d: usize,
    alpha: f64,
    p_o: f64,
    sigma: f64,
    center_spread: f64,
    min_center_sep_sigmas: f64,
    sep_eps: f64,
    seed: u64,
    out: *mut *mut QkmDataset,
) -> QkmStatus {
    if out.is_null() {
        return QkmStatus::NullArgument;
    }
    *out = ptr::null_mut();
    let spec = MixtureSpec {
        n,
        k,
        d,
        alpha,
        p_o,
        sigma,
        center_spread,
        min_center_sep_sigmas,
        sep_eps,
        seed,
    };
    match generate(&spec) {
        Ok((dataset, truth)) => {
            let header = DatasetHeader::for_spec(&spec, &truth);
            *out = Box::into_raw(Box::new(QkmDataset {
                dataset,
                truth,
                header,
            }));
            QkmStatus::Ok
        }
        Err(_) => QkmStatus::Infeasible,
    }
}

/// Load a dataset file written by this library or the `qkm` CLI.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid slot.
#[no_mangle]
pub unsafe extern "C" fn qkm_dataset_load(
    path: *const c_char,
    out: *mut *mut QkmDataset,
) -> QkmStatus {
    if path.is_null() || out.is_null() {
        return QkmStatus::NullArgument;
    }
    *out = ptr::null_mut();
    let Ok(path) = CStr::from_ptr(path).to_str() else {
        return QkmStatus::InvalidArgument;
    };
    match read_dataset(Path::new(path)) {
        Ok((dataset, truth, header)) => {
            *out = Box::into_raw(Box::new(QkmDataset {
                dataset,
                truth,
                header,
            }));
            QkmStatus::Ok
        }
        Err(_) => QkmStatus::IoError,
    }
}

/// Write the dataset to `path` in the versioned header+CSV format.
///
/// # Safety
/// `handle` must be a live dataset handle; `path` a valid NUL-terminated
/// string.
#[no_mangle]
pub unsafe extern "C" fn qkm_dataset_save(
    handle: *const QkmDataset,
    path: *const c_char,
) -> QkmStatus {
    if handle.is_null() || path.is_null() {
        return QkmStatus::NullArgument;
    }
    let ds = &*handle;
    let Ok(path) = CStr::from_ptr(path).to_str() else {
        return QkmStatus::InvalidArgument;
    };
    match write_dataset(Path::new(path), &ds.dataset, &ds.truth, &ds.header) {
        Ok(()) => QkmStatus::Ok,
        Err(_) => QkmStatus::IoError,
    }
}

/// Number of points. Zero when the handle is NULL.
///
/// # Safety
/// `handle` must be NULL or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn qkm_dataset_len(handle: *const QkmDataset) -> usize {
    if handle.is_null() {
        0
    } else {
        (*handle).dataset.len()
    }
}

/// Point dimension. Zero when the handle is NULL.
///
/// # Safety
/// `handle` must be NULL or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn qkm_dataset_dim(handle: *const QkmDataset) -> usize {
    if handle.is_null() {
        0
    } else {
        (*handle).dataset.dim()
    }
}

/// Number of ground-truth clusters. Zero when the handle is NULL.
///
/// # Safety
/// `handle` must be NULL or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn qkm_dataset_k(handle: *const QkmDataset) -> usize {
    if handle.is_null() {
        0
    } else {
        (*handle).truth.k()
    }
}

/// Number of ground-truth outliers. Zero when the handle is NULL.
///
/// # Safety
/// `handle` must be NULL or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn qkm_dataset_outlier_count(handle: *const QkmDataset) -> usize {
    if handle.is_null() {
        0
    } else {
        (*handle).truth.outlier_count()
    }
}

/// Run one algorithm trial against the dataset's simulated oracle and return
/// the JSON report row through `out_json` (free with `qkm_string_free`).
///
/// `gamma < 0` selects the data-driven automatic rejection radius; any
/// nonnegative value (including INFINITY) is used as given. `p_e` is ignored
/// by the noiseless algorithms.
///
/// # Safety
/// `handle` must be a live dataset handle and `out_json` a valid slot.
#[no_mangle]
pub unsafe extern "C" fn qkm_run(
    handle: *const QkmDataset,
    algorithm: QkmAlgorithm,
    delta: f64,
    eps: f64,
    p_e: f64,
    gamma: f64,
    scale: QkmScale,
    seed: u64,
    out_json: *mut *mut c_char,
) -> QkmStatus {
    if handle.is_null() || out_json.is_null() {
        return QkmStatus::NullArgument;
    }
    *out_json = ptr::null_mut();
    let ds = &*handle;
    let k = ds.truth.k();
    let scale = match scale {
        QkmScale::Paper => ScaleMode::Paper,
        QkmScale::Desk => ScaleMode::Desk,
    };
    let gamma_mode = if gamma < 0.0 {
        GammaMode::Auto
    } else {
        GammaMode::Fixed(gamma)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alpha = ds.truth.realized_alpha();

    let result = match algorithm {
        QkmAlgorithm::Noiseless => {
            let Ok(cfg) = SeedConfig::new(k, delta, eps) else {
                return QkmStatus::InvalidArgument;
            };
            let mut session = OracleSession::noiseless(&ds.truth);
            run_noiseless(&mut session, &ds.dataset, &cfg, &mut rng).map_err(|e| e.to_string())
        }
        QkmAlgorithm::Outlier => {
            let Ok(cfg) = SeedConfig::new(k, delta, eps) else {
                return QkmStatus::InvalidArgument;
            };
            let mut session = OracleSession::noiseless(&ds.truth);
            run_outlier(&mut session, &ds.dataset, &cfg, gamma_mode, &mut rng)
                .map_err(|e| e.to_string())
        }
        QkmAlgorithm::Noisy => {
            let Ok(mut session) = OracleSession::noisy(&ds.truth, p_e, seed) else {
                return QkmStatus::InvalidArgument;
            };
            run_noisy(
                &mut session,
                &ds.dataset,
                k,
                delta,
                eps,
                alpha,
                scale,
                &mut rng,
            )
            .map_err(|e| e.to_string())
        }
        QkmAlgorithm::NoisyOutlier => {
            let Ok(mut session) = OracleSession::noisy(&ds.truth, p_e, seed) else {
                return QkmStatus::InvalidArgument;
            };
            run_noisy_outlier(
                &mut session,
                &ds.dataset,
                k,
                delta,
                eps,
                alpha,
                ds.truth.p_o(),
                scale,
                &mut rng,
            )
            .map_err(|e| e.to_string())
        }
    };
    match result {
        Ok((_, _, mut report)) => {
            report.rng_seed = seed;
            let json = serde_json::to_string(&report).expect("report serializes");
            *out_json = export_string(json);
            QkmStatus::Ok
        }
        Err(_) => QkmStatus::AlgorithmError,
    }
}

/// `2 alpha k (ln k + m ln 2)`.
#[no_mangle]
pub extern "C" fn qkm_bounds_dixie(alpha: f64, k: usize, m: usize) -> f64 {
    bounds::dixie_bound(alpha, k, m)
}

/// `n eps^3 / k^7`.
#[no_mangle]
pub extern "C" fn qkm_bounds_min_cluster_threshold(n: f64, k: usize, eps: f64) -> f64 {
    bounds::min_cluster_threshold(n, k, eps)
}

/// Expected-query bound of the two-phase outlier pipeline.
///
/// # Safety
/// The out-pointers must be valid `double` slots or NULL (NULL skips them).
#[no_mangle]
pub unsafe extern "C" fn qkm_bounds_thm_qkmwol(
    alpha: f64,
    k: usize,
    delta: f64,
    eps: f64,
    p_o: f64,
    out_phase1: *mut f64,
    out_phase2: *mut f64,
    out_total: *mut f64,
) -> QkmStatus {
    match bounds::thm_qkmwol(alpha, k, delta, eps, p_o) {
        Ok(b) => {
            if !out_phase1.is_null() {
                *out_phase1 = b.phase1;
            }
            if !out_phase2.is_null() {
                *out_phase2 = b.phase2;
            }
            if !out_total.is_null() {
                *out_total = b.total;
            }
            QkmStatus::Ok
        }
        Err(_) => QkmStatus::InvalidArgument,
    }
}

/// Sample sizes for the noisy pipeline (theorem constants).
///
/// # Safety
/// The out-pointers must be valid slots or NULL.
#[no_mangle]
pub unsafe extern "C" fn qkm_bounds_noisy_m(
    alpha: f64,
    k: usize,
    delta: f64,
    eps: f64,
    p_e: f64,
    out_m_tilde: *mut f64,
    out_m: *mut u64,
) -> QkmStatus {
    match bounds::noisy_m(alpha, k, delta, eps, p_e) {
        Ok((m_tilde, m)) => {
            if !out_m_tilde.is_null() {
                *out_m_tilde = m_tilde;
            }
            if !out_m.is_null() {
                *out_m = m;
            }
            QkmStatus::Ok
        }
        Err(_) => QkmStatus::InvalidArgument,
    }
}

/// Sample and subgraph sizes for the noisy pipeline with outliers
/// (theorem constants).
///
/// # Safety
/// The out-pointers must be valid `double` slots or NULL.
#[no_mangle]
pub unsafe extern "C" fn qkm_bounds_noisy_outlier_params(
    alpha: f64,
    k: usize,
    delta: f64,
    eps: f64,
    p_e: f64,
    p_o: f64,
    out_m_tilde: *mut f64,
    out_m: *mut f64,
    out_n: *mut f64,
) -> QkmStatus {
    match bounds::noisy_outlier_params(alpha, k, delta, eps, p_e, p_o) {
        Ok(p) => {
            if !out_m_tilde.is_null() {
                *out_m_tilde = p.m_tilde;
            }
            if !out_m.is_null() {
                *out_m = p.m;
            }
            if !out_n.is_null() {
                *out_n = p.n;
            }
            QkmStatus::Ok
        }
        Err(_) => QkmStatus::InvalidArgument,
    }
}

/// Bernoulli KL divergence and its quadratic lower bound.
///
/// # Safety
/// The out-pointers must be valid `double` slots or NULL.
#[no_mangle]
pub unsafe extern "C" fn qkm_bounds_kl(
    x: f64,
    y: f64,
    out_kl: *mut f64,
    out_quadratic: *mut f64,
) -> QkmStatus {
    let (Ok(kl), Ok(quad)) = (bounds::kl_bernoulli(x, y), bounds::kl_quadratic_bound(x, y)) else {
        return QkmStatus::InvalidArgument;
    };
    if !out_kl.is_null() {
        *out_kl = kl;
    }
    if !out_quadratic.is_null() {
        *out_quadratic = quad;
    }
    QkmStatus::Ok
}
