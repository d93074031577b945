//! C ABI over the `graphseg` library.
//!
//! Handles are opaque pointers created by `gs_*_new`/`gs_*_compute` and
//! released with the matching `gs_*_free`. Every fallible call returns a
//! [`GsStatus`]; on failure [`gs_last_error_message`] describes the error
//! for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use graphseg::field::FidelitySet;
use graphseg::gl::{gl_segment, GlConfig};
use graphseg::graph::{knn_graph, normalized_laplacian, FeatureMatrix, Metric, SparseWeightGraph, WeightSpec};
use graphseg::mbo::{mbo_segment, MboConfig};
use graphseg::spectral::{smallest_eigenpairs_with, EigenOptions, SpectralBasis};
use graphseg::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GsStatus {
    Ok = 0,
    InvalidArgument = 1,
    DimensionMismatch = 2,
    NonFinite = 3,
    NoConvergence = 4,
    SingularLandmarks = 5,
    Io = 6,
    Parse = 7,
    NullPointer = 8,
    Panic = 9,
}

impl From<&Error> for GsStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidArgument(_) | Error::ZeroLocalScale { .. } | Error::IsolatedVertex(_) => GsStatus::InvalidArgument,
            Error::DimensionMismatch(_) => GsStatus::DimensionMismatch,
            Error::NonFinite(_) => GsStatus::NonFinite,
            Error::NoConvergence { .. } => GsStatus::NoConvergence,
            Error::SingularLandmarks { .. } => GsStatus::SingularLandmarks,
            Error::Io { .. } => GsStatus::Io,
            Error::Parse { .. } | Error::Format { .. } => GsStatus::Parse,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn guard(f: impl FnOnce() -> Result<(), (GsStatus, String)>) -> GsStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GsStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            GsStatus::Panic
        }
    }
}

fn lib<T>(r: graphseg::Result<T>) -> Result<T, (GsStatus, String)> {
    r.map_err(|e| (GsStatus::from(&e), e.to_string()))
}

fn null(what: &str) -> (GsStatus, String) {
    (GsStatus::NullPointer, format!("{what} is null"))
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn gs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GsWeightKind {
    LocalScaling = 0,
    Gaussian = 1,
    Cosine = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GsWeightParams {
    pub kind: GsWeightKind,
    pub neighbors: usize,
    /// Neighbour rank for local scaling.
    pub scale_neighbor: usize,
    /// Gaussian bandwidth.
    pub sigma: f64,
}

impl GsWeightParams {
    fn spec(&self) -> (WeightSpec, Metric) {
        match self.kind {
            GsWeightKind::LocalScaling => (WeightSpec::local_scaling(self.neighbors, self.scale_neighbor), Metric::Euclidean),
            GsWeightKind::Gaussian => (WeightSpec::gaussian(self.neighbors, self.sigma), Metric::Euclidean),
            GsWeightKind::Cosine => (WeightSpec::cosine(self.neighbors), Metric::CosineDistance),
        }
    }
}

pub struct GsGraph(SparseWeightGraph);

pub struct GsBasis(SpectralBasis);

/// Builds a k-NN graph from `n_rows × n_cols` row-major features.
///
/// # Safety
/// `features` must point to `n_rows * n_cols` doubles, `params` and `out`
/// must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn gs_graph_new(
    features: *const f64,
    n_rows: usize,
    n_cols: usize,
    params: *const GsWeightParams,
    out: *mut *mut GsGraph,
) -> GsStatus {
    guard(|| {
        if features.is_null() {
            return Err(null("features"));
        }
        let params = params.as_ref().ok_or_else(|| null("params"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let len = n_rows.checked_mul(n_cols).ok_or_else(|| (GsStatus::InvalidArgument, "feature size overflows".into()))?;
        let data = slice::from_raw_parts(features, len).to_vec();
        let x = lib(FeatureMatrix::new(n_rows, n_cols, data))?;
        let (spec, metric) = params.spec();
        let g = lib(knn_graph(&x, &spec, metric))?;
        *out = Box::into_raw(Box::new(GsGraph(g)));
        Ok(())
    })
}

/// # Safety
/// `graph` must be null or a handle from [`gs_graph_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gs_graph_free(graph: *mut GsGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// # Safety
/// `graph` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn gs_graph_n_vertices(graph: *const GsGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.0.n_vertices())
}

/// # Safety
/// `graph` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn gs_graph_n_edges(graph: *const GsGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.0.edges().len())
}

/// Computes the `n_e` smallest eigenpairs of the graph's normalized
/// Laplacian to residual tolerance `tol`.
///
/// # Safety
/// `graph` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gs_basis_compute(graph: *const GsGraph, n_e: usize, tol: f64, seed: u64, out: *mut *mut GsBasis) -> GsStatus {
    guard(|| {
        let g = graph.as_ref().ok_or_else(|| null("graph"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let lap = lib(normalized_laplacian(&g.0))?;
        let opts = EigenOptions {
            tol,
            seed,
            ..Default::default()
        };
        let basis = lib(smallest_eigenpairs_with(&lap, n_e, &opts))?;
        *out = Box::into_raw(Box::new(GsBasis(basis)));
        Ok(())
    })
}

/// # Safety
/// `basis` must be null or a handle from [`gs_basis_compute`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gs_basis_free(basis: *mut GsBasis) {
    if !basis.is_null() {
        drop(Box::from_raw(basis));
    }
}

/// # Safety
/// `basis` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn gs_basis_n_e(basis: *const GsBasis) -> usize {
    basis.as_ref().map_or(0, |b| b.0.n_e())
}

/// Copies the eigenvalues (ascending) into `out`, which holds `len` doubles.
///
/// # Safety
/// `basis` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn gs_basis_eigenvalues(basis: *const GsBasis, out: *mut f64, len: usize) -> GsStatus {
    guard(|| {
        let b = basis.as_ref().ok_or_else(|| null("basis"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let vals = b.0.eigenvalues();
        if len < vals.len() {
            return Err((GsStatus::DimensionMismatch, format!("buffer holds {len} values, need {}", vals.len())));
        }
        slice::from_raw_parts_mut(out, vals.len()).copy_from_slice(vals);
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GsMboParams {
    pub dt: f64,
    pub mu: f64,
    pub eta: f64,
    pub n_s: usize,
    pub max_iters: usize,
    pub seed: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GsGlParams {
    pub epsilon: f64,
    pub dt: f64,
    pub mu: f64,
    pub eta: f64,
    /// Convexity constant, at least `mu + 1/epsilon`.
    pub c: f64,
    pub max_iters: usize,
    pub seed: u64,
}

/// Three-moons MBO defaults.
#[no_mangle]
pub extern "C" fn gs_mbo_default_params() -> GsMboParams {
    let c = MboConfig::new(1);
    GsMboParams {
        dt: c.dt,
        mu: c.mu,
        eta: c.eta,
        n_s: c.n_s,
        max_iters: c.max_iters,
        seed: c.seed,
    }
}

/// Three-moons GL defaults.
#[no_mangle]
pub extern "C" fn gs_gl_default_params() -> GsGlParams {
    let c = GlConfig::new(1);
    GsGlParams {
        epsilon: c.epsilon,
        dt: c.dt,
        mu: c.mu,
        eta: c.eta,
        c: c.c,
        max_iters: c.max_iters,
        seed: c.seed,
    }
}

/// Segmentation result metadata.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct GsRunInfo {
    pub iterations: usize,
    /// 1 if the stopping rule was met, 0 if the iteration cap was hit.
    pub converged: i32,
}

struct SegmentArgs<'a> {
    basis: &'a SpectralBasis,
    fidelity: FidelitySet,
    labels: &'a mut [usize],
}

#[allow(clippy::too_many_arguments)]
unsafe fn segment_args<'a>(
    basis: *const GsBasis,
    n_classes: usize,
    fidelity_nodes: *const usize,
    fidelity_classes: *const usize,
    n_fidelity: usize,
    mu: f64,
    labels_out: *mut usize,
    n_labels: usize,
) -> Result<SegmentArgs<'a>, (GsStatus, String)> {
    let b = &basis.as_ref().ok_or_else(|| null("basis"))?.0;
    if labels_out.is_null() {
        return Err(null("labels_out"));
    }
    if n_labels != b.n_vertices() {
        return Err((
            GsStatus::DimensionMismatch,
            format!("label buffer holds {n_labels} entries for {} vertices", b.n_vertices()),
        ));
    }
    let (nodes, classes) = if n_fidelity == 0 {
        (Vec::new(), Vec::new())
    } else {
        if fidelity_nodes.is_null() || fidelity_classes.is_null() {
            return Err(null("fidelity arrays"));
        }
        (
            slice::from_raw_parts(fidelity_nodes, n_fidelity).to_vec(),
            slice::from_raw_parts(fidelity_classes, n_fidelity).to_vec(),
        )
    };
    let fidelity = lib(FidelitySet::new(b.n_vertices(), n_classes, nodes, classes, mu))?;
    Ok(SegmentArgs {
        basis: b,
        fidelity,
        labels: slice::from_raw_parts_mut(labels_out, n_labels),
    })
}

/// Multiclass MBO segmentation using every eigenpair of `basis`. Writes
/// one class index per vertex into `labels_out`.
///
/// # Safety
/// `basis` must be a live handle; the fidelity arrays must hold
/// `n_fidelity` entries; `labels_out` must hold `n_labels` entries; `info`
/// may be null.
#[no_mangle]
pub unsafe extern "C" fn gs_segment_mbo(
    basis: *const GsBasis,
    n_classes: usize,
    fidelity_nodes: *const usize,
    fidelity_classes: *const usize,
    n_fidelity: usize,
    params: *const GsMboParams,
    labels_out: *mut usize,
    n_labels: usize,
    info: *mut GsRunInfo,
) -> GsStatus {
    guard(|| {
        let p = params.as_ref().ok_or_else(|| null("params"))?;
        let args = segment_args(basis, n_classes, fidelity_nodes, fidelity_classes, n_fidelity, p.mu, labels_out, n_labels)?;
        let cfg = MboConfig {
            dt: p.dt,
            mu: p.mu,
            n_e: args.basis.n_e(),
            n_s: p.n_s,
            eta: p.eta,
            max_iters: p.max_iters,
            seed: p.seed,
        };
        let out = lib(mbo_segment(args.basis, &args.fidelity, &cfg))?;
        args.labels.copy_from_slice(&out.labels);
        if let Some(info) = info.as_mut() {
            *info = GsRunInfo {
                iterations: out.iterations,
                converged: out.converged as i32,
            };
        }
        Ok(())
    })
}

/// Multiclass GL segmentation using every eigenpair of `basis`.
///
/// # Safety
/// Same contract as [`gs_segment_mbo`].
#[no_mangle]
pub unsafe extern "C" fn gs_segment_gl(
    basis: *const GsBasis,
    n_classes: usize,
    fidelity_nodes: *const usize,
    fidelity_classes: *const usize,
    n_fidelity: usize,
    params: *const GsGlParams,
    labels_out: *mut usize,
    n_labels: usize,
    info: *mut GsRunInfo,
) -> GsStatus {
    guard(|| {
        let p = params.as_ref().ok_or_else(|| null("params"))?;
        let args = segment_args(basis, n_classes, fidelity_nodes, fidelity_classes, n_fidelity, p.mu, labels_out, n_labels)?;
        let cfg = GlConfig {
            epsilon: p.epsilon,
            dt: p.dt,
            mu: p.mu,
            n_e: args.basis.n_e(),
            eta: p.eta,
            c: p.c,
            max_iters: p.max_iters,
            seed: p.seed,
        };
        let out = lib(gl_segment(args.basis, &args.fidelity, &cfg))?;
        args.labels.copy_from_slice(&out.labels);
        if let Some(info) = info.as_mut() {
            *info = GsRunInfo {
                iterations: out.iterations,
                converged: out.converged as i32,
            };
        }
        Ok(())
    })
}
