//! Multiclass graph MBO scheme.
//!
//! Each outer iteration runs `N_S` implicit diffusion sub-steps of length
//! `dt / N_S` with fidelity forcing,
//!
//! ```text
//! U ← X (I + (dt/N_S) Λ)^{-1} Xᵀ [U - (dt/N_S) μ(U - Û)],
//! ```
//!
//! then projects every row onto the simplex and snaps it to the nearest
//! vertex.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::field::{initial_field, project_rows, relative_change, row_labels, FidelitySet, LabelField};
use crate::spectral::SpectralBasis;

#[derive(Debug, Clone, PartialEq)]
pub struct MboConfig {
    /// Full time step of one outer iteration; each sub-step uses `dt / n_s`.
    pub dt: f64,
    pub mu: f64,
    pub n_e: usize,
    /// Diffusion sub-steps per threshold.
    pub n_s: usize,
    pub eta: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl MboConfig {
    /// Three-moons defaults: `dt = 0.1, μ = 30, η = 1e-7, N_S = 3`.
    pub fn new(n_e: usize) -> Self {
        MboConfig {
            dt: 0.1,
            mu: 30.0,
            n_e,
            n_s: 3,
            eta: 1e-7,
            max_iters: 500,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        // dt = 0 is accepted: it degenerates to projection onto span(X)
        if !(self.dt >= 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid(format!("dt must be >= 0, got {}", self.dt)));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(Error::invalid(format!("mu must be >= 0, got {}", self.mu)));
        }
        if !(self.eta > 0.0) {
            return Err(Error::invalid(format!("eta must be > 0, got {}", self.eta)));
        }
        if self.n_e == 0 || self.n_s == 0 || self.max_iters == 0 {
            return Err(Error::invalid("n_e, n_s and max_iters must be >= 1"));
        }
        Ok(())
    }

    fn sub_dt(&self) -> f64 {
        self.dt / self.n_s as f64
    }
}

fn check_inputs(n: usize, k: usize, basis: &SpectralBasis, fidelity: &FidelitySet, cfg: &MboConfig) -> Result<()> {
    cfg.validate()?;
    if basis.n_e() != cfg.n_e {
        return Err(Error::DimensionMismatch(format!(
            "basis has {} eigenpairs, config expects n_e = {}",
            basis.n_e(),
            cfg.n_e
        )));
    }
    if basis.n_vertices() != n || fidelity.n_nodes() != n || fidelity.n_classes() != k {
        return Err(Error::DimensionMismatch(format!(
            "field is {n}x{k}, basis has {} vertices, fidelity set is {}x{}",
            basis.n_vertices(),
            fidelity.n_nodes(),
            fidelity.n_classes()
        )));
    }
    if fidelity.mu() != cfg.mu {
        return Err(Error::invalid(format!(
            "fidelity strength {} differs from configured mu {}",
            fidelity.mu(),
            cfg.mu
        )));
    }
    Ok(())
}

/// Diffusion propagator in the truncated basis.
struct Propagator<'a> {
    x: &'a DMatrix<f64>,
    scale: Vec<f64>,
    sub_dt: f64,
}

impl<'a> Propagator<'a> {
    fn new(basis: &'a SpectralBasis, cfg: &MboConfig) -> Self {
        let sub_dt = cfg.sub_dt();
        Propagator {
            x: basis.eigenvectors(),
            scale: basis.eigenvalues().iter().map(|l| 1.0 / (1.0 + sub_dt * l)).collect(),
            sub_dt,
        }
    }

    /// `X S Xᵀ (U - sub_dt · forcing)`
    fn step(&self, u: &DMatrix<f64>, forcing: DMatrix<f64>) -> DMatrix<f64> {
        let rhs = u - forcing * self.sub_dt;
        let mut z = self.x.tr_mul(&rhs);
        for (mut row, s) in z.row_iter_mut().zip(&self.scale) {
            row *= *s;
        }
        self.x * z
    }
}

/// One diffusion sub-step (no thresholding).
pub fn mbo_diffusion_step(u: &DMatrix<f64>, basis: &SpectralBasis, fidelity: &FidelitySet, cfg: &MboConfig) -> Result<DMatrix<f64>> {
    check_inputs(u.nrows(), u.ncols(), basis, fidelity, cfg)?;
    let prop = Propagator::new(basis, cfg);
    Ok(prop.step(u, fidelity.forcing(u)))
}

#[derive(Debug, Clone)]
pub struct MboOutcome {
    /// Final thresholded field; every row is a simplex vertex.
    pub field: LabelField,
    pub labels: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
}

pub fn mbo_segment(basis: &SpectralBasis, fidelity: &FidelitySet, cfg: &MboConfig) -> Result<MboOutcome> {
    fidelity.check_covers_all_classes()?;
    let init = initial_field(fidelity, cfg.seed);
    mbo_segment_from(init, basis, fidelity, cfg)
}

/// Snaps every row to the vertex of its largest entry.
fn threshold(u: &mut DMatrix<f64>) {
    let labels = row_labels(u);
    u.fill(0.0);
    for (i, c) in labels.into_iter().enumerate() {
        u[(i, c)] = 1.0;
    }
}

/// As [`mbo_segment`] but from a given initial field. `on_iteration` is
/// called with every thresholded field.
pub fn mbo_segment_observed(
    init: LabelField,
    basis: &SpectralBasis,
    fidelity: &FidelitySet,
    cfg: &MboConfig,
    mut on_iteration: impl FnMut(&DMatrix<f64>),
) -> Result<MboOutcome> {
    let mut u = init.into_matrix();
    check_inputs(u.nrows(), u.ncols(), basis, fidelity, cfg)?;
    let prop = Propagator::new(basis, cfg);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iters {
        let mut next = u.clone();
        for _ in 0..cfg.n_s {
            let f = fidelity.forcing(&next);
            next = prop.step(&next, f);
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "MBO diffusion produced a non-finite entry at iteration {}",
                iterations + 1
            )));
        }
        project_rows(&mut next);
        threshold(&mut next);
        iterations += 1;
        on_iteration(&next);
        let change = relative_change(&next, &u);
        u = next;
        if change < cfg.eta {
            converged = true;
            break;
        }
    }
    let field = LabelField::from_projected(u);
    Ok(MboOutcome {
        labels: field.labels(),
        field,
        iterations,
        converged,
    })
}

pub fn mbo_segment_from(init: LabelField, basis: &SpectralBasis, fidelity: &FidelitySet, cfg: &MboConfig) -> Result<MboOutcome> {
    mbo_segment_observed(init, basis, fidelity, cfg, |_| {})
}

/// Scalar two-phase MBO on `u ∈ {-1, +1}`: class 0 ↔ +1, class 1 ↔ -1,
/// thresholded at zero (ties to class 0).
pub fn binary_mbo_from(init: &[f64], basis: &SpectralBasis, fidelity: &FidelitySet, cfg: &MboConfig) -> Result<(Vec<usize>, usize, bool)> {
    let n = init.len();
    check_inputs(n, 2, basis, fidelity, cfg)?;
    let prop = Propagator::new(basis, cfg);
    let mut target = vec![0.0; n];
    let mut mu = vec![0.0; n];
    for (&i, &c) in fidelity.indices().iter().zip(fidelity.classes()) {
        target[i] = if c == 0 { 1.0 } else { -1.0 };
        mu[i] = fidelity.mu();
    }
    let mut u = DMatrix::from_column_slice(n, 1, init);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iters {
        let mut next = u.clone();
        for _ in 0..cfg.n_s {
            let f = DMatrix::from_fn(n, 1, |i, _| mu[i] * (next[(i, 0)] - target[i]));
            next = prop.step(&next, f);
        }
        next.apply(|v| *v = if *v >= 0.0 { 1.0 } else { -1.0 });
        iterations += 1;
        let change = relative_change(&next, &u);
        u = next;
        if change < cfg.eta {
            converged = true;
            break;
        }
    }
    let labels = u.iter().map(|&v| if v >= 0.0 { 0 } else { 1 }).collect();
    Ok((labels, iterations, converged))
}

#[derive(Debug, Clone)]
pub struct EquivalenceReport {
    pub multiclass_labels: Vec<usize>,
    pub binary_labels: Vec<usize>,
    /// Fraction of nodes on which the two pipelines agree.
    pub agreement: f64,
    pub multiclass_iterations: usize,
    pub binary_iterations: usize,
}

/// Runs the two-class multiclass scheme and the scalar binary scheme from
/// matched initial fields (`u = U_{·0} - U_{·1}`) and compares labels.
pub fn binary_equivalence_check(basis: &SpectralBasis, fidelity: &FidelitySet, cfg: &MboConfig) -> Result<EquivalenceReport> {
    if fidelity.n_classes() != 2 {
        return Err(Error::invalid(format!(
            "binary equivalence needs 2 classes, got {}",
            fidelity.n_classes()
        )));
    }
    let init = initial_field(fidelity, cfg.seed);
    let scalar: Vec<f64> = init
        .matrix()
        .row_iter()
        .map(|r| r[0] - r[1])
        .collect();
    let multi = mbo_segment_from(init, basis, fidelity, cfg)?;
    let (binary_labels, binary_iterations, _) = binary_mbo_from(&scalar, basis, fidelity, cfg)?;
    let agree = multi
        .labels
        .iter()
        .zip(&binary_labels)
        .filter(|(a, b)| a == b)
        .count();
    Ok(EquivalenceReport {
        agreement: agree as f64 / binary_labels.len() as f64,
        multiclass_labels: multi.labels,
        binary_labels,
        multiclass_iterations: multi.iterations,
        binary_iterations,
    })
}
