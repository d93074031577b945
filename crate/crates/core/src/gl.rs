//! Multiclass Ginzburg-Landau minimization by convex splitting.
//!
//! The energy
//!
//! ```text
//! E(U) = ε/2 ⟨U, L_s U⟩ + 1/(2ε) Σ_i Π_k ¼‖u_i - e_k‖₁² + Σ_i μ_i/2 ‖u_i - û_i‖²
//! ```
//!
//! is split into a convex part `ε/2 ⟨U, L_s U⟩ + C/2 ⟨U, U⟩`, treated
//! implicitly, and the remainder, treated explicitly. `C ≥ μ + 1/ε` keeps
//! the split valid. In the truncated eigenbasis the implicit solve is a
//! diagonal scaling, so each step costs `O(N_D · K · N_e)`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::field::{initial_field, project_rows, relative_change, FidelitySet, LabelField};
use crate::graph::NormalizedLaplacian;
use crate::spectral::SpectralBasis;

#[derive(Debug, Clone, PartialEq)]
pub struct GlConfig {
    /// Diffuse interface scale `ε`.
    pub epsilon: f64,
    pub dt: f64,
    pub mu: f64,
    pub n_e: usize,
    /// Stopping threshold on the relative change of the field.
    pub eta: f64,
    /// Convexity constant; must satisfy `C ≥ μ + 1/ε`.
    pub c: f64,
    pub max_iters: usize,
    /// Seed of the random initial field.
    pub seed: u64,
}

impl GlConfig {
    /// Three-moons defaults: `ε = 1, dt = 0.1, μ = 30, η = 1e-7, C = μ + 1/ε`.
    pub fn new(n_e: usize) -> Self {
        let (epsilon, mu) = (1.0, 30.0);
        GlConfig {
            epsilon,
            dt: 0.1,
            mu,
            n_e,
            eta: 1e-7,
            c: mu + 1.0 / epsilon,
            max_iters: 500,
            seed: 0,
        }
    }

    /// Sets `ε` and resets `C` to its lower bound `μ + 1/ε`.
    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self.c = self.mu + 1.0 / epsilon;
        self
    }

    /// Sets `μ` and resets `C` to its lower bound `μ + 1/ε`.
    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = mu;
        self.c = mu + 1.0 / self.epsilon;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("epsilon", self.epsilon),
            ("dt", self.dt),
            ("eta", self.eta),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(Error::invalid(format!("mu must be >= 0, got {}", self.mu)));
        }
        if self.n_e == 0 {
            return Err(Error::invalid("n_e must be >= 1"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be >= 1"));
        }
        let bound = self.mu + 1.0 / self.epsilon;
        // C is usually set to exactly this bound; allow for its roundoff
        if !(self.c >= bound * (1.0 - 1e-12)) {
            return Err(Error::invalid(format!(
                "convexity constant C={} is below mu + 1/epsilon = {bound}",
                self.c
            )));
        }
        Ok(())
    }
}

/// Quadratic smoothing operator used when evaluating the energy.
#[derive(Debug, Clone, Copy)]
pub enum Smoothing<'a> {
    Laplacian(&'a NormalizedLaplacian),
    /// `⟨U, X Λ Xᵀ U⟩` in the truncated basis.
    Spectral(&'a SpectralBasis),
}

impl Smoothing<'_> {
    fn n(&self) -> usize {
        match self {
            Smoothing::Laplacian(l) => l.n(),
            Smoothing::Spectral(b) => b.n_vertices(),
        }
    }

    /// `trace(Uᵀ L U)`
    fn trace_form(&self, u: &DMatrix<f64>) -> f64 {
        match self {
            Smoothing::Laplacian(l) => (0..u.ncols())
                .map(|k| l.quadratic_form(u.column(k).as_slice()))
                .sum(),
            Smoothing::Spectral(b) => {
                let coef = b.eigenvectors().tr_mul(u);
                coef.row_iter()
                    .zip(b.eigenvalues())
                    .map(|(row, lam)| lam * row.norm_squared())
                    .sum()
            }
        }
    }
}

/// `‖u - e_l‖₁` for every `l`, given `Σ_j |u_j|`.
#[inline]
fn l1_to_vertices(row: &[f64], out: &mut [f64]) {
    let abs_sum: f64 = row.iter().map(|x| x.abs()).sum();
    for (l, o) in out.iter_mut().enumerate() {
        *o = abs_sum - row[l].abs() + (row[l] - 1.0).abs();
    }
}

/// Multi-well potential `Π_k ¼‖u - e_k‖₁²` of one row.
pub fn well_potential(row: &[f64]) -> f64 {
    let mut a = vec![0.0; row.len()];
    l1_to_vertices(row, &mut a);
    a.iter().map(|x| 0.25 * x * x).product()
}

/// Derivative of the potential, row by row:
/// `T_ik = Σ_l ½(1 - 2δ_kl) ‖u_i - e_l‖₁ Π_{m≠l} ¼‖u_i - e_m‖₁²`.
pub fn well_derivative(u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if u.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("label field entry".into()));
    }
    let k = u.ncols();
    let mut t = DMatrix::zeros(u.nrows(), k);
    let mut row = vec![0.0; k];
    let mut a = vec![0.0; k];
    let mut q = vec![0.0; k];
    let mut prefix = vec![1.0; k + 1];
    let mut g = vec![0.0; k];
    for i in 0..u.nrows() {
        for (c, r) in row.iter_mut().enumerate() {
            *r = u[(i, c)];
        }
        l1_to_vertices(&row, &mut a);
        for l in 0..k {
            q[l] = 0.25 * a[l] * a[l];
            prefix[l + 1] = prefix[l] * q[l];
        }
        // g_l = ½ a_l Π_{m≠l} q_m, with the exclusion done by prefix/suffix
        // products so zero factors need no special casing
        let mut suffix = 1.0;
        for l in (0..k).rev() {
            g[l] = 0.5 * a[l] * prefix[l] * suffix;
            suffix *= q[l];
        }
        let total: f64 = g.iter().sum();
        for c in 0..k {
            t[(i, c)] = total - 2.0 * g[c];
        }
    }
    Ok(t)
}

fn check_dims(n: usize, k: usize, fidelity: &FidelitySet) -> Result<()> {
    if fidelity.n_nodes() != n || fidelity.n_classes() != k {
        return Err(Error::DimensionMismatch(format!(
            "field is {n}x{k}, fidelity set is {}x{}",
            fidelity.n_nodes(),
            fidelity.n_classes()
        )));
    }
    Ok(())
}

/// Multiclass GL energy of `u`.
pub fn multiclass_energy(u: &LabelField, smoothing: Smoothing<'_>, fidelity: &FidelitySet, epsilon: f64) -> Result<f64> {
    let m = u.matrix();
    check_dims(m.nrows(), m.ncols(), fidelity)?;
    if smoothing.n() != m.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "operator has {} vertices, field has {} rows",
            smoothing.n(),
            m.nrows()
        )));
    }
    if !(epsilon > 0.0) {
        return Err(Error::invalid(format!("epsilon must be > 0, got {epsilon}")));
    }
    let smooth = 0.5 * epsilon * smoothing.trace_form(m);
    let mut row = vec![0.0; m.ncols()];
    let mut potential = 0.0;
    for i in 0..m.nrows() {
        for (c, r) in row.iter_mut().enumerate() {
            *r = m[(i, c)];
        }
        potential += well_potential(&row);
    }
    let forcing = fidelity.forcing(m);
    let fit = if fidelity.mu() > 0.0 {
        0.5 * forcing.norm_squared() / fidelity.mu()
    } else {
        0.0
    };
    Ok(smooth + potential / (2.0 * epsilon) + fit)
}

fn check_inputs(u: &DMatrix<f64>, basis: &SpectralBasis, fidelity: &FidelitySet, cfg: &GlConfig) -> Result<()> {
    cfg.validate()?;
    if basis.n_e() != cfg.n_e {
        return Err(Error::DimensionMismatch(format!(
            "basis has {} eigenpairs, config expects n_e = {}",
            basis.n_e(),
            cfg.n_e
        )));
    }
    if basis.n_vertices() != u.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "basis has {} vertices, field has {} rows",
            basis.n_vertices(),
            u.nrows()
        )));
    }
    if fidelity.mu() != cfg.mu {
        return Err(Error::invalid(format!(
            "fidelity strength {} differs from configured mu {}",
            fidelity.mu(),
            cfg.mu
        )));
    }
    check_dims(u.nrows(), u.ncols(), fidelity)
}

/// `[(1 + C dt) I + ε dt Λ]^{-1}` as a vector.
fn implicit_scaling(basis: &SpectralBasis, cfg: &GlConfig) -> Vec<f64> {
    basis
        .eigenvalues()
        .iter()
        .map(|lam| 1.0 / ((1.0 + cfg.c * cfg.dt) + cfg.epsilon * cfg.dt * lam))
        .collect()
}

fn update_with(u: &DMatrix<f64>, basis: &SpectralBasis, fidelity: &FidelitySet, cfg: &GlConfig, scale: &[f64]) -> Result<DMatrix<f64>> {
    let t = well_derivative(u)?;
    let mut rhs = u * (1.0 + cfg.c * cfg.dt);
    rhs -= t * (cfg.dt / (2.0 * cfg.epsilon));
    rhs -= fidelity.forcing(u) * cfg.dt;
    let x = basis.eigenvectors();
    let mut z = x.tr_mul(&rhs);
    for (mut row, s) in z.row_iter_mut().zip(scale) {
        row *= *s;
    }
    let out = x * z;
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("GL update produced a non-finite entry".into()));
    }
    Ok(out)
}

/// One convex-splitting update before projection:
/// `X [(1 + C dt) I + ε dt Λ]^{-1} Xᵀ [(1 + C dt) U - dt/(2ε) T - dt μ(U - Û)]`.
pub fn convex_splitting_update(u: &LabelField, basis: &SpectralBasis, fidelity: &FidelitySet, cfg: &GlConfig) -> Result<DMatrix<f64>> {
    check_inputs(u.matrix(), basis, fidelity, cfg)?;
    update_with(u.matrix(), basis, fidelity, cfg, &implicit_scaling(basis, cfg))
}

/// One GL iteration: convex-splitting update followed by row-wise
/// projection onto the simplex.
pub fn gl_step(u: &LabelField, basis: &SpectralBasis, fidelity: &FidelitySet, cfg: &GlConfig) -> Result<LabelField> {
    let mut next = convex_splitting_update(u, basis, fidelity, cfg)?;
    project_rows(&mut next);
    Ok(LabelField::from_projected(next))
}

#[derive(Debug, Clone)]
pub struct GlOutcome {
    pub field: LabelField,
    pub labels: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
    /// Energy of the initial field, smoothing term in the truncated basis.
    pub initial_energy: f64,
    /// Energy of the final field, smoothing term in the truncated basis.
    pub final_energy: f64,
}

/// Runs GL iterations from a random start until the relative change drops
/// below `η` or `max_iters` is reached.
pub fn gl_segment(basis: &SpectralBasis, fidelity: &FidelitySet, cfg: &GlConfig) -> Result<GlOutcome> {
    if fidelity.is_empty() {
        return Err(Error::invalid("GL segmentation needs a nonempty fidelity set"));
    }
    fidelity.check_covers_all_classes()?;
    let init = initial_field(fidelity, cfg.seed);
    gl_segment_from(init, basis, fidelity, cfg)
}

/// As [`gl_segment`] but from a given initial field.
pub fn gl_segment_from(init: LabelField, basis: &SpectralBasis, fidelity: &FidelitySet, cfg: &GlConfig) -> Result<GlOutcome> {
    check_inputs(init.matrix(), basis, fidelity, cfg)?;
    let scale = implicit_scaling(basis, cfg);
    let initial_energy = multiclass_energy(&init, Smoothing::Spectral(basis), fidelity, cfg.epsilon)?;

    let mut u = init.into_matrix();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iters {
        let mut next = update_with(&u, basis, fidelity, cfg, &scale).map_err(|e| match e {
            Error::NonFinite(msg) => Error::NonFinite(format!("{msg} at iteration {}", iterations + 1)),
            other => other,
        })?;
        project_rows(&mut next);
        iterations += 1;
        let change = relative_change(&next, &u);
        u = next;
        if change < cfg.eta {
            converged = true;
            break;
        }
    }
    let field = LabelField::from_projected(u);
    let final_energy = multiclass_energy(&field, Smoothing::Spectral(basis), fidelity, cfg.epsilon)?;
    Ok(GlOutcome {
        labels: field.labels(),
        field,
        iterations,
        converged,
        initial_energy,
        final_energy,
    })
}
