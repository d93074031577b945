//! Thick-restart block Lanczos with full reorthogonalization.
//!
//! The smallest eigenvalues of `L_s` are the largest of the shifted operator
//! `A = 2I - L_s`, whose spectrum lies in `[0, 2]`. The Krylov basis is kept
//! fully orthogonal (classical Gram-Schmidt, applied twice), the projected
//! matrix `VᵀAV` is diagonalized densely, and at each restart the basis is
//! compressed to the leading Ritz vectors plus the residual block of the
//! unconverged ones. An invariant subspace (exact breakdown) is escaped by
//! continuing with random vectors, so repeated eigenvalues are recovered.

use log::debug;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{fix_signs, SpectralBasis, SpectralMethod};
use crate::error::{Error, Result};
use crate::graph::NormalizedLaplacian;

#[derive(Debug, Clone)]
pub struct EigenOptions {
    /// Required residual `‖L_s x - λx‖₂` for every returned pair.
    pub tol: f64,
    /// Matrix-application budget; `None` means `40 · n_e`.
    pub max_matvecs: Option<usize>,
    pub seed: u64,
    /// Krylov block width; `None` picks `min(n_e, 4)`.
    pub block_size: Option<usize>,
    /// Maximum basis size before a restart; `None` picks a size from `n_e`.
    pub max_basis: Option<usize>,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tol: 1e-8,
            max_matvecs: None,
            seed: 0,
            block_size: None,
            max_basis: None,
        }
    }
}

impl EigenOptions {
    pub fn with_tol(tol: f64) -> Self {
        EigenOptions {
            tol,
            ..Default::default()
        }
    }
}

/// The `n_e` algebraically smallest eigenpairs of `laplacian`, each with
/// residual at most `tol`.
pub fn smallest_eigenpairs(laplacian: &NormalizedLaplacian, n_e: usize, tol: f64) -> Result<SpectralBasis> {
    smallest_eigenpairs_with(laplacian, n_e, &EigenOptions::with_tol(tol))
}

struct Krylov<'a> {
    lap: &'a NormalizedLaplacian,
    n: usize,
    v: DMatrix<f64>,
    w: DMatrix<f64>,
    m: usize,
    matvecs: usize,
    rng: ChaCha8Rng,
    buf: Vec<f64>,
}

impl Krylov<'_> {
    fn shifted_apply(&mut self, x: &[f64]) -> Vec<f64> {
        self.lap.apply(x, &mut self.buf);
        self.matvecs += 1;
        x.iter().zip(&self.buf).map(|(a, b)| 2.0 * a - b).collect()
    }

    /// Orthogonalizes `x` against the current basis twice; returns the
    /// remaining norm relative to the input norm.
    fn orthogonalize(&self, x: &mut DVector<f64>) -> f64 {
        let before = x.norm();
        if self.m > 0 {
            let basis = self.v.columns(0, self.m);
            for _ in 0..2 {
                let c = basis.tr_mul(x);
                x.gemv(-1.0, &basis, &c, 1.0);
            }
        }
        if before == 0.0 {
            0.0
        } else {
            x.norm() / before
        }
    }

    fn random_vector(&mut self) -> DVector<f64> {
        DVector::from_fn(self.n, |_, _| self.rng.random::<f64>() - 0.5)
    }

    /// Appends `x` (after orthogonalization) and `A x` to the basis. Returns
    /// false when the basis already spans the whole space.
    fn push(&mut self, mut x: DVector<f64>) -> bool {
        if self.m == self.n {
            return false;
        }
        let mut tries = 0;
        while self.orthogonalize(&mut x) < 1e-10 {
            // breakdown: the block lies in span(V); continue from a fresh
            // random direction
            tries += 1;
            if tries > 10 {
                return false;
            }
            x = self.random_vector();
        }
        x.normalize_mut();
        let ax = self.shifted_apply(x.as_slice());
        self.v.set_column(self.m, &x);
        self.w.column_mut(self.m).copy_from_slice(&ax);
        self.m += 1;
        true
    }
}

pub fn smallest_eigenpairs_with(
    laplacian: &NormalizedLaplacian,
    n_e: usize,
    opts: &EigenOptions,
) -> Result<SpectralBasis> {
    let n = laplacian.n();
    if n_e == 0 || n_e > n {
        return Err(Error::invalid(format!(
            "number of eigenpairs must be in [1, {n}], got {n_e}"
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::invalid(format!("tolerance must be > 0, got {}", opts.tol)));
    }
    let block = opts.block_size.unwrap_or(n_e.min(4)).clamp(1, n);
    let max_basis = opts
        .max_basis
        .unwrap_or((3 * n_e + 4 * block).max(n_e + 40))
        .min(n)
        .max((n_e + block).min(n));
    let keep = (n_e + (max_basis - n_e) / 3)
        .min(max_basis.saturating_sub(block))
        .max(n_e);
    let budget = opts.max_matvecs.unwrap_or(40 * n_e);

    let mut k = Krylov {
        lap: laplacian,
        n,
        v: DMatrix::zeros(n, max_basis),
        w: DMatrix::zeros(n, max_basis),
        m: 0,
        matvecs: 0,
        rng: ChaCha8Rng::seed_from_u64(opts.seed),
        buf: vec![0.0; n],
    };

    let mut pending: Vec<DVector<f64>> = (0..block).map(|_| k.random_vector()).collect();
    let mut restarts = 0usize;
    loop {
        // block Krylov expansion up to the basis capacity
        'expand: while k.m < max_basis && !pending.is_empty() {
            let start = k.m;
            for x in pending.drain(..) {
                if k.m == max_basis || !k.push(x) {
                    break 'expand;
                }
            }
            pending = (start..k.m).map(|j| k.w.column(j).into_owned()).collect();
            if k.matvecs >= budget {
                break;
            }
        }

        // Rayleigh-Ritz on the current basis
        let m = k.m;
        let vm = k.v.columns(0, m);
        let wm = k.w.columns(0, m);
        let mut h = vm.tr_mul(&wm);
        let ht = h.transpose();
        h += ht;
        h *= 0.5;
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        let retain = keep.min(m);
        let y = DMatrix::from_fn(m, retain, |r, c| eig.eigenvectors[(r, order[c])]);
        let theta: Vec<f64> = order[..retain].iter().map(|&c| eig.eigenvalues[c]).collect();
        let x = vm * &y;
        let ax = wm * &y;

        let residuals: Vec<DVector<f64>> = (0..retain)
            .map(|j| ax.column(j) - x.column(j) * theta[j])
            .collect();
        let norms: Vec<f64> = residuals.iter().map(|r| r.norm()).collect();
        let wanted = n_e.min(retain);
        let worst = norms[..wanted].iter().cloned().fold(0.0, f64::max);
        debug!(
            "lanczos restart {restarts}: basis {m}, matvecs {}, worst residual {worst:.3e}",
            k.matvecs
        );

        if wanted == n_e && worst <= opts.tol {
            let eigenvalues: Vec<f64> = theta[..n_e].iter().map(|t| 2.0 - t).collect();
            let mut vectors = x.columns(0, n_e).into_owned();
            fix_signs(&mut vectors);
            return SpectralBasis::new(eigenvalues, vectors, SpectralMethod::Exact);
        }
        if k.matvecs >= budget || m == n {
            return Err(Error::NoConvergence {
                matvecs: k.matvecs,
                worst,
                residuals: norms[..wanted].to_vec(),
            });
        }

        // thick restart: keep the leading Ritz pairs, continue from the
        // residual block of the unconverged ones
        k.v.columns_mut(0, retain).copy_from(&x);
        k.w.columns_mut(0, retain).copy_from(&ax);
        k.m = retain;
        pending = (0..retain)
            .filter(|&j| norms[j] > opts.tol)
            .take(block)
            .map(|j| residuals[j].clone())
            .collect();
        if pending.is_empty() {
            pending.push(k.random_vector());
        }
        restarts += 1;
    }
}
