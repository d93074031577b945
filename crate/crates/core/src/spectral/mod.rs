//! Truncated spectral decomposition of the normalized graph Laplacian.
//!
//! Both solvers only ever touch `L_s` through its `N_e` smallest eigenpairs,
//! so this module is the boundary between graph construction and the phase
//! field solvers.

mod cache;
mod lanczos;
mod nystrom;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub use cache::{read_eigs, write_eigs, SpectrumCache};
pub use lanczos::{smallest_eigenpairs, smallest_eigenpairs_with, EigenOptions};
pub use nystrom::{nystrom_eigenpairs, NystromOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectralMethod {
    Exact,
    Nystrom { sample_size: usize },
}

impl SpectralMethod {
    /// Token used in eigencache headers.
    pub fn token(&self) -> String {
        match self {
            SpectralMethod::Exact => "exact".to_string(),
            SpectralMethod::Nystrom { sample_size } => format!("nystrom:{sample_size}"),
        }
    }

    pub fn parse(token: &str) -> Option<Self> {
        if token == "exact" {
            return Some(SpectralMethod::Exact);
        }
        token
            .strip_prefix("nystrom:")
            .and_then(|s| s.parse().ok())
            .map(|sample_size| SpectralMethod::Nystrom { sample_size })
    }
}

/// The `N_e` smallest eigenvalues (ascending) of `L_s` and their
/// eigenvectors as the columns of an `N_D × N_e` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBasis {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
    method: SpectralMethod,
}

impl SpectralBasis {
    pub fn new(eigenvalues: Vec<f64>, eigenvectors: DMatrix<f64>, method: SpectralMethod) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::invalid("spectral basis needs at least one eigenpair"));
        }
        if eigenvectors.ncols() != eigenvalues.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} eigenvalues but {} eigenvector columns",
                eigenvalues.len(),
                eigenvectors.ncols()
            )));
        }
        if eigenvalues.iter().chain(eigenvectors.iter()).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("spectral basis entry".into()));
        }
        if eigenvalues.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::invalid("eigenvalues must be ascending"));
        }
        Ok(SpectralBasis {
            eigenvalues,
            eigenvectors,
            method,
        })
    }

    pub fn n_e(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.eigenvectors.nrows()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn method(&self) -> SpectralMethod {
        self.method
    }

    /// The first `n_e` pairs of this basis.
    pub fn truncate(&self, n_e: usize) -> Result<SpectralBasis> {
        if n_e == 0 || n_e > self.n_e() {
            return Err(Error::invalid(format!(
                "cannot truncate a basis of {} pairs to {n_e}",
                self.n_e()
            )));
        }
        Ok(SpectralBasis {
            eigenvalues: self.eigenvalues[..n_e].to_vec(),
            eigenvectors: self.eigenvectors.columns(0, n_e).into_owned(),
            method: self.method,
        })
    }

    /// `max |XᵀX - I|`
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.eigenvectors.tr_mul(&self.eigenvectors);
        let mut worst: f64 = 0.0;
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - target).abs());
            }
        }
        worst
    }
}

/// Flips each column so that its largest-magnitude entry (first one on ties)
/// is positive.
pub(crate) fn fix_signs(x: &mut DMatrix<f64>) {
    for mut col in x.column_iter_mut() {
        let mut best = 0;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }
}
