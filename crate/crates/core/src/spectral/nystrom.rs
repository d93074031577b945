//! Nyström approximation of the normalized Laplacian spectrum of a fully
//! connected kernel graph.
//!
//! With landmarks `A` and the remaining points `B`, only the blocks `W_AA`
//! and `W_AB` of the kernel are formed. Degrees of `B` are completed with
//! `W_BA W_AA⁺ W_AB 1`, both blocks are normalized by `D^{-1/2}`, and the
//! one-shot orthogonalization
//!
//! ```text
//! Q = W_AA + W_AA^{-1/2} W_AB W_BA W_AA^{-1/2} = U Λ Uᵀ
//! V = [W_AA; W_BA] W_AA^{-1/2} U Λ^{-1/2}
//! ```
//!
//! gives orthonormal `V` with `Ŵ = V Λ Vᵀ`. Laplacian eigenvalues are `1 - Λ`.
//! The kernel includes the self-similarity `w(i, i)`, which keeps it
//! positive semidefinite.

use log::{debug, warn};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{fix_signs, SpectralBasis, SpectralMethod};
use crate::error::{Error, Result};
use crate::graph::{cosine_weight, distance, FeatureMatrix, Metric, WeightKind, WeightSpec};

#[derive(Debug, Clone, Copy)]
pub struct NystromOptions {
    /// Eigenvalues of the landmark blocks below `rank_cutoff · max` are
    /// treated as zero.
    pub rank_cutoff: f64,
}

impl Default for NystromOptions {
    fn default() -> Self {
        NystromOptions { rank_cutoff: 1e-12 }
    }
}

/// Fully connected kernel value between two feature rows.
fn kernel(spec: &WeightSpec, tau: &[f64], f: &FeatureMatrix, i: usize, j: usize) -> Result<f64> {
    let (xi, xj) = (f.row(i), f.row(j));
    match spec.kind {
        WeightKind::Gaussian { sigma } => {
            let d = distance(Metric::Euclidean, xi, xj)?;
            Ok((-(d * d) / (sigma * sigma)).exp())
        }
        WeightKind::LocalScaling { .. } => {
            let d = distance(Metric::Euclidean, xi, xj)?;
            Ok((-(d * d) / (tau[i] * tau[j]).sqrt()).exp())
        }
        WeightKind::Cosine => cosine_weight(xi, xj),
    }
}

/// Squared local scales `τ_i` from the exact M-th nearest-neighbor distance.
fn local_scales(f: &FeatureMatrix, m: usize) -> Result<Vec<f64>> {
    let n = f.nrows();
    if m >= n {
        return Err(Error::invalid(format!("local scaling index M={m} needs more than {n} points")));
    }
    let tau: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut d: Vec<f64> = (0..n)
                .filter(|&j| j != i)
                .map(|j| distance(Metric::Euclidean, f.row(i), f.row(j)).unwrap_or(0.0))
                .collect();
            d.select_nth_unstable_by(m - 1, f64::total_cmp);
            d[m - 1] * d[m - 1]
        })
        .collect();
    if let Some(v) = tau.iter().position(|&t| t <= 0.0) {
        return Err(Error::ZeroLocalScale { vertex: v, m });
    }
    Ok(tau)
}

/// Symmetric `A^{p}` restricted to eigenvalues above `cutoff · max`;
/// returns the matrix and the retained rank.
fn sym_power(a: &DMatrix<f64>, p: f64, cutoff: f64) -> (DMatrix<f64>, usize) {
    let eig = SymmetricEigen::new(a.clone());
    let max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let mut out = DMatrix::zeros(a.nrows(), a.ncols());
    let mut rank = 0;
    for (k, &s) in eig.eigenvalues.iter().enumerate() {
        if s > cutoff * max {
            let e = eig.eigenvectors.column(k);
            out += (e * e.transpose()) * s.powf(p);
            rank += 1;
        }
    }
    (out, rank)
}

pub fn nystrom_eigenpairs(
    features: &FeatureMatrix,
    spec: &WeightSpec,
    sample_size: usize,
    n_e: usize,
    seed: u64,
) -> Result<SpectralBasis> {
    nystrom_eigenpairs_with(features, spec, sample_size, n_e, seed, &NystromOptions::default())
}

pub fn nystrom_eigenpairs_with(
    features: &FeatureMatrix,
    spec: &WeightSpec,
    sample_size: usize,
    n_e: usize,
    seed: u64,
    opts: &NystromOptions,
) -> Result<SpectralBasis> {
    let n = features.nrows();
    if n_e == 0 || n_e > sample_size || sample_size > n {
        return Err(Error::invalid(format!(
            "need 1 <= n_e ({n_e}) <= sample size ({sample_size}) <= N ({n})"
        )));
    }
    match spec.kind {
        WeightKind::Gaussian { sigma } if !(sigma > 0.0) => {
            return Err(Error::invalid(format!("gaussian sigma must be > 0, got {sigma}")))
        }
        WeightKind::LocalScaling { m: 0 } => {
            return Err(Error::invalid("local scaling index must be >= 1"))
        }
        _ => {}
    }
    let tau = match spec.kind {
        WeightKind::LocalScaling { m } => local_scales(features, m)?,
        _ => Vec::new(),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut landmarks = sample(&mut rng, n, sample_size).into_vec();
    landmarks.sort_unstable();
    let mut is_landmark = vec![false; n];
    for &i in &landmarks {
        is_landmark[i] = true;
    }
    let rest: Vec<usize> = (0..n).filter(|&i| !is_landmark[i]).collect();
    let (s, r) = (landmarks.len(), rest.len());
    debug!("nystrom: {s} landmarks, {r} extended points (seed {seed})");

    let block = |rows: &[usize], cols: &[usize]| -> Result<DMatrix<f64>> {
        let vals: Vec<Result<f64>> = (0..rows.len() * cols.len())
            .into_par_iter()
            .map(|p| kernel(spec, &tau, features, rows[p % rows.len()], cols[p / rows.len()]))
            .collect();
        let vals: Result<Vec<f64>> = vals.into_iter().collect();
        Ok(DMatrix::from_vec(rows.len(), cols.len(), vals?))
    };
    let mut w_aa = block(&landmarks, &landmarks)?;
    let mut w_ab = block(&landmarks, &rest)?;

    // degree completion
    let (aa_pinv, rank) = sym_power(&w_aa, -1.0, opts.rank_cutoff);
    debug!("nystrom: landmark block rank {rank} of {s}");
    let ab_rowsum: DVector<f64> = w_ab.column_sum();
    let d_a: DVector<f64> = w_aa.column_sum() + &ab_rowsum;
    let d_b: DVector<f64> = w_ab.row_sum().transpose() + w_ab.tr_mul(&(&aa_pinv * &ab_rowsum));
    let floor = 1e-12 * d_a.max().max(if r > 0 { d_b.max() } else { 0.0 });
    let mut clipped = 0;
    let d_b = d_b.map(|d| {
        if d > floor {
            d
        } else {
            clipped += 1;
            floor
        }
    });
    if clipped > 0 {
        warn!("nystrom: {clipped} approximate degrees were nonpositive and clipped to {floor:.3e}");
    }
    if let Some(i) = d_a.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::IsolatedVertex(landmarks[i]));
    }

    let inv_sqrt_a = d_a.map(|d| 1.0 / d.sqrt());
    let inv_sqrt_b = d_b.map(|d| 1.0 / d.sqrt());
    for j in 0..s {
        for i in 0..s {
            w_aa[(i, j)] *= inv_sqrt_a[i] * inv_sqrt_a[j];
        }
    }
    for j in 0..r {
        for i in 0..s {
            w_ab[(i, j)] *= inv_sqrt_a[i] * inv_sqrt_b[j];
        }
    }

    // one-shot orthogonalized extension
    let (aa_isqrt, rank) = sym_power(&w_aa, -0.5, opts.rank_cutoff);
    if rank < n_e {
        return Err(Error::SingularLandmarks { rank, needed: n_e });
    }
    let m = &aa_isqrt * &w_ab;
    let mut q = &w_aa + &m * m.transpose();
    let qt = q.transpose();
    q += qt;
    q *= 0.5;
    let eig = SymmetricEigen::new(q);
    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let top = eig.eigenvalues[order[0]];
    let usable = order
        .iter()
        .take_while(|&&k| eig.eigenvalues[k] > opts.rank_cutoff * top)
        .count();
    if usable < n_e {
        return Err(Error::SingularLandmarks { rank: usable, needed: n_e });
    }
    let lambda: Vec<f64> = order[..n_e].iter().map(|&k| eig.eigenvalues[k]).collect();
    let u_scaled = DMatrix::from_fn(s, n_e, |i, c| {
        eig.eigenvectors[(i, order[c])] / lambda[c].sqrt()
    });
    let proj = &aa_isqrt * u_scaled;
    let v_a = &w_aa * &proj;
    let v_b = w_ab.tr_mul(&proj);

    let mut x = DMatrix::zeros(n, n_e);
    for (p, &i) in landmarks.iter().enumerate() {
        x.row_mut(i).copy_from(&v_a.row(p));
    }
    for (p, &i) in rest.iter().enumerate() {
        x.row_mut(i).copy_from(&v_b.row(p));
    }
    fix_signs(&mut x);

    let eigenvalues: Vec<f64> = lambda.iter().map(|l| 1.0 - l).collect();
    let basis = SpectralBasis::new(eigenvalues, x, SpectralMethod::Nystrom { sample_size })?;
    debug!(
        "nystrom: orthonormality deviation of extended vectors {:.3e}",
        basis.orthonormality_error()
    );
    Ok(basis)
}
