//! Gibbs-simplex geometry.
//!
//! `Σ^K = { s ∈ R^K : s_k ≥ 0, Σ_k s_k = 1 }`. Pure phases are the vertices
//! `e_k`; a node's class is the vertex nearest to its phase vector.

use crate::error::{Error, Result};

/// Rows whose component sum is this close to one (and have no negative
/// component) are treated as already on the simplex.
pub const SUM_TOLERANCE: f64 = 1e-12;

/// A length-K vector on the Gibbs simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexVector(Vec<f64>);

impl SimplexVector {
    /// The pure phase `e_k` in `Σ^K`.
    pub fn vertex(k: usize, n_classes: usize) -> Self {
        let mut v = vec![0.0; n_classes];
        v[k] = 1.0;
        SimplexVector(v)
    }

    /// Wraps `v` after checking that it lies on the simplex.
    pub fn new(v: Vec<f64>) -> Result<Self> {
        if on_simplex(&v) {
            Ok(SimplexVector(v))
        } else {
            Err(Error::invalid("vector is not on the Gibbs simplex"))
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn on_simplex(v: &[f64]) -> bool {
    !v.is_empty()
        && v.iter().all(|&x| x >= 0.0 && x.is_finite())
        && (v.iter().sum::<f64>() - 1.0).abs() <= SUM_TOLERANCE
}

fn check_finite(v: &[f64]) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(k) => Err(Error::NonFinite(format!("component {k} is {}", v[k]))),
        None => Ok(()),
    }
}

/// Euclidean projection onto `Σ^K`.
pub fn project_to_simplex(v: &[f64]) -> Result<SimplexVector> {
    if v.is_empty() {
        return Err(Error::invalid("cannot project an empty vector"));
    }
    check_finite(v)?;
    let mut out = v.to_vec();
    let mut scratch = Vec::with_capacity(v.len());
    project_in_place(&mut out, &mut scratch);
    Ok(SimplexVector(out))
}

/// Projects `row` onto the simplex in place. `scratch` is reused across
/// calls to avoid an allocation per row. Input must be finite and nonempty.
pub(crate) fn project_in_place(row: &mut [f64], scratch: &mut Vec<f64>) {
    if on_simplex(row) {
        return;
    }
    scratch.clear();
    scratch.extend_from_slice(row);
    scratch.sort_unstable_by(|a, b| b.total_cmp(a));

    // Largest j with s_j - (Σ_{i≤j} s_i - 1)/j > 0; j = 1 always qualifies.
    let mut cumsum = 0.0;
    let mut theta = scratch[0] - 1.0;
    for (j, &s) in scratch.iter().enumerate() {
        cumsum += s;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if s - t > 0.0 {
            theta = t;
        }
    }
    for x in row.iter_mut() {
        *x = (*x - theta).max(0.0);
    }

    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        for x in row.iter_mut() {
            *x /= sum;
        }
    }
}

/// Index of the simplex vertex nearest to `v`, i.e. `argmax_k v_k`, with
/// ties going to the lowest index.
pub fn nearest_vertex(v: &[f64]) -> Result<usize> {
    if v.is_empty() {
        return Err(Error::invalid("empty vector has no nearest vertex"));
    }
    check_finite(v)?;
    Ok(argmax(v))
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (k, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = k;
        }
    }
    best
}
