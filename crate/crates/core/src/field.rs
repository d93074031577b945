//! Phase fields and fidelity data shared by the GL and MBO solvers.

use nalgebra::DMatrix;
use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::simplex::{argmax, project_in_place};

/// `N_D × K` matrix whose rows are points of the Gibbs simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelField {
    u: DMatrix<f64>,
}

impl LabelField {
    /// Wraps `u`, projecting every row onto the simplex.
    pub fn from_matrix(mut u: DMatrix<f64>) -> Result<Self> {
        if u.ncols() == 0 || u.nrows() == 0 {
            return Err(Error::invalid("label field must be nonempty"));
        }
        if u.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("label field entry".into()));
        }
        project_rows(&mut u);
        Ok(LabelField { u })
    }

    /// Every row set to the vertex of its class.
    pub fn from_labels(labels: &[usize], n_classes: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&c| c >= n_classes) {
            return Err(Error::invalid(format!("label {bad} out of range for {n_classes} classes")));
        }
        let mut u = DMatrix::zeros(labels.len(), n_classes);
        for (i, &c) in labels.iter().enumerate() {
            u[(i, c)] = 1.0;
        }
        Ok(LabelField { u })
    }

    pub(crate) fn from_projected(u: DMatrix<f64>) -> Self {
        LabelField { u }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.u
    }

    pub fn n_nodes(&self) -> usize {
        self.u.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.u.ncols()
    }

    /// Nearest simplex vertex of every row.
    pub fn labels(&self) -> Vec<usize> {
        row_labels(&self.u)
    }
}

pub(crate) fn row_labels(u: &DMatrix<f64>) -> Vec<usize> {
    let k = u.ncols();
    let mut row = vec![0.0; k];
    (0..u.nrows())
        .map(|i| {
            for (c, r) in row.iter_mut().enumerate() {
                *r = u[(i, c)];
            }
            argmax(&row)
        })
        .collect()
}

/// Projects every row of `u` onto the simplex.
pub(crate) fn project_rows(u: &mut DMatrix<f64>) {
    let k = u.ncols();
    let mut row = vec![0.0; k];
    let mut scratch = Vec::with_capacity(k);
    for i in 0..u.nrows() {
        for (c, r) in row.iter_mut().enumerate() {
            *r = u[(i, c)];
        }
        project_in_place(&mut row, &mut scratch);
        for (c, &r) in row.iter().enumerate() {
            u[(i, c)] = r;
        }
    }
}

/// Labeled nodes, their classes and the fidelity strength `μ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FidelitySet {
    n_nodes: usize,
    n_classes: usize,
    indices: Vec<usize>,
    classes: Vec<usize>,
    mu: f64,
}

impl FidelitySet {
    pub fn new(n_nodes: usize, n_classes: usize, indices: Vec<usize>, classes: Vec<usize>, mu: f64) -> Result<Self> {
        if n_classes == 0 {
            return Err(Error::invalid("need at least one class"));
        }
        if indices.len() != classes.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} fidelity indices but {} classes",
                indices.len(),
                classes.len()
            )));
        }
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(Error::invalid(format!("fidelity strength must be >= 0, got {mu}")));
        }
        let mut seen = vec![false; n_nodes];
        for (&i, &c) in indices.iter().zip(&classes) {
            if i >= n_nodes {
                return Err(Error::invalid(format!("fidelity index {i} out of range ({n_nodes} nodes)")));
            }
            if seen[i] {
                return Err(Error::invalid(format!("duplicate fidelity index {i}")));
            }
            seen[i] = true;
            if c >= n_classes {
                return Err(Error::invalid(format!("fidelity class {c} out of range ({n_classes} classes)")));
            }
        }
        Ok(FidelitySet {
            n_nodes,
            n_classes,
            indices,
            classes,
            mu,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn with_mu(&self, mu: f64) -> Result<Self> {
        Self::new(self.n_nodes, self.n_classes, self.indices.clone(), self.classes.clone(), mu)
    }

    /// Per-node `μ_i`: `μ` on labeled nodes, zero elsewhere.
    pub fn mu_vector(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.n_nodes];
        for &i in &self.indices {
            m[i] = self.mu;
        }
        m
    }

    /// `Û`: one-hot rows on labeled nodes, zero rows elsewhere.
    pub fn targets(&self) -> DMatrix<f64> {
        let mut t = DMatrix::zeros(self.n_nodes, self.n_classes);
        for (&i, &c) in self.indices.iter().zip(&self.classes) {
            t[(i, c)] = 1.0;
        }
        t
    }

    /// Errors unless every class has at least one labeled node.
    pub fn check_covers_all_classes(&self) -> Result<()> {
        let mut seen = vec![false; self.n_classes];
        for &c in &self.classes {
            seen[c] = true;
        }
        match seen.iter().position(|s| !s) {
            Some(c) => Err(Error::invalid(format!("fidelity set has no sample of class {c}"))),
            None => Ok(()),
        }
    }

    /// `μ ⊙ (U - Û)`, nonzero only on labeled rows.
    pub(crate) fn forcing(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        let mut f = DMatrix::zeros(u.nrows(), u.ncols());
        for (&i, &c) in self.indices.iter().zip(&self.classes) {
            for k in 0..u.ncols() {
                let target = if k == c { 1.0 } else { 0.0 };
                f[(i, k)] = self.mu * (u[(i, k)] - target);
            }
        }
        f
    }
}

/// Random initial field: i.i.d. uniform(0, 1) entries, rows projected onto
/// the simplex, then labeled rows overwritten by their targets.
pub fn initial_field(fidelity: &FidelitySet, seed: u64) -> LabelField {
    let (n, k) = (fidelity.n_nodes(), fidelity.n_classes());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // row-major draw order so the field does not depend on storage layout
    let mut u = DMatrix::zeros(n, k);
    for i in 0..n {
        for c in 0..k {
            u[(i, c)] = rng.sample::<f64, _>(Open01);
        }
    }
    project_rows(&mut u);
    if fidelity.mu() > 0.0 {
        for (&i, &c) in fidelity.indices().iter().zip(fidelity.classes()) {
            for col in 0..k {
                u[(i, col)] = if col == c { 1.0 } else { 0.0 };
            }
        }
    }
    LabelField { u }
}

/// `max_i ‖u_i^{new} - u_i^{old}‖² / max_i ‖u_i^{new}‖²`
pub fn relative_change(new: &DMatrix<f64>, old: &DMatrix<f64>) -> f64 {
    let mut num: f64 = 0.0;
    let mut den: f64 = 0.0;
    for i in 0..new.nrows() {
        let mut d = 0.0;
        let mut s = 0.0;
        for k in 0..new.ncols() {
            let x = new[(i, k)];
            d += (x - old[(i, k)]).powi(2);
            s += x * x;
        }
        num = num.max(d);
        den = den.max(s);
    }
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fid() -> FidelitySet {
        FidelitySet::new(5, 3, vec![0, 3], vec![2, 1], 10.0).unwrap()
    }

    #[test]
    fn fidelity_validation() {
        assert!(FidelitySet::new(3, 2, vec![0, 0], vec![0, 1], 1.0).is_err());
        assert!(FidelitySet::new(3, 2, vec![3], vec![0], 1.0).is_err());
        assert!(FidelitySet::new(3, 2, vec![1], vec![2], 1.0).is_err());
        assert!(FidelitySet::new(3, 2, vec![1], vec![0], -1.0).is_err());
        assert!(fid().check_covers_all_classes().is_err());
    }

    #[test]
    fn mu_and_targets() {
        let f = fid();
        assert_eq!(f.mu_vector(), vec![10.0, 0.0, 0.0, 10.0, 0.0]);
        let t = f.targets();
        assert_eq!(t.row(0).iter().copied().collect::<Vec<_>>(), vec![0.0, 0.0, 1.0]);
        assert_eq!(t.row(1).iter().copied().collect::<Vec<_>>(), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn initial_field_rows_on_simplex_and_clamped() {
        let f = fid();
        let u = initial_field(&f, 3);
        for i in 0..5 {
            let row: Vec<f64> = u.matrix().row(i).iter().copied().collect();
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|&x| x >= 0.0));
        }
        assert_eq!(u.labels()[0], 2);
        assert_eq!(u.labels()[3], 1);
        assert_eq!(initial_field(&f, 3), u);
        assert_ne!(initial_field(&f, 4), u);
    }

    #[test]
    fn relative_change_of_identical_fields_is_zero() {
        let u = initial_field(&fid(), 0);
        assert_eq!(relative_change(u.matrix(), u.matrix()), 0.0);
    }

    #[test]
    fn from_labels_builds_vertices() {
        let u = LabelField::from_labels(&[1, 0, 1], 2).unwrap();
        assert_eq!(u.labels(), vec![1, 0, 1]);
        assert!(LabelField::from_labels(&[2], 2).is_err());
    }
}
