//! Independent dense oracles and checks shared by the integration suites
//! and the acceptance harness.

#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use graphseg::field::{initial_field, FidelitySet, LabelField};
use graphseg::gl::{convex_splitting_update, gl_segment_from, multiclass_energy, well_derivative, well_potential, GlConfig, Smoothing};
use graphseg::graph::{normalized_laplacian, Edge, FeatureMatrix, NormalizedLaplacian, SparseWeightGraph};
use graphseg::mbo::{binary_equivalence_check, mbo_diffusion_step, MboConfig};
use graphseg::simplex::project_to_simplex;
use graphseg::eval::graph_tv;
use graphseg::graph::{knn_graph, Metric, WeightSpec};
use graphseg::data::{generate_three_moons, sample_fidelity, FidelityCount, MoonsSpec};
use graphseg::spectral::{nystrom_eigenpairs, smallest_eigenpairs, smallest_eigenpairs_with, EigenOptions, SpectralBasis};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Connected graph: a random spanning tree plus extra random edges.
pub fn random_connected_graph(rng: &mut ChaCha8Rng, n: usize, extra: usize) -> SparseWeightGraph {
    let mut edges: Vec<(usize, usize)> = (1..n).map(|v| (rng.random_range(0..v), v)).collect();
    for _ in 0..extra {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        if i != j {
            edges.push((i.min(j), i.max(j)));
        }
    }
    edges.sort_unstable();
    edges.dedup();
    let edges = edges.into_iter().map(|(i, j)| Edge {
        i,
        j,
        w: rng.random_range(0.05..2.0),
    });
    SparseWeightGraph::from_edges(n, edges).unwrap()
}

pub fn dense_weights(g: &SparseWeightGraph) -> DMatrix<f64> {
    let n = g.n_vertices();
    let mut w = DMatrix::zeros(n, n);
    for e in g.edges() {
        w[(e.i, e.j)] = e.w;
        w[(e.j, e.i)] = e.w;
    }
    w
}

/// `I - D^{-1/2} W D^{-1/2}` assembled from the dense weight matrix.
pub fn dense_laplacian(g: &SparseWeightGraph) -> DMatrix<f64> {
    let w = dense_weights(g);
    normalized_from_weights(&w)
}

pub fn normalized_from_weights(w: &DMatrix<f64>) -> DMatrix<f64> {
    let n = w.nrows();
    let d: Vec<f64> = (0..n).map(|i| w.row(i).sum()).collect();
    DMatrix::from_fn(n, n, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        delta - w[(i, j)] / (d[i].sqrt() * d[j].sqrt())
    })
}

/// Ascending eigenpairs; each column's largest-magnitude entry is positive.
pub fn dense_eigs(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(a.clone());
    let mut order: Vec<usize> = (0..a.nrows()).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vecs = DMatrix::from_fn(a.nrows(), a.nrows(), |i, c| eig.eigenvectors[(i, order[c])]);
    for mut col in vecs.column_iter_mut() {
        let (imax, _) = col.iter().enumerate().fold((0, 0.0f64), |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
        if col[imax] < 0.0 {
            col.neg_mut();
        }
    }
    (vals, vecs)
}

/// Full eigenbasis of a graph's Laplacian from the dense oracle.
pub fn dense_basis(g: &SparseWeightGraph) -> SpectralBasis {
    let (vals, vecs) = dense_eigs(&dense_laplacian(g));
    SpectralBasis::new(vals, vecs, graphseg::spectral::SpectralMethod::Exact).unwrap()
}

/// `½ Σ_ij w_ij (u_i/√d_i - u_j/√d_j)²` by a double loop over the dense matrix.
pub fn quadratic_form_oracle(g: &SparseWeightGraph, u: &[f64]) -> f64 {
    let w = dense_weights(g);
    let n = w.nrows();
    let d: Vec<f64> = (0..n).map(|i| w.row(i).sum()).collect();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            let t = u[i] / d[i].sqrt() - u[j] / d[j].sqrt();
            s += w[(i, j)] * t * t;
        }
    }
    0.5 * s
}

/// Projection by enumerating every candidate support: on a support `S` the
/// minimizer is `y_S - (Σ y_S - 1)/|S|`; the nearest feasible candidate wins.
pub fn projection_oracle(y: &[f64]) -> Vec<f64> {
    let k = y.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << k) {
        let members: Vec<usize> = (0..k).filter(|&i| mask & (1 << i) != 0).collect();
        let shift = (members.iter().map(|&i| y[i]).sum::<f64>() - 1.0) / members.len() as f64;
        let mut x = vec![0.0; k];
        let mut feasible = true;
        for &i in &members {
            x[i] = y[i] - shift;
            if x[i] < -1e-15 {
                feasible = false;
            }
        }
        if !feasible {
            continue;
        }
        let dist: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.as_ref().is_none_or(|(d, _)| dist < *d) {
            best = Some((dist, x));
        }
    }
    best.unwrap().1
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Random point in the interior of the simplex with entries in (0.05, 0.95).
pub fn interior_simplex_row(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    loop {
        let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
        let s: f64 = raw.iter().sum();
        let row: Vec<f64> = raw.iter().map(|v| v / s).collect();
        if row.iter().all(|&v| v > 0.05 && v < 0.95) {
            return row;
        }
    }
}

/// Largest relative error of the well derivative against central
/// differences of the potential, step `h`.
pub fn well_derivative_fd_error(row: &[f64], h: f64) -> f64 {
    let k = row.len();
    let u = DMatrix::from_row_slice(1, k, row);
    let t = well_derivative(&u).unwrap();
    let mut fd = vec![0.0; k];
    for c in 0..k {
        let mut up = row.to_vec();
        let mut dn = row.to_vec();
        up[c] += h;
        dn[c] -= h;
        fd[c] = (well_potential(&up) - well_potential(&dn)) / (2.0 * h);
    }
    let scale = fd.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-12);
    (0..k).map(|c| (t[(0, c)] - fd[c]).abs() / scale).fold(0.0, f64::max)
}

/// Weighted cut between `subset` and its complement, by pair enumeration.
pub fn cut_oracle(g: &SparseWeightGraph, subset: u32) -> f64 {
    let n = g.n_vertices();
    let w = dense_weights(g);
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            let (a, b) = (subset & (1 << i) != 0, subset & (1 << j) != 0);
            if a && !b {
                s += w[(i, j)];
            }
        }
    }
    s
}

/// Small labeled field and fidelity set on `n` nodes.
pub fn random_problem(rng: &mut ChaCha8Rng, n: usize, k: usize, mu: f64) -> (LabelField, FidelitySet) {
    let u = DMatrix::from_fn(n, k, |_, _| rng.random::<f64>());
    let field = LabelField::from_matrix(u).unwrap();
    let mut idx: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.3)).collect();
    if idx.len() < k {
        idx = (0..k.min(n)).collect();
    }
    let classes: Vec<usize> = idx.iter().enumerate().map(|(p, _)| p % k).collect();
    (field, FidelitySet::new(n, k, idx, classes, mu).unwrap())
}

/// Outcome of one seeded property sweep: the worst observed error.
pub struct Check {
    pub name: &'static str,
    pub worst: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.worst <= self.tolerance
    }
}

pub fn check_quadratic_form(graphs: usize, seed: u64) -> Check {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..graphs {
        let n = r.random_range(2..40);
        let g = random_connected_graph(&mut r, n, 2 * n);
        let lap = normalized_laplacian(&g).unwrap();
        let u: Vec<f64> = (0..n).map(|_| r.random_range(-3.0..3.0)).collect();
        let a = lap.quadratic_form(&u);
        let b = quadratic_form_oracle(&g, &u);
        worst = worst.max((a - b).abs() / b.abs().max(1.0));
    }
    Check {
        name: "quadratic-form identity",
        worst,
        tolerance: 1e-9,
    }
}

pub fn check_projection_oracle(vectors: usize, seed: u64) -> Check {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..vectors {
        let k = r.random_range(1..=5);
        let y: Vec<f64> = (0..k).map(|_| r.random_range(-2.0..2.0)).collect();
        let p = project_to_simplex(&y).unwrap();
        worst = worst.max(max_abs_diff(p.as_slice(), &projection_oracle(&y)));
    }
    Check {
        name: "simplex projection vs support enumeration",
        worst,
        tolerance: 1e-6,
    }
}

/// Idempotence, non-expansiveness and permutation equivariance; reports
/// the largest violation.
pub fn check_projection_properties(vectors: usize, seed: u64) -> Check {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..vectors {
        let k = r.random_range(1..=6);
        let x: Vec<f64> = (0..k).map(|_| r.random_range(-3.0..3.0)).collect();
        let y: Vec<f64> = (0..k).map(|_| r.random_range(-3.0..3.0)).collect();
        let px = project_to_simplex(&x).unwrap();
        let ppx = project_to_simplex(px.as_slice()).unwrap();
        worst = worst.max(max_abs_diff(px.as_slice(), ppx.as_slice()));

        let py = project_to_simplex(&y).unwrap();
        let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(s, t)| (s - t) * (s - t)).sum::<f64>().sqrt();
        worst = worst.max(dist(px.as_slice(), py.as_slice()) - dist(&x, &y));

        let mut perm: Vec<usize> = (0..k).collect();
        for i in (1..k).rev() {
            perm.swap(i, r.random_range(0..=i));
        }
        let xp: Vec<f64> = perm.iter().map(|&i| x[i]).collect();
        let pxp = project_to_simplex(&xp).unwrap();
        let permuted: Vec<f64> = perm.iter().map(|&i| px.as_slice()[i]).collect();
        worst = worst.max(max_abs_diff(pxp.as_slice(), &permuted));
    }
    Check {
        name: "projection idempotence / non-expansiveness / equivariance",
        worst,
        tolerance: 1e-12,
    }
}

pub fn check_well_derivative(points: usize, seed: u64) -> Check {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..points {
        let k = r.random_range(2..=6);
        let row = interior_simplex_row(&mut r, k);
        worst = worst.max(well_derivative_fd_error(&row, 1e-6));
    }
    Check {
        name: "well derivative vs finite differences",
        worst,
        tolerance: 1e-4,
    }
}

/// Eigenvalue and sign-fixed eigenvector agreement on random graphs with at
/// most 100 vertices. Returns the eigenvalue and eigenvector checks.
pub fn check_eigensolver(graphs: usize, seed: u64) -> (Check, Check) {
    let mut r = rng(seed);
    let (mut wv, mut wx) = (0.0f64, 0.0f64);
    for _ in 0..graphs {
        let n = r.random_range(20..=100);
        let g = random_connected_graph(&mut r, n, 3 * n);
        let lap = normalized_laplacian(&g).unwrap();
        let n_e = r.random_range(1..=10.min(n));
        // accuracy sweep, not a budget test: allow a generous matvec budget
        let opts = EigenOptions {
            tol: 1e-10,
            max_matvecs: Some(20 * n),
            ..Default::default()
        };
        let basis = smallest_eigenpairs_with(&lap, n_e, &opts).unwrap();
        let (vals, vecs) = dense_eigs(&dense_laplacian(&g));
        wv = wv.max(max_abs_diff(basis.eigenvalues(), &vals[..n_e]));
        // vectors are only comparable for well separated eigenvalues
        for c in 0..n_e {
            let gap_lo = if c == 0 { f64::INFINITY } else { vals[c] - vals[c - 1] };
            let gap_hi = vals[c + 1] - vals[c];
            if gap_lo.min(gap_hi) > 1e-3 {
                let a: Vec<f64> = basis.eigenvectors().column(c).iter().copied().collect();
                let b: Vec<f64> = vecs.column(c).iter().copied().collect();
                wx = wx.max(max_abs_diff(&a, &b));
            }
        }
    }
    (
        Check {
            name: "eigensolver eigenvalues vs dense oracle",
            worst: wv,
            tolerance: 1e-8,
        },
        Check {
            name: "eigensolver eigenvectors vs dense oracle",
            worst: wx,
            tolerance: 1e-6,
        },
    )
}

/// Dense fully connected Gaussian kernel with the diagonal included.
pub fn gaussian_kernel(x: &FeatureMatrix, sigma: f64) -> DMatrix<f64> {
    let n = x.nrows();
    DMatrix::from_fn(n, n, |i, j| {
        let d2: f64 = x.row(i).iter().zip(x.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
        (-d2 / (sigma * sigma)).exp()
    })
}

pub fn gaussian_blobs(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> FeatureMatrix {
    let centers = [[0.0, 0.0], [3.0, 0.5], [1.0, 2.5]];
    let mut data = Vec::with_capacity(n * dim);
    for i in 0..n {
        let c = centers[i % 3];
        for d in 0..dim {
            let base = c.get(d).copied().unwrap_or(0.0);
            let noise: f64 = rng.random_range(-0.5..0.5) + rng.random_range(-0.5..0.5);
            data.push(base + noise);
        }
    }
    FeatureMatrix::new(n, dim, data).unwrap()
}

pub fn check_nystrom_full_sample(seed: u64) -> Check {
    let mut r = rng(seed);
    let x = gaussian_blobs(&mut r, 60, 3);
    let sigma = 1.5;
    let n_e = 6;
    let basis = nystrom_eigenpairs(&x, &WeightSpec::gaussian(1, sigma), 60, n_e, seed).unwrap();
    let (vals, _) = dense_eigs(&normalized_from_weights(&gaussian_kernel(&x, sigma)));
    Check {
        name: "Nystrom full-sample limit",
        worst: max_abs_diff(basis.eigenvalues(), &vals[..n_e]),
        tolerance: 1e-6,
    }
}

pub fn check_mbo_substep(graphs: usize, seed: u64) -> Check {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..graphs {
        let n = r.random_range(2..30);
        let k = r.random_range(2..5);
        let g = random_connected_graph(&mut r, n, n);
        let basis = dense_basis(&g);
        let mu = r.random_range(0.0..50.0);
        let (field, fid) = random_problem(&mut r, n, k, mu);
        let mut cfg = MboConfig::new(n);
        cfg.mu = mu;
        cfg.dt = r.random_range(0.01..1.0);
        let got = mbo_diffusion_step(field.matrix(), &basis, &fid, &cfg).unwrap();

        let h = cfg.dt / cfg.n_s as f64;
        let a = DMatrix::identity(n, n) + dense_laplacian(&g) * h;
        let rhs = field.matrix() - (field.matrix() - fid.targets()).component_mul(&mu_columns(&fid, k)) * h;
        let want = a.lu().solve(&rhs).unwrap();
        worst = worst.max((got - want).abs().max());
    }
    Check {
        name: "MBO sub-step vs dense solve",
        worst,
        tolerance: 1e-10,
    }
}

/// `N × K` matrix with `μ_i` repeated across each row.
pub fn mu_columns(fid: &FidelitySet, k: usize) -> DMatrix<f64> {
    let mu = fid.mu_vector();
    DMatrix::from_fn(mu.len(), k, |i, _| mu[i])
}

pub fn check_gl_dense(graphs: usize, seed: u64) -> Check {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..graphs {
        let n = r.random_range(2..30);
        let k = r.random_range(2..5);
        let g = random_connected_graph(&mut r, n, n);
        let basis = dense_basis(&g);
        let mu = r.random_range(0.0..50.0);
        let (field, fid) = random_problem(&mut r, n, k, mu);
        let cfg = GlConfig::new(n).with_mu(mu).with_epsilon(r.random_range(0.5..3.0));
        let got = convex_splitting_update(&field, &basis, &fid, &cfg).unwrap();

        let u = field.matrix();
        let b = DMatrix::identity(n, n) * (1.0 + cfg.c * cfg.dt) + dense_laplacian(&g) * (cfg.epsilon * cfg.dt);
        let t = well_derivative(u).unwrap();
        let rhs = u * (1.0 + cfg.c * cfg.dt)
            - t * (cfg.dt / (2.0 * cfg.epsilon))
            - (u - fid.targets()).component_mul(&mu_columns(&fid, k)) * cfg.dt;
        let want = b.lu().solve(&rhs).unwrap();
        worst = worst.max((got - want).abs().max());
    }
    Check {
        name: "GL update vs dense solve",
        worst,
        tolerance: 1e-8,
    }
}

/// Fraction of disagreeing labels (worst case) between the two-class
/// multiclass scheme and the scalar binary scheme.
pub fn check_binary_equivalence(runs: usize, seed: u64) -> Check {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for run in 0..runs {
        let n = r.random_range(10..60);
        let g = random_connected_graph(&mut r, n, 2 * n);
        let lap = normalized_laplacian(&g).unwrap();
        let n_e = r.random_range(2..=n.min(12));
        let basis = smallest_eigenpairs(&lap, n_e, 1e-10).unwrap();
        let mu = if run % 3 == 0 { 0.0 } else { r.random_range(1.0..50.0) };
        let (_, fid) = random_problem(&mut r, n, 2, mu);
        let mut cfg = MboConfig::new(n_e);
        cfg.mu = mu;
        cfg.seed = run as u64;
        let rep = binary_equivalence_check(&basis, &fid, &cfg).unwrap();
        worst = worst.max(1.0 - rep.agreement);
    }
    Check {
        name: "two-class MBO vs binary MBO label disagreement",
        worst,
        tolerance: 0.0,
    }
}

/// Every two-valued labeling of random graphs with up to 8 vertices.
pub fn check_graph_tv(graphs: usize, seed: u64) -> Check {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..graphs {
        let n = r.random_range(2..=8);
        let g = random_connected_graph(&mut r, n, n);
        for subset in 0u32..(1 << n) {
            let f: Vec<f64> = (0..n).map(|i| if subset & (1 << i) != 0 { 1.0 } else { 0.0 }).collect();
            let tv = graph_tv(&g, &f).unwrap();
            worst = worst.max((tv - cut_oracle(&g, subset)).abs());
        }
    }
    Check {
        name: "graph TV vs brute-force cut",
        worst,
        tolerance: 1e-12,
    }
}

/// Largest `E(final) - E(initial)` over GL runs, energies evaluated with
/// the full sparse Laplacian.
/// Energy with the full Laplacian at GL convergence against the initial
/// field. Even runs are the preset three-moons GL runs (1500 points,
/// n_e = 15, ε = 1, μ = 30, 25 labels per class) with run seeds 0, 1, ...;
/// odd runs use the full basis of a random graph with random μ and ε.
pub fn check_gl_energy(runs: usize, seed: u64) -> Check {
    let mut r = rng(seed);
    let data = generate_three_moons(&MoonsSpec::default()).unwrap();
    let g = knn_graph(&data.features, &WeightSpec::local_scaling(10, 17), Metric::Euclidean).unwrap();
    let moons_lap = normalized_laplacian(&g).unwrap();
    let moons_basis = smallest_eigenpairs(&moons_lap, 15, 1e-8).unwrap();
    let mut worst = f64::NEG_INFINITY;
    for run in 0..runs {
        let e = if run % 2 == 0 {
            let s = (run / 2) as u64;
            let fid = sample_fidelity(&data, FidelityCount::PerClass(25), 30.0, s).unwrap();
            energy_change(&moons_lap, &moons_basis, &fid, &GlConfig { seed: s, ..GlConfig::new(15) })
        } else {
            let n = r.random_range(10..40);
            let k = r.random_range(2..5);
            let mu = r.random_range(5.0..50.0);
            let g = random_connected_graph(&mut r, n, 2 * n);
            let (_, fid) = random_problem(&mut r, n, k, mu);
            let cfg = GlConfig {
                seed: run as u64,
                ..GlConfig::new(n).with_mu(mu).with_epsilon(r.random_range(0.5..2.0))
            };
            energy_change(&normalized_laplacian(&g).unwrap(), &dense_basis(&g), &fid, &cfg)
        };
        worst = worst.max(e);
    }
    Check {
        name: "GL energy at convergence <= initial energy",
        worst,
        tolerance: 0.0,
    }
}

/// `E(final) - E(initial)` of one GL run, both with the full Laplacian.
pub fn energy_change(lap: &NormalizedLaplacian, basis: &SpectralBasis, fid: &FidelitySet, cfg: &GlConfig) -> f64 {
    let init = initial_field(fid, cfg.seed);
    let e0 = multiclass_energy(&init, Smoothing::Laplacian(lap), fid, cfg.epsilon).unwrap();
    let out = gl_segment_from(init, basis, fid, cfg).unwrap();
    let e1 = multiclass_energy(&out.field, Smoothing::Laplacian(lap), fid, cfg.epsilon).unwrap();
    e1 - e0
}
