//! Accuracy, confusion matrices, graph total variation and the seeded
//! multi-run benchmark.

use std::fmt::Write as _;
use std::time::Instant;

use log::info;
use rayon::prelude::*;

use crate::data::{sample_fidelity, FidelityCount, LabeledDataset};
use crate::error::{Error, Result};
use crate::gl::{gl_segment, GlConfig};
use crate::graph::{knn_graph, normalized_laplacian, Metric, SparseWeightGraph, WeightSpec};
use crate::manifest::{float, KeyValues};
use crate::mbo::{mbo_segment, MboConfig};
use crate::spectral::{nystrom_eigenpairs, smallest_eigenpairs_with, EigenOptions, SpectralBasis};

pub fn accuracy(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions for {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::invalid("accuracy of an empty labeling"));
    }
    let hits = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// `K × K` counts indexed `(obtained, true)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<usize>,
}

impl ConfusionMatrix {
    pub fn n_classes(&self) -> usize {
        self.k
    }

    pub fn get(&self, obtained: usize, truth: usize) -> usize {
        self.counts[obtained * self.k + truth]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> usize {
        (0..self.k).map(|c| self.get(c, c)).sum()
    }

    /// Number of samples of each true class.
    pub fn column_sums(&self) -> Vec<usize> {
        (0..self.k)
            .map(|t| (0..self.k).map(|o| self.get(o, t)).sum())
            .collect()
    }

    /// Table with obtained classes as rows and true classes as columns.
    pub fn to_table(&self) -> String {
        let width = self.counts.iter().max().map_or(1, |m| m.to_string().len()).max(4);
        let mut s = format!("{:>13} |", "Obtained/True");
        for t in 0..self.k {
            let _ = write!(s, " {t:>width$}");
        }
        s.push('\n');
        for o in 0..self.k {
            let _ = write!(s, "{o:>13} |");
            for t in 0..self.k {
                let _ = write!(s, " {:>width$}", self.get(o, t));
            }
            s.push('\n');
        }
        s
    }
}

pub fn confusion(predicted: &[usize], truth: &[usize], k: usize) -> Result<ConfusionMatrix> {
    if predicted.len() != truth.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions for {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    let mut counts = vec![0usize; k * k];
    for (&p, &t) in predicted.iter().zip(truth) {
        if p >= k || t >= k {
            return Err(Error::invalid(format!("label pair ({p}, {t}) out of range for {k} classes")));
        }
        counts[p * k + t] += 1;
    }
    Ok(ConfusionMatrix { k, counts })
}

/// `½ Σ_{i,j} w(i,j) |f_i - f_j|`, i.e. the sum over stored edges.
pub fn graph_tv(graph: &SparseWeightGraph, f: &[f64]) -> Result<f64> {
    if f.len() != graph.n_vertices() {
        return Err(Error::DimensionMismatch(format!(
            "{} values for {} vertices",
            f.len(),
            graph.n_vertices()
        )));
    }
    if f.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("graph function value".into()));
    }
    Ok(graph.edges().iter().map(|e| e.w * (f[e.i] - f[e.j]).abs()).sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphSpec {
    pub weights: WeightSpec,
    pub metric: Metric,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolverChoice {
    Gl(GlConfig),
    Mbo(MboConfig),
}

impl SolverChoice {
    pub fn name(&self) -> &'static str {
        match self {
            SolverChoice::Gl(_) => "multiclass GL",
            SolverChoice::Mbo(_) => "multiclass MBO",
        }
    }

    pub fn n_e(&self) -> usize {
        match self {
            SolverChoice::Gl(c) => c.n_e,
            SolverChoice::Mbo(c) => c.n_e,
        }
    }

    pub fn mu(&self) -> f64 {
        match self {
            SolverChoice::Gl(c) => c.mu,
            SolverChoice::Mbo(c) => c.mu,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectrumSource {
    /// Sparse eigensolver on the k-NN graph Laplacian.
    Exact { tol: f64 },
    /// Nyström extension on the fully connected kernel.
    Nystrom { sample_size: usize },
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub n_seeds: usize,
    pub base_seed: u64,
    pub fidelity: FidelityCount,
    pub spectrum: SpectrumSource,
    /// Run seeds concurrently.
    pub parallel: bool,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            n_seeds: 10,
            base_seed: 0,
            fidelity: FidelityCount::PerClass(25),
            spectrum: SpectrumSource::Exact { tol: 1e-8 },
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub seed: u64,
    pub accuracy: f64,
    pub iterations: usize,
    pub converged: bool,
    pub labels: Vec<usize>,
    /// GL only: (initial, final) energy in the truncated basis.
    pub energies: Option<(f64, f64)>,
    pub solver_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct BenchmarkReport {
    pub dataset: String,
    pub solver: String,
    pub n_vertices: usize,
    /// Zero for Nyström spectra, which never build a sparse graph.
    pub n_edges: usize,
    pub n_e: usize,
    pub runs: Vec<RunResult>,
    pub mean_accuracy: f64,
    pub mean_iterations: f64,
    pub graph_seconds: f64,
    pub eigen_seconds: f64,
    pub mean_solver_seconds: f64,
}

/// The shared one-time stages: graph (unless Nyström) and spectrum.
pub struct PreparedSpectrum {
    pub graph: Option<SparseWeightGraph>,
    pub basis: SpectralBasis,
    pub graph_seconds: f64,
    pub eigen_seconds: f64,
}

pub fn prepare_spectrum(data: &LabeledDataset, graph: &GraphSpec, n_e: usize, source: SpectrumSource, seed: u64) -> Result<PreparedSpectrum> {
    match source {
        SpectrumSource::Exact { tol } => {
            let t0 = Instant::now();
            let g = knn_graph(&data.features, &graph.weights, graph.metric)?;
            let lap = normalized_laplacian(&g)?;
            let graph_seconds = t0.elapsed().as_secs_f64();
            info!("graph: {} vertices, {} edges in {graph_seconds:.3}s", g.n_vertices(), g.edges().len());
            let t1 = Instant::now();
            let opts = EigenOptions {
                tol,
                seed,
                ..Default::default()
            };
            let basis = smallest_eigenpairs_with(&lap, n_e, &opts)?;
            let eigen_seconds = t1.elapsed().as_secs_f64();
            info!("eigenpairs: {n_e} in {eigen_seconds:.3}s");
            Ok(PreparedSpectrum {
                graph: Some(g),
                basis,
                graph_seconds,
                eigen_seconds,
            })
        }
        SpectrumSource::Nystrom { sample_size } => {
            let t1 = Instant::now();
            let basis = nystrom_eigenpairs(&data.features, &graph.weights, sample_size, n_e, seed)?;
            Ok(PreparedSpectrum {
                graph: None,
                basis,
                graph_seconds: 0.0,
                eigen_seconds: t1.elapsed().as_secs_f64(),
            })
        }
    }
}

/// Runs one seeded segmentation on a prepared spectrum.
pub fn run_once(data: &LabeledDataset, basis: &SpectralBasis, solver: &SolverChoice, fidelity: FidelityCount, seed: u64) -> Result<RunResult> {
    let fid = sample_fidelity(data, fidelity, solver.mu(), seed)?;
    let t0 = Instant::now();
    let (labels, iterations, converged, energies) = match solver {
        SolverChoice::Gl(cfg) => {
            let cfg = GlConfig { seed, ..cfg.clone() };
            let out = gl_segment(basis, &fid, &cfg)?;
            (out.labels, out.iterations, out.converged, Some((out.initial_energy, out.final_energy)))
        }
        SolverChoice::Mbo(cfg) => {
            let cfg = MboConfig { seed, ..cfg.clone() };
            let out = mbo_segment(basis, &fid, &cfg)?;
            (out.labels, out.iterations, out.converged, None)
        }
    };
    let solver_seconds = t0.elapsed().as_secs_f64();
    Ok(RunResult {
        seed,
        accuracy: accuracy(&labels, &data.labels)?,
        iterations,
        converged,
        labels,
        energies,
        solver_seconds,
    })
}

/// Builds the graph and spectrum once, then runs the solver with seeds
/// `base_seed, base_seed + 1, ...`, each with its own fidelity sample and
/// initial field.
pub fn run_benchmark(
    name: &str,
    data: &LabeledDataset,
    graph: &GraphSpec,
    solver: &SolverChoice,
    opts: &BenchOptions,
) -> Result<BenchmarkReport> {
    if opts.n_seeds == 0 {
        return Err(Error::invalid("benchmark needs at least one seed"));
    }
    let prep = prepare_spectrum(data, graph, solver.n_e(), opts.spectrum, opts.base_seed)?;
    run_benchmark_on(name, data, &prep, solver, opts)
}

pub fn run_benchmark_on(
    name: &str,
    data: &LabeledDataset,
    prep: &PreparedSpectrum,
    solver: &SolverChoice,
    opts: &BenchOptions,
) -> Result<BenchmarkReport> {
    let basis = if prep.basis.n_e() == solver.n_e() {
        prep.basis.clone()
    } else {
        prep.basis.truncate(solver.n_e())?
    };
    let seeds: Vec<u64> = (0..opts.n_seeds as u64).map(|r| opts.base_seed + r).collect();
    let run = |&s: &u64| run_once(data, &basis, solver, opts.fidelity, s);
    let runs: Result<Vec<RunResult>> = if opts.parallel {
        seeds.par_iter().map(run).collect()
    } else {
        seeds.iter().map(run).collect()
    };
    let runs = runs?;
    let n = runs.len() as f64;
    Ok(BenchmarkReport {
        dataset: name.to_string(),
        solver: solver.name().to_string(),
        n_vertices: data.len(),
        n_edges: prep.graph.as_ref().map_or(0, |g| g.edges().len()),
        n_e: solver.n_e(),
        mean_accuracy: runs.iter().map(|r| r.accuracy).sum::<f64>() / n,
        mean_iterations: runs.iter().map(|r| r.iterations as f64).sum::<f64>() / n,
        mean_solver_seconds: runs.iter().map(|r| r.solver_seconds).sum::<f64>() / n,
        graph_seconds: prep.graph_seconds,
        eigen_seconds: prep.eigen_seconds,
        runs,
    })
}

impl BenchmarkReport {
    pub fn accuracies(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.accuracy).collect()
    }

    /// Deterministic part of the report (no timings).
    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.set("dataset", &self.dataset)
            .set("solver", &self.solver)
            .set("n_vertices", self.n_vertices)
            .set("n_edges", self.n_edges)
            .set("n_e", self.n_e)
            .set("n_seeds", self.runs.len())
            .set("mean_accuracy", float(self.mean_accuracy))
            .set("mean_iterations", float(self.mean_iterations));
        for (r, run) in self.runs.iter().enumerate() {
            kv.set(format!("run.{r}.seed"), run.seed)
                .set(format!("run.{r}.accuracy"), float(run.accuracy))
                .set(format!("run.{r}.iterations"), run.iterations)
                .set(format!("run.{r}.converged"), run.converged);
            if let Some((e0, e1)) = run.energies {
                kv.set(format!("run.{r}.initial_energy"), float(e0))
                    .set(format!("run.{r}.final_energy"), float(e1));
            }
        }
        kv
    }

    pub fn timings(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.set("graph_seconds", float(self.graph_seconds))
            .set("eigen_seconds", float(self.eigen_seconds))
            .set("mean_solver_seconds", float(self.mean_solver_seconds));
        for (r, run) in self.runs.iter().enumerate() {
            kv.set(format!("run.{r}.solver_seconds"), float(run.solver_seconds));
        }
        kv
    }

    /// Accuracy, timing and iteration tables.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "Results for {} ({} points, {} eigenvectors, {} runs)", self.dataset, self.n_vertices, self.n_e, self.runs.len());
        let _ = writeln!(s);
        let _ = writeln!(s, "| Method | Accuracy |");
        let _ = writeln!(s, "|---|---|");
        let _ = writeln!(s, "| {} | {:.2}% |", self.solver, 100.0 * self.mean_accuracy);
        let _ = writeln!(s);
        let _ = writeln!(s, "Timings (seconds)");
        let _ = writeln!(s, "| Stage | {} |", self.dataset);
        let _ = writeln!(s, "|---|---|");
        let _ = writeln!(s, "| Graph construction | {:.3} |", self.graph_seconds);
        let _ = writeln!(s, "| Eigenvectors | {:.3} |", self.eigen_seconds);
        let _ = writeln!(s, "| {} (per run) | {:.4} |", self.solver, self.mean_solver_seconds);
        let _ = writeln!(s);
        let _ = writeln!(s, "Iterations");
        let _ = writeln!(s, "| Method | {} |", self.dataset);
        let _ = writeln!(s, "|---|---|");
        let _ = writeln!(s, "| {} | {:.1} |", self.solver, self.mean_iterations);
        let _ = writeln!(s);
        let _ = writeln!(s, "Per run");
        let _ = writeln!(s, "| seed | accuracy | iterations | converged |");
        let _ = writeln!(s, "|---|---|---|---|");
        for r in &self.runs {
            let _ = writeln!(s, "| {} | {:.2}% | {} | {} |", r.seed, 100.0 * r.accuracy, r.iterations, r.converged);
        }
        s
    }
}
