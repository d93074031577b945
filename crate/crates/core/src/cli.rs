//! Command-line front end.
//!
//! Exit codes: 0 success, 2 validation or input error, 3 numerical
//! non-convergence (partial results are still written).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::data::{
    generate_three_moons, load_features_csv, load_labeled_csv, load_labels_csv, load_mnist_dir, sample_fidelity_from_labels,
    stratified_subset, write_features_csv, write_labels, FidelityCount, LabeledDataset, MoonsSpec,
};
use crate::error::{Error, Result};
use crate::eval::{confusion, prepare_spectrum, run_benchmark_on, BenchOptions, GraphSpec, SolverChoice, SpectrumSource};
use crate::gl::{gl_segment, GlConfig};
use crate::graph::{hex, knn_graph, normalized_laplacian, Metric, SparseWeightGraph, WeightKind, WeightSpec};
use crate::manifest::{float, KeyValues};
use crate::mbo::{mbo_segment, MboConfig};
use crate::spectral::{nystrom_eigenpairs, read_eigs, smallest_eigenpairs_with, write_eigs, EigenOptions, SpectrumCache};

#[derive(Debug, Parser)]
#[command(name = "graphseg", version, about = "Multiclass graph segmentation with GL and MBO solvers")]
pub struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a k-NN similarity graph from a feature CSV.
    Graph(GraphCmd),
    /// Compute the smallest Laplacian eigenpairs (or a Nyström approximation).
    Eigs(EigsCmd),
    /// Segment with a fidelity sample drawn from ground-truth labels.
    Segment(SegmentCmd),
    /// Seeded multi-run benchmark on a dataset preset.
    Bench(BenchCmd),
    /// Write the synthetic three-moons dataset as CSV.
    GenerateMoons(MoonsCmd),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightArg {
    LocalScaling,
    Gaussian,
    Cosine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricArg {
    Euclidean,
    CosineDistance,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Euclidean => Metric::Euclidean,
            MetricArg::CosineDistance => Metric::CosineDistance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverArg {
    Gl,
    Mbo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DatasetArg {
    Moons,
    Csv,
    Mnist,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightFlags {
    #[arg(long, value_enum)]
    pub weights: Option<WeightArg>,
    /// Nearest neighbours per vertex.
    #[arg(long)]
    pub neighbors: Option<usize>,
    /// Neighbour rank used for local scaling.
    #[arg(long = "scale-neighbor")]
    pub scale_neighbor: Option<usize>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, value_enum)]
    pub metric: Option<MetricArg>,
}

impl WeightFlags {
    fn overlay(&mut self, other: &WeightFlags) {
        self.weights = other.weights.or(self.weights);
        self.neighbors = other.neighbors.or(self.neighbors);
        self.scale_neighbor = other.scale_neighbor.or(self.scale_neighbor);
        self.sigma = other.sigma.or(self.sigma);
        self.metric = other.metric.or(self.metric);
    }

    fn resolve(&self) -> Result<GraphSpec> {
        let neighbors = self.neighbors.unwrap_or(10);
        let weights = match self.weights.unwrap_or(WeightArg::LocalScaling) {
            WeightArg::LocalScaling => WeightSpec::local_scaling(neighbors, self.scale_neighbor.unwrap_or(neighbors)),
            WeightArg::Gaussian => {
                let sigma = self.sigma.ok_or_else(|| Error::invalid("--sigma is required for gaussian weights"))?;
                WeightSpec::gaussian(neighbors, sigma)
            }
            WeightArg::Cosine => WeightSpec::cosine(neighbors),
        };
        weights.validate()?;
        let default_metric = match weights.kind {
            WeightKind::Cosine => MetricArg::CosineDistance,
            _ => MetricArg::Euclidean,
        };
        Ok(GraphSpec {
            weights,
            metric: self.metric.unwrap_or(default_metric).into(),
        })
    }

    fn record(&self, kv: &mut KeyValues) -> Result<()> {
        let g = self.resolve()?;
        kv.set("graph.neighbors", g.weights.neighbors);
        match g.weights.kind {
            WeightKind::LocalScaling { m } => kv.set("graph.weights", "local-scaling").set("graph.scale_neighbor", m),
            WeightKind::Gaussian { sigma } => kv.set("graph.weights", "gaussian").set("graph.sigma", float(sigma)),
            WeightKind::Cosine => kv.set("graph.weights", "cosine"),
        };
        kv.set(
            "graph.metric",
            match g.metric {
                Metric::Euclidean => "euclidean",
                Metric::CosineDistance => "cosine-distance",
            },
        );
        Ok(())
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverFlags {
    #[arg(long, value_enum)]
    pub solver: Option<SolverArg>,
    /// Number of eigenpairs used by the solver.
    #[arg(long = "n-e")]
    pub n_e: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    /// Interface scale (GL only).
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Convexity constant (GL only); defaults to mu + 1/epsilon.
    #[arg(long = "convexity")]
    pub c: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    /// Diffusion sub-steps per threshold (MBO only).
    #[arg(long = "n-s")]
    pub n_s: Option<usize>,
    #[arg(long = "max-iters")]
    pub max_iters: Option<usize>,
    #[arg(long = "fidelity-per-class", conflicts_with = "fidelity_fraction")]
    pub fidelity_per_class: Option<usize>,
    #[arg(long = "fidelity-fraction")]
    pub fidelity_fraction: Option<f64>,
}

impl SolverFlags {
    fn overlay(&mut self, o: &SolverFlags) {
        self.solver = o.solver.or(self.solver);
        self.n_e = o.n_e.or(self.n_e);
        self.dt = o.dt.or(self.dt);
        self.mu = o.mu.or(self.mu);
        self.epsilon = o.epsilon.or(self.epsilon);
        self.c = o.c.or(self.c);
        self.eta = o.eta.or(self.eta);
        self.n_s = o.n_s.or(self.n_s);
        self.max_iters = o.max_iters.or(self.max_iters);
        if o.fidelity_per_class.is_some() || o.fidelity_fraction.is_some() {
            self.fidelity_per_class = o.fidelity_per_class;
            self.fidelity_fraction = o.fidelity_fraction;
        }
    }

    fn fidelity(&self) -> Result<FidelityCount> {
        match (self.fidelity_per_class, self.fidelity_fraction) {
            (Some(_), Some(_)) => Err(Error::invalid("give either a per-class fidelity count or a fraction, not both")),
            (Some(m), None) => Ok(FidelityCount::PerClass(m)),
            (None, Some(f)) => Ok(FidelityCount::Fraction(f)),
            (None, None) => Ok(FidelityCount::PerClass(25)),
        }
    }

    fn resolve(&self, seed: u64) -> Result<SolverChoice> {
        let solver = self.solver.unwrap_or(SolverArg::Mbo);
        let choice = match solver {
            SolverArg::Gl => {
                let mut c = GlConfig::new(self.n_e.unwrap_or(15));
                let eps = self.epsilon.unwrap_or(c.epsilon);
                let mu = self.mu.unwrap_or(c.mu);
                c = c.with_mu(mu).with_epsilon(eps);
                c.dt = self.dt.unwrap_or(c.dt);
                c.eta = self.eta.unwrap_or(c.eta);
                c.c = self.c.unwrap_or(c.c);
                c.max_iters = self.max_iters.unwrap_or(c.max_iters);
                c.seed = seed;
                c.validate()?;
                SolverChoice::Gl(c)
            }
            SolverArg::Mbo => {
                let mut c = MboConfig::new(self.n_e.unwrap_or(20));
                c.dt = self.dt.unwrap_or(c.dt);
                c.mu = self.mu.unwrap_or(c.mu);
                c.eta = self.eta.unwrap_or(c.eta);
                c.n_s = self.n_s.unwrap_or(c.n_s);
                c.max_iters = self.max_iters.unwrap_or(c.max_iters);
                c.seed = seed;
                c.validate()?;
                SolverChoice::Mbo(c)
            }
        };
        Ok(choice)
    }
}

fn record_solver(choice: &SolverChoice, fidelity: FidelityCount, kv: &mut KeyValues) {
    match choice {
        SolverChoice::Gl(c) => {
            kv.set("solver", "gl")
                .set("n_e", c.n_e)
                .set("epsilon", float(c.epsilon))
                .set("dt", float(c.dt))
                .set("mu", float(c.mu))
                .set("convexity", float(c.c))
                .set("eta", float(c.eta))
                .set("max_iters", c.max_iters);
        }
        SolverChoice::Mbo(c) => {
            kv.set("solver", "mbo")
                .set("n_e", c.n_e)
                .set("dt", float(c.dt))
                .set("mu", float(c.mu))
                .set("eta", float(c.eta))
                .set("n_s", c.n_s)
                .set("max_iters", c.max_iters);
        }
    }
    match fidelity {
        FidelityCount::PerClass(m) => kv.set("fidelity_per_class", m),
        FidelityCount::Fraction(f) => kv.set("fidelity_fraction", float(f)),
    };
}

#[derive(Debug, Args)]
pub struct GraphCmd {
    /// Feature CSV, one sample per row.
    #[arg(long)]
    pub features: PathBuf,
    #[command(flatten)]
    pub weights: WeightFlags,
    /// Output edge list.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EigsCmd {
    /// Edge list written by `graph` (exact route).
    #[arg(long, required_unless_present = "nystrom")]
    pub graph: Option<PathBuf>,
    #[arg(long = "n-e")]
    pub n_e: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Approximate the fully connected kernel by Nyström extension.
    #[arg(long, requires_all = ["sample", "features"])]
    pub nystrom: bool,
    /// Number of landmark samples for Nyström.
    #[arg(long)]
    pub sample: Option<usize>,
    /// Feature CSV (Nyström route).
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[command(flatten)]
    pub weights: WeightFlags,
    /// Reuse eigenpairs computed earlier for the same graph and settings.
    #[arg(long = "cache-dir")]
    pub cache_dir: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SegmentCmd {
    /// Eigenpair file written by `eigs`.
    #[arg(long)]
    pub eigs: PathBuf,
    /// Ground-truth labels, one class index per line.
    #[arg(long)]
    pub labels: PathBuf,
    #[command(flatten)]
    pub solver: SolverFlags,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output label file.
    #[arg(long)]
    pub out: PathBuf,
    /// Run manifest; defaults to `<out>.manifest`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchCmd {
    #[arg(long, value_enum)]
    pub dataset: DatasetArg,
    /// JSON file with weight and solver settings; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub weights: WeightFlags,
    #[command(flatten)]
    pub solver: SolverFlags,
    #[arg(long, default_value_t = 10)]
    pub seeds: usize,
    #[arg(long = "base-seed", default_value_t = 0)]
    pub base_seed: u64,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Use a Nyström spectrum with this many landmarks.
    #[arg(long = "nystrom-sample")]
    pub nystrom_sample: Option<usize>,
    /// Feature CSV (csv dataset).
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Label file (csv dataset).
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Directory with the four MNIST IDX files (mnist dataset).
    #[arg(long = "mnist-dir")]
    pub mnist_dir: Option<PathBuf>,
    /// Stratified subset size drawn before benchmarking.
    #[arg(long)]
    pub subset: Option<usize>,
    #[arg(long = "subset-seed", default_value_t = 0)]
    pub subset_seed: u64,
    /// Directory for report.kv, report.txt and timing.kv.
    #[arg(long = "out-dir")]
    pub out_dir: Option<PathBuf>,
    /// Run seeds one after another.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, Args)]
pub struct MoonsCmd {
    #[arg(long = "per-class", default_value_t = 500)]
    pub per_class: usize,
    #[arg(long, default_value_t = 100)]
    pub dim: usize,
    #[arg(long, default_value_t = 0.14)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
}

/// Settings accepted from a `--config` JSON file.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchFile {
    pub graph: WeightFlags,
    pub solver: SolverFlags,
}

/// Named dataset defaults.
#[derive(Debug, Clone)]
pub struct Preset {
    pub weights: WeightFlags,
    pub solver: SolverFlags,
}

pub fn preset(dataset: DatasetArg, solver: SolverArg) -> Preset {
    match dataset {
        DatasetArg::Moons | DatasetArg::Csv => Preset {
            weights: WeightFlags {
                weights: Some(WeightArg::LocalScaling),
                neighbors: Some(10),
                scale_neighbor: Some(17),
                sigma: None,
                metric: Some(MetricArg::Euclidean),
            },
            solver: SolverFlags {
                solver: Some(solver),
                n_e: Some(if solver == SolverArg::Gl { 15 } else { 20 }),
                dt: Some(0.1),
                mu: Some(30.0),
                epsilon: Some(1.0),
                eta: Some(1e-7),
                n_s: Some(3),
                fidelity_per_class: Some(25),
                ..Default::default()
            },
        },
        DatasetArg::Mnist => Preset {
            weights: WeightFlags {
                weights: Some(WeightArg::LocalScaling),
                neighbors: Some(8),
                scale_neighbor: Some(8),
                sigma: None,
                metric: Some(MetricArg::Euclidean),
            },
            solver: SolverFlags {
                solver: Some(solver),
                n_e: Some(300),
                dt: Some(0.15),
                mu: Some(50.0),
                epsilon: Some(1.0),
                eta: Some(1e-7),
                n_s: Some(3),
                fidelity_fraction: Some(MNIST_FIDELITY_FRACTION),
                ..Default::default()
            },
        },
    }
}

/// 250 labeled images per class out of 70,000.
pub const MNIST_FIDELITY_FRACTION: f64 = 2500.0 / 70000.0;

/// Outcome of a successful command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Done,
    NotConverged,
}

pub fn exit_code(result: &Result<Status>) -> ExitCode {
    match result {
        Ok(Status::Done) => ExitCode::SUCCESS,
        Ok(Status::NotConverged) | Err(Error::NoConvergence { .. }) => ExitCode::from(3),
        Err(_) => ExitCode::from(2),
    }
}

/// Parses the environment's thread cap and installs the global pool.
pub fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("GRAPHSEG_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::invalid(format!("GRAPHSEG_THREADS must be a positive integer, got {v:?}")))?;
    if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
        warn!("thread pool already initialized; GRAPHSEG_THREADS ignored");
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<Status> {
    configure_threads()?;
    match cli.command {
        Command::Graph(c) => cmd_graph(&c),
        Command::Eigs(c) => cmd_eigs(&c),
        Command::Segment(c) => cmd_segment(&c),
        Command::Bench(c) => cmd_bench(&c),
        Command::GenerateMoons(c) => cmd_generate_moons(&c),
    }
}

fn file_hash(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn cmd_graph(c: &GraphCmd) -> Result<Status> {
    let spec = c.weights.resolve()?;
    let features = load_features_csv(&c.features)?;
    let g = knn_graph(&features, &spec.weights, spec.metric)?;
    info!("graph with {} vertices and {} edges", g.n_vertices(), g.edges().len());
    g.write_edge_list(&c.out)?;
    Ok(Status::Done)
}

pub fn cmd_eigs(c: &EigsCmd) -> Result<Status> {
    if c.n_e == 0 {
        return Err(Error::invalid("--n-e must be >= 1"));
    }
    let basis = if c.nystrom {
        let (Some(sample), Some(features)) = (c.sample, &c.features) else {
            return Err(Error::invalid("--nystrom needs --sample and --features"));
        };
        let spec = c.weights.resolve()?;
        let x = load_features_csv(features)?;
        nystrom_eigenpairs(&x, &spec.weights, sample, c.n_e, c.seed)?
    } else {
        let path = c.graph.as_ref().ok_or_else(|| Error::invalid("--graph is required"))?;
        let g = SparseWeightGraph::read_edge_list(path)?;
        let lap = normalized_laplacian(&g)?;
        if c.n_e > lap.n() {
            return Err(Error::invalid(format!("--n-e {} exceeds the {} graph vertices", c.n_e, lap.n())));
        }
        let opts = EigenOptions {
            tol: c.tol,
            seed: c.seed,
            ..Default::default()
        };
        match &c.cache_dir {
            Some(dir) => {
                let cache = SpectrumCache::new(dir)?;
                let key = SpectrumCache::key(lap.graph_hash(), c.n_e, c.tol, c.seed);
                cache.get_or_compute(&key, || smallest_eigenpairs_with(&lap, c.n_e, &opts))?
            }
            None => smallest_eigenpairs_with(&lap, c.n_e, &opts)?,
        }
    };
    write_eigs(&basis, &c.out)?;
    Ok(Status::Done)
}

pub fn cmd_segment(c: &SegmentCmd) -> Result<Status> {
    let choice = c.solver.resolve(c.seed)?;
    let fidelity_count = c.solver.fidelity()?;
    let basis = read_eigs(&c.eigs)?;
    if choice.n_e() > basis.n_e() {
        return Err(Error::invalid(format!(
            "--n-e {} exceeds the {} eigenpairs in {}",
            choice.n_e(),
            basis.n_e(),
            c.eigs.display()
        )));
    }
    let basis = basis.truncate(choice.n_e())?;
    let truth = load_labels_csv(&c.labels, None)?;
    if truth.len() != basis.n_vertices() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} vertices",
            truth.len(),
            basis.n_vertices()
        )));
    }
    let k = truth.iter().max().map_or(0, |m| m + 1);
    let fid = sample_fidelity_from_labels(&truth, k, fidelity_count, choice.mu(), c.seed)?;

    let mut kv = KeyValues::new();
    kv.set("command", "segment")
        .set("eigs", c.eigs.display())
        .set("eigs.sha256", file_hash(&c.eigs)?)
        .set("labels", c.labels.display())
        .set("labels.sha256", file_hash(&c.labels)?)
        .set("seed", c.seed)
        .set("n_classes", k)
        .set("n_fidelity", fid.len());
    record_solver(&choice, fidelity_count, &mut kv);

    let t0 = Instant::now();
    let (labels, iterations, converged) = match &choice {
        SolverChoice::Gl(cfg) => {
            let out = gl_segment(&basis, &fid, cfg)?;
            kv.set("initial_energy", float(out.initial_energy))
                .set("final_energy", float(out.final_energy));
            (out.labels, out.iterations, out.converged)
        }
        SolverChoice::Mbo(cfg) => {
            let out = mbo_segment(&basis, &fid, cfg)?;
            (out.labels, out.iterations, out.converged)
        }
    };
    let seconds = t0.elapsed().as_secs_f64();
    let acc = crate::eval::accuracy(&labels, &truth)?;
    kv.set("iterations", iterations)
        .set("converged", converged)
        .set("accuracy", float(acc));

    write_labels(&labels, &c.out)?;
    kv.set("output.sha256", file_hash(&c.out)?);
    let manifest = c.manifest.clone().unwrap_or_else(|| sibling(&c.out, ".manifest"));
    kv.write(&manifest)?;
    let mut timing = KeyValues::new();
    timing.set("solver_seconds", float(seconds));
    timing.write(&sibling(&manifest, ".timing"))?;

    println!("accuracy {:.2}% after {iterations} iterations", 100.0 * acc);
    if converged {
        Ok(Status::Done)
    } else {
        warn!("solver stopped at the iteration cap without meeting the stopping rule");
        Ok(Status::NotConverged)
    }
}

fn load_dataset(c: &BenchCmd) -> Result<(String, LabeledDataset)> {
    let data = match c.dataset {
        DatasetArg::Moons => ("three-moons".to_string(), generate_three_moons(&MoonsSpec::default())?),
        DatasetArg::Csv => {
            let (Some(f), Some(l)) = (&c.features, &c.labels) else {
                return Err(Error::invalid("the csv dataset needs --features and --labels"));
            };
            (f.display().to_string(), load_labeled_csv(f, l)?)
        }
        DatasetArg::Mnist => {
            let dir = c
                .mnist_dir
                .clone()
                .or_else(|| std::env::var_os("GRAPHSEG_MNIST_DIR").map(PathBuf::from))
                .ok_or_else(|| Error::invalid("the mnist dataset needs --mnist-dir or GRAPHSEG_MNIST_DIR"))?;
            ("mnist".to_string(), load_mnist_dir(&dir)?)
        }
    };
    match c.subset {
        Some(size) => {
            let (name, d) = data;
            Ok((format!("{name} (subset of {size})"), stratified_subset(&d, size, c.subset_seed)?))
        }
        None => Ok(data),
    }
}

pub fn cmd_bench(c: &BenchCmd) -> Result<Status> {
    let file: BenchFile = match &c.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str(&text).map_err(|e| Error::Format {
                path: p.clone(),
                msg: e.to_string(),
            })?
        }
        None => BenchFile::default(),
    };
    let solver_arg = c.solver.solver.or(file.solver.solver).unwrap_or(SolverArg::Mbo);
    let base = preset(c.dataset, solver_arg);
    let mut weights = base.weights;
    weights.overlay(&file.graph);
    weights.overlay(&c.weights);
    let mut solver = base.solver;
    solver.overlay(&file.solver);
    solver.overlay(&c.solver);
    if c.seeds == 0 {
        return Err(Error::invalid("--seeds must be >= 1"));
    }

    let graph = weights.resolve()?;
    let choice = solver.resolve(c.base_seed)?;
    let fidelity = solver.fidelity()?;
    let (name, data) = load_dataset(c)?;
    if choice.n_e() > data.len() {
        return Err(Error::invalid(format!("--n-e {} exceeds the {} samples", choice.n_e(), data.len())));
    }
    let opts = BenchOptions {
        n_seeds: c.seeds,
        base_seed: c.base_seed,
        fidelity,
        spectrum: match c.nystrom_sample {
            Some(s) => SpectrumSource::Nystrom { sample_size: s },
            None => SpectrumSource::Exact { tol: c.tol },
        },
        parallel: !c.sequential,
    };
    let prep = prepare_spectrum(&data, &graph, choice.n_e(), opts.spectrum, opts.base_seed)?;
    let report = run_benchmark_on(&name, &data, &prep, &choice, &opts)?;

    let mut kv = KeyValues::new();
    kv.set("command", "bench").set("base_seed", c.base_seed);
    if let Some(s) = c.subset {
        kv.set("subset", s).set("subset_seed", c.subset_seed);
    }
    match opts.spectrum {
        SpectrumSource::Exact { tol } => kv.set("spectrum", "exact").set("eig_tol", float(tol)),
        SpectrumSource::Nystrom { sample_size } => kv.set("spectrum", "nystrom").set("nystrom_sample", sample_size),
    };
    weights.record(&mut kv)?;
    record_solver(&choice, fidelity, &mut kv);
    kv.extend(&report.to_key_values());
    if let Some(last) = report.runs.last() {
        let cm = confusion(&last.labels, &data.labels, data.n_classes)?;
        println!("{}", report.to_table());
        println!("Confusion matrix, seed {}", last.seed);
        println!("{}", cm.to_table());
    }
    if let Some(dir) = &c.out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        kv.write(&dir.join("report.kv"))?;
        report.timings().write(&dir.join("timing.kv"))?;
        let table = dir.join("report.txt");
        fs::write(&table, report.to_table()).map_err(|e| Error::io(&table, e))?;
    }
    println!("mean accuracy {:.2}%", 100.0 * report.mean_accuracy);
    if report.runs.iter().all(|r| r.converged) {
        Ok(Status::Done)
    } else {
        warn!("some runs hit the iteration cap");
        Ok(Status::NotConverged)
    }
}

pub fn cmd_generate_moons(c: &MoonsCmd) -> Result<Status> {
    let spec = MoonsSpec {
        points_per_class: c.per_class,
        dimension: c.dim,
        noise: c.noise,
        seed: c.seed,
        ..MoonsSpec::default()
    };
    let data = generate_three_moons(&spec)?;
    write_features_csv(&data.features, &c.features)?;
    write_labels(&data.labels, &c.labels)?;
    Ok(Status::Done)
}
