//! Semi-supervised multiclass segmentation of data on weighted graphs.
//!
//! The pipeline has four stages:
//!
//! 1. [`graph`]: build a sparse N-nearest-neighbor similarity graph and its
//!    symmetric normalized Laplacian `L_s = I - D^{-1/2} W D^{-1/2}`.
//! 2. [`spectral`]: compute the few smallest eigenpairs of `L_s` (sparse
//!    Lanczos-type solver) or approximate them with the Nyström extension.
//! 3. [`gl`] / [`mbo`]: evolve a phase field whose rows live on the Gibbs
//!    simplex, either by convex-splitting minimization of the multiclass
//!    Ginzburg-Landau energy or by the multiclass MBO diffusion/threshold
//!    scheme. Both work entirely in the truncated eigenbasis.
//! 4. [`eval`]: accuracy, confusion matrices, graph total variation and a
//!    seeded multi-run benchmark harness.
//!
//! ```no_run
//! use graphseg::data::{generate_three_moons, sample_fidelity, FidelityCount, MoonsSpec};
//! use graphseg::graph::{knn_graph, normalized_laplacian, Metric, WeightSpec};
//! use graphseg::mbo::{mbo_segment, MboConfig};
//! use graphseg::spectral::smallest_eigenpairs;
//!
//! let data = generate_three_moons(&MoonsSpec::default()).unwrap();
//! let graph = knn_graph(&data.features, &WeightSpec::local_scaling(10, 17), Metric::Euclidean).unwrap();
//! let lap = normalized_laplacian(&graph).unwrap();
//! let basis = smallest_eigenpairs(&lap, 20, 1e-8).unwrap();
//! let fid = sample_fidelity(&data, FidelityCount::PerClass(25), 30.0, 0).unwrap();
//! let out = mbo_segment(&basis, &fid, &MboConfig::new(20)).unwrap();
//! println!("{} iterations", out.iterations);
//! ```

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod field;
pub mod gl;
pub mod graph;
pub mod manifest;
pub mod mbo;
pub mod simplex;
pub mod spectral;

pub use error::{Error, Result};
