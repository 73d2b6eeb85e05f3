//! Bayesian mixed-membership stochastic block model for directed acyclic
//! graphs with the topological order treated as an unknown parameter.
//!
//! * [`graph`]: loading and cleaning citation data, orders, densities.
//! * [`model`]: parameters, sufficient counts and the log joint density.
//! * [`sampler`]: the Gibbs/Metropolis kernels, sweeps and chains.
//! * [`posterior`]: posterior means, group roles, projections, diagnostics.
//! * [`synth`]: forward simulation with ground truth.
//! * [`formats`]: run-directory and output file formats.

pub mod dist;
pub mod error;
pub mod formats;
pub mod graph;
pub mod metrics;
pub mod model;
pub mod posterior;
pub mod sampler;
pub mod synth;

pub use error::{Error, Result};
pub use graph::{CitationGraph, NodeId, NodeMeta, Ordering};
pub use model::{Hyperparams, ModelState};
pub use posterior::PosteriorSummary;
pub use sampler::{Chain, ChainConfig, KernelFlags};
