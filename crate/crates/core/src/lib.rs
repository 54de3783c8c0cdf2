//! Dimensionality reduction for data living on Riemannian manifolds.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod data;
pub mod error;
pub mod eval;
pub mod graph;
pub mod linalg;
pub mod manifold;
pub mod onpp;
pub mod optim;
pub mod pga;
pub mod rlda;
pub mod rrpca;
pub mod rsvm;
mod serde_mat;
pub mod stats;

pub use bench::{real_datasets, run_benchmark, synthetic_datasets, BenchConfig, BenchRow, BenchmarkReport, Method};
pub use data::{generate, DatasetKind, LabeledDataset};
pub use error::{Error, Result};
pub use manifold::{exp_map, geodesic_dist, log_map, ManifoldSpec, Point, TangentVec};
pub use optim::{rgd_minimize, RgdConfig, RgdTrace};
pub use stats::{frechet_mean, MeanConfig};
