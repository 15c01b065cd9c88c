//! Geodesic principal component analysis of one-dimensional probability
//! measures.
//!
//! Every measure is stored as its quantile function sampled on a shared
//! midpoint grid of `(0, 1)`. On that representation the quadratic
//! Wasserstein distance is a weighted L2 distance, log/exp maps at a
//! reference measure are subtraction/addition, and geodesic PCA becomes a
//! convex-constrained PCA of the log-mapped data. The crate is layered
//! accordingly:
//!
//! - [`measures`]: quantile grids, construction from samples/histograms,
//!   Wasserstein distance.
//! - [`geometry`]: reference frames, log/exp maps, the convex set of
//!   admissible tangent vectors and its metric projection, geodesics and
//!   Fréchet means.
//! - [`cpca`]: convex-constrained PCA in a finite-dimensional Hilbert space.
//! - [`gpca`]: the Wasserstein front end (fit, modes of variation, scores,
//!   density-space PCA for comparison, consistency simulation).
//! - [`ingest`]: CSV/sample readers and the on-disk quantile bundle.
//!
//! Parallelism is provided by rayon behind the `parallel` feature (on by
//! default); see [`exec::Execution`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cpca;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod gpca;
pub mod ingest;
pub mod isotonic;
pub mod linalg;
pub mod measures;

pub use error::{Error, Result};
pub use exec::Execution;
pub use geometry::{ReferenceFrame, TangentVector};
pub use measures::{EmpiricalSample, GridConfig, Histogram, QuantileGrid};
