//! Convex-constrained PCA in a finite-dimensional Hilbert space.
//!
//! Points are coordinate vectors under the uniform-weight inner product
//! `<x, y> = (1/m) Σ x_j y_j`. A constraint set `X` is supplied through the
//! [`ConvexSet`] oracle. For a reference point `x0 ∈ X` and orthonormal
//! directions `U`, the candidate set is `C_U = (x0 + span U) ∩ X` and the
//! objective is the mean squared distance of the data to it.

mod pca;
mod projection;
mod qp;
mod search;
mod sets;

use std::ops::Deref;

use serde::{Deserialize, Serialize};

pub use pca::standard_pca;
pub use projection::{dykstra, project_onto_affine, project_onto_span_cap_x, SpanProjection};
pub use qp::{LinearConstraints, Polyhedron};
pub use search::{solve_gpcc, solve_npcc};
pub use sets::{Ball, ConvexSet, HalfSpace, Interval, WholeSpace};

use crate::exec::Execution;
use crate::linalg;
use crate::Result;

/// A point of the Hilbert space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HilbertPoint(Vec<f64>);

impl HilbertPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        HilbertPoint(coords)
    }

    pub fn zeros(dim: usize) -> Self {
        HilbertPoint(vec![0.0; dim])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }

    /// The quadrature weight `1/m` used by the inner product.
    pub fn weight(&self) -> f64 {
        1.0 / self.0.len() as f64
    }

    pub fn inner(&self, other: &HilbertPoint) -> f64 {
        linalg::inner(&self.0, &other.0)
    }

    pub fn norm(&self) -> f64 {
        linalg::norm(&self.0)
    }
}

impl Deref for HilbertPoint {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for HilbertPoint {
    fn from(v: Vec<f64>) -> Self {
        HilbertPoint(v)
    }
}

/// How `solve_gpcc`/`solve_npcc` search the unit sphere once the PCA
/// shortcut fails.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchStrategy {
    /// Angular grid for one direction in a span of dimension ≤ 3,
    /// multi-start projected gradient otherwise.
    #[default]
    Auto,
    AngularGrid,
    MultiStart,
}

/// Optimizer configuration; every field has a default so partial JSON
/// configs are accepted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub dykstra_tol: f64,
    pub dykstra_max_iter: usize,
    /// Solve projections onto polyhedral sets exactly in the span
    /// coefficients instead of running Dykstra.
    pub exact_polyhedral: bool,
    pub random_starts: usize,
    pub angular_grid: usize,
    /// Polish the best angular-grid point with a local descent.
    pub refine_grid: bool,
    pub max_iter: usize,
    pub grad_tol: f64,
    pub seed: u64,
    pub strategy: SearchStrategy,
    pub execution: Execution,
    /// Relative eigenvalue threshold below which directions count as null.
    pub rank_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            dykstra_tol: 1e-10,
            dykstra_max_iter: 10_000,
            exact_polyhedral: true,
            random_starts: 8,
            angular_grid: 2000,
            refine_grid: true,
            max_iter: 500,
            grad_tol: 1e-9,
            seed: 0,
            strategy: SearchStrategy::Auto,
            execution: Execution::Parallel,
            rank_tol: 1e-12,
        }
    }
}

/// Non-fatal conditions attached to a solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SolverNote {
    /// Fewer directions than requested: the centred data has lower rank.
    RankDeficient { requested: usize, returned: usize },
    /// The constrained search ran inside the span of the centred data.
    RestrictedToDataSpan { dimension: usize },
    /// No candidate improved on the PCA start.
    NoImprovement,
    /// Explained-variance shares of a constrained solution are not
    /// monotone in the component index.
    NonMonotoneRatios,
}

/// Output of the PCA / CPCA solvers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrincipalComponents {
    pub reference: HilbertPoint,
    pub directions: Vec<HilbertPoint>,
    /// `scores[i][j]`: coordinate along `directions[j]` of datum `i`'s
    /// projection onto `C_U`.
    pub scores: Vec<Vec<f64>>,
    /// Mean squared distance of the data to `C_U` for the full set `U`.
    pub residual_cost: f64,
    /// Same with only the first `j + 1` directions.
    pub cumulative_costs: Vec<f64>,
    /// `(1/n) Σ ‖x_i − x0‖²`.
    pub total_variance: f64,
    pub explained_ratios: Vec<f64>,
    /// Nonzero eigenvalues of the empirical covariance about `x0`.
    pub eigenvalues: Vec<f64>,
    pub constrained: bool,
    pub notes: Vec<SolverNote>,
    /// Objective values of every candidate evaluated by the constrained
    /// search (empty when the PCA shortcut applied).
    pub trace: Vec<f64>,
}

impl PrincipalComponents {
    pub fn k(&self) -> usize {
        self.directions.len()
    }
}

/// Result of [`check_pca_sufficiency`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sufficiency {
    pub holds: bool,
    pub violators: Vec<usize>,
}

/// `(1/n) Σ d²(x_i, C)` with `d` computed through a projection onto `C`.
pub fn cost_k<F>(data: &[HilbertPoint], project: F) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if data.is_empty() {
        return Err(crate::Error::Empty("data"));
    }
    let mut acc = 0.0;
    for x in data {
        let p = project(x)?;
        acc += linalg::dist_sq(x, &p);
    }
    Ok(acc / data.len() as f64)
}

/// `H_X(U) = (1/n) Σ d²(x_i, (x0 + span U) ∩ X)`.
pub fn objective_h(
    data: &[HilbertPoint],
    x0: &HilbertPoint,
    directions: &[HilbertPoint],
    set: &dyn ConvexSet,
    opts: &SolverOptions,
) -> Result<f64> {
    let dirs: Vec<Vec<f64>> = directions.iter().map(|d| d.0.clone()).collect();
    search::objective_raw(data, x0, &dirs, set, opts)
}

/// Whether every datum's projection onto `x0 + span U` already lies in `X`.
pub fn check_pca_sufficiency(
    data: &[HilbertPoint],
    x0: &HilbertPoint,
    directions: &[HilbertPoint],
    set: &dyn ConvexSet,
) -> Sufficiency {
    let dirs: Vec<Vec<f64>> = directions.iter().map(|d| d.0.clone()).collect();
    let violators: Vec<usize> = data
        .iter()
        .enumerate()
        .filter(|(_, x)| !set.contains(&project_onto_affine(x, x0, &dirs)))
        .map(|(i, _)| i)
        .collect();
    Sufficiency {
        holds: violators.is_empty(),
        violators,
    }
}
