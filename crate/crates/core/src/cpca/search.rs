//! Constrained search over orthonormal direction sets.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::pca::{covariance_spectrum, from_spectrum, CovarianceSpectrum};
use super::projection::{project_onto_span_cap_x, SpanProjector};
use super::{
    check_pca_sufficiency, ConvexSet, HilbertPoint, PrincipalComponents, SearchStrategy,
    SolverNote, SolverOptions,
};
use crate::linalg;
use crate::{Error, Result};

pub(crate) fn objective_raw(
    data: &[HilbertPoint],
    x0: &[f64],
    dirs: &[Vec<f64>],
    set: &dyn ConvexSet,
    opts: &SolverOptions,
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Empty("data"));
    }
    let proj = SpanProjector::new(x0, dirs, set, opts)?;
    let d = opts.execution.try_map(data, |x| {
        proj.project(x).map(|p| linalg::dist_sq(x, &p.point))
    })?;
    Ok(d.iter().sum::<f64>() / data.len() as f64)
}

fn check_inputs(
    data: &[HilbertPoint],
    x0: &HilbertPoint,
    k: usize,
    set: &dyn ConvexSet,
) -> Result<()> {
    if data.is_empty() {
        return Err(Error::Empty("data"));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if !set.contains(x0) {
        return Err(Error::InvalidArgument(
            "reference point lies outside the constraint set".into(),
        ));
    }
    Ok(())
}

/// Global principal convex components.
///
/// If every datum's projection onto the PCA subspace already lies in `X`,
/// the PCA solution is exact and returned unchanged. Otherwise the unit
/// sphere (Stiefel manifold for `k > 1`) of the span of the centred data is
/// searched for the minimizer of [`objective_h`](super::objective_h).
pub fn solve_gpcc(
    data: &[HilbertPoint],
    x0: &HilbertPoint,
    k: usize,
    set: &dyn ConvexSet,
    opts: &SolverOptions,
) -> Result<PrincipalComponents> {
    check_inputs(data, x0, k, set)?;
    let spectrum = covariance_spectrum(data, x0, opts.rank_tol, opts.execution)?;
    let pca = from_spectrum(&spectrum, x0, k);
    if check_pca_sufficiency(data, x0, &pca.directions, set).holds {
        return Ok(pca);
    }
    let kk = pca.k();
    let start: Vec<Vec<f64>> = pca.directions.iter().map(|d| d.to_vec()).collect();
    let outcome = search_subspace(data, x0, &[], &spectrum.vectors, kk, &start, set, opts, 0)?;
    let mut notes = pca.notes.clone();
    notes.push(SolverNote::RestrictedToDataSpan {
        dimension: spectrum.vectors.len(),
    });
    if !outcome.improved {
        notes.push(SolverNote::NoImprovement);
    }
    let dirs = greedy_order(data, x0, outcome.dirs, set, opts)?;
    finalize(data, x0, &spectrum, dirs, set, opts, notes, outcome.trace)
}

/// Nested principal convex components: each new direction minimizes the
/// objective over the orthogonal complement of the previous ones.
pub fn solve_npcc(
    data: &[HilbertPoint],
    x0: &HilbertPoint,
    k: usize,
    set: &dyn ConvexSet,
    opts: &SolverOptions,
) -> Result<PrincipalComponents> {
    check_inputs(data, x0, k, set)?;
    let spectrum = covariance_spectrum(data, x0, opts.rank_tol, opts.execution)?;
    let pca = from_spectrum(&spectrum, x0, k);
    if check_pca_sufficiency(data, x0, &pca.directions, set).holds {
        return Ok(pca);
    }
    let kk = pca.k();
    let mut chosen: Vec<Vec<f64>> = Vec::with_capacity(kk);
    let mut improved = false;
    let mut trace = Vec::new();
    for j in 0..kk {
        let basis = if chosen.is_empty() {
            spectrum.vectors.clone()
        } else {
            complement(&spectrum.vectors, &chosen)
        };
        let start = vec![spectrum.vectors[j].clone()];
        let outcome = search_subspace(data, x0, &chosen, &basis, 1, &start, set, opts, j as u64)?;
        improved |= outcome.improved;
        trace = outcome.trace;
        chosen.extend(outcome.dirs);
    }
    let mut notes = pca.notes.clone();
    notes.push(SolverNote::RestrictedToDataSpan {
        dimension: spectrum.vectors.len(),
    });
    if !improved {
        notes.push(SolverNote::NoImprovement);
    }
    finalize(data, x0, &spectrum, chosen, set, opts, notes, trace)
}

/// Orthonormal basis of `span(basis) ⊖ span(chosen)`.
fn complement(basis: &[Vec<f64>], chosen: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut all: Vec<Vec<f64>> = chosen.to_vec();
    all.extend(basis.iter().cloned());
    let ortho = linalg::orthonormalize_with(&all, linalg::inner, 1e-8);
    ortho
        .into_iter()
        .skip(chosen.len())
        .take(basis.len() - chosen.len())
        .collect()
}

struct Outcome {
    dirs: Vec<Vec<f64>>,
    trace: Vec<f64>,
    improved: bool,
}

/// Reduced coordinates: `kk` columns of length `d = basis.len()`.
type Frame = Vec<Vec<f64>>;

struct Problem<'a> {
    data: &'a [HilbertPoint],
    x0: &'a [f64],
    fixed: &'a [Vec<f64>],
    basis: &'a [Vec<f64>],
    set: &'a dyn ConvexSet,
    opts: &'a SolverOptions,
}

impl Problem<'_> {
    fn lift(&self, z: &Frame) -> Vec<Vec<f64>> {
        let m = self.x0.len();
        let mut dirs: Vec<Vec<f64>> = self.fixed.to_vec();
        dirs.extend(z.iter().map(|col| linalg::combine(col, self.basis, m)));
        dirs
    }

    fn eval(&self, z: &Frame) -> Result<f64> {
        objective_raw(self.data, self.x0, &self.lift(z), self.set, self.opts)
    }

    /// Euclidean gradient in reduced coordinates. Analytic when every
    /// projection reports a normal `ν` (envelope theorem:
    /// `∂H/∂u_l = −(2/n) Σ_i c_il (x_i − p_i − ν_i)`), central differences
    /// otherwise.
    fn gradient(&self, z: &Frame) -> Result<Frame> {
        let dirs = self.lift(z);
        let proj = SpanProjector::new(self.x0, &dirs, self.set, self.opts)?;
        let nf = self.fixed.len();
        let per_datum = self
            .opts
            .execution
            .try_map(self.data, |x| -> Result<Option<Frame>> {
                let p = proj.project(x)?;
                let Some(nu) = p.normal else {
                    return Ok(None);
                };
                let res: Vec<f64> = x
                    .iter()
                    .zip(&p.point)
                    .zip(&nu)
                    .map(|((a, b), c)| a - b - c)
                    .collect();
                let along: Vec<f64> = self.basis.iter().map(|b| linalg::inner(&res, b)).collect();
                Ok(Some(
                    (0..z.len())
                        .map(|col| {
                            along
                                .iter()
                                .map(|a| -2.0 * p.coords[nf + col] * a)
                                .collect()
                        })
                        .collect(),
                ))
            })?;
        let n = self.data.len() as f64;
        let mut g: Frame = z.iter().map(|c| vec![0.0; c.len()]).collect();
        for gi in per_datum {
            let Some(gi) = gi else {
                return self.fd_gradient(z);
            };
            for (gc, gic) in g.iter_mut().zip(&gi) {
                linalg::axpy(1.0 / n, gic, gc);
            }
        }
        Ok(g)
    }

    fn fd_gradient(&self, z: &Frame) -> Result<Frame> {
        let h = 1e-7;
        let mut g: Frame = z.iter().map(|c| vec![0.0; c.len()]).collect();
        for col in 0..z.len() {
            for r in 0..z[col].len() {
                let mut zp = z.clone();
                zp[col][r] += h;
                let mut zm = z.clone();
                zm[col][r] -= h;
                g[col][r] = (self.eval(&zp)? - self.eval(&zm)?) / (2.0 * h);
            }
        }
        Ok(g)
    }

    /// Lifted new directions with the sign convention applied.
    fn canonical(&self, z: &Frame) -> Vec<Vec<f64>> {
        let m = self.x0.len();
        z.iter()
            .map(|col| {
                let mut u = linalg::combine(col, self.basis, m);
                linalg::canonical_sign(&mut u);
                u
            })
            .collect()
    }
}

#[allow(clippy::too_many_arguments)]
fn search_subspace(
    data: &[HilbertPoint],
    x0: &[f64],
    fixed: &[Vec<f64>],
    basis: &[Vec<f64>],
    kk: usize,
    start_dirs: &[Vec<f64>],
    set: &dyn ConvexSet,
    opts: &SolverOptions,
    salt: u64,
) -> Result<Outcome> {
    let d = basis.len();
    let prob = Problem {
        data,
        x0,
        fixed,
        basis,
        set,
        opts,
    };
    let reduce = |u: &[f64]| -> Vec<f64> { basis.iter().map(|b| linalg::inner(u, b)).collect() };
    let start: Frame = {
        let cols: Vec<Vec<f64>> = start_dirs.iter().map(|u| reduce(u)).collect();
        let mut z = linalg::orthonormalize_with(&cols, linalg::euclid_dot, 1e-8);
        let mut e = 0;
        while z.len() < kk && e < d {
            let mut unit = vec![0.0; d];
            unit[e] = 1.0;
            z.push(unit);
            z = linalg::orthonormalize_with(&z, linalg::euclid_dot, 1e-8);
            e += 1;
        }
        z.truncate(kk);
        z
    };
    let start_cost = prob.eval(&start)?;

    let grid_ok = kk == 1 && d <= 3;
    let use_grid = match opts.strategy {
        SearchStrategy::Auto => grid_ok,
        SearchStrategy::AngularGrid => {
            if !grid_ok {
                log::warn!(
                    "angular grid needs one direction in at most 3 dimensions; using multi-start"
                );
            }
            grid_ok
        }
        SearchStrategy::MultiStart => false,
    };

    let mut candidates: Vec<(f64, Frame)> = vec![(start_cost, start.clone())];
    let mut trace = vec![start_cost];
    if use_grid {
        let points = sphere_grid(d, opts.angular_grid.max(1));
        let costs = opts
            .execution
            .try_map(&points, |z| prob.eval(&vec![z.clone()]))?;
        trace.extend(&costs);
        let (best, _) = pick_best(
            &prob,
            costs
                .iter()
                .copied()
                .zip(points.iter().map(|p| vec![p.clone()]))
                .collect::<Vec<_>>()
                .iter(),
        );
        let best_point = vec![points[best].clone()];
        candidates.push((costs[best], best_point.clone()));
        if opts.refine_grid {
            let (z, c) = local_descent(&prob, best_point)?;
            trace.push(c);
            candidates.push((c, z));
        }
    } else {
        let mut starts = vec![start.clone()];
        let mut rng =
            ChaCha8Rng::seed_from_u64(opts.seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        for _ in 0..opts.random_starts * kk {
            let cols: Vec<Vec<f64>> = (0..kk)
                .map(|_| (0..d).map(|_| StandardNormal.sample(&mut rng)).collect())
                .collect();
            let z = linalg::orthonormalize_with(&cols, linalg::euclid_dot, 1e-8);
            if z.len() == kk {
                starts.push(z);
            }
        }
        let results = opts
            .execution
            .try_map(&starts, |z| local_descent(&prob, z.clone()))?;
        for (z, c) in results {
            trace.push(c);
            candidates.push((c, z));
        }
    }
    let (best, best_cost) = pick_best(&prob, candidates.iter());
    let improved = best_cost < start_cost - 1e-15 * (1.0 + start_cost.abs());
    let dirs = prob.canonical(&candidates[best].1);
    Ok(Outcome {
        dirs,
        trace,
        improved,
    })
}

/// Lowest cost; ties (relative 1e-12) go to the lexicographically smallest
/// canonical direction vector.
fn pick_best<'a>(prob: &Problem, cands: impl Iterator<Item = &'a (f64, Frame)>) -> (usize, f64) {
    let cands: Vec<&(f64, Frame)> = cands.collect();
    let min = cands.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
    let tol = 1e-12 * (1.0 + min.abs());
    let mut best: Option<(usize, Vec<f64>)> = None;
    for (i, (c, z)) in cands.iter().enumerate() {
        if *c > min + tol {
            continue;
        }
        let key: Vec<f64> = prob.canonical(z).concat();
        let better = match &best {
            None => true,
            Some((_, k)) => lex_less(&key, k),
        };
        if better {
            best = Some((i, key));
        }
    }
    let i = best.map(|b| b.0).unwrap_or(0);
    (i, cands[i].0)
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}

/// Grid on the half-sphere of `R^d` (lines through the origin), `d <= 3`.
pub(crate) fn sphere_grid(d: usize, n: usize) -> Vec<Vec<f64>> {
    match d {
        1 => vec![vec![1.0]],
        2 => (0..n)
            .map(|i| {
                let th = std::f64::consts::PI * i as f64 / n as f64 - std::f64::consts::FRAC_PI_2;
                vec![th.cos(), th.sin()]
            })
            .collect(),
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|i| {
                    let z = 1.0 - (i as f64 + 0.5) / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let phi = golden * i as f64;
                    vec![r * phi.cos(), r * phi.sin(), z]
                })
                .collect()
        }
        _ => panic!("sphere grid only for d <= 3"),
    }
}

fn retract(z: &Frame) -> Option<Frame> {
    let q = linalg::orthonormalize_with(z, linalg::euclid_dot, 1e-10);
    (q.len() == z.len()).then_some(q)
}

/// Projected gradient descent on the Stiefel manifold with Armijo
/// backtracking.
fn local_descent(prob: &Problem, z0: Frame) -> Result<(Frame, f64)> {
    let opts = prob.opts;
    let mut z = z0;
    let mut f = prob.eval(&z)?;
    let mut step = f64::INFINITY;
    for _ in 0..opts.max_iter {
        let g = prob.gradient(&z)?;
        // tangent projection G - Z sym(Z^T G)
        let k = z.len();
        let mut gt = g.clone();
        for j in 0..k {
            for l in 0..k {
                let s = 0.5 * (linalg::euclid_dot(&z[l], &g[j]) + linalg::euclid_dot(&z[j], &g[l]));
                linalg::axpy(-s, &z[l], &mut gt[j]);
            }
        }
        let gn2: f64 = gt.iter().map(|c| linalg::euclid_dot(c, c)).sum();
        let gn = gn2.sqrt();
        if gn < opts.grad_tol * (1.0 + f.abs()) {
            break;
        }
        step = (2.0 * step).min(0.5 / gn);
        let mut accepted = false;
        while step * gn > 1e-13 {
            let trial: Frame = z
                .iter()
                .zip(&gt)
                .map(|(c, d)| c.iter().zip(d).map(|(a, b)| a - step * b).collect())
                .collect();
            if let Some(zc) = retract(&trial) {
                let fc = prob.eval(&zc)?;
                if fc <= f - 1e-4 * step * gn2 {
                    z = zc;
                    f = fc;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok((z, f))
}

/// Orders directions so each prefix explains as much as possible.
fn greedy_order(
    data: &[HilbertPoint],
    x0: &[f64],
    mut dirs: Vec<Vec<f64>>,
    set: &dyn ConvexSet,
    opts: &SolverOptions,
) -> Result<Vec<Vec<f64>>> {
    if dirs.len() < 2 {
        return Ok(dirs);
    }
    let mut ordered = Vec::with_capacity(dirs.len());
    while dirs.len() > 1 {
        let mut best = (f64::INFINITY, 0);
        for (i, d) in dirs.iter().enumerate() {
            let mut trial = ordered.clone();
            trial.push(d.clone());
            let c = objective_raw(data, x0, &trial, set, opts)?;
            if c < best.0 {
                best = (c, i);
            }
        }
        ordered.push(dirs.remove(best.1));
    }
    ordered.extend(dirs);
    Ok(ordered)
}

#[allow(clippy::too_many_arguments)]
fn finalize(
    data: &[HilbertPoint],
    x0: &HilbertPoint,
    spectrum: &CovarianceSpectrum,
    dirs: Vec<Vec<f64>>,
    set: &dyn ConvexSet,
    opts: &SolverOptions,
    mut notes: Vec<SolverNote>,
    trace: Vec<f64>,
) -> Result<PrincipalComponents> {
    let kk = dirs.len();
    let cumulative_costs: Vec<f64> = (1..=kk)
        .map(|j| objective_raw(data, x0, &dirs[..j], set, opts))
        .collect::<Result<_>>()?;
    let projections = opts
        .execution
        .try_map(data, |x| project_onto_span_cap_x(x, x0, &dirs, set, opts))?;
    let scores = projections.into_iter().map(|p| p.coords).collect();
    let total = spectrum.total_variance;
    let mut prev = total;
    let explained_ratios: Vec<f64> = cumulative_costs
        .iter()
        .map(|&c| {
            let r = ((prev - c) / total).clamp(0.0, 1.0);
            prev = c;
            r
        })
        .collect();
    if explained_ratios.windows(2).any(|w| w[1] > w[0] + 1e-12) {
        notes.push(SolverNote::NonMonotoneRatios);
    }
    Ok(PrincipalComponents {
        reference: x0.clone(),
        directions: dirs.into_iter().map(HilbertPoint::new).collect(),
        scores,
        residual_cost: *cumulative_costs.last().expect("at least one direction"),
        cumulative_costs,
        total_variance: total,
        explained_ratios,
        eigenvalues: spectrum.values.clone(),
        constrained: true,
        notes,
        trace,
    })
}
