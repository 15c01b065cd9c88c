use super::qp::{active_set_qp, LinearConstraints, Polyhedron};
use super::{ConvexSet, Interval, SolverOptions};
use crate::linalg;
use crate::measures::MONOTONE_TOL;
use crate::{Error, Result};

/// Projection onto `x0 + span U` for orthonormal `U`.
pub fn project_onto_affine(x: &[f64], x0: &[f64], dirs: &[Vec<f64>]) -> Vec<f64> {
    let c = linalg::sub(x, x0);
    let mut p = x0.to_vec();
    for u in dirs {
        linalg::axpy(linalg::inner(&c, u), u, &mut p);
    }
    p
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpanProjection {
    pub point: Vec<f64>,
    /// Coefficients of `point − x0` in `U`.
    pub coords: Vec<f64>,
    /// Solver iterations; zero for the closed form.
    pub iterations: usize,
    /// An element `ν` of the normal cone of `X` at `point` with
    /// `x − point − ν ⊥ span U`, when the solver provides one.
    pub normal: Option<Vec<f64>>,
}

/// Metric projection of `x` onto `(x0 + span U) ∩ X` for orthonormal `U`.
///
/// One direction with a closed-form feasible interval clamps the
/// unconstrained coefficient. More directions on a polyhedral set solve the
/// small quadratic program in the coefficients exactly (unless
/// `exact_polyhedral` is off); everything else goes through Dykstra's
/// alternating projections.
pub fn project_onto_span_cap_x(
    x: &[f64],
    x0: &[f64],
    dirs: &[Vec<f64>],
    set: &dyn ConvexSet,
    opts: &SolverOptions,
) -> Result<SpanProjection> {
    SpanProjector::new(x0, dirs, set, opts)?.project(x)
}

/// [`project_onto_span_cap_x`] with the per-subspace work done once.
pub(crate) struct SpanProjector<'a> {
    x0: &'a [f64],
    dirs: &'a [Vec<f64>],
    set: &'a dyn ConvexSet,
    opts: &'a SolverOptions,
    interval: Option<Interval>,
    poly: Option<Polyhedron>,
    restricted: Option<LinearConstraints>,
}

impl<'a> SpanProjector<'a> {
    pub(crate) fn new(
        x0: &'a [f64],
        dirs: &'a [Vec<f64>],
        set: &'a dyn ConvexSet,
        opts: &'a SolverOptions,
    ) -> Result<Self> {
        let interval = if dirs.len() == 1 {
            set.line_interval(x0, &dirs[0])
        } else {
            None
        };
        if interval.is_some_and(|iv| iv.is_empty()) {
            return Err(Error::Infeasible);
        }
        let poly = if interval.is_some() || (opts.exact_polyhedral && !dirs.is_empty()) {
            set.polyhedron()
        } else {
            None
        };
        let restricted = poly.as_ref().map(|p| p.restrict(x0, dirs));
        Ok(SpanProjector {
            x0,
            dirs,
            set,
            opts,
            interval,
            poly,
            restricted,
        })
    }

    fn target(&self, x: &[f64]) -> Vec<f64> {
        let r = linalg::sub(x, self.x0);
        self.dirs.iter().map(|u| linalg::inner(&r, u)).collect()
    }

    fn point(&self, coords: &[f64]) -> Vec<f64> {
        let mut point = self.x0.to_vec();
        for (c, u) in coords.iter().zip(self.dirs) {
            linalg::axpy(*c, u, &mut point);
        }
        point
    }

    pub(crate) fn project(&self, x: &[f64]) -> Result<SpanProjection> {
        let m = x.len();
        if let Some(iv) = self.interval {
            let t = self.target(x)[0];
            let c = iv.clamp(t);
            let normal = if c == t {
                Some(vec![0.0; m])
            } else {
                match (&self.poly, &self.restricted) {
                    (Some(p), Some(lc)) => lc.binding_multiplier(c, t).map(|w| p.normal(&[w], m)),
                    _ => None,
                }
            };
            return Ok(SpanProjection {
                point: self.point(&[c]),
                coords: vec![c],
                iterations: 0,
                normal,
            });
        }
        if self.opts.exact_polyhedral {
            if let (Some(p), Some(lc)) = (&self.poly, &self.restricted) {
                if let Some(sol) = active_set_qp(&self.target(x), lc, MONOTONE_TOL) {
                    return Ok(SpanProjection {
                        point: self.point(&sol.c),
                        normal: Some(p.normal(&sol.active, m)),
                        coords: sol.c,
                        iterations: sol.iterations,
                    });
                }
                log::debug!("active-set projection declined; falling back to Dykstra");
            }
        }
        dykstra(
            x,
            self.x0,
            self.dirs,
            self.set,
            self.opts.dykstra_tol,
            self.opts.dykstra_max_iter,
        )
    }
}

/// Dykstra's algorithm for the projection onto `(x0 + span U) ∩ X`.
///
/// Stops when both iterates move by less than `tol`; the returned point is
/// the last iterate in `X` and the normal is the correction term of `X`.
pub fn dykstra(
    x: &[f64],
    x0: &[f64],
    dirs: &[Vec<f64>],
    set: &dyn ConvexSet,
    tol: f64,
    max_iter: usize,
) -> Result<SpanProjection> {
    let m = x.len();
    let mut cur = x.to_vec();
    let mut p = vec![0.0; m];
    let mut q = vec![0.0; m];
    let mut prev_a: Option<Vec<f64>> = None;
    let mut gap = f64::INFINITY;
    let mut iterations = max_iter;
    for it in 1..=max_iter {
        let a_in = linalg::add(&cur, &p);
        let a = project_onto_affine(&a_in, x0, dirs);
        p = linalg::sub(&a_in, &a);
        let b_in = linalg::add(&a, &q);
        let b = set.project(&b_in);
        q = linalg::sub(&b_in, &b);
        let moved_b = linalg::dist_sq(&b, &cur).sqrt();
        let moved_a = prev_a
            .as_ref()
            .map_or(f64::INFINITY, |pa| linalg::dist_sq(&a, pa).sqrt());
        let split = linalg::dist_sq(&a, &b).sqrt();
        gap = moved_a.max(moved_b).max(split);
        cur = b;
        if gap < tol {
            iterations = it;
            break;
        }
        prev_a = Some(a);
    }
    if !(gap < tol) {
        return Err(Error::NoConvergence {
            iterations: max_iter,
            gap,
        });
    }
    let c = linalg::sub(&cur, x0);
    let coords = dirs.iter().map(|u| linalg::inner(&c, u)).collect();
    Ok(SpanProjection {
        point: cur,
        coords,
        iterations,
        normal: Some(q),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cpca::{HalfSpace, WholeSpace};

    #[test]
    fn point_already_in_candidate_set() {
        let u = vec![vec![2f64.sqrt(), 0.0]];
        let x = [0.5, 0.0];
        let p =
            project_onto_span_cap_x(&x, &[0.0, 0.0], &u, &WholeSpace, &SolverOptions::default())
                .unwrap();
        assert!(p.point.iter().zip(x).all(|(a, b)| (a - b).abs() < 1e-15));
    }

    #[test]
    fn reduced_spread_out_datum_hits_the_boundary() {
        // Y = {alpha >= -1}; datum (-0.8, -3) with the unconstrained PCA
        // direction of the spread-out example
        let set = HalfSpace::coordinate_ge(2, 0, -1.0);
        let w = [0.479_557_896_f64, 0.877_510_24];
        let s = 2f64.sqrt();
        let u = vec![vec![w[0] * s, w[1] * s]];
        let x = [-0.8, -3.0];
        let free = project_onto_affine(&x, &[0.0, 0.0], &u);
        assert!(free[0] < -1.0);
        let p =
            project_onto_span_cap_x(&x, &[0.0, 0.0], &u, &set, &SolverOptions::default()).unwrap();
        assert!((p.point[0] + 1.0).abs() < 1e-12);
        let d = dykstra(&x, &[0.0, 0.0], &u, &set, 1e-12, 100_000).unwrap();
        assert!(linalg::dist_sq(&d.point, &p.point).sqrt() < 1e-8);
        // both normals satisfy the stationarity condition
        for n in [p.normal.unwrap(), d.normal.unwrap()] {
            let res: Vec<f64> = x
                .iter()
                .zip(&p.point)
                .zip(&n)
                .map(|((a, b), c)| a - b - c)
                .collect();
            assert!(linalg::inner(&res, &u[0]).abs() < 1e-8);
        }
    }

    #[test]
    fn infeasible_line() {
        let set = HalfSpace::coordinate_ge(2, 0, 1.0);
        let u = vec![vec![0.0, 2f64.sqrt()]];
        let r = project_onto_span_cap_x(
            &[0.0, 0.0],
            &[0.0, 0.0],
            &u,
            &set,
            &SolverOptions::default(),
        );
        assert!(matches!(r, Err(Error::Infeasible)));
    }
}
