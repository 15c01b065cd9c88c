//! Exact projection onto `(x0 + span U) ∩ X` for sets cut out by finitely
//! many linear inequalities, solved in the coefficients of `U`.

use nalgebra::{DMatrix, DVector};

/// `{z : a_r · z >= b_r}` with sparse rows `a_r` and plain dot products.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Polyhedron {
    starts: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
    bounds: Vec<f64>,
}

impl Polyhedron {
    pub fn new() -> Self {
        Polyhedron {
            starts: vec![0],
            ..Default::default()
        }
    }

    pub fn push(&mut self, row: &[(usize, f64)], bound: f64) {
        if self.starts.is_empty() {
            self.starts.push(0);
        }
        for &(j, a) in row {
            self.indices.push(j);
            self.values.push(a);
        }
        self.starts.push(self.indices.len());
        self.bounds.push(bound);
    }

    pub fn len(&self) -> usize {
        self.bounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bounds.is_empty()
    }

    fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (s, e) = (self.starts[r], self.starts[r + 1]);
        self.indices[s..e]
            .iter()
            .copied()
            .zip(self.values[s..e].iter().copied())
    }

    pub fn dot(&self, r: usize, z: &[f64]) -> f64 {
        self.row(r).map(|(j, a)| a * z[j]).sum()
    }

    /// `−m Σ_r weight_r a_r`: the element of the normal cone, in the mean
    /// inner product of `R^m`, matching multipliers of the restricted problem.
    pub fn normal(&self, weights: &[(usize, f64)], m: usize) -> Vec<f64> {
        let mut out = vec![0.0; m];
        for &(r, w) in weights {
            for (j, a) in self.row(r) {
                out[j] -= m as f64 * w * a;
            }
        }
        out
    }

    /// The constraints on `c` under `z = x0 + Σ c_l dirs[l]`.
    pub fn restrict(&self, x0: &[f64], dirs: &[Vec<f64>]) -> LinearConstraints {
        let k = dirs.len();
        let mut rows = Vec::with_capacity(self.len() * k);
        let mut rhs = Vec::with_capacity(self.len());
        for r in 0..self.len() {
            rows.extend(dirs.iter().map(|u| self.dot(r, u)));
            rhs.push(self.bounds[r] - self.dot(r, x0));
        }
        LinearConstraints { k, rows, rhs }
    }
}

/// `rows[r] · c >= rhs[r]` for coefficient vectors `c` of length `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearConstraints {
    k: usize,
    rows: Vec<f64>,
    rhs: Vec<f64>,
}

impl LinearConstraints {
    pub fn len(&self) -> usize {
        self.rhs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rhs.is_empty()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.rows[r * self.k..(r + 1) * self.k]
    }

    pub fn rhs(&self, r: usize) -> f64 {
        self.rhs[r]
    }

    fn slack(&self, r: usize, c: &[f64]) -> f64 {
        dot(self.row(r), c) - self.rhs[r]
    }

    /// For `k = 1` and `c` on the boundary of the feasible interval: the
    /// binding row and its multiplier for the stationarity condition
    /// `c − t = μ row`.
    pub fn binding_multiplier(&self, c: f64, t: f64) -> Option<(usize, f64)> {
        debug_assert_eq!(self.k, 1);
        let upper = c < t;
        let mut best: Option<(usize, f64)> = None;
        for r in 0..self.len() {
            let a = self.rows[r];
            if a == 0.0 || (a < 0.0) != upper {
                continue;
            }
            let gap = (self.rhs[r] / a - c).abs();
            if best.is_none_or(|(_, g)| gap < g) {
                best = Some((r, gap));
            }
        }
        best.map(|(r, _)| (r, (c - t) / self.rows[r]))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct QpSolution {
    pub c: Vec<f64>,
    pub iterations: usize,
    /// Working-set rows and their (nonnegative) multipliers at the optimum.
    pub active: Vec<(usize, f64)>,
}

/// `argmin ½‖c − target‖²` subject to `lc`, by the primal active-set method
/// started at `c = 0`. Returns `None` when `c = 0` is infeasible beyond
/// `tol`, on a numerically dependent working set, or at the iteration cap;
/// the caller then falls back to an iterative method.
pub(crate) fn active_set_qp(
    target: &[f64],
    lc: &LinearConstraints,
    tol: f64,
) -> Option<QpSolution> {
    let k = target.len();
    let n = lc.len();
    let mut rhs = lc.rhs.clone();
    // the start must be feasible; absorb violations within tolerance
    for b in rhs.iter_mut() {
        if *b > 0.0 {
            if *b > tol * (1.0 + b.abs()) {
                return None;
            }
            *b = 0.0;
        }
    }
    let lc = LinearConstraints {
        k: lc.k,
        rows: lc.rows.clone(),
        rhs,
    };
    let mut c = vec![0.0; k];
    let mut working: Vec<usize> = Vec::new();
    let t_norm = dot(target, target).sqrt();
    let max_iter = 50 * (n + k) + 100;
    for iter in 0..max_iter {
        let g: Vec<f64> = c.iter().zip(target).map(|(a, b)| a - b).collect();
        let (p, lambda) = if working.is_empty() {
            (g.iter().map(|x| -x).collect::<Vec<_>>(), Vec::new())
        } else {
            // QR of the working rows as columns: p = −(I − Q Qᵀ) g, R λ = Qᵀ g
            let at = DMatrix::from_fn(k, working.len(), |j, r| lc.row(working[r])[j]);
            let qr = at.qr();
            let (q, r) = (qr.q(), qr.r());
            let gv = DVector::from_column_slice(&g);
            let qtg = q.transpose() * &gv;
            let lambda = r.solve_upper_triangular(&qtg)?;
            if lambda.iter().any(|l| !l.is_finite()) {
                return None;
            }
            let p = if working.len() == k {
                vec![0.0; k]
            } else {
                (q * qtg - gv).iter().copied().collect()
            };
            (p, lambda.iter().copied().collect())
        };
        let p_norm = dot(&p, &p).sqrt();
        if p_norm <= 1e-14 * (1.0 + t_norm + dot(&c, &c).sqrt()) {
            let (worst, lmin) =
                lambda
                    .iter()
                    .enumerate()
                    .fold(
                        (usize::MAX, 0.0),
                        |acc, (i, &l)| if l < acc.1 { (i, l) } else { acc },
                    );
            if worst == usize::MAX || lmin >= -1e-14 * (1.0 + t_norm) {
                let c_norm = dot(&c, &c).sqrt();
                let violated = (0..n).any(|i| {
                    let row = lc.row(i);
                    lc.slack(i, &c) < -tol * (1.0 + lc.rhs[i].abs() + dot(row, row).sqrt() * c_norm)
                });
                if violated {
                    return None;
                }
                let active = working
                    .iter()
                    .copied()
                    .zip(lambda.iter().map(|l| l.max(0.0)))
                    .collect();
                return Some(QpSolution {
                    c,
                    iterations: iter,
                    active,
                });
            }
            working.remove(worst);
            continue;
        }
        let mut alpha = 1.0;
        let mut blocking = None;
        for i in (0..n).filter(|i| !working.contains(i)) {
            let row = lc.row(i);
            let gp = dot(row, &p);
            // rows (numerically) in the span of the working set cannot block
            if gp < -1e-9 * dot(row, row).sqrt() * p_norm {
                let a = (-lc.slack(i, &c) / gp).max(0.0);
                if a < alpha {
                    alpha = a;
                    blocking = Some(i);
                }
            }
        }
        c.iter_mut().zip(&p).for_each(|(ci, pi)| *ci += alpha * pi);
        if let Some(i) = blocking {
            working.push(i);
        }
    }
    None
}
