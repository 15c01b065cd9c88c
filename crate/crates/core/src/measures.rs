//! Quantile-function representation of probability measures on the line.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::{Error, Result};

/// Relative slack accepted when checking monotonicity of quantile vectors.
pub const MONOTONE_TOL: f64 = 1e-10;

/// Midpoint grid `t_j = (j - 1/2) / m` together with the domain Ω.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridConfig {
    m: usize,
    #[serde(with = "extended_real")]
    omega_lo: f64,
    #[serde(with = "extended_real")]
    omega_hi: f64,
    #[serde(skip)]
    knots: Arc<[f64]>,
}

impl PartialEq for GridConfig {
    fn eq(&self, other: &Self) -> bool {
        self.m == other.m
            && self.omega_lo.to_bits() == other.omega_lo.to_bits()
            && self.omega_hi.to_bits() == other.omega_hi.to_bits()
    }
}

impl GridConfig {
    pub fn new(m: usize, omega_lo: f64, omega_hi: f64) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidGrid(format!("need m >= 2, got {m}")));
        }
        if omega_lo.is_nan() || omega_hi.is_nan() || !(omega_lo < omega_hi) {
            return Err(Error::InvalidGrid(format!(
                "need omega_lo < omega_hi, got [{omega_lo}, {omega_hi}]"
            )));
        }
        let knots = (1..=m)
            .map(|j| (2 * j - 1) as f64 / (2 * m) as f64)
            .collect();
        Ok(GridConfig {
            m,
            omega_lo,
            omega_hi,
            knots,
        })
    }

    /// Grid on Ω = ℝ.
    pub fn real_line(m: usize) -> Result<Self> {
        Self::new(m, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn omega(&self) -> (f64, f64) {
        (self.omega_lo, self.omega_hi)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Rebuilds the knot cache after deserialization.
    pub fn validated(self) -> Result<Self> {
        Self::new(self.m, self.omega_lo, self.omega_hi)
    }

    pub(crate) fn check_same(&self, other: &GridConfig) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "m={} Ω=[{}, {}] vs m={} Ω=[{}, {}]",
                self.m, self.omega_lo, self.omega_hi, other.m, other.omega_lo, other.omega_hi
            )))
        }
    }

    fn in_omega(&self, x: f64) -> bool {
        x >= self.omega_lo && x <= self.omega_hi
    }
}

/// Serde adapter writing infinite bounds as the strings `"-inf"` / `"inf"`.
pub mod extended_real {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else if *x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Str(s) => match s.trim() {
                "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
                "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
                other => other.parse().map_err(de::Error::custom),
            },
        }
    }
}

/// A probability measure given by its quantile function at the grid knots.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantileGrid {
    grid: GridConfig,
    q: Vec<f64>,
}

impl QuantileGrid {
    /// Validates and repairs a quantile vector.
    ///
    /// Decreases up to `1e-10 * (1 + |q_j|)` are removed by a running max;
    /// anything larger is rejected. Values within the same slack of a finite
    /// Ω bound are clamped onto it.
    pub fn new(grid: GridConfig, mut q: Vec<f64>) -> Result<Self> {
        if q.len() != grid.m {
            return Err(Error::GridMismatch(format!(
                "expected {} quantile values, got {}",
                grid.m,
                q.len()
            )));
        }
        if let Some(i) = q.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        for j in 1..q.len() {
            let prev = q[j - 1];
            if q[j] < prev {
                if q[j] < prev - MONOTONE_TOL * (1.0 + prev.abs()) {
                    return Err(Error::NotMonotone {
                        index: j,
                        prev,
                        next: q[j],
                    });
                }
                q[j] = prev;
            }
        }
        let (lo, hi) = grid.omega();
        for (index, x) in q.iter_mut().enumerate() {
            if *x < lo {
                if *x < lo - MONOTONE_TOL * (1.0 + lo.abs()) {
                    return Err(Error::OutsideDomain {
                        index,
                        value: *x,
                        lo,
                        hi,
                    });
                }
                *x = lo;
            } else if *x > hi {
                if *x > hi + MONOTONE_TOL * (1.0 + hi.abs()) {
                    return Err(Error::OutsideDomain {
                        index,
                        value: *x,
                        lo,
                        hi,
                    });
                }
                *x = hi;
            }
        }
        Ok(QuantileGrid { grid, q })
    }

    /// Samples an inverse cdf at the knots.
    pub fn from_inverse_cdf(grid: GridConfig, inv: impl Fn(f64) -> f64) -> Result<Self> {
        let q = grid.knots().iter().map(|&t| inv(t)).collect();
        Self::new(grid, q)
    }

    /// Dirac mass at `x`.
    pub fn point_mass(grid: GridConfig, x: f64) -> Result<Self> {
        let q = vec![x; grid.m()];
        Self::new(grid, q)
    }

    /// The standard Gaussian N(0, 1).
    pub fn standard_normal(grid: GridConfig) -> Result<Self> {
        let n = Normal::standard();
        Self::from_inverse_cdf(grid, |t| n.inverse_cdf(t))
    }

    /// Standard Gaussian conditioned on `[-c, c]`.
    pub fn truncated_normal(grid: GridConfig, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "truncation {c} must be positive"
            )));
        }
        let n = Normal::standard();
        let lo = n.cdf(-c);
        let width = n.cdf(c) - lo;
        Self::from_inverse_cdf(grid, |t| n.inverse_cdf(lo + t * width).clamp(-c, c))
    }

    /// Uniform on `[lo, hi]`.
    pub fn uniform(grid: GridConfig, lo: f64, hi: f64) -> Result<Self> {
        Self::from_inverse_cdf(grid, |t| lo + t * (hi - lo))
    }

    pub fn grid(&self) -> &GridConfig {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.q
    }

    pub fn into_values(self) -> Vec<f64> {
        self.q
    }

    pub fn m(&self) -> usize {
        self.q.len()
    }

    /// Grid average of the quantile function, i.e. the mean of the measure.
    pub fn mean(&self) -> f64 {
        self.q.iter().sum::<f64>() / self.q.len() as f64
    }

    /// Right-continuous cdf implied by piecewise-linear interpolation of the
    /// quantile nodes, extended half a cell beyond the first and last knot
    /// (clipped to Ω).
    pub fn implied_cdf(&self) -> ImpliedCdf {
        let m = self.q.len();
        let (lo, hi) = self.grid.omega();
        let q = &self.q;
        let first = (q[0] - 0.5 * (q[1] - q[0])).max(lo);
        let last = (q[m - 1] + 0.5 * (q[m - 1] - q[m - 2])).min(hi);
        let mut xs = Vec::with_capacity(m + 2);
        let mut ts = Vec::with_capacity(m + 2);
        xs.push(first);
        ts.push(0.0);
        xs.extend_from_slice(q);
        ts.extend_from_slice(self.grid.knots());
        xs.push(last);
        ts.push(1.0);
        ImpliedCdf { xs, ts }
    }

    /// Support hull `[first node, last node]` of the implied cdf.
    pub fn support(&self) -> (f64, f64) {
        let c = self.implied_cdf();
        (c.xs[0], c.xs[c.xs.len() - 1])
    }

    /// Cell-averaged density of the implied cdf on `cells` equal cells of
    /// `[lo, hi]`, reported at the cell centres.
    pub fn density_on(&self, lo: f64, hi: f64, cells: usize) -> DensityCurve {
        let cdf = self.implied_cdf();
        let h = (hi - lo) / cells as f64;
        let edges: Vec<f64> = (0..=cells).map(|c| lo + c as f64 * h).collect();
        let x = (0..cells).map(|c| lo + (c as f64 + 0.5) * h).collect();
        let f = edges
            .windows(2)
            .map(|e| (cdf.eval(e[1]) - cdf.eval(e[0])) / h)
            .collect();
        DensityCurve { x, f }
    }
}

/// Piecewise-linear cdf through `(xs[i], ts[i])`.
#[derive(Clone, Debug)]
pub struct ImpliedCdf {
    xs: Vec<f64>,
    ts: Vec<f64>,
}

impl ImpliedCdf {
    pub fn eval(&self, x: f64) -> f64 {
        // last node with xs[i] <= x
        let i = self.xs.partition_point(|&xi| xi <= x);
        if i == 0 {
            return 0.0;
        }
        let i = i - 1;
        if i + 1 == self.xs.len() {
            return 1.0;
        }
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let (t0, t1) = (self.ts[i], self.ts[i + 1]);
        t0 + (t1 - t0) * (x - x0) / (x1 - x0)
    }
}

/// Density values on a uniform x-grid.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityCurve {
    pub x: Vec<f64>,
    pub f: Vec<f64>,
}

/// Raw observations of a single measure.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalSample {
    values: Vec<f64>,
}

impl EmpiricalSample {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("sample"));
        }
        if let Some(i) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(EmpiricalSample { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Histogram with contiguous bins and unit total mass.
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    edges: Vec<f64>,
    masses: Vec<f64>,
}

impl Histogram {
    pub fn new(edges: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if masses.is_empty() || edges.len() != masses.len() + 1 {
            return Err(Error::InvalidHistogram(format!(
                "{} edges for {} bins",
                edges.len(),
                masses.len()
            )));
        }
        if edges.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidHistogram("non-finite bin edge".into()));
        }
        if let Some(i) = edges.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidHistogram(format!(
                "bin edges must strictly increase (bin {i}: [{}, {}])",
                edges[i],
                edges[i + 1]
            )));
        }
        if masses.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidHistogram(
                "masses must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = masses.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidHistogram("zero total mass".into()));
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidHistogram(format!(
                "masses sum to {total}, not 1"
            )));
        }
        Ok(Histogram { edges, masses })
    }

    /// Builds a histogram from unnormalized nonnegative weights.
    pub fn normalized(edges: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidHistogram("zero total mass".into()));
        }
        let masses = weights.iter().map(|w| w / total).collect();
        Self::new(edges, masses)
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// Bin heights `mass / width`.
    pub fn densities(&self) -> Vec<f64> {
        self.masses
            .iter()
            .zip(self.edges.windows(2))
            .map(|(p, e)| p / (e[1] - e[0]))
            .collect()
    }
}

/// Empirical quantile `inf{x : F_n(x) >= t_j}` at every knot.
pub fn quantile_from_samples(sample: &EmpiricalSample, grid: &GridConfig) -> Result<QuantileGrid> {
    let (lo, hi) = grid.omega();
    if let Some((index, &value)) = sample
        .values
        .iter()
        .enumerate()
        .find(|(_, x)| !grid.in_omega(**x))
    {
        return Err(Error::OutsideDomain {
            index,
            value,
            lo,
            hi,
        });
    }
    let mut sorted = sample.values.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let m = grid.m();
    // k = ceil(n * (2j - 1) / (2m)) in exact integer arithmetic
    let q = (1..=m)
        .map(|j| {
            let num = n as u128 * (2 * j - 1) as u128;
            let den = 2 * m as u128;
            let k = num.div_ceil(den) as usize;
            sorted[k.clamp(1, n) - 1]
        })
        .collect();
    QuantileGrid::new(grid.clone(), q)
}

/// Generalized inverse of the cdf that spreads each bin's mass uniformly.
pub fn quantile_from_histogram(h: &Histogram, grid: &GridConfig) -> Result<QuantileGrid> {
    let (lo, hi) = grid.omega();
    for (index, &e) in h.edges.iter().enumerate() {
        if !grid.in_omega(e) {
            return Err(Error::OutsideDomain {
                index,
                value: e,
                lo,
                hi,
            });
        }
    }
    let mut cum = Vec::with_capacity(h.masses.len());
    let mut acc = 0.0;
    for &p in &h.masses {
        cum.push(acc);
        acc += p;
    }
    let last_positive = h
        .masses
        .iter()
        .rposition(|&p| p > 0.0)
        .ok_or_else(|| Error::InvalidHistogram("zero total mass".into()))?;
    let mut bin = 0;
    let q = grid
        .knots()
        .iter()
        .map(|&t| {
            while bin < last_positive && (h.masses[bin] <= 0.0 || cum[bin] + h.masses[bin] < t) {
                bin += 1;
            }
            let (l, r) = (h.edges[bin], h.edges[bin + 1]);
            let frac = ((t - cum[bin]) / h.masses[bin]).clamp(0.0, 1.0);
            l + frac * (r - l)
        })
        .collect();
    QuantileGrid::new(grid.clone(), q)
}

/// Quantile of the location-scale image `x -> a x + b`.
pub fn quantile_from_location_scale(base: &QuantileGrid, a: f64, b: f64) -> Result<QuantileGrid> {
    if !(a > 0.0) || !b.is_finite() || !a.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "location-scale needs a > 0 and finite b, got a={a}, b={b}"
        )));
    }
    let q = base.q.iter().map(|x| a * x + b).collect();
    QuantileGrid::new(base.grid.clone(), q)
}

/// Quadratic Wasserstein distance, midpoint rule on the common grid.
pub fn wasserstein_distance(x: &QuantileGrid, y: &QuantileGrid) -> Result<f64> {
    x.grid.check_same(&y.grid)?;
    let ss: f64 = x.q.iter().zip(&y.q).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((ss / x.q.len() as f64).sqrt())
}
