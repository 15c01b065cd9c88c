use super::qp::Polyhedron;
use crate::linalg;

/// Closed convex subset of the Hilbert space, given by oracles.
pub trait ConvexSet: Sync {
    fn contains(&self, x: &[f64]) -> bool;

    /// Exact metric projection.
    fn project(&self, x: &[f64]) -> Vec<f64>;

    /// `{t : x0 + t u ∈ X}` in closed form, if the set supports it.
    fn line_interval(&self, _x0: &[f64], _u: &[f64]) -> Option<Interval> {
        None
    }

    /// The set as finitely many linear inequalities, if it is polyhedral.
    fn polyhedron(&self) -> Option<Polyhedron> {
        None
    }
}

/// Closed interval of the extended real line; empty when `lo > hi`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn everything() -> Self {
        Interval {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }

    pub fn empty() -> Self {
        Interval {
            lo: f64::INFINITY,
            hi: f64::NEG_INFINITY,
        }
    }

    /// `{t : slope * t >= rhs}`.
    pub fn linear_ge(slope: f64, rhs: f64) -> Self {
        if slope > 0.0 {
            Interval::new(rhs / slope, f64::INFINITY)
        } else if slope < 0.0 {
            Interval::new(f64::NEG_INFINITY, rhs / slope)
        } else if rhs <= 0.0 {
            Interval::everything()
        } else {
            Interval::empty()
        }
    }

    pub fn intersect(self, other: Interval) -> Interval {
        Interval::new(self.lo.max(other.lo), self.hi.min(other.hi))
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.lo && t <= self.hi
    }

    pub fn clamp(&self, t: f64) -> f64 {
        t.max(self.lo).min(self.hi)
    }
}

/// The whole space.
#[derive(Clone, Copy, Debug, Default)]
pub struct WholeSpace;

impl ConvexSet for WholeSpace {
    fn contains(&self, _x: &[f64]) -> bool {
        true
    }

    fn project(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }

    fn line_interval(&self, _x0: &[f64], _u: &[f64]) -> Option<Interval> {
        Some(Interval::everything())
    }

    fn polyhedron(&self) -> Option<Polyhedron> {
        Some(Polyhedron::new())
    }
}

/// `{x : <a, x> >= c}`.
#[derive(Clone, Debug, PartialEq)]
pub struct HalfSpace {
    normal: Vec<f64>,
    offset: f64,
}

impl HalfSpace {
    pub fn new(normal: Vec<f64>, offset: f64) -> Self {
        assert!(
            linalg::norm_sq(&normal) > 0.0,
            "half-space normal must be nonzero"
        );
        HalfSpace { normal, offset }
    }

    /// `{x : x[index] >= bound}` in `dim` dimensions.
    pub fn coordinate_ge(dim: usize, index: usize, bound: f64) -> Self {
        let mut normal = vec![0.0; dim];
        normal[index] = 1.0;
        HalfSpace::new(normal, bound / dim as f64)
    }

    fn slack(&self, x: &[f64]) -> f64 {
        linalg::inner(&self.normal, x) - self.offset
    }
}

impl ConvexSet for HalfSpace {
    fn contains(&self, x: &[f64]) -> bool {
        self.slack(x) >= -1e-12 * (1.0 + self.offset.abs())
    }

    fn project(&self, x: &[f64]) -> Vec<f64> {
        let s = self.slack(x);
        let mut y = x.to_vec();
        if s < 0.0 {
            linalg::axpy(-s / linalg::norm_sq(&self.normal), &self.normal, &mut y);
        }
        y
    }

    fn line_interval(&self, x0: &[f64], u: &[f64]) -> Option<Interval> {
        Some(Interval::linear_ge(
            linalg::inner(&self.normal, u),
            -self.slack(x0),
        ))
    }

    fn polyhedron(&self) -> Option<Polyhedron> {
        let m = self.normal.len() as f64;
        let row: Vec<(usize, f64)> = self.normal.iter().map(|a| a / m).enumerate().collect();
        let mut p = Polyhedron::new();
        p.push(&row, self.offset);
        Some(p)
    }
}

/// Closed ball `{x : ‖x − center‖ <= radius}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ball {
    center: Vec<f64>,
    radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Self {
        Ball { center, radius }
    }
}

impl ConvexSet for Ball {
    fn contains(&self, x: &[f64]) -> bool {
        linalg::dist_sq(x, &self.center).sqrt() <= self.radius * (1.0 + 1e-12)
    }

    fn project(&self, x: &[f64]) -> Vec<f64> {
        let d = linalg::dist_sq(x, &self.center).sqrt();
        if d <= self.radius {
            return x.to_vec();
        }
        let s = self.radius / d;
        self.center
            .iter()
            .zip(x)
            .map(|(c, v)| c + s * (v - c))
            .collect()
    }

    fn line_interval(&self, x0: &[f64], u: &[f64]) -> Option<Interval> {
        // ‖w + t u‖² <= r² with w = x0 − c
        let w = linalg::sub(x0, &self.center);
        let a = linalg::norm_sq(u);
        let b = linalg::inner(&w, u);
        let c = linalg::norm_sq(&w) - self.radius * self.radius;
        let disc = b * b - a * c;
        if a == 0.0 {
            return Some(if c <= 0.0 {
                Interval::everything()
            } else {
                Interval::empty()
            });
        }
        if disc < 0.0 {
            return Some(Interval::empty());
        }
        let s = disc.sqrt();
        Some(Interval::new((-b - s) / a, (-b + s) / a))
    }
}
