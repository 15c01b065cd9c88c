//! Tangent-space geometry of the Wasserstein space at a reference measure.
//!
//! With every measure stored as quantile values at common knots, the log map
//! at `μ` is `F_ν^-(t_j) - F_μ^-(t_j)` and the exp map adds it back. The image
//! of the log map is the closed convex set of vectors `v` with `μ + v`
//! nondecreasing and inside Ω; [`AdmissibleSet`] is that set.

use std::sync::Arc;

use crate::cpca::{ConvexSet, Interval, Polyhedron};
use crate::isotonic::pava_clamped;
use crate::measures::{GridConfig, QuantileGrid, MONOTONE_TOL};
use crate::{Error, Result};

/// Relative gap required between consecutive quantiles of a reference measure.
pub const STRICT_TOL: f64 = 1e-12;

/// An atomless reference measure `μ` (strictly increasing quantile grid).
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceFrame {
    mu: QuantileGrid,
}

impl ReferenceFrame {
    pub fn new(mu: QuantileGrid) -> Result<Self> {
        if let Some(j) = first_flat(mu.values()) {
            return Err(Error::DegenerateFrame(j));
        }
        Ok(ReferenceFrame { mu })
    }

    pub fn mu(&self) -> &QuantileGrid {
        &self.mu
    }

    pub fn grid(&self) -> &GridConfig {
        self.mu.grid()
    }

    /// The set of tangent vectors whose exp map is a valid quantile grid.
    pub fn admissible_set(&self) -> AdmissibleSet {
        let (lo, hi) = self.grid().omega();
        AdmissibleSet {
            offset: self.mu.values().to_vec(),
            lo,
            hi,
        }
    }
}

/// Index of the first knot where `q` fails the strictness threshold.
pub(crate) fn first_flat(q: &[f64]) -> Option<usize> {
    q.windows(2)
        .position(|w| !(w[1] - w[0] > STRICT_TOL * (1.0 + w[0].abs())))
        .map(|j| j + 1)
}

/// A tangent vector at a reference measure, sampled at the knots.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentVector {
    frame: Arc<ReferenceFrame>,
    v: Vec<f64>,
}

impl TangentVector {
    pub fn new(frame: Arc<ReferenceFrame>, v: Vec<f64>) -> Result<Self> {
        if v.len() != frame.grid().m() {
            return Err(Error::GridMismatch(format!(
                "tangent vector of length {} on a grid of {}",
                v.len(),
                frame.grid().m()
            )));
        }
        if let Some(i) = v.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(TangentVector { frame, v })
    }

    pub fn zero(frame: Arc<ReferenceFrame>) -> Self {
        let m = frame.grid().m();
        TangentVector {
            frame,
            v: vec![0.0; m],
        }
    }

    pub fn frame(&self) -> &Arc<ReferenceFrame> {
        &self.frame
    }

    pub fn values(&self) -> &[f64] {
        &self.v
    }

    pub fn into_values(self) -> Vec<f64> {
        self.v
    }

    /// `‖v‖_μ = sqrt(mean(v²))`.
    pub fn norm(&self) -> f64 {
        crate::linalg::norm(&self.v)
    }

    fn check_frame(&self, frame: &ReferenceFrame) -> Result<()> {
        if self.frame.as_ref() == frame {
            Ok(())
        } else {
            Err(Error::GridMismatch(
                "tangent vector belongs to another frame".into(),
            ))
        }
    }
}

pub fn log_map(frame: &Arc<ReferenceFrame>, nu: &QuantileGrid) -> Result<TangentVector> {
    frame.grid().check_same(nu.grid())?;
    let v = nu
        .values()
        .iter()
        .zip(frame.mu.values())
        .map(|(a, b)| a - b)
        .collect();
    Ok(TangentVector {
        frame: Arc::clone(frame),
        v,
    })
}

pub fn exp_map(frame: &ReferenceFrame, v: &TangentVector) -> Result<QuantileGrid> {
    v.check_frame(frame)?;
    if !is_in_v(frame, v) {
        return Err(Error::NotAdmissible);
    }
    let q = frame
        .mu
        .values()
        .iter()
        .zip(&v.v)
        .map(|(a, b)| a + b)
        .collect();
    QuantileGrid::new(frame.grid().clone(), q)
}

/// Whether `μ + v` is nondecreasing (within tolerance) and inside Ω.
pub fn is_in_v(frame: &ReferenceFrame, v: &TangentVector) -> bool {
    v.frame.as_ref() == frame && frame.admissible_set().contains(&v.v)
}

/// Metric projection onto the admissible set (isotonic fit, then clamp).
pub fn project_onto_v(frame: &Arc<ReferenceFrame>, w: &TangentVector) -> Result<TangentVector> {
    w.check_frame(frame)?;
    let v = frame.admissible_set().project(&w.v);
    Ok(TangentVector {
        frame: Arc::clone(frame),
        v,
    })
}

/// Point at parameter `t` on the geodesic from `nu0` to `nu1`.
pub fn geodesic_point(nu0: &QuantileGrid, nu1: &QuantileGrid, t: f64) -> Result<QuantileGrid> {
    nu0.grid().check_same(nu1.grid())?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidArgument(format!(
            "geodesic parameter {t} outside [0, 1]"
        )));
    }
    let q = nu0
        .values()
        .iter()
        .zip(nu1.values())
        .map(|(a, b)| (1.0 - t) * a + t * b)
        .collect();
    QuantileGrid::new(nu0.grid().clone(), q)
}

/// Empirical Fréchet mean: the knot-wise average of the quantile grids.
pub fn frechet_mean(data: &[QuantileGrid]) -> Result<QuantileGrid> {
    let first = data.first().ok_or(Error::Empty("data"))?;
    let mut acc = vec![0.0; first.m()];
    for nu in data {
        first.grid().check_same(nu.grid())?;
        for (a, x) in acc.iter_mut().zip(nu.values()) {
            *a += x;
        }
    }
    let n = data.len() as f64;
    for a in &mut acc {
        *a /= n;
    }
    QuantileGrid::new(first.grid().clone(), acc)
}

/// `(1/n) Σ d_W²(ν_i, ν)`.
pub fn frechet_functional(data: &[QuantileGrid], nu: &QuantileGrid) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Empty("data"));
    }
    let mut acc = 0.0;
    for x in data {
        let d = crate::measures::wasserstein_distance(x, nu)?;
        acc += d * d;
    }
    Ok(acc / data.len() as f64)
}

/// `{v : offset + v nondecreasing, lo <= offset + v <= hi}` in tangent
/// coordinates; `offset` is the reference quantile vector.
#[derive(Clone, Debug, PartialEq)]
pub struct AdmissibleSet {
    offset: Vec<f64>,
    lo: f64,
    hi: f64,
}

impl AdmissibleSet {
    fn shifted(&self, x: &[f64]) -> Vec<f64> {
        self.offset.iter().zip(x).map(|(a, b)| a + b).collect()
    }
}

impl ConvexSet for AdmissibleSet {
    fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.offset.len() {
            return false;
        }
        let y = self.shifted(x);
        let monotone = y
            .windows(2)
            .all(|w| w[1] >= w[0] - MONOTONE_TOL * (1.0 + w[0].abs()));
        let hi_ok = !self.hi.is_finite()
            || y.iter()
                .all(|&v| v <= self.hi + MONOTONE_TOL * (1.0 + self.hi.abs()));
        let lo_ok = !self.lo.is_finite()
            || y.iter()
                .all(|&v| v >= self.lo - MONOTONE_TOL * (1.0 + self.lo.abs()));
        monotone && lo_ok && hi_ok
    }

    fn project(&self, x: &[f64]) -> Vec<f64> {
        let z = pava_clamped(&self.shifted(x), self.lo, self.hi);
        z.iter().zip(&self.offset).map(|(a, b)| a - b).collect()
    }

    fn line_interval(&self, x0: &[f64], u: &[f64]) -> Option<Interval> {
        let y0 = self.shifted(x0);
        let mut iv = Interval::everything();
        for j in 1..y0.len() {
            let mut d = y0[j] - y0[j - 1];
            let e = u[j] - u[j - 1];
            if d < 0.0 && d >= -MONOTONE_TOL * (1.0 + y0[j - 1].abs()) {
                d = 0.0;
            }
            iv = iv.intersect(Interval::linear_ge(e, -d));
        }
        for (y, du) in y0.iter().zip(u) {
            if self.lo.is_finite() {
                iv = iv.intersect(Interval::linear_ge(*du, self.lo - y));
            }
            if self.hi.is_finite() {
                iv = iv.intersect(Interval::linear_ge(-*du, y - self.hi));
            }
        }
        Some(iv)
    }

    fn polyhedron(&self) -> Option<Polyhedron> {
        // monotone steps, then the box on the end points
        let mu = &self.offset;
        let m = mu.len();
        let mut p = Polyhedron::new();
        for j in 1..m {
            p.push(&[(j - 1, -1.0), (j, 1.0)], mu[j - 1] - mu[j]);
        }
        if self.lo.is_finite() {
            p.push(&[(0, 1.0)], self.lo - mu[0]);
        }
        if self.hi.is_finite() {
            p.push(&[(m - 1, -1.0)], mu[m - 1] - self.hi);
        }
        Some(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{quantile_from_location_scale, wasserstein_distance};

    fn normal_frame(m: usize) -> Arc<ReferenceFrame> {
        let g = GridConfig::real_line(m).unwrap();
        Arc::new(ReferenceFrame::new(QuantileGrid::standard_normal(g).unwrap()).unwrap())
    }

    #[test]
    fn frame_rejects_flat_reference() {
        let g = GridConfig::real_line(3).unwrap();
        let flat = QuantileGrid::new(g, vec![0.0, 0.0, 1.0]).unwrap();
        assert!(matches!(
            ReferenceFrame::new(flat),
            Err(Error::DegenerateFrame(1))
        ));
    }

    #[test]
    fn log_of_location_scale_is_affine() {
        let frame = normal_frame(101);
        let nu = quantile_from_location_scale(frame.mu(), 0.4, -1.8).unwrap();
        let v = log_map(&frame, &nu).unwrap();
        for (vj, x) in v.values().iter().zip(frame.mu().values()) {
            assert!((vj - ((0.4 - 1.0) * x - 1.8)).abs() < 1e-12);
        }
        let back = exp_map(&frame, &v).unwrap();
        assert!(back
            .values()
            .iter()
            .zip(nu.values())
            .all(|(a, b)| (a - b).abs() < 1e-14));
        let zero = log_map(&frame, frame.mu()).unwrap();
        assert!(zero.values().iter().all(|&x| x == 0.0));
        assert_eq!(
            &exp_map(&frame, &TangentVector::zero(frame.clone())).unwrap(),
            frame.mu()
        );
    }

    #[test]
    fn membership() {
        let frame = normal_frame(21);
        assert!(is_in_v(&frame, &TangentVector::zero(frame.clone())));
        let v: Vec<f64> = frame.mu().values().iter().map(|x| -2.0 * x).collect();
        let v = TangentVector::new(frame.clone(), v).unwrap();
        assert!(!is_in_v(&frame, &v));
        assert!(matches!(exp_map(&frame, &v), Err(Error::NotAdmissible)));
        let p = project_onto_v(&frame, &v).unwrap();
        assert!(is_in_v(&frame, &p));
    }

    #[test]
    fn projection_three_point_example() {
        let g = GridConfig::real_line(3).unwrap();
        let mu = QuantileGrid::new(g, vec![0.0, 1.0, 2.0]).unwrap();
        let frame = Arc::new(ReferenceFrame::new(mu).unwrap());
        let w = TangentVector::new(frame.clone(), vec![1.0, -1.0, 1.0]).unwrap();
        let p = project_onto_v(&frame, &w).unwrap();
        assert_eq!(p.values(), &[0.5, -0.5, 1.0]);
    }

    #[test]
    fn geodesic_endpoints_and_location_scale_family() {
        let frame = normal_frame(64);
        let nu1 = quantile_from_location_scale(frame.mu(), 0.5, 2.0).unwrap();
        assert_eq!(&geodesic_point(frame.mu(), &nu1, 0.0).unwrap(), frame.mu());
        assert_eq!(geodesic_point(frame.mu(), &nu1, 1.0).unwrap(), nu1);
        for t in [0.2, 0.4, 0.6, 0.8] {
            let g = geodesic_point(frame.mu(), &nu1, t).unwrap();
            let expect =
                quantile_from_location_scale(frame.mu(), 1.0 - t + t * 0.5, t * 2.0).unwrap();
            assert!(wasserstein_distance(&g, &expect).unwrap() < 1e-12);
        }
        assert!(geodesic_point(frame.mu(), &nu1, 1.5).is_err());
    }

    #[test]
    fn frechet_functional_point_masses() {
        let g = GridConfig::real_line(5).unwrap();
        let data = [
            QuantileGrid::point_mass(g.clone(), 0.0).unwrap(),
            QuantileGrid::point_mass(g.clone(), 2.0).unwrap(),
        ];
        let one = QuantileGrid::point_mass(g, 1.0).unwrap();
        assert!((frechet_functional(&data, &one).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(frechet_mean(&data).unwrap(), one);
        assert_eq!(frechet_functional(&data[..1], &data[0]).unwrap(), 0.0);
        assert!(frechet_mean(&[]).is_err());
    }

    #[test]
    fn line_interval_for_affine_directions() {
        // u = identity: 1 + t >= 0
        let frame = normal_frame(50);
        let set = frame.admissible_set();
        let x0 = vec![0.0; 50];
        let iv = set.line_interval(&x0, frame.mu().values()).unwrap();
        assert!((iv.lo + 1.0).abs() < 1e-12 && iv.hi == f64::INFINITY);
        let ones = vec![1.0; 50];
        let iv = set.line_interval(&x0, &ones).unwrap();
        assert_eq!((iv.lo, iv.hi), (f64::NEG_INFINITY, f64::INFINITY));
    }
}
