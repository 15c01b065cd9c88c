//! Geodesic PCA in Wasserstein space, run as convex-constrained PCA of the
//! log-mapped data, plus the density-space PCA it is compared against.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cpca::{self, ConvexSet, HilbertPoint, Interval, PrincipalComponents, SolverOptions};
use crate::geometry::{exp_map, frechet_mean, log_map, ReferenceFrame, TangentVector};
use crate::linalg;
use crate::measures::{wasserstein_distance, QuantileGrid};
use crate::{Error, Result};

mod consistency;

pub use consistency::{
    consistency_experiment, ConsistencyConfig, ConsistencyReport, ConsistencyRow, FixedSampler,
    LocationScaleSampler, MeasureSampler,
};

/// Number of x-cells used to turn quantile grids into density vectors.
pub const FPCA_CELLS: usize = 512;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Global principal geodesics.
    #[default]
    GpcaGlobal,
    /// Nested principal geodesics.
    GpcaNested,
    /// Linear PCA of densities.
    Fpca,
}

#[derive(Clone, Debug, Default)]
pub struct GpcaOptions {
    pub method: Method,
    pub solver: SolverOptions,
    /// Reference measure for the log map; the barycenter when `None`.
    pub reference: Option<QuantileGrid>,
}

/// Fitted principal geodesics.
#[derive(Clone, Debug)]
pub struct GeodesicComponents {
    pub frame: Arc<ReferenceFrame>,
    pub pcs: PrincipalComponents,
    pub barycenter: QuantileGrid,
    /// Set when the barycenter had flat stretches and the frame was nudged.
    pub frame_perturbed: bool,
}

/// A point on a mode of variation.
#[derive(Clone, Debug, PartialEq)]
pub struct ModePoint {
    pub measure: QuantileGrid,
    /// Parameter actually used after clamping to the feasible interval.
    pub t: f64,
    pub clamped: bool,
}

fn barycenter_frame(barycenter: &QuantileGrid) -> Result<(ReferenceFrame, bool)> {
    match ReferenceFrame::new(barycenter.clone()) {
        Ok(f) => Ok((f, false)),
        Err(Error::DegenerateFrame(j)) => {
            let q = barycenter.values();
            let (lo, hi) = (q[0], q[q.len() - 1]);
            let range = hi - lo;
            if !(range > 0.0) {
                return Err(Error::DegenerateFrame(j));
            }
            // blend with the uniform law on the barycenter's hull
            let eps = 1e-9;
            let knots = barycenter.grid().knots();
            let nudged = q
                .iter()
                .zip(knots)
                .map(|(x, t)| (1.0 - eps) * x + eps * (lo + range * t))
                .collect();
            log::warn!("barycenter is flat at knot {j}; perturbing the reference frame by 1e-9 of its range");
            let mu = QuantileGrid::new(barycenter.grid().clone(), nudged)?;
            Ok((ReferenceFrame::new(mu)?, true))
        }
        Err(e) => Err(e),
    }
}

/// Fits `k` principal geodesics of `data`.
pub fn gpca_fit(data: &[QuantileGrid], k: usize, opts: &GpcaOptions) -> Result<GeodesicComponents> {
    if data.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 measures, got {}",
            data.len()
        )));
    }
    let barycenter = frechet_mean(data)?;
    let (frame, frame_perturbed) = match &opts.reference {
        Some(mu) => {
            barycenter.grid().check_same(mu.grid())?;
            (ReferenceFrame::new(mu.clone())?, false)
        }
        None => barycenter_frame(&barycenter)?,
    };
    let frame = Arc::new(frame);
    let logs = log_data(&frame, data)?;
    let x0 = HilbertPoint::new(log_map(&frame, &barycenter)?.into_values());
    let set = frame.admissible_set();
    let pcs = match opts.method {
        Method::GpcaGlobal => cpca::solve_gpcc(&logs, &x0, k, &set, &opts.solver)?,
        Method::GpcaNested => cpca::solve_npcc(&logs, &x0, k, &set, &opts.solver)?,
        Method::Fpca => {
            return Err(Error::InvalidArgument(
                "use fpca_fit for density-space PCA".into(),
            ));
        }
    };
    Ok(GeodesicComponents {
        frame,
        pcs,
        barycenter,
        frame_perturbed,
    })
}

fn log_data(frame: &Arc<ReferenceFrame>, data: &[QuantileGrid]) -> Result<Vec<HilbertPoint>> {
    data.iter()
        .map(|nu| log_map(frame, nu).map(|v| HilbertPoint::new(v.into_values())))
        .collect()
}

impl GeodesicComponents {
    pub fn k(&self) -> usize {
        self.pcs.k()
    }

    /// Parameters `t` for which `x0 + t u_component` is admissible.
    pub fn feasible_interval(&self, component: usize) -> Result<Interval> {
        let u = self.direction(component)?;
        let set = self.frame.admissible_set();
        Ok(set
            .line_interval(&self.pcs.reference, u)
            .expect("admissible set has a closed-form line interval"))
    }

    fn direction(&self, component: usize) -> Result<&HilbertPoint> {
        self.pcs.directions.get(component).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "component {component} out of range (k = {})",
                self.k()
            ))
        })
    }

    /// Mean squared Wasserstein distance of `data` to the fitted geodesic
    /// set, computed in measure space.
    pub fn geodesic_cost(&self, data: &[QuantileGrid]) -> Result<f64> {
        let logs = log_data(&self.frame, data)?;
        let set = self.frame.admissible_set();
        let dirs: Vec<Vec<f64>> = self.pcs.directions.iter().map(|d| d.to_vec()).collect();
        let mut acc = 0.0;
        for (nu, v) in data.iter().zip(&logs) {
            let p = cpca::project_onto_span_cap_x(
                v,
                &self.pcs.reference,
                &dirs,
                &set,
                &SolverOptions::default(),
            )?;
            let tv = TangentVector::new(Arc::clone(&self.frame), p.point)?;
            let g = exp_map(&self.frame, &tv)?;
            let d = wasserstein_distance(nu, &g)?;
            acc += d * d;
        }
        Ok(acc / data.len() as f64)
    }
}

/// Measure at parameter `t` along component `component`; `t` is clamped to
/// the feasible interval.
pub fn mode_of_variation(gc: &GeodesicComponents, component: usize, t: f64) -> Result<ModePoint> {
    let iv = gc.feasible_interval(component)?;
    let u = gc.direction(component)?;
    let tc = iv.clamp(t);
    let mut v = gc.pcs.reference.to_vec();
    linalg::axpy(tc, u, &mut v);
    let tv = TangentVector::new(Arc::clone(&gc.frame), v)?;
    let measure = exp_map(&gc.frame, &tv)?;
    Ok(ModePoint {
        measure,
        t: tc,
        clamped: tc != t,
    })
}

/// `scores[i][j] = <log_μ(ν_i) − x0, u_j>`.
pub fn gpca_scores(gc: &GeodesicComponents, data: &[QuantileGrid]) -> Result<Vec<Vec<f64>>> {
    let logs = log_data(&gc.frame, data)?;
    Ok(logs
        .iter()
        .map(|v| {
            let c = linalg::sub(v, &gc.pcs.reference);
            gc.pcs
                .directions
                .iter()
                .map(|u| linalg::inner(&c, u))
                .collect()
        })
        .collect())
}

/// Input to [`fpca_fit`].
pub enum FpcaInput<'a> {
    /// Converted to cell-averaged densities on [`FPCA_CELLS`] cells.
    Quantiles(&'a [QuantileGrid]),
    /// Densities sampled at common, equally spaced abscissae `x`.
    Densities { x: Vec<f64>, values: Vec<Vec<f64>> },
}

/// Linear PCA of densities.
#[derive(Clone, Debug)]
pub struct FunctionalComponents {
    pub x: Vec<f64>,
    pub mean: Vec<f64>,
    pub densities: Vec<Vec<f64>>,
    pub pcs: PrincipalComponents,
}

impl FunctionalComponents {
    /// `mean + t σ_j w_j`, the linear mode of variation.
    pub fn linear_mode(&self, component: usize, t: f64) -> Result<Vec<f64>> {
        let w = self.pcs.directions.get(component).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "component {component} out of range (k = {})",
                self.pcs.k()
            ))
        })?;
        let sigma = self.pcs.eigenvalues[component].sqrt();
        let mut g = self.mean.clone();
        linalg::axpy(t * sigma, w, &mut g);
        Ok(g)
    }
}

/// Common x-grid covering every measure's support and the corresponding
/// density vectors.
pub fn density_grid(data: &[QuantileGrid], cells: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let first = data.first().ok_or(Error::Empty("data"))?;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for nu in data {
        first.grid().check_same(nu.grid())?;
        let (a, b) = nu.support();
        lo = lo.min(a);
        hi = hi.max(b);
    }
    if !(hi > lo) {
        return Err(Error::Degenerate(
            "all measures are the same point mass".into(),
        ));
    }
    let x = first.density_on(lo, hi, cells).x;
    let values = data
        .iter()
        .map(|nu| nu.density_on(lo, hi, cells).f)
        .collect();
    Ok((x, values))
}

pub fn fpca_fit(input: FpcaInput<'_>, k: usize) -> Result<FunctionalComponents> {
    let (x, densities) = match input {
        FpcaInput::Quantiles(q) => density_grid(q, FPCA_CELLS)?,
        FpcaInput::Densities { x, values } => {
            if let Some(bad) = values.iter().position(|v| v.len() != x.len()) {
                return Err(Error::GridMismatch(format!(
                    "density {bad} has {} values for {} abscissae",
                    values[bad].len(),
                    x.len()
                )));
            }
            (x, values)
        }
    };
    if densities.is_empty() {
        return Err(Error::Empty("data"));
    }
    let p = x.len();
    let mut mean = vec![0.0; p];
    for d in &densities {
        linalg::axpy(1.0 / densities.len() as f64, d, &mut mean);
    }
    let points: Vec<HilbertPoint> = densities.iter().cloned().map(HilbertPoint::new).collect();
    let pcs = cpca::standard_pca(&points, &HilbertPoint::new(mean.clone()), k)?;
    Ok(FunctionalComponents {
        x,
        mean,
        densities,
        pcs,
    })
}

/// Convenience: whether a quantile vector is a valid element of the grid's
/// Wasserstein space.
pub fn is_valid_quantile(q: &QuantileGrid) -> bool {
    let (lo, hi) = q.grid().omega();
    let v = q.values();
    v.windows(2).all(|w| w[1] >= w[0]) && v.iter().all(|&x| x >= lo && x <= hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{quantile_from_location_scale, GridConfig};

    fn location_scale(m: usize, params: &[(f64, f64)]) -> Vec<QuantileGrid> {
        let base = QuantileGrid::standard_normal(GridConfig::real_line(m).unwrap()).unwrap();
        params
            .iter()
            .map(|&(a, b)| quantile_from_location_scale(&base, a, b).unwrap())
            .collect()
    }

    #[test]
    fn two_measures_give_one_geodesic_through_both() {
        let data = location_scale(200, &[(0.5, -1.0), (1.5, 1.0)]);
        let gc = gpca_fit(&data, 2, &GpcaOptions::default()).unwrap();
        assert_eq!(gc.k(), 1);
        assert!(gc.pcs.residual_cost < 1e-20);
        assert!(gc.geodesic_cost(&data).unwrap() < 1e-20);
        let s = gpca_scores(&gc, &data).unwrap();
        assert!((s[0][0] + s[1][0]).abs() < 1e-12);
    }

    #[test]
    fn mode_at_zero_is_the_barycenter() {
        let data = location_scale(100, &[(0.4, -1.8), (0.8, -0.1), (1.2, 0.7), (1.6, 1.2)]);
        let gc = gpca_fit(&data, 1, &GpcaOptions::default()).unwrap();
        let p = mode_of_variation(&gc, 0, 0.0).unwrap();
        assert!(!p.clamped);
        assert!(wasserstein_distance(&p.measure, &gc.barycenter).unwrap() < 1e-12);
    }

    #[test]
    fn modes_are_clamped_to_valid_quantiles() {
        let data = location_scale(100, &[(0.4, -1.8), (0.8, -0.1), (1.2, 0.7), (1.6, 1.2)]);
        let gc = gpca_fit(&data, 1, &GpcaOptions::default()).unwrap();
        let iv = gc.feasible_interval(0).unwrap();
        assert!(iv.lo < 0.0 && iv.hi == f64::INFINITY || iv.hi > 0.0 && iv.lo == f64::NEG_INFINITY);
        for t in [-100.0, -2.0, 2.0, 100.0] {
            let p = mode_of_variation(&gc, 0, t).unwrap();
            assert!(is_valid_quantile(&p.measure));
        }
        assert!(
            mode_of_variation(&gc, 0, -1e6).unwrap().clamped
                || mode_of_variation(&gc, 0, 1e6).unwrap().clamped
        );
    }

    #[test]
    fn nested_matches_global_for_one_component() {
        let data = location_scale(100, &[(0.2, -3.0), (0.2, -1.0), (0.2, 1.0), (3.4, 3.0)]);
        let g = gpca_fit(&data, 1, &GpcaOptions::default()).unwrap();
        let opts = GpcaOptions {
            method: Method::GpcaNested,
            ..Default::default()
        };
        let n = gpca_fit(&data, 1, &opts).unwrap();
        assert!((g.pcs.residual_cost - n.pcs.residual_cost).abs() < 1e-9);
    }

    #[test]
    fn rejects_small_or_mismatched_input() {
        let data = location_scale(50, &[(1.0, 0.0)]);
        assert!(gpca_fit(&data, 1, &GpcaOptions::default()).is_err());
        let data = location_scale(50, &[(1.0, 0.0), (2.0, 0.0)]);
        let opts = GpcaOptions {
            method: Method::Fpca,
            ..Default::default()
        };
        assert!(gpca_fit(&data, 1, &opts).is_err());
    }

    #[test]
    fn flat_barycenter_gets_a_perturbed_frame() {
        let g = GridConfig::new(10, 0.0, 1.0).unwrap();
        let two_point = |lo: f64, hi: f64| {
            QuantileGrid::from_inverse_cdf(g.clone(), move |t| if t < 0.5 { lo } else { hi })
                .unwrap()
        };
        let data = [two_point(0.1, 0.5), two_point(0.3, 0.9)];
        let gc = gpca_fit(&data, 1, &GpcaOptions::default()).unwrap();
        assert!(gc.frame_perturbed);
        for t in [-1.0, 1.0] {
            assert!(is_valid_quantile(
                &mode_of_variation(&gc, 0, t).unwrap().measure
            ));
        }
        let a = QuantileGrid::point_mass(g.clone(), 0.2).unwrap();
        assert!(gpca_fit(&[a.clone(), a], 1, &GpcaOptions::default()).is_err());
    }

    #[test]
    fn fpca_mean_mode_is_the_mean_density() {
        let data = location_scale(200, &[(0.5, 0.0), (1.0, 0.0), (1.5, 0.0)]);
        let fc = fpca_fit(FpcaInput::Quantiles(&data), 2).unwrap();
        assert_eq!(fc.linear_mode(0, 0.0).unwrap(), fc.mean);
        assert_eq!(fc.x.len(), FPCA_CELLS);
        let x = vec![0.0, 1.0];
        let bad = FpcaInput::Densities {
            x,
            values: vec![vec![1.0, 1.0], vec![1.0]],
        };
        assert!(fpca_fit(bad, 1).is_err());
    }
}
