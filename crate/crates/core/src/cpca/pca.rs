use nalgebra::DMatrix;

use super::{HilbertPoint, PrincipalComponents, SolverNote};
use crate::exec::Execution;
use crate::linalg;
use crate::{Error, Result};

/// Eigenpairs of the empirical covariance about `x0`, restricted to the
/// numerically nonzero part of the spectrum.
pub(crate) struct CovarianceSpectrum {
    pub values: Vec<f64>,
    /// Unit vectors in the weighted inner product.
    pub vectors: Vec<Vec<f64>>,
    pub total_variance: f64,
    pub centred: Vec<Vec<f64>>,
}

pub(crate) fn covariance_spectrum(
    data: &[HilbertPoint],
    x0: &HilbertPoint,
    rank_tol: f64,
    exec: Execution,
) -> Result<CovarianceSpectrum> {
    let n = data.len();
    if n == 0 {
        return Err(Error::Empty("data"));
    }
    let m = x0.len();
    if let Some(bad) = data.iter().position(|x| x.len() != m) {
        return Err(Error::GridMismatch(format!(
            "datum {bad} has dimension {}, reference has {m}",
            data[bad].len()
        )));
    }
    let centred: Vec<Vec<f64>> = data.iter().map(|x| linalg::sub(x, x0)).collect();
    let total_variance = centred.iter().map(|c| linalg::norm_sq(c)).sum::<f64>() / n as f64;
    if !(total_variance > 0.0) {
        return Err(Error::Degenerate(
            "all data coincide with the reference point".into(),
        ));
    }

    let (values, vectors) = if n <= m {
        // Gram route: K = G / n with G_ij = <c_i, c_j>
        let rows = exec.map_range(n, |i| {
            (0..n)
                .map(|j| linalg::inner(&centred[i], &centred[j]) / n as f64)
                .collect::<Vec<f64>>()
        });
        let g = DMatrix::from_fn(n, n, |i, j| rows[i.min(j)][i.max(j)]);
        let (vals, gvecs) = linalg::symmetric_eigen_desc(g);
        let cutoff = rank_tol * vals[0].max(0.0);
        let mut values = Vec::new();
        let mut vectors = Vec::new();
        for (lambda, g) in vals.into_iter().zip(gvecs) {
            if !(lambda > cutoff) || lambda <= 0.0 {
                break;
            }
            let mut u = linalg::combine(&g, &centred, m);
            linalg::scale(&mut u, 1.0 / (n as f64 * lambda).sqrt());
            values.push(lambda);
            vectors.push(u);
        }
        (values, vectors)
    } else {
        // covariance route: C_ab = (1/(n m)) Σ_i c_ia c_ib
        let scale = 1.0 / (n as f64 * m as f64);
        let rows = exec.map_range(m, |a| {
            (0..m)
                .map(|b| centred.iter().map(|c| c[a] * c[b]).sum::<f64>() * scale)
                .collect::<Vec<f64>>()
        });
        let c = DMatrix::from_fn(m, m, |a, b| rows[a.min(b)][a.max(b)]);
        let (vals, evecs) = linalg::symmetric_eigen_desc(c);
        let cutoff = rank_tol * vals[0].max(0.0);
        let root_m = (m as f64).sqrt();
        let mut values = Vec::new();
        let mut vectors = Vec::new();
        for (lambda, mut e) in vals.into_iter().zip(evecs) {
            if !(lambda > cutoff) || lambda <= 0.0 {
                break;
            }
            linalg::scale(&mut e, root_m);
            values.push(lambda);
            vectors.push(e);
        }
        (values, vectors)
    };
    if values.is_empty() {
        return Err(Error::Degenerate("zero covariance".into()));
    }
    let vectors = vectors
        .into_iter()
        .map(|mut u| {
            linalg::canonical_sign(&mut u);
            u
        })
        .collect();
    Ok(CovarianceSpectrum {
        values,
        vectors,
        total_variance,
        centred,
    })
}

/// Unconstrained PCA about `x0`: top-`k` eigenvectors of
/// `K y = (1/n) Σ <x_i − x0, y> (x_i − x0)`.
///
/// When the centred data has rank below `k`, only `rank` directions are
/// returned and a [`SolverNote::RankDeficient`] is attached.
pub fn standard_pca(
    data: &[HilbertPoint],
    x0: &HilbertPoint,
    k: usize,
) -> Result<PrincipalComponents> {
    standard_pca_with(data, x0, k, 1e-12, Execution::default())
}

pub(crate) fn standard_pca_with(
    data: &[HilbertPoint],
    x0: &HilbertPoint,
    k: usize,
    rank_tol: f64,
    exec: Execution,
) -> Result<PrincipalComponents> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let spectrum = covariance_spectrum(data, x0, rank_tol, exec)?;
    Ok(from_spectrum(&spectrum, x0, k))
}

pub(crate) fn from_spectrum(
    spectrum: &CovarianceSpectrum,
    x0: &HilbertPoint,
    k: usize,
) -> PrincipalComponents {
    let kk = k.min(spectrum.values.len());
    let mut notes = Vec::new();
    if kk < k {
        log::warn!("requested {k} components but the centred data has rank {kk}");
        notes.push(SolverNote::RankDeficient {
            requested: k,
            returned: kk,
        });
    }
    let dirs = &spectrum.vectors[..kk];
    let scores: Vec<Vec<f64>> = spectrum
        .centred
        .iter()
        .map(|c| dirs.iter().map(|u| linalg::inner(c, u)).collect())
        .collect();
    let n = spectrum.centred.len() as f64;
    let cumulative_costs: Vec<f64> = (1..=kk)
        .map(|j| {
            spectrum
                .centred
                .iter()
                .zip(&scores)
                .map(|(c, s)| {
                    let p = linalg::combine(&s[..j], &dirs[..j], c.len());
                    linalg::dist_sq(c, &p)
                })
                .sum::<f64>()
                / n
        })
        .collect();
    let explained_ratios = spectrum.values[..kk]
        .iter()
        .map(|l| (l / spectrum.total_variance).clamp(0.0, 1.0))
        .collect();
    PrincipalComponents {
        reference: x0.clone(),
        directions: dirs.iter().cloned().map(HilbertPoint::new).collect(),
        scores,
        residual_cost: *cumulative_costs.last().expect("kk >= 1"),
        cumulative_costs,
        total_variance: spectrum.total_variance,
        explained_ratios,
        eigenvalues: spectrum.values.clone(),
        constrained: false,
        notes,
        trace: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_data() {
        let x0 = HilbertPoint::new(vec![1.0, 2.0, 3.0]);
        let data = vec![x0.clone(), x0.clone()];
        assert!(matches!(
            standard_pca(&data, &x0, 1),
            Err(Error::Degenerate(_))
        ));
        assert!(standard_pca(&[], &x0, 1).is_err());
        assert!(standard_pca(&data, &x0, 0).is_err());
    }

    #[test]
    fn rank_deficient_request() {
        let x0 = HilbertPoint::zeros(4);
        let data = vec![
            HilbertPoint::new(vec![1.0, 1.0, 0.0, 0.0]),
            HilbertPoint::new(vec![-1.0, -1.0, 0.0, 0.0]),
        ];
        let pcs = standard_pca(&data, &x0, 3).unwrap();
        assert_eq!(pcs.k(), 1);
        assert_eq!(
            pcs.notes,
            vec![SolverNote::RankDeficient {
                requested: 3,
                returned: 1
            }]
        );
        assert!((pcs.explained_ratios[0] - 1.0).abs() < 1e-12);
        assert!(pcs.residual_cost.abs() < 1e-12);
    }

    #[test]
    fn gram_and_covariance_routes_agree() {
        // 5 points in 3 dimensions uses the covariance route; pad to 8
        // dimensions with zeros for the Gram route and compare.
        let pts = [
            [1.0, 0.3, -0.2],
            [-0.5, 0.8, 0.1],
            [0.2, -1.1, 0.4],
            [0.9, 0.5, 0.7],
            [-1.3, 0.2, -0.6],
        ];
        let small: Vec<HilbertPoint> = pts.iter().map(|p| HilbertPoint::new(p.to_vec())).collect();
        let big: Vec<HilbertPoint> = pts
            .iter()
            .map(|p| {
                let mut v = p.to_vec();
                v.resize(8, 0.0);
                HilbertPoint::new(v)
            })
            .collect();
        let a = standard_pca(&small, &HilbertPoint::zeros(3), 2).unwrap();
        let b = standard_pca(&big, &HilbertPoint::zeros(8), 2).unwrap();
        // the inner product weights differ (1/3 vs 1/8); ratios do not
        for (x, y) in a.explained_ratios.iter().zip(&b.explained_ratios) {
            assert!((x - y).abs() < 1e-10);
        }
        for (u, v) in a.directions.iter().zip(&b.directions) {
            let su = 3f64.sqrt();
            let sv = 8f64.sqrt();
            for j in 0..3 {
                assert!((u[j] / su - v[j] / sv).abs() < 1e-9);
            }
        }
    }
}
