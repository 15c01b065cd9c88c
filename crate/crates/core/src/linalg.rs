//! Small dense helpers for the uniform-weight inner product
//! `<x, y> = (1/m) Σ x_j y_j`.

use nalgebra::{DMatrix, SymmetricEigen};

pub fn inner(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / x.len() as f64
}

pub fn norm_sq(x: &[f64]) -> f64 {
    inner(x, x)
}

pub fn norm(x: &[f64]) -> f64 {
    norm_sq(x).sqrt()
}

pub fn dist_sq(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / x.len() as f64
}

pub fn sub(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

pub fn add(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a + b).collect()
}

/// `y += a * x`
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn scale(x: &mut [f64], a: f64) {
    for v in x {
        *v *= a;
    }
}

/// `Σ_r coeffs[r] * vectors[r]`.
pub fn combine(coeffs: &[f64], vectors: &[Vec<f64>], dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    for (c, v) in coeffs.iter().zip(vectors) {
        axpy(*c, v, &mut out);
    }
    out
}

/// Modified Gram–Schmidt under `ip`; drops vectors whose residual norm falls
/// below `tol` times their original norm.
pub fn orthonormalize_with(
    vectors: &[Vec<f64>],
    ip: impl Fn(&[f64], &[f64]) -> f64,
    tol: f64,
) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let n0 = ip(v, v).sqrt();
        if n0 == 0.0 {
            continue;
        }
        let mut w = v.clone();
        for b in &basis {
            let c = ip(&w, b);
            axpy(-c, b, &mut w);
        }
        let n = ip(&w, &w).sqrt();
        if n > tol * n0 {
            scale(&mut w, 1.0 / n);
            basis.push(w);
        }
    }
    basis
}

pub fn euclid_dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues in decreasing
/// order; `vectors[r]` is the unit (Euclidean) eigenvector of `values[r]`.
pub fn symmetric_eigen_desc(a: DMatrix<f64>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.nrows();
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = order
        .iter()
        .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
        .collect();
    (values, vectors)
}

/// Flips `u` so that its first coordinate of (numerically) largest
/// magnitude is positive.
pub fn canonical_sign(u: &mut [f64]) {
    let max = u.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    if max == 0.0 {
        return;
    }
    let idx = u
        .iter()
        .position(|x| x.abs() >= max * (1.0 - 1e-9))
        .unwrap_or(0);
    if u[idx] < 0.0 {
        scale(u, -1.0);
    }
}
