#![allow(clippy::excessive_precision)]

//! Reference implementations shared by the integration and acceptance
//! tests. Nothing here calls into the library's numerical code.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// Φ⁻¹ by Wichura's AS241 (PPND16).
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0);
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q
            * (((((((2509.0809287301226727 * r + 33430.575583588128105) * r
                + 67265.770927008700853)
                * r
                + 45921.953931549871457)
                * r
                + 13731.693765509461125)
                * r
                + 1971.5909503065514427)
                * r
                + 133.14166789178437745)
                * r
                + 3.387132872796366608)
            / (((((((5226.495278852545925 * r + 28729.085735721942674) * r
                + 39307.89580009271061)
                * r
                + 21213.794301586595867)
                * r
                + 5394.1960214247511077)
                * r
                + 687.1870074920579083)
                * r
                + 42.313330701600911252)
                * r
                + 1.0);
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r
            + 0.24178072517745061177)
            * r
            + 1.27045825245236838258)
            * r
            + 3.64784832476320460504)
            * r
            + 5.7694972214606914055)
            * r
            + 4.6303378461565452959)
            * r
            + 1.42343711074968357734)
            / (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r
                + 0.0151986665636164571966)
                * r
                + 0.14810397642748007459)
                * r
                + 0.68976733498510000455)
                * r
                + 1.6763848301838038494)
                * r
                + 2.05319162663775882187)
                * r
                + 1.0)
    } else {
        r -= 5.0;
        (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
            + 0.0012426609473880784386)
            * r
            + 0.026532189526576123093)
            * r
            + 0.29656057182850489123)
            * r
            + 1.7848265399172913358)
            * r
            + 5.4637849111641143699)
            * r
            + 6.6579046435011037772)
            / (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r
                + 1.8463183175100546818e-5)
                * r
                + 7.868691311456132591e-4)
                * r
                + 0.0148753612908506148525)
                * r
                + 0.13692988092273580531)
                * r
                + 0.59983220655588793769)
                * r
                + 1.0)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

pub fn normal_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
}

pub fn knots(m: usize) -> Vec<f64> {
    (1..=m)
        .map(|j| (2 * j - 1) as f64 / (2 * m) as f64)
        .collect()
}

pub fn mean_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64
}

pub fn mean_dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / a.len() as f64
}

/// Gram-Schmidt under the mean inner product.
pub fn orthonormalize(vs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for v in vs {
        let mut w = v.clone();
        for u in &out {
            let c = mean_dot(&w, u);
            w.iter_mut().zip(u).for_each(|(a, b)| *a -= c * b);
        }
        let n = mean_sq(&w).sqrt();
        if n > 1e-10 {
            out.push(w.into_iter().map(|x| x / n).collect());
        }
    }
    out
}

/// `argmin ‖y − target‖²` subject to `g y ≥ h`, by enumerating candidate
/// active sets of at most `dim` rows and solving each equality-constrained
/// problem exactly. Returns `None` if the feasible set is empty.
pub fn qp_project(target: &[f64], g: &[Vec<f64>], h: &[f64]) -> Option<Vec<f64>> {
    let dim = target.len();
    let rows = g.len();
    assert!(rows <= 20);
    let t = DVector::from_column_slice(target);
    let feasible = |y: &DVector<f64>| (0..rows).all(|r| row_dot(&g[r], y) >= h[r] - 1e-11);
    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 0u32..(1 << rows) {
        let active: Vec<usize> = (0..rows).filter(|r| mask & (1 << r) != 0).collect();
        if active.len() > dim {
            continue;
        }
        let y = if active.is_empty() {
            t.clone()
        } else {
            let a = DMatrix::from_fn(active.len(), dim, |i, j| g[active[i]][j]);
            let b = DVector::from_iterator(active.len(), active.iter().map(|&r| h[r]));
            let gram = &a * a.transpose();
            let Some(chol) = gram.clone().cholesky() else {
                continue;
            };
            if gram.determinant().abs() < 1e-12 {
                continue;
            }
            let lambda = chol.solve(&(&a * &t - b));
            &t - a.transpose() * lambda
        };
        if !feasible(&y) {
            continue;
        }
        let f = (&y - &t).norm_squared();
        if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
            best = Some((f, y));
        }
    }
    best.map(|(_, y)| y.iter().copied().collect())
}

fn row_dot(row: &[f64], y: &DVector<f64>) -> f64 {
    row.iter().zip(y.iter()).map(|(a, b)| a * b).sum()
}

/// Rows `G z ≥ h` describing `{v : μ + v nondecreasing, inside [lo, hi]}`.
pub fn admissible_constraints(mu: &[f64], lo: f64, hi: f64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let m = mu.len();
    let mut g = Vec::new();
    let mut h = Vec::new();
    for j in 0..m - 1 {
        let mut row = vec![0.0; m];
        row[j] = -1.0;
        row[j + 1] = 1.0;
        g.push(row);
        h.push(mu[j] - mu[j + 1]);
    }
    if lo.is_finite() {
        let mut row = vec![0.0; m];
        row[0] = 1.0;
        g.push(row);
        h.push(lo - mu[0]);
    }
    if hi.is_finite() {
        let mut row = vec![0.0; m];
        row[m - 1] = -1.0;
        g.push(row);
        h.push(mu[m - 1] - hi);
    }
    (g, h)
}

/// Projection onto `(x0 + span U) ∩ {G z ≥ h}` with `U` orthonormal under the
/// mean inner product, solved in the coefficients of `U`.
pub fn span_cap_project(
    x: &[f64],
    x0: &[f64],
    u: &[Vec<f64>],
    g: &[Vec<f64>],
    h: &[f64],
) -> Option<Vec<f64>> {
    let r: Vec<f64> = x.iter().zip(x0).map(|(a, b)| a - b).collect();
    let target: Vec<f64> = u.iter().map(|ui| mean_dot(&r, ui)).collect();
    let gc: Vec<Vec<f64>> = g
        .iter()
        .map(|row| {
            u.iter()
                .map(|ui| row.iter().zip(ui).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect();
    let hc: Vec<f64> = g
        .iter()
        .zip(h)
        .map(|(row, hr)| hr - row.iter().zip(x0).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    let c = qp_project(&target, &gc, &hc)?;
    let mut z = x0.to_vec();
    for (ci, ui) in c.iter().zip(u) {
        z.iter_mut().zip(ui).for_each(|(a, b)| *a += ci * b);
    }
    Some(z)
}

/// Location-scale parameters `(a, b)` of the two worked examples.
pub const SPREAD_NORMALS: [(f64, f64); 4] = [(0.4, -1.8), (0.8, -0.1), (1.2, 0.7), (1.6, 1.2)];
pub const OUTLIER_NORMALS: [(f64, f64); 4] = [(0.2, -3.0), (0.2, -1.0), (0.2, 1.0), (3.4, 3.0)];
