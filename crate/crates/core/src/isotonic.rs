//! Uniform-weight isotonic regression.

/// Nondecreasing least-squares fit to `y` (pool adjacent violators).
pub fn pava(y: &[f64]) -> Vec<f64> {
    // blocks of (sum, count)
    let mut sums: Vec<f64> = Vec::with_capacity(y.len());
    let mut counts: Vec<usize> = Vec::with_capacity(y.len());
    for &v in y {
        sums.push(v);
        counts.push(1);
        while sums.len() > 1 {
            let k = sums.len() - 1;
            if sums[k - 1] * counts[k] as f64 > sums[k] * counts[k - 1] as f64 {
                sums[k - 1] += sums[k];
                counts[k - 1] += counts[k];
                sums.pop();
                counts.pop();
            } else {
                break;
            }
        }
    }
    let mut out = Vec::with_capacity(y.len());
    for (s, c) in sums.iter().zip(&counts) {
        let mean = s / *c as f64;
        out.extend(std::iter::repeat_n(mean, *c));
    }
    out
}

/// Projection onto `{z nondecreasing, lo <= z <= hi}`.
///
/// Clamping the isotonic fit is exact for uniform weights and box bounds.
pub fn pava_clamped(y: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let mut z = pava(y);
    for v in &mut z {
        *v = v.clamp(lo, hi);
    }
    z
}
