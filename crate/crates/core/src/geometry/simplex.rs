//! Euclidean projection onto the probability simplex.

use ndarray::Array1;

/// Sort-and-threshold projection of `v` onto `{x ≥ 0, Σx = 1}`.
///
/// Ties in the sort are broken by index so the result does not depend on the
/// sort implementation.
pub fn project_simplex(v: &Array1<f64>) -> Array1<f64> {
    let n = v.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| v[j].total_cmp(&v[i]).then(i.cmp(&j)));

    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &i) in order.iter().enumerate() {
        cumsum += v[i];
        let t = (cumsum - 1.0) / (k + 1) as f64;
        if v[i] - t > 0.0 {
            theta = t;
        }
    }
    let mut out = v.mapv(|x| (x - theta).max(0.0));
    // renormalize away the rounding left by the cumulative sum
    let s = out.sum();
    if s > 0.0 {
        out /= s;
    }
    out
}
