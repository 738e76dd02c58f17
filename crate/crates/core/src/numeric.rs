//! Small scalar and vector helpers shared by the geometry code.

/// `‖x‖_p` for `p ≥ 1` (finite).
pub fn lp_norm<'a>(x: impl IntoIterator<Item = &'a f64>, p: f64) -> f64 {
    if p == 1.0 {
        return x.into_iter().map(|v| v.abs()).sum();
    }
    if p == 2.0 {
        return x.into_iter().map(|v| v * v).sum::<f64>().sqrt();
    }
    if p.is_infinite() {
        return x.into_iter().fold(0.0, |m, v| m.max(v.abs()));
    }
    // scale by the max entry so that large exponents do not overflow
    let vals: Vec<f64> = x.into_iter().map(|v| v.abs()).collect();
    let scale = vals.iter().copied().fold(0.0, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    scale * vals.iter().map(|v| (v / scale).powf(p)).sum::<f64>().powf(1.0 / p)
}

/// Hölder conjugate exponent.
pub fn conjugate_exponent(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

/// `sign(t)·|t|^e`
#[inline]
pub fn signed_pow(t: f64, e: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        t.signum() * t.abs().powf(e)
    }
}

/// Root of a continuous function with a sign change on `[lo, hi]`.
///
/// Brent's method: inverse quadratic interpolation with a bisection fallback,
/// so every step keeps a valid bracket. Stops when the bracket is narrower than
/// `xtol` (absolute plus relative) or after `max_iter` evaluations.
pub fn brent_root(
    mut f: impl FnMut(f64) -> f64,
    lo: f64,
    hi: f64,
    xtol: f64,
    max_iter: usize,
) -> Option<f64> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() || !fa.is_finite() || !fb.is_finite() {
        return None;
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Some(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
    }
    Some(b)
}
