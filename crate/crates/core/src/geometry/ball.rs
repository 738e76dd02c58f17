//! Bregman proximal steps over an `ℓ_p` ball for the power-norm DGF
//! `W(y) = coef·‖y‖_q²`.
//!
//! Every prox variant reduces to
//!
//! ```text
//!   minimize  C·‖y‖_q² + ⟨h, y⟩   subject to  ‖y + s‖_p ≤ r
//! ```
//!
//! where `y = z − s` are coordinates relative to the DGF center `s`. When the
//! unconstrained minimizer is infeasible the constraint is dualized as
//! `(β/p)·Σ|y_i + s_i|^p` and `β ≥ 0` is found by a bracketed scalar solve.
//! For a fixed `β` the stationarity condition decouples per coordinate,
//!
//! ```text
//!   α·φ_q(y_i) + β·φ_p(y_i + s_i) = −h_i,    α = 2C‖y‖_q^{2−q},
//! ```
//!
//! with `φ_e(t) = sign(t)|t|^{e−1}`, and the self-consistency of `α` is another
//! scalar root. Both outer solves are monotone with a unique root.

use crate::error::{Error, Result};
use crate::numeric::{brent_root, conjugate_exponent, lp_norm, signed_pow};

const MAX_ITER: usize = 200;
const EXPAND_STEPS: usize = 200;

pub struct BallProblem<'a> {
    /// DGF exponent, `1 < q ≤ 2`.
    pub q: f64,
    /// `C` in `C·‖y‖_q²`.
    pub weight: f64,
    pub h: &'a [f64],
    pub shift: &'a [f64],
    /// Ball exponent, `p ≥ 1`.
    pub p: f64,
    pub radius: f64,
}

impl BallProblem<'_> {
    pub fn solve(&self) -> Result<Vec<f64>> {
        let y = self.unconstrained();
        if self.excess(&y) <= 0.0 {
            return Ok(y);
        }
        if self.p == 2.0 && self.q == 2.0 {
            return Ok(self.pull_inside(y));
        }

        let mut lo = 0.0;
        let mut hi = self.weight.max(1.0) + self.h.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        let mut found = false;
        for _ in 0..EXPAND_STEPS {
            let yb = self.penalized(hi)?;
            if self.excess(&yb) <= 0.0 {
                found = true;
                break;
            }
            lo = hi;
            hi *= 4.0;
        }
        if !found {
            return Err(Error::Numerics("ball prox: multiplier bracket not found".into()));
        }
        let mut failure = None;
        let beta = brent_root(
            |b| match self.penalized(b) {
                Ok(yb) => self.excess(&yb),
                Err(e) => {
                    failure = Some(e);
                    f64::NAN
                }
            },
            lo,
            hi,
            1e-15 * hi,
            MAX_ITER,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        let beta = beta.ok_or_else(|| Error::Numerics("ball prox: multiplier solve failed".into()))?;
        let y = self.penalized(beta)?;
        Ok(self.pull_inside(y))
    }

    fn unconstrained(&self) -> Vec<f64> {
        if self.q == 2.0 {
            return self.h.iter().map(|h| -h / (2.0 * self.weight)).collect();
        }
        let qs = conjugate_exponent(self.q);
        let norm = lp_norm(self.h, qs);
        if norm == 0.0 {
            return vec![0.0; self.h.len()];
        }
        let factor = norm.powf(2.0 - qs) / (2.0 * self.weight);
        self.h.iter().map(|&h| factor * signed_pow(-h, qs - 1.0)).collect()
    }

    /// `‖y + s‖_p − r`
    fn excess(&self, y: &[f64]) -> f64 {
        let shifted: Vec<f64> = y.iter().zip(self.shift).map(|(a, b)| a + b).collect();
        lp_norm(&shifted, self.p) - self.radius
    }

    fn pull_inside(&self, mut y: Vec<f64>) -> Vec<f64> {
        let x: Vec<f64> = y.iter().zip(self.shift).map(|(a, b)| a + b).collect();
        let n = lp_norm(&x, self.p);
        if n > self.radius {
            for (yi, (xi, si)) in y.iter_mut().zip(x.iter().zip(self.shift)) {
                *yi = xi * self.radius / n - si;
            }
        }
        y
    }

    /// Minimizer of `C‖y‖_q² + ⟨h,y⟩ + (β/p)Σ|y_i+s_i|^p`.
    fn penalized(&self, beta: f64) -> Result<Vec<f64>> {
        if self.q == 2.0 {
            return self.coordinates(2.0 * self.weight, beta);
        }
        // α = 2C‖y(α)‖^{2−q}, solved in log-space
        let two_c = 2.0 * self.weight;
        let consistency = |log_alpha: f64| -> Result<f64> {
            let alpha = log_alpha.exp();
            let y = self.coordinates(alpha, beta)?;
            let n = lp_norm(&y, self.q);
            Ok(log_alpha - (two_c * n.powf(2.0 - self.q)).ln())
        };
        let mut lo = two_c.ln();
        let mut hi = lo;
        let mut f_lo = consistency(lo)?;
        let mut f_hi = f_lo;
        let step = 4f64.ln();
        let mut iter = 0;
        while f_lo > 0.0 && iter < EXPAND_STEPS {
            hi = lo;
            f_hi = f_lo;
            lo -= step;
            f_lo = consistency(lo)?;
            iter += 1;
        }
        while f_hi < 0.0 && iter < EXPAND_STEPS {
            lo = hi;
            f_lo = f_hi;
            hi += step;
            f_hi = consistency(hi)?;
            iter += 1;
        }
        if f_lo > 0.0 {
            // y ≡ 0 along the whole bracket
            return self.coordinates(lo.exp(), beta);
        }
        if f_hi < 0.0 {
            return Err(Error::Numerics("ball prox: scale bracket not found".into()));
        }
        let mut failure = None;
        let root = brent_root(
            |u| match consistency(u) {
                Ok(v) => v,
                Err(e) => {
                    failure = Some(e);
                    f64::NAN
                }
            },
            lo,
            hi,
            1e-14,
            MAX_ITER,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        let root = root.ok_or_else(|| Error::Numerics("ball prox: scale solve failed".into()))?;
        self.coordinates(root.exp(), beta)
    }

    fn coordinates(&self, alpha: f64, beta: f64) -> Result<Vec<f64>> {
        self.h
            .iter()
            .zip(self.shift)
            .map(|(&h, &s)| self.coordinate(alpha, beta, h, s))
            .collect()
    }

    /// Root in `t` of `α·φ_q(t) + β·φ_p(t + s) + h = 0`.
    fn coordinate(&self, alpha: f64, beta: f64, h: f64, s: f64) -> Result<f64> {
        let q_inv = 1.0 / (self.q - 1.0);
        if beta == 0.0 {
            return Ok(signed_pow(-h / alpha, q_inv));
        }
        if self.p == 1.0 {
            let t0 = -s;
            let base = alpha * signed_pow(t0, self.q - 1.0) + h;
            return Ok(if base.abs() <= beta {
                t0
            } else if base < -beta {
                signed_pow((-h - beta) / alpha, q_inv)
            } else {
                signed_pow((-h + beta) / alpha, q_inv)
            });
        }
        let p_inv = 1.0 / (self.p - 1.0);
        let ta = signed_pow(-h / alpha, q_inv);
        let tb = -s + signed_pow(-h / beta, p_inv);
        let candidates = [0.0, -s, ta, tb];
        let lo = candidates.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = candidates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi - lo <= 0.0 {
            return Ok(lo);
        }
        let g = |t: f64| alpha * signed_pow(t, self.q - 1.0) + beta * signed_pow(t + s, self.p - 1.0) + h;
        let scale = lo.abs().max(hi.abs());
        brent_root(g, lo, hi, 1e-16 * scale, MAX_ITER)
            .ok_or_else(|| Error::Numerics(format!("ball prox: coordinate solve failed (h={h}, s={s})")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn objective(pb: &BallProblem, y: &[f64]) -> f64 {
        pb.weight * lp_norm(y, pb.q).powi(2) + y.iter().zip(pb.h).map(|(a, b)| a * b).sum::<f64>()
    }

    #[test]
    fn interior_solution_is_unconstrained_minimizer() {
        let h = [0.1, -0.2, 0.05];
        let s = [0.0; 3];
        let pb = BallProblem { q: 1.5, weight: 1.0, h: &h, shift: &s, p: 1.0, radius: 10.0 };
        let y = pb.solve().unwrap();
        // gradient of the objective vanishes
        let n = lp_norm(&y, 1.5);
        for (yi, hi) in y.iter().zip(&h) {
            let g = 2.0 * n.powf(0.5) * signed_pow(*yi, 0.5) + hi;
            assert!(g.abs() < 1e-12);
        }
    }

    #[test]
    fn boundary_solution_beats_random_feasible_points() {
        let h = [3.0, -1.0, 0.5, 2.0];
        let s = [0.1, -0.2, 0.0, 0.05];
        for &p in &[1.0, 1.3, 2.0, 3.0] {
            let pb = BallProblem { q: 1.25, weight: 2.0, h: &h, shift: &s, p, radius: 1.0 };
            let y = pb.solve().unwrap();
            let x: Vec<f64> = y.iter().zip(&s).map(|(a, b)| a + b).collect();
            assert!(lp_norm(&x, p) <= 1.0 + 1e-12);
            let best = objective(&pb, &y);
            // compare against points on a ray grid inside the ball
            let mut state = 12345u64;
            for _ in 0..2000 {
                let mut dir = [0.0; 4];
                for d in dir.iter_mut() {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    *d = ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0;
                }
                let n = lp_norm(&dir, p);
                let cand: Vec<f64> = dir.iter().zip(&s).map(|(d, si)| d / n - si).collect();
                assert!(objective(&pb, &cand) >= best - 1e-10);
            }
        }
    }
}
