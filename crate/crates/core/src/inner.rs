//! Composite Mirror Prox for the server-side subproblem
//!
//! ```text
//!   find u:  ⟨γ(F1(u) + F(z) − F1(z)) + ∇w(u) − ∇w(z), v − u⟩ ≥ 0  ∀v,
//! ```
//!
//! i.e. a VI with operator `γ(F1 + offset)` plus a Bregman term anchored at
//! `z`. With `η = 1/(2γL_F1)` each extragradient step contracts the Bregman
//! distance to the solution by `1/(1+η)`.

use crate::error::{Error, Result};
use crate::geometry::{DualVector, GeometrySetup, Point};
use crate::operators::Operator;

#[derive(Clone, Copy, Debug)]
pub struct CompositeProblem<'a> {
    pub gamma: f64,
    pub anchor: &'a Point,
    pub f1: &'a dyn Operator,
    /// `F(z) − F1(z)`
    pub offset: &'a DualVector,
    pub geometry: &'a GeometrySetup,
    pub l_f1: f64,
}

impl CompositeProblem<'_> {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::Parameter(format!("gamma must be positive and finite, got {}", self.gamma)));
        }
        if !(self.l_f1 > 0.0) || !self.l_f1.is_finite() {
            return Err(Error::Parameter(format!("L_F1 must be positive and finite, got {}", self.l_f1)));
        }
        self.offset.ensure_shape(&self.anchor.shape())?;
        self.anchor.ensure_shape(self.geometry.dims())?;
        Ok(())
    }

    /// `η = 1/(2γL_F1)`
    pub fn eta(&self) -> f64 {
        1.0 / (2.0 * self.gamma * self.l_f1)
    }

    fn scaled_operator(&self, v: &Point) -> Result<DualVector> {
        let mut g = self.f1.evaluate(v)?;
        g.axpy(1.0, self.offset);
        Ok(g.scaled(self.gamma * self.eta()))
    }

    /// One extragradient step `v^t → v^{t+1}`.
    pub fn step(&self, v: &Point) -> Result<Point> {
        let eta = self.eta();
        let half = self.geometry.composite_prox_map(self.anchor, v, &self.scaled_operator(v)?, eta)?;
        self.geometry.composite_prox_map(self.anchor, v, &self.scaled_operator(&half)?, eta)
    }

    /// Residual `min_z ⟨γ(F1(v) + offset) + ∇w(v) − ∇w(anchor), z − v⟩` over
    /// the given test points; non-negative at the exact solution.
    pub fn vi_residual(&self, v: &Point, test_points: &[Point]) -> Result<f64> {
        let mut g = self.f1.evaluate(v)?;
        g.axpy(1.0, self.offset);
        let mut g = g.scaled(self.gamma);
        g.axpy(1.0, &self.geometry.grad_dgf(v)?);
        g.axpy(-1.0, &self.geometry.grad_dgf(self.anchor)?);
        Ok(test_points
            .iter()
            .map(|z| g.pair(&(z - v)))
            .fold(f64::INFINITY, f64::min))
    }
}

/// `T` iterations from `v0`; returns `v^T`.
pub fn composite_mp(problem: &CompositeProblem, v0: &Point, t: usize) -> Result<Point> {
    Ok(composite_mp_trace(problem, v0, t)?.pop().expect("trace holds v0"))
}

/// All iterates `v^0, …, v^T`.
pub fn composite_mp_trace(problem: &CompositeProblem, v0: &Point, t: usize) -> Result<Vec<Point>> {
    problem.validate()?;
    let mut trace = Vec::with_capacity(t + 1);
    trace.push(v0.clone());
    for i in 0..t {
        let next = problem.step(&trace[i])?;
        if !next.is_finite() {
            return Err(Error::Numerics(format!("composite MP iterate {} is not finite", i + 1)));
        }
        trace.push(next);
    }
    Ok(trace)
}

/// `⌈(3L_F1/δ)·ln(V0/ε)⌉`, at least 1; 1 when `ε ≥ V0`.
pub fn iterations_needed(l_f1: f64, delta: f64, v0: f64, eps: f64) -> Result<usize> {
    for (name, v) in [("L_F1", l_f1), ("delta", delta), ("V0", v0), ("eps", eps)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::Parameter(format!("{name} must be positive and finite, got {v}")));
        }
    }
    if eps >= v0 {
        return Ok(1);
    }
    let t = 3.0 * l_f1 / delta * (v0 / eps).ln();
    // guard against 3.0000000000000004 rounding up
    Ok(((t - 1e-9 * t.max(1.0)).ceil() as usize).max(1))
}

/// When to stop the inner loop.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InnerStop {
    /// Target Bregman distance to the subproblem solution.
    pub tol: f64,
    /// Iteration budget.
    pub max_iters: usize,
    /// Raise [`Error::InnerSolver`] if the budget runs out before the
    /// movement test passes.
    pub strict: bool,
}

#[derive(Clone, Debug)]
pub struct InnerOutcome {
    pub point: Point,
    pub iterations: usize,
    /// `½‖v^T − v^{T−1}‖²` in the declared norm.
    pub movement: f64,
    pub converged: bool,
}

/// Runs until `½‖v^{t+1} − v^t‖² ≤ tol·η²/4` or the budget is spent.
///
/// Near the solution the iterates move by about `η/2` times their distance to
/// it, so the test bounds the remaining distance by roughly `tol`.
pub fn solve(problem: &CompositeProblem, v0: &Point, stop: InnerStop) -> Result<InnerOutcome> {
    problem.validate()?;
    let eta = problem.eta();
    let threshold = stop.tol * eta * eta / 4.0;
    let mut v = v0.clone();
    let mut movement = f64::INFINITY;
    for t in 0..stop.max_iters {
        let next = problem.step(&v)?;
        if !next.is_finite() {
            return Err(Error::Numerics(format!("composite MP iterate {} is not finite", t + 1)));
        }
        movement = 0.5 * problem.geometry.norm(&(&next - &v)).powi(2);
        v = next;
        if movement <= threshold {
            return Ok(InnerOutcome { point: v, iterations: t + 1, movement, converged: true });
        }
    }
    if stop.strict {
        return Err(Error::InnerSolver { iterations: stop.max_iters, residual: movement });
    }
    Ok(InnerOutcome { point: v, iterations: stop.max_iters, movement, converged: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::SaddleBilinear;
    use ndarray::array;

    #[test]
    fn iteration_count_examples() {
        assert_eq!(iterations_needed(1.0, 1.0, std::f64::consts::E, 1.0).unwrap(), 3);
        assert_eq!(iterations_needed(1.0, 1.0, 1.0, 2.0).unwrap(), 1);
        let a = iterations_needed(2.0, 0.1, 5.0, 1e-6).unwrap();
        let b = iterations_needed(4.0, 0.1, 5.0, 1e-6).unwrap();
        assert!(b == 2 * a || b + 1 == 2 * a || b == 2 * a - 1);
        assert!(iterations_needed(0.0, 1.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn anchor_is_stationary_without_operator() {
        let geo = GeometrySetup::entropy_simplex(&[2, 2]);
        let op = SaddleBilinear::new(ndarray::Array2::zeros((2, 2)));
        let anchor = Point::from_vecs(vec![vec![0.3, 0.7], vec![0.6, 0.4]]);
        let offset = DualVector::zeros(&[2, 2]);
        let pb = CompositeProblem { gamma: 1.0, anchor: &anchor, f1: &op, offset: &offset, geometry: &geo, l_f1: 1.0 };
        let v = composite_mp(&pb, &anchor, 5).unwrap();
        assert!(v.max_abs_diff(&anchor) < 1e-15);
        // from elsewhere the iterates approach the anchor
        let far = Point::uniform(&[2, 2]);
        let v = composite_mp(&pb, &far, 200).unwrap();
        assert!(v.max_abs_diff(&anchor) < 1e-8);
    }

    #[test]
    fn strict_budget_raises() {
        let geo = GeometrySetup::entropy_simplex(&[2, 2]);
        let op = SaddleBilinear::new(array![[1.0, -1.0], [-1.0, 1.0]]);
        let anchor = Point::uniform(&[2, 2]);
        let offset = DualVector::from_vecs(vec![vec![0.3, 0.0], vec![0.0, 0.2]]);
        let pb = CompositeProblem { gamma: 10.0, anchor: &anchor, f1: &op, offset: &offset, geometry: &geo, l_f1: 1.0 };
        let stop = InnerStop { tol: 1e-14, max_iters: 2, strict: true };
        assert!(matches!(solve(&pb, &anchor, stop), Err(Error::InnerSolver { iterations: 2, .. })));
        let stop = InnerStop { tol: 1e-14, max_iters: 100_000, strict: true };
        let out = solve(&pb, &anchor, stop).unwrap();
        assert!(out.converged);
    }
}
