//! Distance-generating functions, Bregman divergences and proximal maps.
//!
//! Three setups are supported:
//!
//! * `EntropySimplex`: negative entropy on a product of probability simplices,
//!   measured in the `ℓ1` norm per block.
//! * `Euclidean`: `½‖z − s‖²₂` on either a simplex product or an `ℓ_p` ball.
//! * `ANormBall`: `coef·‖z − s‖²_q` on an `ℓ_p` ball, with `q` and `coef`
//!   chosen by [`GeometrySetup::for_ball`] from the ball exponent.
//!
//! Multi-block setups use the product norm `(Σ_b ‖z_b‖²)^{1/2}` built from the
//! per-block norm; each block DGF is 1-strongly convex in its block norm, so
//! their sum is 1-strongly convex in the product norm.

pub mod ball;
pub mod point;
pub mod simplex;

use ndarray::Array1;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

pub use point::{DualVector, Point};

use crate::error::{Error, Result};
use crate::numeric::{conjugate_exponent, lp_norm, signed_pow};
use ball::BallProblem;
use simplex::project_simplex;

/// Membership slack for simplex sums and ball radii.
pub const DOMAIN_TOL: f64 = 1e-12;
/// Negative simplex coordinates this close to zero are read as zero.
pub const BOUNDARY_NUDGE: f64 = 1e-15;
/// Smallest coordinate an entropic update may produce.
pub const POSITIVE_FLOOR: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DgfKind {
    Euclidean,
    EntropySimplex,
    /// `coef·‖z − s‖²_exponent`
    ANormBall { exponent: f64, coef: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Domain {
    SimplexProduct,
    /// Every block satisfies `‖z_b‖_p ≤ radius`.
    NormBall { p: f64, radius: f64 },
}

/// Which per-block norm a constant or distance was measured in.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NormTag {
    /// `ℓ1` primal, `ℓ∞` dual.
    L1,
    L2,
    /// `ℓ_q` primal, `ℓ_{q*}` dual.
    Lq(f64),
}

impl NormTag {
    pub fn primal_exponent(self) -> f64 {
        match self {
            NormTag::L1 => 1.0,
            NormTag::L2 => 2.0,
            NormTag::Lq(q) => q,
        }
    }

    pub fn dual_exponent(self) -> f64 {
        conjugate_exponent(self.primal_exponent())
    }
}

impl std::fmt::Display for NormTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NormTag::L1 => write!(f, "l1"),
            NormTag::L2 => write!(f, "l2"),
            NormTag::Lq(q) => write!(f, "l{q}"),
        }
    }
}

/// `a = 2 ln d / (2 ln d − 1)` with the natural logarithm.
pub fn a_param(d: usize) -> f64 {
    let l = (d as f64).ln();
    2.0 * l / (2.0 * l - 1.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeometrySetup {
    kind: DgfKind,
    domain: Domain,
    dims: Vec<usize>,
    /// DGF center `s`; `None` means the origin.
    shift: Option<Point>,
}

impl GeometrySetup {
    pub fn new(kind: DgfKind, domain: Domain, dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::Parameter(format!("block dimensions must be positive, got {dims:?}")));
        }
        match (kind, domain) {
            (DgfKind::EntropySimplex, Domain::NormBall { .. }) => {
                return Err(Error::Parameter("entropy DGF requires a simplex domain".into()))
            }
            (DgfKind::ANormBall { .. }, Domain::SimplexProduct) => {
                return Err(Error::Parameter("a-norm DGF requires a ball domain".into()))
            }
            _ => {}
        }
        if let DgfKind::ANormBall { exponent, coef } = kind {
            if !(exponent > 1.0 && exponent <= 2.0) || !(coef > 0.0) {
                return Err(Error::Parameter(format!(
                    "a-norm DGF needs exponent in (1, 2] and coef > 0, got {exponent}, {coef}"
                )));
            }
        }
        if let Domain::NormBall { p, radius } = domain {
            if !(p >= 1.0) || !(radius > 0.0) {
                return Err(Error::Parameter(format!("ball needs p ≥ 1 and radius > 0, got {p}, {radius}")));
            }
        }
        Ok(Self { kind, domain, dims, shift: None })
    }

    pub fn entropy_simplex(dims: &[usize]) -> Self {
        Self::new(DgfKind::EntropySimplex, Domain::SimplexProduct, dims.to_vec()).expect("valid dims")
    }

    pub fn euclidean_simplex(dims: &[usize]) -> Self {
        Self::new(DgfKind::Euclidean, Domain::SimplexProduct, dims.to_vec()).expect("valid dims")
    }

    pub fn euclidean_ball(d: usize, p: f64, radius: f64) -> Result<Self> {
        Self::new(DgfKind::Euclidean, Domain::NormBall { p, radius }, vec![d])
    }

    /// DGF for an `ℓ_p` ball of dimension `d` following the usual three regimes:
    /// `p ≤ a` uses `‖·‖²_a/(2(a−1))`, `a ≤ p ≤ 2` uses `‖·‖²_p/(p−1)` and
    /// `p ≥ 2` is Euclidean. When `d` is so small that `a ≥ 2` the Euclidean
    /// setup is used for every `p`.
    pub fn for_ball(d: usize, p: f64, radius: f64) -> Result<Self> {
        let a = a_param(d);
        let domain = Domain::NormBall { p, radius };
        let kind = if p >= 2.0 || d < 3 || a >= 2.0 {
            DgfKind::Euclidean
        } else if p <= a {
            DgfKind::ANormBall { exponent: a, coef: 1.0 / (2.0 * (a - 1.0)) }
        } else {
            DgfKind::ANormBall { exponent: p, coef: 1.0 / (p - 1.0) }
        };
        Self::new(kind, domain, vec![d])
    }

    /// The `p ≤ a` row regardless of `p`.
    pub fn a_norm_ball(d: usize, p: f64, radius: f64) -> Result<Self> {
        let a = a_param(d);
        Self::new(
            DgfKind::ANormBall { exponent: a, coef: 1.0 / (2.0 * (a - 1.0)) },
            Domain::NormBall { p, radius },
            vec![d],
        )
    }

    /// Same setup with the DGF centered at `center`.
    pub fn centered_at(mut self, center: &Point) -> Result<Self> {
        if self.kind == DgfKind::EntropySimplex {
            return Err(Error::UnsupportedRecenter("entropy DGF is not translation-based".into()));
        }
        center.ensure_shape(&self.dims)?;
        self.shift = Some(center.clone());
        Ok(self)
    }

    pub fn kind(&self) -> DgfKind {
        self.kind
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn shift(&self) -> Point {
        self.shift.clone().unwrap_or_else(|| Point::zeros(&self.dims))
    }

    /// `(q, coef)` of the power DGF `coef·‖·‖²_q`, or `None` for entropy.
    fn power_params(&self) -> Option<(f64, f64)> {
        match self.kind {
            DgfKind::Euclidean => Some((2.0, 0.5)),
            DgfKind::ANormBall { exponent, coef } => Some((exponent, coef)),
            DgfKind::EntropySimplex => None,
        }
    }

    pub fn norm_tag(&self) -> NormTag {
        match self.kind {
            DgfKind::EntropySimplex => NormTag::L1,
            DgfKind::Euclidean => NormTag::L2,
            DgfKind::ANormBall { exponent, .. } => NormTag::Lq(exponent),
        }
    }

    /// Declared (product) norm of a primal difference.
    pub fn norm(&self, v: &Point) -> f64 {
        block_product_norm(v.blocks(), self.norm_tag().primal_exponent())
    }

    /// Dual of [`Self::norm`].
    pub fn dual_norm(&self, g: &DualVector) -> f64 {
        block_product_norm(g.blocks(), self.norm_tag().dual_exponent())
    }

    pub fn contains(&self, z: &Point) -> bool {
        self.check_domain(z).is_ok()
    }

    pub fn check_domain(&self, z: &Point) -> Result<()> {
        z.ensure_shape(&self.dims)?;
        if !z.is_finite() {
            return Err(Error::Domain("non-finite coordinate".into()));
        }
        for (b, block) in z.blocks().iter().enumerate() {
            match self.domain {
                Domain::SimplexProduct => {
                    if let Some(v) = block.iter().find(|&&v| v < -BOUNDARY_NUDGE) {
                        return Err(Error::Domain(format!("block {b} has negative coordinate {v}")));
                    }
                    let s = block.sum();
                    if (s - 1.0).abs() > DOMAIN_TOL {
                        return Err(Error::Domain(format!("block {b} sums to {s}")));
                    }
                }
                Domain::NormBall { p, radius } => {
                    let n = lp_norm(block, p);
                    if n > radius + DOMAIN_TOL {
                        return Err(Error::Domain(format!("block {b} has ℓ{p} norm {n} > {radius}")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn dgf_value(&self, z: &Point) -> Result<f64> {
        self.check_domain(z)?;
        match self.power_params() {
            None => Ok(z
                .iter()
                .map(|v| if v <= 0.0 { 0.0 } else { v * v.ln() })
                .sum()),
            Some((q, coef)) => {
                let s = self.shift();
                Ok(z.blocks()
                    .iter()
                    .zip(s.blocks())
                    .map(|(zb, sb)| coef * lp_norm(&(zb - sb), q).powi(2))
                    .sum())
            }
        }
    }

    /// `∇w(z)`; for entropy `z` must be strictly positive.
    pub fn grad_dgf(&self, z: &Point) -> Result<DualVector> {
        z.ensure_shape(&self.dims)?;
        match self.power_params() {
            None => {
                if z.iter().any(|v| v <= 0.0) {
                    return Err(Error::Domain("entropy gradient needs strictly positive coordinates".into()));
                }
                Ok(DualVector::new(z.blocks().iter().map(|b| b.mapv(|v| v.ln() + 1.0)).collect()))
            }
            Some((q, coef)) => {
                let s = self.shift();
                Ok(DualVector::new(
                    z.blocks()
                        .iter()
                        .zip(s.blocks())
                        .map(|(zb, sb)| power_grad(&(zb - sb), q, coef))
                        .collect(),
                ))
            }
        }
    }

    /// `V(u, v) = w(u) − w(v) − ⟨∇w(v), u − v⟩`.
    pub fn bregman_divergence(&self, u: &Point, v: &Point) -> Result<f64> {
        self.check_domain(u)?;
        self.check_domain(v)?;
        match self.power_params() {
            None => {
                let mut total = 0.0;
                for (ub, vb) in u.blocks().iter().zip(v.blocks()) {
                    for (&a, &b) in ub.iter().zip(vb.iter()) {
                        let a = a.max(0.0);
                        let b = b.max(0.0);
                        if a > 0.0 {
                            if b <= 0.0 {
                                return Err(Error::DivergenceInfinite(
                                    "u puts mass where v has none".into(),
                                ));
                            }
                            total += a * (a / b).ln();
                        }
                        total += b - a;
                    }
                }
                Ok(total.max(0.0))
            }
            Some((2.0, coef)) => Ok(coef * (u - v).l2_norm().powi(2)),
            Some((q, coef)) => {
                let s = self.shift();
                let mut total = 0.0;
                for ((ub, vb), sb) in u.blocks().iter().zip(v.blocks()).zip(s.blocks()) {
                    let yu = ub - sb;
                    let yv = vb - sb;
                    let grad = power_grad(&yv, q, coef);
                    total += coef * lp_norm(&yu, q).powi(2) - coef * lp_norm(&yv, q).powi(2)
                        - grad.dot(&(ub - vb));
                }
                Ok(total.max(0.0))
            }
        }
    }

    /// `argmin_z { step·⟨g, z⟩ + V(z, center) }` over the domain.
    pub fn prox_map(&self, center: &Point, g: &DualVector, step: f64) -> Result<Point> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::Parameter(format!("prox step must be positive, got {step}")));
        }
        self.check_prox_inputs(&[center], g)?;
        let blocks = match (self.kind, self.domain) {
            (DgfKind::EntropySimplex, _) => center
                .blocks()
                .iter()
                .zip(g.blocks())
                .map(|(c, gb)| softmax_normalize(c.iter().zip(gb.iter()).map(|(&c, &gi)| c.ln() - step * gi)))
                .collect(),
            (DgfKind::Euclidean, Domain::SimplexProduct) => center
                .blocks()
                .iter()
                .zip(g.blocks())
                .map(|(c, gb)| project_simplex(&(c - &(gb * step))))
                .collect(),
            (_, Domain::NormBall { p, radius }) => {
                let (q, coef) = self.power_params().expect("ball setups carry a power DGF");
                let s = self.shift();
                let mut out = Vec::with_capacity(self.dims.len());
                for ((c, gb), sb) in center.blocks().iter().zip(g.blocks()).zip(s.blocks()) {
                    let grad_c = power_grad(&(c - sb), q, coef);
                    let h = gb * step - grad_c;
                    out.push(solve_ball(q, coef, &h, sb, p, radius)?);
                }
                out
            }
            (DgfKind::ANormBall { .. }, Domain::SimplexProduct) => unreachable!("rejected at construction"),
        };
        finish(blocks)
    }

    /// `argmin_v { ⟨g, v⟩ + η·V(v, anchor) + V(v, center) }` over the domain.
    pub fn composite_prox_map(&self, anchor: &Point, center: &Point, g: &DualVector, eta: f64) -> Result<Point> {
        if !(eta >= 0.0) || !eta.is_finite() {
            return Err(Error::Parameter(format!("eta must be non-negative, got {eta}")));
        }
        if eta == 0.0 && self.kind == DgfKind::EntropySimplex {
            return self.prox_map(center, g, 1.0);
        }
        self.check_prox_inputs(&[anchor, center], g)?;
        let w = 1.0 / (1.0 + eta);
        let blocks = match (self.kind, self.domain) {
            (DgfKind::EntropySimplex, _) => anchor
                .blocks()
                .iter()
                .zip(center.blocks())
                .zip(g.blocks())
                .map(|((a, c), gb)| {
                    softmax_normalize(
                        a.iter()
                            .zip(c.iter())
                            .zip(gb.iter())
                            .map(|((&a, &c), &gi)| w * (eta * a.ln() + c.ln() - gi)),
                    )
                })
                .collect(),
            (DgfKind::Euclidean, Domain::SimplexProduct) => anchor
                .blocks()
                .iter()
                .zip(center.blocks())
                .zip(g.blocks())
                .map(|((a, c), gb)| project_simplex(&((a * eta + c - gb) * w)))
                .collect(),
            (_, Domain::NormBall { p, radius }) => {
                let (q, coef) = self.power_params().expect("ball setups carry a power DGF");
                let s = self.shift();
                let mut out = Vec::with_capacity(self.dims.len());
                for (((a, c), gb), sb) in anchor.blocks().iter().zip(center.blocks()).zip(g.blocks()).zip(s.blocks()) {
                    let h = gb - &(power_grad(&(a - sb), q, coef) * eta) - power_grad(&(c - sb), q, coef);
                    out.push(solve_ball(q, (1.0 + eta) * coef, &h, sb, p, radius)?);
                }
                out
            }
            (DgfKind::ANormBall { .. }, Domain::SimplexProduct) => unreachable!("rejected at construction"),
        };
        finish(blocks)
    }

    /// Upper bound on `sup_z 2V(z, z0)/‖z − z0‖²`.
    ///
    /// Exactly 1 for Euclidean setups. For the power DGF with `q < 2` the ratio
    /// is `2·coef` when `z0` is the DGF center and unbounded near the
    /// coordinate hyperplanes through the center otherwise.
    pub fn omega_d(&self, z0: &Point) -> Result<f64> {
        self.check_domain(z0)?;
        match self.kind {
            DgfKind::EntropySimplex => Err(Error::UnboundedOmega(
                "KL over squared ℓ1 distance is unbounded near the simplex boundary".into(),
            )),
            DgfKind::Euclidean => Ok(1.0),
            DgfKind::ANormBall { coef, .. } => {
                let s = self.shift();
                let scale = 1.0 + s.max_abs().max(z0.max_abs());
                if z0.max_abs_diff(&s) <= 1e-12 * scale {
                    Ok(2.0 * coef)
                } else {
                    Err(Error::UnboundedOmega(
                        "power DGF ratio is only bounded from the DGF center; recenter first".into(),
                    ))
                }
            }
        }
    }

    /// DGF translated to `w(z − shift_from + shift_to)`.
    pub fn recenter(&self, shift_from: &Point, shift_to: &Point) -> Result<Self> {
        if self.kind == DgfKind::EntropySimplex {
            return Err(Error::UnsupportedRecenter("entropy DGF is not translation-based".into()));
        }
        shift_from.ensure_shape(&self.dims)?;
        shift_to.ensure_shape(&self.dims)?;
        let shift = &(&self.shift() + shift_from) - shift_to;
        Ok(Self { shift: Some(shift), ..self.clone() })
    }

    /// Random point of the domain: Dirichlet(1, …, 1) per simplex block, or
    /// uniform radius with a Gaussian direction per ball block.
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let blocks = self
            .dims
            .iter()
            .map(|&n| match self.domain {
                Domain::SimplexProduct => {
                    let v: Array1<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
                    let s = v.sum();
                    v / s
                }
                Domain::NormBall { p, radius } => {
                    let v: Array1<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
                    let norm = lp_norm(&v, p).max(f64::MIN_POSITIVE);
                    let u: f64 = rng.random();
                    v * (radius * u.powf(1.0 / n as f64) / norm)
                }
            })
            .collect();
        Point::new(blocks)
    }

    /// Strictly positive random simplex point, or a ball point, for use as a
    /// prox center.
    pub fn sample_interior<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let mut z = self.sample_point(rng);
        if self.domain == Domain::SimplexProduct {
            for b in z.blocks_mut() {
                b.mapv_inplace(|v| v.max(1e-12));
                let s = b.sum();
                *b /= s;
            }
        }
        z
    }

    /// Upper bound on `sup_z V(z, z0)` over the domain.
    pub fn max_divergence_from(&self, z0: &Point) -> Result<f64> {
        self.check_domain(z0)?;
        match (self.kind, self.domain) {
            (DgfKind::EntropySimplex, _) => Ok(z0
                .blocks()
                .iter()
                .map(|b| b.iter().fold(0.0, |m: f64, &v| m.max(-v.max(POSITIVE_FLOOR).ln())))
                .sum()),
            (DgfKind::Euclidean, Domain::SimplexProduct) => Ok(z0
                .blocks()
                .iter()
                .map(|b| {
                    let sq = b.dot(b);
                    b.iter().map(|&v| 0.5 * (sq - 2.0 * v + 1.0)).fold(0.0, f64::max)
                })
                .sum()),
            (_, Domain::NormBall { p, radius }) => {
                let (q, coef) = self.power_params().expect("ball setups carry a power DGF");
                let s = self.shift();
                let mut total = 0.0;
                for ((zb, sb), &n) in z0.blocks().iter().zip(s.blocks()).zip(&self.dims) {
                    let reach = radius * (n as f64).powf((1.0 / q - 1.0 / p).max(0.0));
                    let z0_norm = lp_norm(zb, q);
                    let s_norm = lp_norm(sb, q);
                    let grad = power_grad(&(zb - sb), q, coef);
                    total += coef * (reach + s_norm).powi(2)
                        + lp_norm(&grad, conjugate_exponent(q)) * (reach + z0_norm);
                }
                Ok(total)
            }
            (DgfKind::ANormBall { .. }, Domain::SimplexProduct) => unreachable!("rejected at construction"),
        }
    }

    fn check_prox_inputs(&self, points: &[&Point], g: &DualVector) -> Result<()> {
        g.ensure_shape(&self.dims)?;
        if !g.is_finite() {
            return Err(Error::Numerics("non-finite prox gradient".into()));
        }
        for z in points {
            self.check_domain(z)?;
            if self.kind == DgfKind::EntropySimplex && z.iter().any(|v| v <= 0.0) {
                return Err(Error::Domain("entropic prox center must be strictly positive".into()));
            }
        }
        Ok(())
    }
}

fn block_product_norm(blocks: &[Array1<f64>], p: f64) -> f64 {
    if blocks.len() == 1 {
        return lp_norm(&blocks[0], p);
    }
    blocks.iter().map(|b| lp_norm(b, p).powi(2)).sum::<f64>().sqrt()
}

/// `∇(coef·‖y‖²_q) = 2·coef·‖y‖_q^{2−q}·φ_q(y)`
fn power_grad(y: &Array1<f64>, q: f64, coef: f64) -> Array1<f64> {
    if q == 2.0 {
        return y * (2.0 * coef);
    }
    let n = lp_norm(y, q);
    if n == 0.0 {
        return Array1::zeros(y.len());
    }
    let factor = 2.0 * coef * n.powf(2.0 - q);
    y.mapv(|t| factor * signed_pow(t, q - 1.0))
}

fn solve_ball(q: f64, weight: f64, h: &Array1<f64>, shift: &Array1<f64>, p: f64, radius: f64) -> Result<Array1<f64>> {
    let h = h.as_slice().expect("contiguous");
    let s = shift.as_slice().expect("contiguous");
    let y = BallProblem { q, weight, h, shift: s, p, radius }.solve()?;
    Ok(Array1::from(y) + shift)
}

/// Exponentiate log-weights after subtracting their max, floor, normalize.
fn softmax_normalize(logits: impl Iterator<Item = f64>) -> Array1<f64> {
    let logits: Array1<f64> = logits.collect();
    let m = logits.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let mut x = logits.mapv(|v| (v - m).exp());
    let s = x.sum();
    x /= s;
    x.mapv_inplace(|v| v.max(POSITIVE_FLOOR));
    let s = x.sum();
    x / s
}

fn finish(blocks: Vec<Array1<f64>>) -> Result<Point> {
    let z = Point::new(blocks);
    if !z.is_finite() {
        return Err(Error::Numerics("prox produced a non-finite point".into()));
    }
    Ok(z)
}
