//! Verification suites shared by the test-suite and the `check` command.
//!
//! The simplex oracle here shares no code with the closed-form
//! updates: it minimizes a separable convex function over the simplex by
//! pairwise coordinate moves (SMO) with a bracketed line search on the
//! directional derivative.

use std::sync::Arc;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cluster::ClusterState;
use crate::error::Result;
use crate::geometry::{DualVector, GeometrySetup, Point};
use crate::inner::{self, CompositeProblem};
use crate::operators::{lipschitz_matrix_game, similarity_matrix_game, SaddleBilinear, Shard};
use crate::paus::{paus_run, LogCadence, PausConfig};
use crate::restart::{paus_r, strongly_monotone_family, FamilySpec, RestartConfig};

/// Minimizes `Σ_j ψ_j(x_j)` over the probability simplex given the
/// derivatives `ψ'_j`. Stops when the derivative spread over the support is
/// below `tol`.
pub fn simplex_minimize(deriv: &dyn Fn(usize, f64) -> f64, n: usize, tol: f64) -> Vec<f64> {
    let mut x = vec![1.0 / n as f64; n];
    for _ in 0..100_000 {
        let d: Vec<f64> = (0..n).map(|j| deriv(j, x[j])).collect();
        // receive mass at the smallest derivative, give it from the largest
        // derivative among coordinates that still hold mass
        let i = (0..n).min_by(|&a, &b| d[a].total_cmp(&d[b])).expect("n ≥ 1");
        let Some(j) = (0..n).filter(|&j| x[j] > 0.0).max_by(|&a, &b| d[a].total_cmp(&d[b])) else {
            break;
        };
        if i == j || d[j] - d[i] <= tol {
            break;
        }
        let h = |t: f64| deriv(i, x[i] + t) - deriv(j, x[j] - t);
        let (mut lo, mut hi) = (0.0, x[j]);
        let (mut h_lo, mut h_hi) = (d[i] - d[j], h(hi));
        if h_hi <= 0.0 {
            lo = hi;
        } else {
            // Illinois regula falsi: h is increasing, h(lo) < 0 < h(hi)
            let mut side = 0i8;
            for _ in 0..200 {
                let mut mid = hi - h_hi * (hi - lo) / (h_hi - h_lo);
                if !(mid > lo && mid < hi) {
                    mid = 0.5 * (lo + hi);
                }
                if mid <= lo || mid >= hi {
                    break;
                }
                let hm = h(mid);
                if hm > 0.0 {
                    hi = mid;
                    h_hi = hm;
                    if side == 1 {
                        h_lo *= 0.5;
                    }
                    side = 1;
                } else if hm < 0.0 {
                    lo = mid;
                    h_lo = hm;
                    if side == -1 {
                        h_hi *= 0.5;
                    }
                    side = -1;
                } else {
                    lo = mid;
                    hi = mid;
                    break;
                }
            }
        }
        let t = if lo == x[j] { lo } else { 0.5 * (lo + hi) };
        if t == 0.0 {
            break;
        }
        x[i] += t;
        x[j] = if t == x[j] { 0.0 } else { x[j] - t };
    }
    x
}

const ORACLE_TOL: f64 = 1e-13;

/// `argmin step·⟨g, x⟩ + KL(x‖center)` per block, by the oracle.
pub fn oracle_prox_entropy(center: &Point, g: &DualVector, step: f64) -> Point {
    Point::new(
        center
            .blocks()
            .iter()
            .zip(g.blocks())
            .map(|(c, gb)| {
                let deriv = |j: usize, t: f64| step * gb[j] + (t / c[j]).ln();
                Array1::from(simplex_minimize(&deriv, c.len(), ORACLE_TOL))
            })
            .collect(),
    )
}

/// `argmin ⟨g, v⟩ + η KL(v‖anchor) + KL(v‖center)` per block, by the oracle.
pub fn oracle_composite_entropy(anchor: &Point, center: &Point, g: &DualVector, eta: f64) -> Point {
    Point::new(
        anchor
            .blocks()
            .iter()
            .zip(center.blocks())
            .zip(g.blocks())
            .map(|((a, c), gb)| {
                let deriv = |j: usize, t: f64| gb[j] + eta * (t / a[j]).ln() + (t / c[j]).ln();
                Array1::from(simplex_minimize(&deriv, c.len(), ORACLE_TOL))
            })
            .collect(),
    )
}

fn random_dual<R: Rng>(dims: &[usize], scale: f64, rng: &mut R) -> DualVector {
    DualVector::new(dims.iter().map(|&n| (0..n).map(|_| rng.random_range(-scale..scale)).collect()).collect())
}

/// Largest `ℓ∞` gap between the entropic closed forms and the oracle over
/// random instances with `d ≤ 5`, one or two blocks.
pub fn oracle_equivalence(instances: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let blocks = rng.random_range(1..=2);
        let dims: Vec<usize> = (0..blocks).map(|_| rng.random_range(2..=5)).collect();
        let geo = GeometrySetup::entropy_simplex(&dims);
        let center = geo.sample_interior(&mut rng);
        let anchor = geo.sample_interior(&mut rng);
        let g = random_dual(&dims, 3.0, &mut rng);
        let step = rng.random_range(0.05..3.0);
        let eta = rng.random_range(0.01..5.0);

        let closed = geo.prox_map(&center, &g, step)?;
        worst = worst.max(closed.max_abs_diff(&oracle_prox_entropy(&center, &g, step)));
        let closed = geo.composite_prox_map(&anchor, &center, &g, eta)?;
        worst = worst.max(closed.max_abs_diff(&oracle_composite_entropy(&anchor, &center, &g, eta)));
    }
    Ok(worst)
}

/// Smallest `V(u,v) − ½‖u−v‖²` over random pairs; non-negative when the DGF
/// is 1-strongly convex in the declared norm.
pub fn strong_convexity_margin(geo: &GeometrySetup, pairs: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    for _ in 0..pairs {
        let u = geo.sample_point(&mut rng);
        let v = geo.sample_interior(&mut rng);
        let margin = geo.bregman_divergence(&u, &v)? - 0.5 * geo.norm(&(&u - &v)).powi(2);
        worst = worst.min(margin);
    }
    Ok(worst)
}

/// Smallest `⟨step·g + ∇w(p) − ∇w(c), z − p⟩` over random prox instances and
/// random feasible `z`; the prox point `p` is optimal iff this is ≥ 0.
pub fn prox_optimality_margin(geo: &GeometrySetup, instances: usize, tests: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    for _ in 0..instances {
        let c = geo.sample_interior(&mut rng);
        let g = random_dual(geo.dims(), 2.0, &mut rng);
        let step = rng.random_range(0.1..2.0);
        let p = geo.prox_map(&c, &g, step)?;
        let mut lhs = g.scaled(step);
        lhs.axpy(1.0, &geo.grad_dgf(&p)?);
        lhs.axpy(-1.0, &geo.grad_dgf(&c)?);
        for _ in 0..tests {
            let z = geo.sample_point(&mut rng);
            worst = worst.min(lhs.pair(&(&z - &p)));
        }
    }
    Ok(worst)
}

/// Random `d×d` game matrix with entries in `[−1, 1]`.
pub fn random_matrix<R: Rng>(d: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_simple_fn((d, d), || rng.random_range(-1.0..1.0))
}

/// Worst slack of `(1/K)Σ⟨F(u^k), u^k − z⟩ ≤ V(z, z0)/(Kγ)` over random `z`,
/// for a PAUS run on `shards` with `γ = 1/δ`. Returns `max(lhs − rhs)`.
pub fn lemma_certificate(shards: &[Array2<f64>], k: usize, samples: usize, seed: u64) -> Result<f64> {
    let d = shards[0].nrows();
    let dims = [d, shards[0].ncols()];
    let mean = crate::bench::global_mean(shards);
    let delta = similarity_matrix_game(&mean, &shards[0])?;
    let ops: Vec<Shard> = shards.iter().map(|a| Arc::new(SaddleBilinear::new(a.clone())) as Shard).collect();
    let mut cluster = ClusterState::new(ops)?;
    let geo = GeometrySetup::entropy_simplex(&dims);
    let z0 = Point::uniform(&dims);
    let mut cfg = PausConfig::new(geo.clone(), z0.clone(), delta, lipschitz_matrix_game(&shards[0]), k);
    cfg.record_trace = true;
    cfg.cadence = LogCadence::every_iteration();
    let out = paus_run(&cfg, &mut cluster, None)?;
    let trace = out.trace.expect("trace requested");

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..samples {
        let z = geo.sample_point(&mut rng);
        let lhs: f64 = trace.u.iter().zip(&trace.f_u).map(|(u, f)| f.pair(&(u - &z))).sum::<f64>() / k as f64;
        let rhs = geo.bregman_divergence(&z, &z0)? / (k as f64 * cfg.gamma);
        worst = worst.max(lhs - rhs);
    }
    Ok(worst)
}

#[derive(Clone, Debug)]
pub struct ContractionReport {
    /// Largest `V(v*, v^{t+1}) − V(v*, v^t)/(1+η)`.
    pub max_violation: f64,
    pub eta: f64,
    pub iterations: usize,
    /// Disagreement of the reference runs from three starts.
    pub reference_spread: f64,
}

/// Composite MP on a random two-block `d×d` subproblem, checked against a
/// reference solution from runs ten times longer.
pub fn composite_contraction(d: usize, seed: u64) -> Result<ContractionReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let global = random_matrix(d, &mut rng);
    let local = &global + &(random_matrix(d, &mut rng) * 0.2);
    let delta = similarity_matrix_game(&global, &local)?;
    let l_f1 = lipschitz_matrix_game(&local);
    let dims = [d, d];
    let geo = GeometrySetup::entropy_simplex(&dims);
    let f = SaddleBilinear::new(global);
    let f1 = SaddleBilinear::new(local);
    let anchor = geo.sample_interior(&mut rng);
    let offset = &crate::operators::evaluate_saddle(&f, &anchor)? - &crate::operators::evaluate_saddle(&f1, &anchor)?;
    let problem = CompositeProblem { gamma: 1.0 / delta, anchor: &anchor, f1: &f1, offset: &offset, geometry: &geo, l_f1 };

    let v0 = geo.sample_interior(&mut rng);
    let t = inner::iterations_needed(l_f1, delta, geo.max_divergence_from(&v0)?, 1e-12)?;
    let starts = [v0.clone(), Point::uniform(&dims), anchor.clone()];
    let refs = starts
        .iter()
        .map(|s| inner::composite_mp(&problem, s, 10 * t))
        .collect::<Result<Vec<_>>>()?;
    let spread = refs.iter().map(|r| r.max_abs_diff(&refs[0])).fold(0.0, f64::max);
    let v_star = &refs[0];

    let trace = inner::composite_mp_trace(&problem, &v0, t)?;
    let eta = problem.eta();
    let mut worst = f64::NEG_INFINITY;
    for w in trace.windows(2) {
        let before = geo.bregman_divergence(v_star, &w[0])?;
        let after = geo.bregman_divergence(v_star, &w[1])?;
        worst = worst.max(after - before / (1.0 + eta));
    }
    Ok(ContractionReport { max_violation: worst, eta, iterations: t, reference_spread: spread })
}

/// Stage ratios `‖u^t − z*‖/‖u^{t−1} − z*‖` of PAUS-R on the Euclidean-ball
/// test family, with the rounds used and the rounds bound `(2δω/μ)log₂(R0²/ε)`.
#[derive(Clone, Debug)]
pub struct RestartReport {
    pub ratios: Vec<f64>,
    pub rounds: u64,
    pub iteration_bound: f64,
    pub k: usize,
    pub n: usize,
    pub final_sq_distance: f64,
}

pub fn restart_halving(family: FamilySpec, radius: f64, eps: f64) -> Result<RestartReport> {
    let fam = strongly_monotone_family(family)?;
    let d = family.d;
    let geo = GeometrySetup::euclidean_ball(d, 2.0, radius)?;
    let z0 = Point::zeros(&[d]);
    let r0_sq = radius * radius;
    let cfg = RestartConfig::new(geo, z0, fam.mu, fam.delta, fam.l_f1, r0_sq, eps);
    let mut cluster = ClusterState::new(fam.shards.clone())?;
    let out = paus_r(&cfg, &mut cluster, Some(&fam.z_star))?;
    let omega = 1.0;
    Ok(RestartReport {
        ratios: out.stages.iter().filter_map(|s| s.ratio).collect(),
        rounds: out.rounds,
        iteration_bound: 2.0 * fam.delta * omega / fam.mu * (r0_sq / eps).log2(),
        k: out.k,
        n: out.n,
        final_sq_distance: (&out.point - &fam.z_star).l2_norm().powi(2),
    })
}

#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, result: Result<(bool, String)>) -> CheckOutcome {
    match result {
        Ok((passed, detail)) => CheckOutcome { name, passed, detail },
        Err(e) => CheckOutcome { name, passed: false, detail: format!("error: {e}") },
    }
}

/// The suites run by `simvi check`, sized to finish in a few seconds.
pub fn run_all_checks() -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    out.push(outcome(
        "entropic prox matches oracle",
        oracle_equivalence(200, 7).map(|w| (w <= 1e-8, format!("max deviation {w:.3e}"))),
    ));
    let setups: Vec<(&'static str, Result<GeometrySetup>)> = vec![
        ("strong convexity: entropy", Ok(GeometrySetup::entropy_simplex(&[4, 3]))),
        ("strong convexity: euclidean ball", GeometrySetup::euclidean_ball(6, 2.0, 1.0)),
        ("strong convexity: a-norm l1 ball", GeometrySetup::for_ball(25, 1.0, 1.0)),
    ];
    for (name, geo) in setups {
        out.push(outcome(
            name,
            geo.and_then(|g| strong_convexity_margin(&g, 1000, 3)).map(|m| (m >= -1e-9, format!("min margin {m:.3e}"))),
        ));
    }
    out.push(outcome(
        "prox first-order optimality: a-norm l1 ball",
        GeometrySetup::for_ball(8, 1.0, 1.0)
            .and_then(|g| prox_optimality_margin(&g, 20, 100, 5))
            .map(|m| (m >= -1e-8, format!("min margin {m:.3e}"))),
    ));
    out.push(outcome(
        "PAUS averaged-regret certificate",
        (|| {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let c = random_matrix(6, &mut rng);
            let shards: Vec<Array2<f64>> = (0..4).map(|_| &c + &(random_matrix(6, &mut rng) * 0.05)).collect();
            let w = lemma_certificate(&shards, 30, 50, 12)?;
            Ok((w <= 1e-6, format!("max slack {w:.3e}")))
        })(),
    ));
    out.push(outcome(
        "composite MP contraction",
        composite_contraction(3, 13).map(|r| {
            (r.max_violation <= 1e-9 && r.reference_spread <= 1e-10, format!("max violation {:.3e}, eta {:.3}", r.max_violation, r.eta))
        }),
    ));
    out.push(outcome(
        "restart halving",
        restart_halving(
            FamilySpec { d: 6, m: 3, mu: 0.2, delta: 1.0, coupling: 1.0, solution_norm: 0.5, p: 2.0, seed: 3 },
            1.0,
            1e-4,
        )
        .map(|r| {
            let worst = r.ratios.iter().copied().fold(0.0, f64::max);
            (worst <= 0.525, format!("worst stage ratio {worst:.3}"))
        }),
    ));
    out
}
