//! The PAUS outer loop: per iteration two communication rounds, a
//! server-side composite subproblem and a mirror step, returning the ergodic
//! average of the subproblem solutions.

use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cluster::ClusterState;
use crate::error::{Error, Result};
use crate::geometry::{DualVector, GeometrySetup, Point};
use crate::inner::{self, CompositeProblem, InnerStop};
use crate::operators::Operator;

/// Largest theoretical inner iteration count accepted without an explicit
/// cap. Reached when `γ·L_F1` is huge, e.g. `γ = 1/δ` with `δ ≈ 0`.
pub const MAX_THEORETICAL_INNER_ITERS: usize = 10_000_000;

/// Gap (or any scalar progress measure) of a point.
pub type GapFn<'a> = &'a (dyn Fn(&Point) -> f64 + Sync);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogCadence {
    /// Log every iteration up to this many rounds.
    pub dense_until: u64,
    /// Afterwards log when rounds grow by this factor.
    pub ratio: f64,
}

impl Default for LogCadence {
    fn default() -> Self {
        Self { dense_until: 1000, ratio: 1.02 }
    }
}

impl LogCadence {
    pub fn every_iteration() -> Self {
        Self { dense_until: u64::MAX, ratio: 1.0 }
    }
}

pub(crate) struct CadenceState {
    cadence: LogCadence,
    next_sparse: f64,
}

impl CadenceState {
    pub(crate) fn new(cadence: LogCadence) -> Self {
        let next_sparse = cadence.dense_until as f64 * cadence.ratio;
        Self { cadence, next_sparse }
    }

    pub(crate) fn should_log(&mut self, round: u64) -> bool {
        if round <= self.cadence.dense_until {
            return true;
        }
        if round as f64 >= self.next_sparse {
            self.next_sparse = (round as f64 * self.cadence.ratio).max(round as f64 + 1.0);
            return true;
        }
        false
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InnerConfig {
    /// Lipschitz constant of the server operator `F1`.
    pub l_f1: f64,
    /// Target Bregman accuracy of each subproblem solve.
    pub tol: f64,
    /// Iteration cap. Defaults to the theoretical count; a smaller cap that
    /// is hit before convergence raises [`Error::InnerSolver`].
    pub max_iters: Option<usize>,
    /// Start each solve from the previous `u` instead of `z`.
    pub warm_start: bool,
}

impl InnerConfig {
    pub fn new(l_f1: f64) -> Self {
        Self { l_f1, tol: 1e-12, max_iters: None, warm_start: true }
    }
}

#[derive(Clone, Debug)]
pub struct PausConfig {
    pub gamma: f64,
    pub k: usize,
    /// Similarity constant the stepsize is checked against.
    pub delta: f64,
    pub inner: InnerConfig,
    pub geometry: GeometrySetup,
    pub z0: Point,
    pub cadence: LogCadence,
    /// Stop once the logged gap reaches this value; the gap is then evaluated
    /// every iteration.
    pub target_gap: Option<f64>,
    /// Keep every `z^k`, `u^k` and `F(u^k)`.
    pub record_trace: bool,
    /// Accept `γ > 1/δ` (stepsize sweeps).
    pub allow_large_step: bool,
}

impl PausConfig {
    /// `γ = 1/δ` with entropy-style defaults for everything else.
    pub fn new(geometry: GeometrySetup, z0: Point, delta: f64, l_f1: f64, k: usize) -> Self {
        Self {
            gamma: 1.0 / delta,
            k,
            delta,
            inner: InnerConfig::new(l_f1),
            geometry,
            z0,
            cadence: LogCadence::default(),
            target_gap: None,
            record_trace: false,
            allow_large_step: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Parameter("K must be at least 1".into()));
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::Parameter(format!("gamma must be positive and finite, got {}", self.gamma)));
        }
        if !self.allow_large_step && self.delta > 0.0 && self.gamma > (1.0 / self.delta) * (1.0 + 1e-12) {
            return Err(Error::Parameter(format!("gamma {} exceeds 1/delta = {}", self.gamma, 1.0 / self.delta)));
        }
        if !(self.inner.tol > 0.0) {
            return Err(Error::Parameter("inner tolerance must be positive".into()));
        }
        self.geometry.check_domain(&self.z0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunRecord {
    /// Rounds used so far by this run.
    pub round: u64,
    /// Gap of the running ergodic average (`NaN` without a gap function).
    pub gap: f64,
    pub inner_iters: usize,
    pub elapsed_ms: f64,
}

#[derive(Clone, Debug, Default)]
pub struct PausTrace {
    /// `z^0, …, z^K`
    pub z: Vec<Point>,
    /// `u^0, …, u^{K−1}`
    pub u: Vec<Point>,
    /// `F(u^k)` as gathered.
    pub f_u: Vec<DualVector>,
}

#[derive(Clone, Debug)]
pub struct PausOutput {
    pub average: Point,
    pub log: Vec<RunRecord>,
    pub trace: Option<PausTrace>,
    pub iterations: usize,
    pub rounds: u64,
    pub inner_iters_total: usize,
    /// Rounds at which the target gap was first reached.
    pub target_round: Option<u64>,
    pub last_u: Point,
    pub last_z: Point,
}

pub fn paus_run(config: &PausConfig, cluster: &mut ClusterState, gap: Option<GapFn>) -> Result<PausOutput> {
    config.validate()?;
    config.z0.ensure_shape(&cluster.shape())?;
    if config.target_gap.is_some() && gap.is_none() {
        return Err(Error::Config("a target gap needs a gap function".into()));
    }
    let start = Instant::now();
    let base_round = cluster.round_count();
    let f1 = cluster.server_shard().clone();
    let geometry = &config.geometry;
    let gamma = config.gamma;

    let mut cadence = CadenceState::new(config.cadence);
    let mut log = Vec::new();
    let elapsed = |start: &Instant| start.elapsed().as_secs_f64() * 1e3;
    if let Some(g) = gap {
        log.push(RunRecord { round: 0, gap: g(&config.z0), inner_iters: 0, elapsed_ms: elapsed(&start) });
    }

    let mut trace = config.record_trace.then(|| PausTrace { z: vec![config.z0.clone()], ..Default::default() });
    let mut z = config.z0.clone();
    let mut u_prev = config.z0.clone();
    let mut average = Point::zeros(&config.z0.shape());
    let mut inner_total = 0;
    let mut target_round = None;
    let mut iterations = 0;

    for k in 0..config.k {
        let fz = cluster.gather_average(std::slice::from_ref(&z))?.pop().expect("one point");
        let offset = &fz - &f1.evaluate(&z)?;

        let problem = CompositeProblem {
            gamma,
            anchor: &z,
            f1: f1.as_ref(),
            offset: &offset,
            geometry,
            l_f1: config.inner.l_f1,
        };
        let v0 = if config.inner.warm_start { &u_prev } else { &z };
        let stop = inner_stop(&problem, geometry, v0, &config.inner)?;
        let solved = inner::solve(&problem, v0, stop)?;
        let u = solved.point;
        inner_total += solved.iterations;

        let fu = cluster.gather_average(std::slice::from_ref(&u))?.pop().expect("one point");
        let mut g = &fu - &f1.evaluate(&u)?;
        g.axpy(-1.0, &offset);
        let z_next = geometry.prox_map(&u, &g, gamma)?;

        average.axpy(1.0 / (k + 1) as f64, &(&u - &average));
        iterations = k + 1;
        if let Some(t) = trace.as_mut() {
            t.z.push(z_next.clone());
            t.u.push(u.clone());
            t.f_u.push(fu);
        }
        z = z_next;
        u_prev = u;

        let round = cluster.round_count() - base_round;
        if let Some(gf) = gap {
            let want = cadence.should_log(round) || k + 1 == config.k;
            if want || config.target_gap.is_some() {
                let value = gf(&average);
                let hit = config.target_gap.is_some_and(|t| value <= t);
                if want || hit {
                    log.push(RunRecord { round, gap: value, inner_iters: solved.iterations, elapsed_ms: elapsed(&start) });
                }
                if hit {
                    target_round = Some(round);
                    break;
                }
            }
        }
    }

    Ok(PausOutput {
        average,
        log,
        trace,
        iterations,
        rounds: cluster.round_count() - base_round,
        inner_iters_total: inner_total,
        target_round,
        last_u: u_prev,
        last_z: z,
    })
}

fn inner_stop(
    problem: &CompositeProblem,
    geometry: &GeometrySetup,
    v0: &Point,
    cfg: &InnerConfig,
) -> Result<InnerStop> {
    let v0_bound = geometry.max_divergence_from(v0)?;
    let theory = inner::iterations_needed(cfg.l_f1, 1.0 / problem.gamma, v0_bound.max(cfg.tol), cfg.tol)?;
    Ok(match cfg.max_iters {
        Some(cap) => InnerStop { tol: cfg.tol, max_iters: cap, strict: cap < theory },
        None if theory > MAX_THEORETICAL_INNER_ITERS => {
            return Err(Error::Parameter(format!(
                "subproblem needs {theory} inner iterations at gamma = {:e}; cap gamma or set an inner iteration limit",
                problem.gamma
            )))
        }
        None => InnerStop { tol: cfg.tol, max_iters: theory, strict: false },
    })
}

/// `max_j (Mᵀx)_j − min_i (My)_i`
pub fn duality_gap(m: &Array2<f64>, x: &Array1<f64>, y: &Array1<f64>) -> f64 {
    let best_response_y = m.t().dot(x).fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let best_response_x = m.dot(y).fold(f64::INFINITY, |a, &b| a.min(b));
    (best_response_y - best_response_x).max(0.0)
}

/// Duality gap of a two-block point.
pub fn matrix_game_gap(m: &Array2<f64>) -> impl Fn(&Point) -> f64 + Sync + '_ {
    move |z: &Point| duality_gap(m, z.block(0), z.block(1))
}

/// Lower bound on `Gap(u) = max_z ⟨F(z), u − z⟩` from random domain points
/// and, on simplex products of manageable size, every vertex.
pub fn gap_function_estimate(
    f_avg: &dyn Operator,
    geometry: &GeometrySetup,
    u: &Point,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    let mut consider = |z: &Point| -> Result<()> {
        let f = f_avg.evaluate(z)?;
        best = best.max(f.pair(&(u - z)));
        Ok(())
    };
    if geometry.domain() == crate::geometry::Domain::SimplexProduct {
        let dims = geometry.dims();
        let count: usize = dims.iter().product();
        if count <= 100_000 {
            let mut idx = vec![0usize; dims.len()];
            loop {
                let z = Point::new(
                    dims.iter()
                        .zip(&idx)
                        .map(|(&n, &i)| {
                            let mut b = Array1::zeros(n);
                            b[i] = 1.0;
                            b
                        })
                        .collect(),
                );
                consider(&z)?;
                let mut carry = true;
                for (slot, &n) in idx.iter_mut().zip(dims) {
                    if carry {
                        *slot += 1;
                        carry = *slot == n;
                        if carry {
                            *slot = 0;
                        }
                    }
                }
                if carry {
                    break;
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let z = geometry.sample_point(&mut rng);
        consider(&z)?;
    }
    Ok(best.max(0.0))
}
