//! PAUS-R: PAUS restarted from its own output with a recentered DGF, for
//! strongly monotone operators. Each stage of `K = ⌈4ω/(μγ)⌉` iterations
//! halves the distance to the solution, so `N = ⌈½ log₂(R0²/ε)⌉` stages reach
//! `‖ẑ − z*‖² ≤ ε`.

use std::sync::Arc;

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::cluster::ClusterState;
use crate::error::{Error, Result};
use crate::geometry::{DgfKind, GeometrySetup, Point};
use crate::numeric::lp_norm;
use crate::operators::{spectral_norm, AffineOperator, Shard};
use crate::paus::{paus_run, InnerConfig, LogCadence, PausConfig};

/// Slack on top of the exact ceiling so that `4.000000000001` stays 4.
const CEIL_GUARD: f64 = 1e-9;

fn guarded_ceil(x: f64) -> usize {
    (x - CEIL_GUARD * x.abs().max(1.0)).ceil().max(0.0) as usize
}

/// `⌈4ω/(μγ)⌉`, at least 1.
pub fn stage_length(mu: f64, gamma: f64, omega: f64) -> Result<usize> {
    for (name, v) in [("mu", mu), ("gamma", gamma), ("omega", omega)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::Parameter(format!("{name} must be positive and finite, got {v}")));
        }
    }
    Ok(guarded_ceil(4.0 * omega / (mu * gamma)).max(1))
}

/// `⌈½ log₂(R0²/ε)⌉`, or 0 when `ε ≥ R0²`.
pub fn num_restarts(r0_sq: f64, eps: f64) -> Result<usize> {
    if !(eps > 0.0) || !(r0_sq >= 0.0) || !r0_sq.is_finite() {
        return Err(Error::Parameter(format!("need eps > 0 and finite R0² ≥ 0, got {eps}, {r0_sq}")));
    }
    if eps >= r0_sq {
        return Ok(0);
    }
    Ok(guarded_ceil(0.5 * (r0_sq / eps).log2()).max(1))
}

#[derive(Clone, Debug)]
pub struct RestartConfig {
    /// Strong monotonicity constant in the setup's norm.
    pub mu: f64,
    /// Similarity constant in the setup's norm.
    pub delta: f64,
    pub eps: f64,
    /// Ball setup; its DGF is centered at `z0` before the first stage.
    pub geometry: GeometrySetup,
    pub z0: Point,
    /// Upper bound on `‖z0 − z*‖²`.
    pub r0_sq: f64,
    pub inner: InnerConfig,
    /// Defaults to `1/δ`.
    pub gamma: Option<f64>,
    /// Fail with [`Error::RestartStall`] when a stage shrinks the distance
    /// to a known solution by less than this factor.
    pub stall_limit: Option<f64>,
}

impl RestartConfig {
    /// Subproblems are solved to `min(1e-12, ε²·1e-4)`: stage outputs usually
    /// get much closer to the solution than the halving bound, and a looser
    /// inner accuracy becomes the floor of the last stages.
    pub fn new(geometry: GeometrySetup, z0: Point, mu: f64, delta: f64, l_f1: f64, r0_sq: f64, eps: f64) -> Self {
        let mut inner = InnerConfig::new(l_f1);
        inner.tol = (eps * eps * 1e-4).min(1e-12);
        Self { mu, delta, eps, geometry, z0, r0_sq, inner, gamma: None, stall_limit: None }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma.unwrap_or(1.0 / self.delta)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StageRecord {
    pub stage: usize,
    pub k: usize,
    pub omega: f64,
    /// Rounds used up to the end of this stage.
    pub rounds: u64,
    /// Distance from the stage output to the known solution.
    pub distance: Option<f64>,
    /// `distance / previous distance`.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct RestartOutput {
    pub point: Point,
    pub stages: Vec<StageRecord>,
    /// Stage length of the first stage.
    pub k: usize,
    pub n: usize,
    pub rounds: u64,
}

pub fn paus_r(config: &RestartConfig, cluster: &mut ClusterState, z_star: Option<&Point>) -> Result<RestartOutput> {
    if config.geometry.kind() == DgfKind::EntropySimplex {
        return Err(Error::UnsupportedRecenter("restarts need a ball setup".into()));
    }
    if !(config.mu > 0.0) || !(config.delta > 0.0) {
        return Err(Error::Parameter("restarts need mu > 0 and delta > 0".into()));
    }
    config.geometry.check_domain(&config.z0)?;
    let gamma = config.gamma();
    let y0 = &config.z0;
    let base = config.geometry.clone().centered_at(y0)?;
    let n = num_restarts(config.r0_sq, config.eps)?;
    let base_round = cluster.round_count();

    let mut start = y0.clone();
    let mut setup = base.clone();
    let mut stages = Vec::with_capacity(n);
    let mut prev_distance = z_star.map(|zs| config.geometry.norm(&(y0 - zs)));
    let mut first_k = 0;
    for stage in 0..n {
        let omega = setup.omega_d(&start)?;
        let k = stage_length(config.mu, gamma, omega)?;
        if stage == 0 {
            first_k = k;
        }
        let mut cfg = PausConfig::new(setup.clone(), start.clone(), config.delta, config.inner.l_f1, k);
        cfg.gamma = gamma;
        cfg.inner = config.inner.clone();
        cfg.cadence = LogCadence::every_iteration();
        let out = paus_run(&cfg, cluster, None)?;
        let u = out.average;

        let distance = z_star.map(|zs| config.geometry.norm(&(&u - zs)));
        let ratio = match (distance, prev_distance) {
            (Some(d), Some(p)) if p > 0.0 => Some(d / p),
            _ => None,
        };
        stages.push(StageRecord { stage, k, omega, rounds: cluster.round_count() - base_round, distance, ratio });
        if let (Some(r), Some(limit)) = (ratio, config.stall_limit) {
            if r > limit {
                return Err(Error::RestartStall { stage, ratio: r, limit });
            }
        }
        prev_distance = distance;
        setup = base.recenter(&u, y0)?;
        start = u;
    }
    Ok(RestartOutput { point: start, stages, k: first_k, n, rounds: cluster.round_count() - base_round })
}

/// Strongly monotone affine test problem split across workers:
/// `F_i(z) = (A + E_i + μI) z + b` with `A` and `E_i` antisymmetric,
/// `Σ E_i = 0` and `‖E_1‖₂ = δ`, so `F(z) = (A + μI)(z − z*)`.
#[derive(Clone, Debug)]
pub struct StronglyMonotoneFamily {
    pub shards: Vec<Shard>,
    pub z_star: Point,
    pub mu: f64,
    /// `‖F1 − F‖` in the Euclidean pairing.
    pub delta: f64,
    pub l: f64,
    pub l_f1: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FamilySpec {
    pub d: usize,
    pub m: usize,
    pub mu: f64,
    pub delta: f64,
    /// Spectral norm of the shared antisymmetric part.
    pub coupling: f64,
    /// `‖z*‖_p` for the domain exponent `p`.
    pub solution_norm: f64,
    pub p: f64,
    pub seed: u64,
}

fn random_antisymmetric(d: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let g: Array2<f64> = Array2::from_shape_simple_fn((d, d), || StandardNormal.sample(rng));
    &g - &g.t()
}

pub fn strongly_monotone_family(spec: FamilySpec) -> Result<StronglyMonotoneFamily> {
    let FamilySpec { d, m, mu, delta, coupling, solution_norm, p, seed } = spec;
    if d < 2 || m == 0 {
        return Err(Error::Config("family needs d ≥ 2 and m ≥ 1".into()));
    }
    if m == 1 && delta > 0.0 {
        return Err(Error::Config("a single worker has no dissimilarity".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = random_antisymmetric(d, &mut rng);
    let a = &a * (coupling / spectral_norm(&a).max(f64::MIN_POSITIVE));

    let raw: Vec<Array2<f64>> = (0..m).map(|_| random_antisymmetric(d, &mut rng)).collect();
    let mut mean = Array2::zeros((d, d));
    for b in &raw {
        mean += b;
    }
    mean /= m as f64;
    let mut deviations: Vec<Array2<f64>> = raw.iter().map(|b| b - &mean).collect();
    if m > 1 {
        let scale = delta / spectral_norm(&deviations[0]);
        for e in deviations.iter_mut() {
            *e *= scale;
        }
    }

    let dir: Array1<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
    let z_star = &dir * (solution_norm / lp_norm(&dir, p));
    let reg = &a + &(Array2::<f64>::eye(d) * mu);
    let bias = -reg.dot(&z_star);

    let shards = deviations
        .iter()
        .map(|e| AffineOperator::new(&reg + e, bias.clone()).map(|op| Arc::new(op) as Shard))
        .collect::<Result<Vec<_>>>()?;
    Ok(StronglyMonotoneFamily {
        shards,
        z_star: Point::single(z_star),
        mu,
        delta: if m > 1 { spectral_norm(&deviations[0]) } else { 0.0 },
        l: spectral_norm(&reg),
        l_f1: spectral_norm(&(&reg + &deviations[0])),
    })
}
