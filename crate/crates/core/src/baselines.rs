//! Comparison solvers: distributed Mirror Prox, which ignores similarity, and
//! PAUS with Euclidean geometry on the simplex.

use std::time::Instant;

use crate::cluster::ClusterState;
use crate::error::{Error, Result};
use crate::geometry::{DgfKind, Domain, GeometrySetup, Point};
use crate::paus::{paus_run, CadenceState, GapFn, LogCadence, PausConfig, PausOutput, RunRecord};

#[derive(Clone, Debug)]
pub struct MirrorProxConfig {
    /// Defaults to `1/L`.
    pub stepsize: f64,
    pub k: usize,
    pub geometry: GeometrySetup,
    pub z0: Point,
    pub cadence: LogCadence,
    pub target_gap: Option<f64>,
}

impl MirrorProxConfig {
    pub fn new(geometry: GeometrySetup, z0: Point, l: f64, k: usize) -> Self {
        Self { stepsize: 1.0 / l, k, geometry, z0, cadence: LogCadence::default(), target_gap: None }
    }
}

/// `w = prox(z, F(z), s)`, `z' = prox(z, F(w), s)`; two rounds per iteration;
/// returns the average of the `w`.
pub fn mirror_prox_run(config: &MirrorProxConfig, cluster: &mut ClusterState, gap: Option<GapFn>) -> Result<PausOutput> {
    if config.k == 0 {
        return Err(Error::Parameter("K must be at least 1".into()));
    }
    if !(config.stepsize > 0.0) || !config.stepsize.is_finite() {
        return Err(Error::Parameter(format!("stepsize must be positive and finite, got {}", config.stepsize)));
    }
    if config.target_gap.is_some() && gap.is_none() {
        return Err(Error::Config("a target gap needs a gap function".into()));
    }
    config.geometry.check_domain(&config.z0)?;
    config.z0.ensure_shape(&cluster.shape())?;

    let start = Instant::now();
    let elapsed = || start.elapsed().as_secs_f64() * 1e3;
    let base_round = cluster.round_count();
    let geometry = &config.geometry;
    let mut cadence = CadenceState::new(config.cadence);
    let mut log = Vec::new();
    if let Some(g) = gap {
        log.push(RunRecord { round: 0, gap: g(&config.z0), inner_iters: 0, elapsed_ms: elapsed() });
    }

    let mut z = config.z0.clone();
    let mut w_last = z.clone();
    let mut average = Point::zeros(&z.shape());
    let mut target_round = None;
    let mut iterations = 0;
    for k in 0..config.k {
        let fz = cluster.gather_average(std::slice::from_ref(&z))?.pop().expect("one point");
        let w = geometry.prox_map(&z, &fz, config.stepsize)?;
        let fw = cluster.gather_average(std::slice::from_ref(&w))?.pop().expect("one point");
        z = geometry.prox_map(&z, &fw, config.stepsize)?;
        average.axpy(1.0 / (k + 1) as f64, &(&w - &average));
        w_last = w;
        iterations = k + 1;

        let round = cluster.round_count() - base_round;
        if let Some(gf) = gap {
            let want = cadence.should_log(round) || k + 1 == config.k;
            if want || config.target_gap.is_some() {
                let value = gf(&average);
                let hit = config.target_gap.is_some_and(|t| value <= t);
                if want || hit {
                    log.push(RunRecord { round, gap: value, inner_iters: 0, elapsed_ms: elapsed() });
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
        trace: None,
        iterations,
        rounds: cluster.round_count() - base_round,
        inner_iters_total: 0,
        target_round,
        last_u: w_last,
        last_z: z,
    })
}

/// PAUS whose prox maps are Euclidean projections onto the simplex. The
/// caller supplies `δ` and `L_F1` measured in the `ℓ2` pairing.
pub fn euclidean_paus_run(config: &PausConfig, cluster: &mut ClusterState, gap: Option<GapFn>) -> Result<PausOutput> {
    if config.geometry.kind() != DgfKind::Euclidean || config.geometry.domain() != Domain::SimplexProduct {
        return Err(Error::Config("the Euclidean baseline runs on a simplex product with Euclidean DGF".into()));
    }
    paus_run(config, cluster, gap)
}
