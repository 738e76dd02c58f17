//! Stochastic matrix-game experiments: data generation, sharding, constant
//! estimation, solver comparison and CSV output.
//!
//! Each local sample is `A_t = (1 + ξ_t)·C` with a Rademacher `ξ_t`, so every
//! sample is either `0` or `2C` and the global mean concentrates around `C`.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::baselines::{euclidean_paus_run, mirror_prox_run, MirrorProxConfig};
use crate::cluster::ClusterState;
use crate::error::{Error, Result};
use crate::geometry::{GeometrySetup, NormTag, Point};
use crate::operators::{lipschitz_matrix_game, similarity_matrix_game, spectral_norm, SaddleBilinear, Shard, SimilarityConstants};
use crate::paus::{matrix_game_gap, paus_run, LogCadence, PausConfig, PausOutput, RunRecord};

/// Seed of the per-row weights of the synthetic base matrix. Fixed so that the
/// base matrix does not change with the game seed.
pub const SYNTHETIC_WEIGHT_SEED: u64 = 20_240_601;
/// Decay rate of the synthetic base matrix.
pub const SYNTHETIC_THETA: f64 = 0.8;

#[derive(Clone, Debug, PartialEq)]
pub enum BaseMatrix {
    /// `C_ij = w_i (1 − exp(−θ|i−j|))` with `w_i ~ U[0.5, 1.5]`, scaled to
    /// unit max entry.
    Synthetic { theta: f64 },
    /// Plain text: `d`, then `d` rows of `d` numbers.
    FromFile(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct GameSpec {
    pub d: usize,
    /// Total number of local samples.
    pub t: usize,
    pub m: usize,
    pub seed: u64,
    pub base: BaseMatrix,
    /// Draw an independent `ξ` per entry instead of per matrix.
    pub per_entry: bool,
}

impl Default for GameSpec {
    fn default() -> Self {
        Self { d: 25, t: 10_000, m: 5, seed: 1, base: BaseMatrix::Synthetic { theta: SYNTHETIC_THETA }, per_entry: false }
    }
}

impl GameSpec {
    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::Config(format!("d must be at least 2, got {}", self.d)));
        }
        if self.m == 0 || self.t == 0 || !self.t.is_multiple_of(self.m) {
            return Err(Error::Config(format!("T = {} must be a positive multiple of m = {}", self.t, self.m)));
        }
        Ok(())
    }

    /// Samples per worker.
    pub fn n(&self) -> usize {
        self.t / self.m
    }
}

pub fn synthetic_base(d: usize, theta: f64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(SYNTHETIC_WEIGHT_SEED);
    let w: Vec<f64> = (0..d).map(|_| rng.random_range(0.5..1.5)).collect();
    let c = Array2::from_shape_fn((d, d), |(i, j)| w[i] * (1.0 - (-theta * (i as f64 - j as f64).abs()).exp()));
    let max = lipschitz_matrix_game(&c);
    if max > 0.0 {
        c / max
    } else {
        c
    }
}

pub fn read_matrix_file(path: &Path) -> Result<Array2<f64>> {
    let text = fs::read_to_string(path)?;
    let mut tokens = text.split_whitespace();
    let d: usize = tokens
        .next()
        .ok_or_else(|| Error::Config(format!("{}: empty matrix file", path.display())))?
        .parse()
        .map_err(|e| Error::Config(format!("{}: bad dimension: {e}", path.display())))?;
    let values = tokens
        .map(|t| t.parse::<f64>().map_err(|e| Error::Config(format!("{}: bad entry {t:?}: {e}", path.display()))))
        .collect::<Result<Vec<_>>>()?;
    if values.len() != d * d {
        return Err(Error::Config(format!("{}: expected {} entries, found {}", path.display(), d * d, values.len())));
    }
    Array2::from_shape_vec((d, d), values).map_err(|e| Error::Shape(e.to_string()))
}

pub fn base_matrix(spec: &GameSpec) -> Result<Array2<f64>> {
    match &spec.base {
        BaseMatrix::Synthetic { theta } => Ok(synthetic_base(spec.d, *theta)),
        BaseMatrix::FromFile(path) => {
            let c = read_matrix_file(path)?;
            if c.nrows() != spec.d {
                return Err(Error::Config(format!("matrix file has d = {} but spec asks for {}", c.nrows(), spec.d)));
            }
            Ok(c)
        }
    }
}

/// Draws the samples one at a time and hands each to `sink`.
fn for_each_sample(spec: &GameSpec, c: &Array2<f64>, mut sink: impl FnMut(usize, &Array2<f64>)) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let twice = c * 2.0;
    let zero = Array2::zeros(c.dim());
    let mut sample = Array2::zeros(c.dim());
    for t in 0..spec.t {
        if spec.per_entry {
            sample.zip_mut_with(c, |s, &cij| *s = if rng.random::<bool>() { 2.0 * cij } else { 0.0 });
            sink(t, &sample);
        } else {
            sink(t, if rng.random::<bool>() { &twice } else { &zero });
        }
    }
}

/// All `T` samples.
pub fn generate_game(spec: &GameSpec) -> Result<Vec<Array2<f64>>> {
    spec.validate()?;
    let c = base_matrix(spec)?;
    let mut out = Vec::with_capacity(spec.t);
    for_each_sample(spec, &c, |_, a| out.push(a.clone()));
    Ok(out)
}

/// Per-worker sample means, equal to `shard_means(generate_game(spec), m)`
/// without holding every sample.
pub fn game_shard_means(spec: &GameSpec) -> Result<Vec<Array2<f64>>> {
    spec.validate()?;
    let c = base_matrix(spec)?;
    let n = spec.n();
    let mut sums = vec![Array2::zeros(c.dim()); spec.m];
    for_each_sample(spec, &c, |t, a| sums[t / n] += a);
    Ok(sums.into_iter().map(|s| s / n as f64).collect())
}

/// Mean of equally sized shard means, summed in worker order.
pub fn global_mean(shards: &[Array2<f64>]) -> Array2<f64> {
    let mut acc = Array2::zeros(shards[0].dim());
    for s in shards {
        acc += s;
    }
    acc / shards.len() as f64
}

/// `L`, `L_F1` and `δ` in the `ℓ1`/`ℓ∞` pairing.
pub fn estimate_constants(shards: &[Array2<f64>]) -> Result<SimilarityConstants> {
    if shards.is_empty() {
        return Err(Error::Config("no shards".into()));
    }
    let mean = global_mean(shards);
    SimilarityConstants::new(
        lipschitz_matrix_game(&mean),
        lipschitz_matrix_game(&shards[0]),
        similarity_matrix_game(&mean, &shards[0])?,
        0.0,
        NormTag::L1,
    )
}

/// Same constants in the Euclidean pairing (spectral norms).
pub fn estimate_constants_euclidean(shards: &[Array2<f64>]) -> Result<SimilarityConstants> {
    if shards.is_empty() {
        return Err(Error::Config("no shards".into()));
    }
    let mean = global_mean(shards);
    SimilarityConstants::new(
        spectral_norm(&mean),
        spectral_norm(&shards[0]),
        spectral_norm(&(&mean - &shards[0])),
        0.0,
        NormTag::L2,
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SolverKind {
    Paus,
    MirrorProx,
    /// PAUS with Euclidean geometry, standing in for a Euclidean similarity
    /// method.
    Euclidean,
}

impl SolverKind {
    pub const ALL: [SolverKind; 3] = [SolverKind::Paus, SolverKind::MirrorProx, SolverKind::Euclidean];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Paus => "paus",
            SolverKind::MirrorProx => "mirror-prox",
            SolverKind::Euclidean => "euclidean",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paus" => Ok(SolverKind::Paus),
            "mirror-prox" | "mp" => Ok(SolverKind::MirrorProx),
            "euclidean" => Ok(SolverKind::Euclidean),
            _ => Err(Error::Config(format!("unknown solver {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Budget {
    /// Outer iterations; each uses two rounds.
    pub k: usize,
    /// Stop early once the duality gap reaches this value.
    pub target_gap: Option<f64>,
}

/// A prepared game: shards, the global mean and both sets of constants.
#[derive(Clone, Debug)]
pub struct PreparedGame {
    pub spec: GameSpec,
    pub shards: Vec<Array2<f64>>,
    pub mean: Array2<f64>,
    pub constants: SimilarityConstants,
    pub constants_euclidean: SimilarityConstants,
}

impl PreparedGame {
    pub fn new(spec: &GameSpec) -> Result<Self> {
        let shards = game_shard_means(spec)?;
        Self::from_shards(spec.clone(), shards)
    }

    pub fn from_shards(spec: GameSpec, shards: Vec<Array2<f64>>) -> Result<Self> {
        let mean = global_mean(&shards);
        let constants = estimate_constants(&shards)?;
        let constants_euclidean = estimate_constants_euclidean(&shards)?;
        Ok(Self { spec, shards, mean, constants, constants_euclidean })
    }

    pub fn cluster(&self, parallel: bool) -> Result<ClusterState> {
        let shards = self.shards.iter().map(|a| Arc::new(SaddleBilinear::new(a.clone())) as Shard).collect();
        ClusterState::new(shards)?.with_parallel(parallel)
    }

    pub fn dims(&self) -> [usize; 2] {
        [self.mean.nrows(), self.mean.ncols()]
    }

    /// `(L, L_F1, δ, γ_true)` of a solver, in its own pairing.
    pub fn solver_constants(&self, kind: SolverKind) -> (f64, f64, f64, f64) {
        let (c, gamma) = match kind {
            SolverKind::Paus => (&self.constants, 1.0 / self.constants.delta),
            SolverKind::MirrorProx => (&self.constants, 1.0 / self.constants.l),
            SolverKind::Euclidean => (&self.constants_euclidean, 1.0 / self.constants_euclidean.delta),
        };
        (c.l, c.l_f1, c.delta, gamma)
    }

    /// Runs one solver on a fresh cluster with stepsize `c·γ_true`.
    pub fn run_solver(&self, kind: SolverKind, budget: Budget, c: f64, parallel: bool, cadence: LogCadence) -> Result<PausOutput> {
        let mut cluster = self.cluster(parallel)?;
        let gap = matrix_game_gap(&self.mean);
        let dims = self.dims();
        let z0 = Point::uniform(&dims);
        let (_, l_f1, delta, gamma_true) = self.solver_constants(kind);
        match kind {
            SolverKind::MirrorProx => {
                let mut cfg = MirrorProxConfig::new(GeometrySetup::entropy_simplex(&dims), z0, self.constants.l, budget.k);
                cfg.stepsize = c * gamma_true;
                cfg.cadence = cadence;
                cfg.target_gap = budget.target_gap;
                mirror_prox_run(&cfg, &mut cluster, Some(&gap))
            }
            SolverKind::Paus | SolverKind::Euclidean => {
                let geometry = if kind == SolverKind::Paus {
                    GeometrySetup::entropy_simplex(&dims)
                } else {
                    GeometrySetup::euclidean_simplex(&dims)
                };
                let mut cfg = PausConfig::new(geometry, z0, delta, l_f1, budget.k);
                cfg.gamma = c * gamma_true;
                cfg.allow_large_step = c > 1.0;
                cfg.cadence = cadence;
                cfg.target_gap = budget.target_gap;
                if kind == SolverKind::Paus {
                    paus_run(&cfg, &mut cluster, Some(&gap))
                } else {
                    euclidean_paus_run(&cfg, &mut cluster, Some(&gap))
                }
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolverSeries {
    pub solver: SolverKind,
    /// File stem of the series.
    pub label: String,
    pub log: Vec<RunRecord>,
    pub l: f64,
    pub l_f1: f64,
    pub delta: f64,
    pub gamma: f64,
    pub target_round: Option<u64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub spec: GameSpec,
    pub constants: SimilarityConstants,
    pub series: Vec<SolverSeries>,
}

/// Each solver on identical shards; a failing solver is recorded and the
/// others still run.
pub fn run_comparison(game: &PreparedGame, solvers: &[SolverKind], budget: Budget, c: f64, parallel: bool) -> ExperimentResult {
    let series = solvers
        .iter()
        .map(|&kind| run_series(game, kind, budget, c, parallel, kind.name().to_string()))
        .collect();
    ExperimentResult { spec: game.spec.clone(), constants: game.constants, series }
}

/// One solver at several stepsize multipliers.
pub fn run_sweep(game: &PreparedGame, kind: SolverKind, multipliers: &[f64], budget: Budget, parallel: bool) -> ExperimentResult {
    let series = multipliers
        .iter()
        .map(|&c| run_series(game, kind, budget, c, parallel, format!("{}_c{}", kind.name(), c)))
        .collect();
    ExperimentResult { spec: game.spec.clone(), constants: game.constants, series }
}

fn run_series(game: &PreparedGame, kind: SolverKind, budget: Budget, c: f64, parallel: bool, label: String) -> SolverSeries {
    let (l, l_f1, delta, gamma_true) = game.solver_constants(kind);
    let mut s = SolverSeries { solver: kind, label, log: Vec::new(), l, l_f1, delta, gamma: c * gamma_true, target_round: None, error: None };
    match game.run_solver(kind, budget, c, parallel, LogCadence::default()) {
        Ok(out) => {
            s.log = out.log;
            s.target_round = out.target_round;
        }
        Err(e) => s.error = Some(e.to_string()),
    }
    s
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?)
}

/// Writes one `<label>.csv` per series plus `constants.csv`. Elapsed times
/// are written as 0 unless `wall_clock` is set, so that repeated runs produce
/// identical files.
pub fn emit_csv(result: &ExperimentResult, dir: &Path, wall_clock: bool) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for s in &result.series {
        let path = dir.join(format!("{}.csv", s.label));
        write_series_csv(&path, &s.log, wall_clock)?;
        written.push(path);
    }
    let path = dir.join("constants.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["solver", "L", "L_F1", "delta", "gamma"])?;
    for s in &result.series {
        w.write_record([s.label.clone(), s.l.to_string(), s.l_f1.to_string(), s.delta.to_string(), s.gamma.to_string()])?;
    }
    w.flush()?;
    written.push(path);
    Ok(written)
}

pub fn write_series_csv(path: &Path, log: &[RunRecord], wall_clock: bool) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["round", "gap", "inner_iters", "elapsed_ms"])?;
    for r in log {
        let elapsed = if wall_clock { r.elapsed_ms } else { 0.0 };
        w.write_record([r.round.to_string(), r.gap.to_string(), r.inner_iters.to_string(), elapsed.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_series_csv(path: &Path) -> Result<Vec<RunRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in r.records() {
        let row = row?;
        let field = |i: usize| row.get(i).ok_or_else(|| Error::Config(format!("{}: short row", path.display())));
        let bad = |e: &dyn fmt::Display| Error::Config(format!("{}: {e}", path.display()));
        out.push(RunRecord {
            round: field(0)?.parse().map_err(|e| bad(&e))?,
            gap: field(1)?.parse().map_err(|e| bad(&e))?,
            inner_iters: field(2)?.parse().map_err(|e| bad(&e))?,
            elapsed_ms: field(3)?.parse().map_err(|e| bad(&e))?,
        });
    }
    Ok(out)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Slope of a logged series over `round ∈ [lo, hi]`.
pub fn series_slope(log: &[RunRecord], lo: u64, hi: u64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = log
        .iter()
        .filter(|r| r.round >= lo && r.round <= hi)
        .map(|r| (r.round as f64, r.gap))
        .collect();
    loglog_slope(&pts)
}

/// First logged round with gap at most `eps`.
pub fn rounds_to_gap(log: &[RunRecord], eps: f64) -> Option<u64> {
    log.iter().find(|r| r.gap <= eps).map(|r| r.round)
}
