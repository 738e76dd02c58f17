//! Monotone operators, the bilinear saddle operator of a matrix game, the
//! averaged operator `F = (1/m) Σ F_i`, and estimators for `L` and `δ`.

use std::fmt::Debug;
use std::sync::Arc;

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{DualVector, GeometrySetup, NormTag, Point};

pub trait Operator: Send + Sync + Debug {
    fn evaluate(&self, z: &Point) -> Result<DualVector>;

    /// Block dimensions of the points this operator accepts.
    fn shape(&self) -> Vec<usize>;
}

/// One worker's local operator.
pub type Shard = Arc<dyn Operator>;

/// `F(x, y) = (M y, −Mᵀ x)` for `min_x max_y xᵀ M y`.
#[derive(Clone, Debug, PartialEq)]
pub struct SaddleBilinear {
    matrix: Array2<f64>,
}

impl SaddleBilinear {
    pub fn new(matrix: Array2<f64>) -> Self {
        Self { matrix }
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }
}

impl Operator for SaddleBilinear {
    fn evaluate(&self, z: &Point) -> Result<DualVector> {
        evaluate_saddle(self, z)
    }

    fn shape(&self) -> Vec<usize> {
        vec![self.matrix.nrows(), self.matrix.ncols()]
    }
}

pub fn evaluate_saddle(op: &SaddleBilinear, z: &Point) -> Result<DualVector> {
    z.ensure_shape(&op.shape())?;
    let x = z.block(0);
    let y = z.block(1);
    Ok(DualVector::new(vec![op.matrix.dot(y), -op.matrix.t().dot(x)]))
}

/// `F(z) = A z + b` on a single block.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineOperator {
    matrix: Array2<f64>,
    bias: Array1<f64>,
}

impl AffineOperator {
    pub fn new(matrix: Array2<f64>, bias: Array1<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() != bias.len() {
            return Err(Error::Shape(format!(
                "affine operator needs a square matrix matching the bias, got {:?} and {}",
                matrix.dim(),
                bias.len()
            )));
        }
        Ok(Self { matrix, bias })
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn bias(&self) -> &Array1<f64> {
        &self.bias
    }
}

impl Operator for AffineOperator {
    fn evaluate(&self, z: &Point) -> Result<DualVector> {
        z.ensure_shape(&self.shape())?;
        Ok(DualVector::single(self.matrix.dot(z.block(0)) + &self.bias))
    }

    fn shape(&self) -> Vec<usize> {
        vec![self.bias.len()]
    }
}

/// Coordinate-wise mean of several operators, summed in index order.
#[derive(Clone, Debug)]
pub struct MeanOperator {
    shards: Vec<Shard>,
}

impl MeanOperator {
    pub fn new(shards: Vec<Shard>) -> Result<Self> {
        if shards.is_empty() {
            return Err(Error::Config("mean of an empty shard list".into()));
        }
        let shape = shards[0].shape();
        if shards.iter().any(|s| s.shape() != shape) {
            return Err(Error::Shape("shards disagree on shape".into()));
        }
        Ok(Self { shards })
    }
}

impl Operator for MeanOperator {
    fn evaluate(&self, z: &Point) -> Result<DualVector> {
        average_operator(&self.shards, z)
    }

    fn shape(&self) -> Vec<usize> {
        self.shards[0].shape()
    }
}

pub fn average_operator(shards: &[Shard], z: &Point) -> Result<DualVector> {
    let evals = shards.iter().map(|s| s.evaluate(z)).collect::<Result<Vec<_>>>()?;
    mean_of(evals)
}

/// Mean of dual vectors in the given order.
pub(crate) fn mean_of(evals: Vec<DualVector>) -> Result<DualVector> {
    let m = evals.len();
    let mut iter = evals.into_iter();
    let mut acc = iter.next().ok_or_else(|| Error::Config("mean of an empty shard list".into()))?;
    for e in iter {
        e.ensure_shape(&acc.shape())?;
        acc.axpy(1.0, &e);
    }
    Ok(if m == 1 { acc } else { acc.scaled(1.0 / m as f64) })
}

/// Lipschitz constant of the saddle operator in the `ℓ1`/`ℓ∞` pairing.
pub fn lipschitz_matrix_game(m: &Array2<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// `δ` of the local saddle operator relative to the global one, `ℓ1`/`ℓ∞`.
pub fn similarity_matrix_game(global: &Array2<f64>, local: &Array2<f64>) -> Result<f64> {
    if global.dim() != local.dim() {
        return Err(Error::Shape(format!("{:?} vs {:?}", global.dim(), local.dim())));
    }
    Ok(lipschitz_matrix_game(&(global - local)))
}

/// Largest singular value by power iteration on `MᵀM`.
pub fn spectral_norm(m: &Array2<f64>) -> f64 {
    let n = m.ncols();
    if n == 0 || m.nrows() == 0 {
        return 0.0;
    }
    // a deterministic start with no special alignment
    let mut v = Array1::from_iter((0..n).map(|i| 1.0 + 0.1 * ((i * 7919) % 97) as f64 / 97.0));
    v /= v.dot(&v).sqrt();
    let mut sigma = 0.0;
    for _ in 0..20_000 {
        let w = m.t().dot(&m.dot(&v));
        let norm = w.dot(&w).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let next = norm.sqrt();
        v = w / norm;
        if (next - sigma).abs() <= 1e-15 * next {
            sigma = next;
            break;
        }
        sigma = next;
    }
    sigma
}

/// Constants of a similarity instance, tagged with the norm they were measured
/// in.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimilarityConstants {
    pub l: f64,
    pub l_f1: f64,
    pub delta: f64,
    pub mu: f64,
    pub norm: NormTag,
}

impl SimilarityConstants {
    pub fn new(l: f64, l_f1: f64, delta: f64, mu: f64, norm: NormTag) -> Result<Self> {
        let c = Self { l, l_f1, delta, mu, norm };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let slack = 1e-12 * (1.0 + self.l + self.l_f1);
        if !(self.delta >= 0.0) || self.delta > self.l + self.l_f1 + slack {
            return Err(Error::Parameter(format!(
                "delta {} outside [0, L + L_F1 = {}]",
                self.delta,
                self.l + self.l_f1
            )));
        }
        if !(self.mu >= 0.0) || self.mu > self.l + slack {
            return Err(Error::Parameter(format!("mu {} outside [0, L = {}]", self.mu, self.l)));
        }
        Ok(())
    }

    /// Fails when these constants were measured in a different norm.
    pub fn ensure_norm(&self, tag: NormTag) -> Result<()> {
        if self.norm == tag {
            Ok(())
        } else {
            Err(Error::Config(format!("constants measured in {} but used with {}", self.norm, tag)))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimilarityReport {
    pub max_ratio: f64,
    pub pass: bool,
}

/// Largest observed `‖(F1 − F)(u) − (F1 − F)(v)‖* / ‖u − v‖` over random
/// feasible pairs, in the norms of `geometry`.
pub fn empirical_similarity_check(
    f1: &dyn Operator,
    f_avg: &dyn Operator,
    geometry: &GeometrySetup,
    delta: f64,
    trials: usize,
    seed: u64,
) -> Result<SimilarityReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_ratio: f64 = 0.0;
    for _ in 0..trials.max(1) {
        let u = geometry.sample_point(&mut rng);
        let v = geometry.sample_point(&mut rng);
        let dist = geometry.norm(&(&u - &v));
        if dist == 0.0 {
            continue;
        }
        let du = &f1.evaluate(&u)? - &f_avg.evaluate(&u)?;
        let dv = &f1.evaluate(&v)? - &f_avg.evaluate(&v)?;
        max_ratio = max_ratio.max(geometry.dual_norm(&(&du - &dv)) / dist);
    }
    Ok(SimilarityReport { max_ratio, pass: max_ratio <= delta * (1.0 + 1e-9) })
}
