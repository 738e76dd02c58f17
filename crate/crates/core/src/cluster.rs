//! In-process simulation of a parameter-server cluster.
//!
//! Worker 0 is the server and also holds data. A call to
//! [`ClusterState::gather_average`] is one synchronized exchange: the server
//! broadcasts the query points, every worker evaluates its shard at all of
//! them, and the server averages the replies. Each exchange counts as one
//! communication round however many points it carries.

use std::sync::Arc;

use ndarray::Array2;
use rayon::prelude::*;
use rayon::ThreadPool;

use crate::error::{Error, Result};
use crate::geometry::{DualVector, Point};
use crate::operators::{mean_of, SaddleBilinear, Shard};

/// Caps the worker thread count when set.
pub const THREADS_ENV: &str = "VI_SIM_THREADS";

const BYTES_PER_COORD: u64 = 8;

#[derive(Debug)]
pub struct ClusterState {
    shards: Vec<Shard>,
    round_count: u64,
    bytes_sent: u64,
    bytes_broadcast: u64,
    parallel: bool,
    pool: Option<Arc<ThreadPool>>,
}

impl ClusterState {
    pub fn new(shards: Vec<Shard>) -> Result<Self> {
        if shards.is_empty() {
            return Err(Error::Config("a cluster needs at least one worker".into()));
        }
        let shape = shards[0].shape();
        if let Some(i) = shards.iter().position(|s| s.shape() != shape) {
            return Err(Error::Shape(format!("worker {i} disagrees with the server on shape")));
        }
        Ok(Self { shards, round_count: 0, bytes_sent: 0, bytes_broadcast: 0, parallel: false, pool: None })
    }

    /// Evaluate shards on a rayon pool. The pool size comes from
    /// `VI_SIM_THREADS` when it is set.
    pub fn with_parallel(mut self, parallel: bool) -> Result<Self> {
        self.parallel = parallel;
        self.pool = None;
        if parallel {
            if let Ok(v) = std::env::var(THREADS_ENV) {
                let n: usize = v
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
                if n == 0 {
                    return Err(Error::Config(format!("{THREADS_ENV} must be positive")));
                }
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
                self.pool = Some(Arc::new(pool));
            }
        }
        Ok(self)
    }

    pub fn m(&self) -> usize {
        self.shards.len()
    }

    pub fn shards(&self) -> &[Shard] {
        &self.shards
    }

    /// The server's own shard `F_1`.
    pub fn server_shard(&self) -> &Shard {
        &self.shards[0]
    }

    pub fn shape(&self) -> Vec<usize> {
        self.shards[0].shape()
    }

    pub fn round_count(&self) -> u64 {
        self.round_count
    }

    /// Bytes sent from workers to the server.
    pub fn bytes_sent(&self) -> u64 {
        self.bytes_sent
    }

    /// Bytes sent from the server to workers.
    pub fn bytes_broadcast(&self) -> u64 {
        self.bytes_broadcast
    }

    pub fn is_parallel(&self) -> bool {
        self.parallel
    }

    pub fn reset_counters(&mut self) {
        self.round_count = 0;
        self.bytes_sent = 0;
        self.bytes_broadcast = 0;
    }

    /// `F(z) = (1/m) Σ F_i(z)` for every point, in one round.
    pub fn gather_average(&mut self, points: &[Point]) -> Result<Vec<DualVector>> {
        if points.is_empty() {
            return Err(Error::Config("gather needs at least one point".into()));
        }
        let eval = |(i, shard): (usize, &Shard)| -> Result<Vec<DualVector>> {
            points
                .iter()
                .map(|z| shard.evaluate(z))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| Error::Worker { index: i, source: Box::new(e) })
        };
        let replies: Vec<Result<Vec<DualVector>>> = if self.parallel {
            let run = || self.shards.par_iter().enumerate().map(eval).collect();
            match &self.pool {
                Some(pool) => pool.install(run),
                None => run(),
            }
        } else {
            self.shards.iter().enumerate().map(eval).collect()
        };
        let replies = replies.into_iter().collect::<Result<Vec<_>>>()?;

        // reduce in worker order so the result does not depend on scheduling
        let mut per_point: Vec<Vec<DualVector>> = (0..points.len()).map(|_| Vec::with_capacity(self.m())).collect();
        for reply in replies {
            for (slot, f) in per_point.iter_mut().zip(reply) {
                slot.push(f);
            }
        }
        let out = per_point.into_iter().map(mean_of).collect::<Result<Vec<_>>>()?;

        let payload: u64 = points.iter().map(|z| z.len() as u64).sum::<u64>() * BYTES_PER_COORD;
        self.round_count += 1;
        self.bytes_sent += self.m() as u64 * payload;
        self.bytes_broadcast += self.m() as u64 * payload;
        Ok(out)
    }
}

/// Means of `m` contiguous equal blocks of `matrices`.
pub fn shard_means(matrices: &[Array2<f64>], m: usize) -> Result<Vec<Array2<f64>>> {
    if m == 0 || matrices.is_empty() || !matrices.len().is_multiple_of(m) {
        return Err(Error::Config(format!("{} matrices cannot be split across {m} workers", matrices.len())));
    }
    let n = matrices.len() / m;
    let dim = matrices[0].dim();
    if matrices.iter().any(|a| a.dim() != dim) {
        return Err(Error::Shape("matrices disagree on shape".into()));
    }
    Ok(matrices
        .chunks(n)
        .map(|block| {
            let mut acc = Array2::zeros(dim);
            for a in block {
                acc += a;
            }
            acc / n as f64
        })
        .collect())
}

/// Saddle-operator shards over contiguous blocks of `matrices`.
pub fn shard_data(matrices: &[Array2<f64>], m: usize) -> Result<Vec<Shard>> {
    Ok(shard_means(matrices, m)?
        .into_iter()
        .map(|a| Arc::new(SaddleBilinear::new(a)) as Shard)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::evaluate_saddle;
    use ndarray::array;

    fn saddle(m: Array2<f64>) -> Shard {
        Arc::new(SaddleBilinear::new(m))
    }

    #[test]
    fn batching_counts_one_round() {
        let m = array![[1.0, 0.0], [0.0, 2.0]];
        let mut c = ClusterState::new(vec![saddle(m.clone()), saddle(m.clone())]).unwrap();
        let z = Point::uniform(&[2, 2]);
        let f = c.gather_average(std::slice::from_ref(&z)).unwrap();
        assert_eq!(c.round_count(), 1);
        assert_eq!(f[0], evaluate_saddle(&SaddleBilinear::new(m), &z).unwrap());
        c.gather_average(&[z.clone(), z.clone()]).unwrap();
        assert_eq!(c.round_count(), 2);
        assert_eq!(c.bytes_sent(), 2 * 8 * 4 + 2 * 8 * 8);
    }

    #[test]
    fn reset_is_idempotent() {
        let mut c = ClusterState::new(vec![saddle(Array2::eye(2))]).unwrap();
        c.gather_average(&[Point::uniform(&[2, 2])]).unwrap();
        c.reset_counters();
        c.reset_counters();
        assert_eq!((c.round_count(), c.bytes_sent(), c.bytes_broadcast()), (0, 0, 0));
        c.gather_average(&[Point::uniform(&[2, 2])]).unwrap();
        assert_eq!(c.round_count(), 1);
    }

    #[test]
    fn sharding_examples() {
        let a = array![[1.0, 2.0], [3.0, 4.0]];
        let b = array![[0.0, -1.0], [5.0, 0.5]];
        let means = shard_means(&[a.clone(), a.clone(), b.clone(), b.clone()], 2).unwrap();
        assert_eq!(means, vec![a.clone(), b.clone()]);
        let one = shard_means(&[a.clone(), b.clone()], 1).unwrap();
        assert_eq!(one[0], (&a + &b) / 2.0);
        assert!(matches!(shard_means(&[a.clone(), b, a], 2), Err(Error::Config(_))));
    }

    #[test]
    fn worker_errors_carry_index() {
        let mut c = ClusterState::new(vec![saddle(Array2::eye(2))]).unwrap();
        let err = c.gather_average(&[Point::uniform(&[3, 3])]).unwrap_err();
        assert!(matches!(err, Error::Worker { index: 0, .. }));
    }
}
