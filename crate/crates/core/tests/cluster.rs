use std::sync::Arc;

use ndarray::Array2;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use simvi::check::random_matrix;
use simvi::cluster::{shard_data, shard_means, ClusterState};
use simvi::geometry::{DualVector, GeometrySetup, Point};
use simvi::operators::{evaluate_saddle, Operator, SaddleBilinear, Shard};
use simvi::Error;

fn shards_of(mats: &[Array2<f64>]) -> Vec<Shard> {
    mats.iter().map(|a| Arc::new(SaddleBilinear::new(a.clone())) as Shard).collect()
}

#[derive(Debug)]
struct Failing;

impl Operator for Failing {
    fn evaluate(&self, _: &Point) -> simvi::Result<DualVector> {
        Err(Error::Numerics("boom".into()))
    }

    fn shape(&self) -> Vec<usize> {
        vec![2, 2]
    }
}

#[test]
fn identical_shards_and_batching() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let m = random_matrix(3, &mut rng);
    let mut c = ClusterState::new(shards_of(&[m.clone(), m.clone(), m.clone()])).unwrap();
    let z = Point::uniform(&[3, 3]);
    let f = c.gather_average(std::slice::from_ref(&z)).unwrap();
    assert!(f[0].max_abs_diff(&evaluate_saddle(&SaddleBilinear::new(m), &z).unwrap()) < 1e-15);
    assert_eq!(c.round_count(), 1);
    c.gather_average(&[z.clone(), z.clone()]).unwrap();
    assert_eq!(c.round_count(), 2);
    // 3 workers, 6 + 12 coordinates
    assert_eq!(c.bytes_sent(), 3 * 8 * 18);
    assert!(matches!(c.gather_average(&[]), Err(Error::Config(_))));
}

#[test]
fn five_matrix_shards_average_to_mean_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mats: Vec<Array2<f64>> = (0..5).map(|_| random_matrix(7, &mut rng)).collect();
    let mean = mats.iter().fold(Array2::zeros((7, 7)), |acc, a| acc + a) / 5.0;
    let mut c = ClusterState::new(shards_of(&mats)).unwrap();
    let geo = GeometrySetup::entropy_simplex(&[7, 7]);
    let z = geo.sample_point(&mut rng);
    let f = c.gather_average(std::slice::from_ref(&z)).unwrap();
    assert!(f[0].max_abs_diff(&evaluate_saddle(&SaddleBilinear::new(mean), &z).unwrap()) < 1e-12);
}

#[test]
fn reset_examples() {
    let mut c = ClusterState::new(shards_of(&[Array2::eye(2)])).unwrap();
    let z = Point::uniform(&[2, 2]);
    c.gather_average(std::slice::from_ref(&z)).unwrap();
    c.reset_counters();
    assert_eq!((c.round_count(), c.bytes_sent()), (0, 0));
    c.reset_counters();
    assert_eq!((c.round_count(), c.bytes_sent()), (0, 0));
    c.gather_average(&[z]).unwrap();
    assert_eq!(c.round_count(), 1);
}

#[test]
fn worker_errors_carry_the_index() {
    let shards: Vec<Shard> = vec![Arc::new(SaddleBilinear::new(Array2::eye(2))), Arc::new(Failing)];
    let mut c = ClusterState::new(shards).unwrap();
    match c.gather_average(&[Point::uniform(&[2, 2])]) {
        Err(Error::Worker { index, .. }) => assert_eq!(index, 1),
        other => panic!("expected worker error, got {other:?}"),
    }
}

#[test]
fn sharding_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (m, n) = (random_matrix(3, &mut rng), random_matrix(3, &mut rng));
    let all = vec![m.clone(), n.clone(), m.clone(), n.clone()];
    let one = shard_means(&all, 1).unwrap();
    assert!((&one[0] - &((&m + &n) / 2.0)).iter().all(|v| v.abs() < 1e-15));

    let blocks = shard_means(&[m.clone(), m.clone(), n.clone(), n.clone()], 2).unwrap();
    assert_eq!(blocks, vec![m.clone(), n.clone()]);
    assert!(matches!(shard_means(&all, 3), Err(Error::Config(_))));

    let many: Vec<Array2<f64>> = (0..10_000).map(|i| Array2::from_elem((2, 2), i as f64)).collect();
    let s = shard_means(&many, 5).unwrap();
    assert_eq!(s.len(), 5);
    // block i holds samples 2000i..2000i+1999
    assert_eq!(s[1][[0, 0]], 2000.0 + 999.5);
    let global: Array2<f64> = many.iter().fold(Array2::zeros((2, 2)), |acc, a| acc + a) / 10_000.0;
    let mean: Array2<f64> = s.iter().fold(Array2::zeros((2, 2)), |acc, a| acc + a) / 5.0;
    assert!((&mean - &global).iter().all(|v| v.abs() < 1e-12 * 5000.0));
    assert_eq!(shard_data(&many, 5).unwrap().len(), 5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn prop_parallel_gather_matches_sequential(seed in any::<u64>(), m in 1usize..7, d in 2usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mats: Vec<Array2<f64>> = (0..m).map(|_| random_matrix(d, &mut rng)).collect();
        let geo = GeometrySetup::entropy_simplex(&[d, d]);
        let pts = vec![geo.sample_point(&mut rng), geo.sample_point(&mut rng)];
        let mut seq = ClusterState::new(shards_of(&mats)).unwrap();
        let mut par = ClusterState::new(shards_of(&mats)).unwrap().with_parallel(true).unwrap();
        let a = seq.gather_average(&pts).unwrap();
        let b = par.gather_average(&pts).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!(x.max_abs_diff(y) <= 1e-15);
        }
        prop_assert_eq!(seq.round_count(), par.round_count());
    }

    #[test]
    fn prop_gather_is_invariant_to_worker_order(seed in any::<u64>(), m in 2usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut mats: Vec<Array2<f64>> = (0..m).map(|_| random_matrix(4, &mut rng)).collect();
        let z = GeometrySetup::entropy_simplex(&[4, 4]).sample_point(&mut rng);
        let a = ClusterState::new(shards_of(&mats)).unwrap().gather_average(std::slice::from_ref(&z)).unwrap();
        mats[1..].shuffle(&mut rng);
        let b = ClusterState::new(shards_of(&mats)).unwrap().gather_average(&[z]).unwrap();
        prop_assert!(a[0].max_abs_diff(&b[0]) <= 1e-14);
    }
}
