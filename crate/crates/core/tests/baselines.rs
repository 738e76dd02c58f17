use std::sync::Arc;

use ndarray::{array, Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use simvi::baselines::{euclidean_paus_run, mirror_prox_run, MirrorProxConfig};
use simvi::bench::{Budget, GameSpec, PreparedGame, SolverKind};
use simvi::cluster::ClusterState;
use simvi::geometry::simplex::project_simplex;
use simvi::geometry::{GeometrySetup, Point};
use simvi::operators::{SaddleBilinear, Shard};
use simvi::paus::{matrix_game_gap, LogCadence, PausConfig};
use simvi::Error;

fn shards_of(mats: &[Array2<f64>]) -> Vec<Shard> {
    mats.iter().map(|a| Arc::new(SaddleBilinear::new(a.clone())) as Shard).collect()
}

#[test]
fn mirror_prox_with_zero_operator_stays_put() {
    let z0 = Point::from_vecs(vec![vec![0.2, 0.8], vec![0.6, 0.4]]);
    let mut cluster = ClusterState::new(shards_of(&[Array2::zeros((2, 2))])).unwrap();
    let cfg = MirrorProxConfig::new(GeometrySetup::entropy_simplex(&[2, 2]), z0.clone(), 1.0, 10);
    let out = mirror_prox_run(&cfg, &mut cluster, None).unwrap();
    assert!(out.average.max_abs_diff(&z0) < 1e-15);
    assert!(out.last_z.max_abs_diff(&z0) < 1e-15);
    assert_eq!(out.rounds, 20);
}

#[test]
fn euclidean_paus_with_identical_shards_converges_quickly() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let m = simvi::check::random_matrix(4, &mut rng);
    let mut cluster = ClusterState::new(shards_of(&[m.clone(), m.clone(), m.clone()])).unwrap();
    let dims = [4, 4];
    let mut cfg = PausConfig::new(GeometrySetup::euclidean_simplex(&dims), Point::uniform(&dims), 0.0, simvi::operators::spectral_norm(&m), 3);
    // δ = 0: the stepsize has to be capped by hand
    cfg.gamma = 100.0;
    cfg.inner.tol = 1e-14;
    cfg.cadence = LogCadence::every_iteration();
    let gap = matrix_game_gap(&m);
    let out = euclidean_paus_run(&cfg, &mut cluster, Some(&gap)).unwrap();
    assert!(out.log.last().unwrap().gap < 0.05, "{:?}", out.log);
}

#[test]
fn euclidean_baseline_needs_euclidean_simplex_setup() {
    let mut cluster = ClusterState::new(shards_of(&[Array2::eye(2)])).unwrap();
    let cfg = PausConfig::new(GeometrySetup::entropy_simplex(&[2, 2]), Point::uniform(&[2, 2]), 0.5, 1.0, 1);
    assert!(matches!(euclidean_paus_run(&cfg, &mut cluster, None), Err(Error::Config(_))));
}

#[test]
fn simplex_projection_matches_grid_search() {
    let cases = [array![0.9, 0.5, -0.2], array![0.1, 0.1, 0.1], array![2.0, -1.0, 0.3], array![0.4, 0.4, 0.4]];
    for v in cases {
        let p = project_simplex(&v);
        assert!((p.sum() - 1.0).abs() < 1e-12 && p.iter().all(|&x| x >= 0.0));
        let n = 400;
        let mut best = (f64::INFINITY, Array1::zeros(3));
        for i in 0..=n {
            for j in 0..=(n - i) {
                let x = array![i as f64 / n as f64, j as f64 / n as f64, (n - i - j) as f64 / n as f64];
                let dist = (&x - &v).mapv(|t| t * t).sum();
                if dist < best.0 {
                    best = (dist, x);
                }
            }
        }
        assert!((&p - &best.1).iter().all(|t| t.abs() <= 1.0 / n as f64 + 1e-12));
        assert!((&p - &v).mapv(|t| t * t).sum() <= best.0 + 1e-12);
    }
}

#[test]
fn baseline_gaps_are_nonnegative_and_roughly_nonincreasing() {
    let game = PreparedGame::new(&GameSpec { d: 8, t: 1000, m: 5, seed: 3, ..GameSpec::default() }).unwrap();
    for kind in [SolverKind::MirrorProx, SolverKind::Euclidean] {
        let out = game.run_solver(kind, Budget { k: 300, target_gap: None }, 1.0, false, LogCadence::every_iteration()).unwrap();
        assert!(out.log.iter().all(|r| r.gap >= 0.0));
        let mut best = f64::INFINITY;
        for r in &out.log {
            assert!(r.gap <= best * 1.05 + 1e-12, "{kind}: round {} gap {} after {}", r.round, r.gap, best);
            best = best.min(r.gap);
        }
        // every output point stays on the simplex
        assert!(GeometrySetup::entropy_simplex(&game.dims()).contains(&out.average));
        assert_eq!(out.rounds, 600);
    }
}

#[test]
fn mirror_prox_needs_more_rounds_than_paus_when_delta_is_small() {
    let game = PreparedGame::new(&GameSpec { d: 10, t: 5000, m: 5, seed: 4, ..GameSpec::default() }).unwrap();
    assert!(game.constants.delta <= game.constants.l / 10.0);
    let budget = Budget { k: 4000, target_gap: Some(1e-3) };
    let paus = game.run_solver(SolverKind::Paus, budget, 1.0, false, LogCadence::default()).unwrap();
    let mp = game.run_solver(SolverKind::MirrorProx, budget, 1.0, false, LogCadence::default()).unwrap();
    let paus_rounds = paus.target_round.expect("PAUS reaches 1e-3");
    match mp.target_round {
        Some(r) => assert!(paus_rounds < r),
        None => assert!(paus_rounds < mp.rounds),
    }
}
