use std::sync::Arc;

use ndarray::{Array1, Array2};
use proptest::prelude::*;

use simvi::cluster::ClusterState;
use simvi::geometry::{GeometrySetup, Point};
use simvi::operators::{AffineOperator, Shard};
use simvi::restart::{num_restarts, paus_r, stage_length, strongly_monotone_family, FamilySpec, RestartConfig};
use simvi::Error;

#[test]
fn stage_lengths() {
    assert_eq!(stage_length(2.0, 2.0, 1.0).unwrap(), 1);
    // Euclidean, γ = 1/δ: ⌈4δ/μ⌉
    let (delta, mu) = (0.3, 0.07);
    assert_eq!(stage_length(mu, 1.0 / delta, 1.0).unwrap(), (4.0 * delta / mu).ceil() as usize);
    assert_eq!(stage_length(0.1, 0.5, 2.0).unwrap(), 2 * stage_length(0.1, 0.5, 1.0).unwrap());
}

#[test]
fn restart_counts() {
    assert_eq!(num_restarts(4.0, 1.0).unwrap(), 1);
    assert_eq!(num_restarts(1.0, 1.0).unwrap(), 0);
    assert_eq!(num_restarts(1.0, 5.0).unwrap(), 0);
    assert!(num_restarts(1.0, 0.0).is_err());
}

fn identity_shift(z_star: &[f64]) -> Shard {
    let d = z_star.len();
    let zs = Array1::from(z_star.to_vec());
    Arc::new(AffineOperator::new(Array2::eye(d), -zs).unwrap())
}

#[test]
fn identity_operator_halves_the_distance_every_stage() {
    // F(z) = z − z*, one worker, δ set to μ = 1
    let z_star = [0.3, -0.4];
    let mut cluster = ClusterState::new(vec![identity_shift(&z_star)]).unwrap();
    let geo = GeometrySetup::euclidean_ball(2, 2.0, 1.0).unwrap();
    let z0 = Point::from_vecs(vec![vec![-0.5, 0.5]]);
    let zs = Point::from_vecs(vec![z_star.to_vec()]);
    let r0_sq = geo.norm(&(&z0 - &zs)).powi(2);
    let cfg = RestartConfig::new(geo, z0, 1.0, 1.0, 1.0, r0_sq, r0_sq * 1e-6);
    let out = paus_r(&cfg, &mut cluster, Some(&zs)).unwrap();
    assert_eq!(out.n, 10);
    for s in &out.stages {
        assert!(s.ratio.unwrap() <= 0.5, "stage {}: {:?}", s.stage, s.ratio);
    }
    assert!((&out.point - &zs).l2_norm().powi(2) <= r0_sq * 1e-6);
}

#[test]
fn zero_restarts_return_the_start() {
    let mut cluster = ClusterState::new(vec![identity_shift(&[0.1, 0.1])]).unwrap();
    let geo = GeometrySetup::euclidean_ball(2, 2.0, 1.0).unwrap();
    let z0 = Point::from_vecs(vec![vec![0.2, 0.0]]);
    let cfg = RestartConfig::new(geo, z0.clone(), 1.0, 1.0, 1.0, 0.1, 1.0);
    let out = paus_r(&cfg, &mut cluster, None).unwrap();
    assert_eq!(out.n, 0);
    assert_eq!(out.point, z0);
    assert_eq!(cluster.round_count(), 0);
}

#[test]
fn entropy_setups_are_rejected() {
    let mut cluster = ClusterState::new(vec![identity_shift(&[0.5, 0.5])]).unwrap();
    let geo = GeometrySetup::entropy_simplex(&[2]);
    let cfg = RestartConfig::new(geo, Point::uniform(&[2]), 1.0, 1.0, 1.0, 1.0, 1e-3);
    assert!(matches!(paus_r(&cfg, &mut cluster, None), Err(Error::UnsupportedRecenter(_))));
}

fn family(d: usize, p: f64, seed: u64) -> simvi::restart::StronglyMonotoneFamily {
    strongly_monotone_family(FamilySpec { d, m: 5, mu: 0.1, delta: 2.0, coupling: 1.0, solution_norm: 0.5, p, seed }).unwrap()
}

#[test]
fn total_rounds_within_twice_the_theoretical_count() {
    let fam = family(8, 2.0, 21);
    let geo = GeometrySetup::euclidean_ball(8, 2.0, 1.0).unwrap();
    let (r0_sq, eps) = (1.0, 1e-4);
    let cfg = RestartConfig::new(geo, Point::zeros(&[8]), fam.mu, fam.delta, fam.l_f1, r0_sq, eps);
    let mut cluster = ClusterState::new(fam.shards.clone()).unwrap();
    let out = paus_r(&cfg, &mut cluster, Some(&fam.z_star)).unwrap();
    let bound = 2.0 * (2.0 * fam.delta / fam.mu) * (r0_sq / eps).log2();
    // the rounding slack: ⌈·⌉ on K and N
    let slack = (1.0 + 1.0 / out.k as f64) * (out.n as f64 / (0.5 * (r0_sq / eps).log2()));
    assert!(out.rounds as f64 <= bound * slack, "{} rounds, bound {bound}", out.rounds);
    assert!((&out.point - &fam.z_star).l2_norm().powi(2) <= eps);
}

#[test]
fn stage_certificate_and_stall_detection() {
    let fam = family(6, 2.0, 22);
    let geo = GeometrySetup::euclidean_ball(6, 2.0, 1.0).unwrap();
    let mut cfg = RestartConfig::new(geo.clone(), Point::zeros(&[6]), fam.mu, fam.delta, fam.l_f1, 1.0, 1e-4);
    let mut cluster = ClusterState::new(fam.shards.clone()).unwrap();
    let out = paus_r(&cfg, &mut cluster, Some(&fam.z_star)).unwrap();
    let gamma = cfg.gamma();
    let mut prev = geo.norm(&fam.z_star);
    for s in &out.stages {
        let dist = s.distance.unwrap();
        // μ‖ũ − z*‖² ≤ (ω/(Kγ))‖z0 − z*‖²
        assert!(fam.mu * dist * dist <= s.omega / (s.k as f64 * gamma) * prev * prev * 1.05);
        assert!(s.ratio.unwrap() <= 0.5 * 1.05);
        prev = dist;
    }

    cfg.stall_limit = Some(1e-3);
    let mut cluster = ClusterState::new(fam.shards.clone()).unwrap();
    assert!(matches!(paus_r(&cfg, &mut cluster, Some(&fam.z_star)), Err(Error::RestartStall { stage: 0, .. })));
}

#[test]
fn a_norm_ball_restarts_converge() {
    let d = 5;
    let fam = family(d, 1.0, 23);
    let geo = GeometrySetup::for_ball(d, 1.0, 1.0).unwrap();
    // constants moved from ℓ2 to the ℓ_q pairing of the DGF norm
    let q = match geo.kind() {
        simvi::geometry::DgfKind::ANormBall { exponent, .. } => exponent,
        other => panic!("unexpected {other:?}"),
    };
    let mu = fam.mu * (d as f64).powf(1.0 - 2.0 / q);
    let cfg = RestartConfig::new(geo.clone(), Point::zeros(&[d]), mu, fam.delta, fam.l_f1, 1.0, 1e-3);
    let mut cluster = ClusterState::new(fam.shards.clone()).unwrap();
    let out = paus_r(&cfg, &mut cluster, Some(&fam.z_star)).unwrap();
    for s in &out.stages {
        assert!(s.ratio.unwrap() <= 0.5 * 1.05, "stage {}: {:?}", s.stage, s.ratio);
    }
}

#[test]
fn recentered_setups_remain_strongly_convex() {
    let geo = GeometrySetup::for_ball(10, 1.0, 1.0).unwrap();
    let from = Point::from_vecs(vec![vec![0.05; 10]]);
    let moved = geo.recenter(&from, &Point::zeros(&[10])).unwrap();
    let m = simvi::check::strong_convexity_margin(&moved, 1000, 5).unwrap();
    assert!(m >= -1e-9);
}

proptest! {
    #[test]
    fn prop_num_restarts_monotone_in_r0(a in 1e-6f64..1e6, b in 1e-6f64..1e6, eps in 1e-8f64..1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(num_restarts(lo, eps).unwrap() <= num_restarts(hi, eps).unwrap());
    }

    #[test]
    fn prop_stage_length_scales_with_omega(mu in 0.01f64..1.0, gamma in 0.1f64..10.0, omega in 0.5f64..4.0) {
        let k1 = stage_length(mu, gamma, omega).unwrap();
        let k2 = stage_length(mu, gamma, 2.0 * omega).unwrap();
        prop_assert!(k2 + 1 >= 2 * k1 && k2 <= 2 * k1);
    }
}
