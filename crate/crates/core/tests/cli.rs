use std::fs;
use std::path::Path;
use std::process::Command as Process;

use simvi::bench::{BaseMatrix, SolverKind};
use simvi::cli::{parse_and_dispatch, resolve, CliError, Command, ResolveError, EXIT_OK, EXIT_USAGE};

fn argv(args: &str) -> Vec<String> {
    std::iter::once("simvi").chain(args.split_whitespace()).map(String::from).collect()
}

fn usage_error(args: &str) -> String {
    match resolve(argv(args)) {
        Err(ResolveError::Cli(CliError::Usage(msg))) => msg,
        other => panic!("{args}: expected a usage error, got {other:?}"),
    }
}

#[test]
fn defaults_match_the_reference_experiment() {
    let cfg = resolve(argv("compare")).unwrap();
    assert_eq!(cfg.command, Command::Compare);
    assert_eq!((cfg.game.d, cfg.game.t, cfg.game.m, cfg.game.seed), (25, 10_000, 5, 1));
    assert!(matches!(cfg.game.base, BaseMatrix::Synthetic { .. }));
    assert_eq!(cfg.k, 5000);
    assert_eq!(cfg.solvers, SolverKind::ALL.to_vec());
    assert_eq!(cfg.c, vec![1.0]);
    assert_eq!(cfg.eps, None);
    assert!(!cfg.wall_clock);

    let run = resolve(argv("run")).unwrap();
    assert_eq!(run.solvers, vec![SolverKind::Paus]);
    assert_eq!(resolve(argv("sweep")).unwrap().c, vec![0.25, 0.5, 1.0, 2.0, 4.0]);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("run.cfg");
    fs::write(&file, "# small game\nd = 6\nT=300\nm=3\nseed=4 # trailing\nK=12\nsolver=mirror-prox\n").unwrap();
    let cfg = resolve(argv(&format!("run --config {} --d 8 --K 3", file.display()))).unwrap();
    assert_eq!((cfg.game.d, cfg.game.t, cfg.game.m, cfg.game.seed, cfg.k), (8, 300, 3, 4, 3));
    assert_eq!(cfg.solvers, vec![SolverKind::MirrorProx]);

    fs::write(&file, "d=6\nbogus=1\n").unwrap();
    assert!(usage_error(&format!("run --config {}", file.display())).contains("bogus"));
}

#[test]
fn compare_config_must_pin_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("c.cfg");
    fs::write(&file, "d=6\n").unwrap();
    assert!(usage_error(&format!("compare --config {}", file.display())).contains("seed"));
    fs::write(&file, "d=6\nseed=2\n").unwrap();
    assert!(resolve(argv(&format!("compare --config {}", file.display()))).is_ok());
}

#[test]
fn value_checks() {
    usage_error("run --c 1,2");
    usage_error("run --solver paus,mirror-prox");
    usage_error("compare --solver paus,paus");
    usage_error("run --K 0");
    usage_error("run --eps=-1");
    usage_error("run --eps 0");
    usage_error("sweep --c=0.5,-1");
    usage_error("run --T 10 --m 3");
    usage_error("compare --geometry euclidean --solver mirror-prox");
    assert!(matches!(resolve(argv("run --bogus 1")), Err(ResolveError::Clap(_))));
    assert!(matches!(resolve(argv("run --solver newton")), Err(ResolveError::Clap(_))));
}

#[test]
fn euclidean_geometry_selects_the_euclidean_variant() {
    let cfg = resolve(argv("run --geometry euclidean")).unwrap();
    assert_eq!(cfg.solvers, vec![SolverKind::Euclidean]);
    let cfg = resolve(argv("compare --geometry euclidean --solver paus")).unwrap();
    assert_eq!(cfg.solvers, vec![SolverKind::Euclidean]);
}

fn csv_names(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    names
}

#[test]
fn compare_writes_one_file_per_solver() {
    let dir = tempfile::tempdir().unwrap();
    let code = parse_and_dispatch(argv(&format!("compare --d 5 --T 200 --m 4 --seed 3 --K 6 --out {}", dir.path().display())));
    assert_eq!(code, EXIT_OK);
    assert_eq!(csv_names(dir.path()), ["constants.csv", "euclidean.csv", "mirror-prox.csv", "paus.csv"]);
    let paus = fs::read_to_string(dir.path().join("paus.csv")).unwrap();
    assert!(paus.starts_with("round,gap,inner_iters,elapsed_ms\n0,"));
    assert!(paus.lines().last().unwrap().starts_with("12,"));
}

#[test]
fn sweep_writes_one_file_per_multiplier() {
    let dir = tempfile::tempdir().unwrap();
    let code = parse_and_dispatch(argv(&format!("sweep --d 5 --T 200 --m 4 --seed 3 --K 4 --out {}", dir.path().display())));
    assert_eq!(code, EXIT_OK);
    assert_eq!(
        csv_names(dir.path()),
        ["constants.csv", "paus_c0.25.csv", "paus_c0.5.csv", "paus_c1.csv", "paus_c2.csv", "paus_c4.csv"]
    );
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_simvi");
    let out = Process::new(bin).args(["run", "--bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_USAGE));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));

    let out = Process::new(bin).arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_OK));

    let out = Process::new(bin).arg("check").output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_OK));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.lines().count() >= 8 && stdout.lines().all(|l| l.starts_with("PASS ")), "{stdout}");
}
