//! `simvi` command line: `run`, `compare`, `sweep` and `check`.
//!
//! Settings come from flags, then from a `key=value` file given by
//! `--config`, then from defaults matching the 25×25 matrix game with
//! `T = 10⁴`, `m = 5` and `K = 5000` iterations (10⁴ rounds).

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::{emit_csv, rounds_to_gap, run_comparison, run_sweep, Budget, ExperimentResult, GameSpec, PreparedGame, SolverKind};
use crate::check::run_all_checks;
use crate::error::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_CHECK: i32 = 3;

pub const DEFAULT_K: usize = 5000;
pub const DEFAULT_SWEEP: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];

#[derive(Parser, Debug)]
#[command(name = "simvi", version, about = "Distributed VI solvers under data similarity on a stochastic matrix game")]
struct Cli {
    #[command(subcommand)]
    command: CommandArgs,
}

#[derive(Subcommand, Debug)]
enum CommandArgs {
    /// Run one solver and write its series.
    Run(CommonArgs),
    /// PAUS, Mirror Prox and Euclidean PAUS on the same game.
    Compare(CommonArgs),
    /// One solver at several stepsize multipliers `c` (γ = c·γ_true).
    Sweep(CommonArgs),
    /// Run the verification suites.
    Check,
}

#[derive(Args, Debug, Default)]
struct CommonArgs {
    /// Matrix dimension.
    #[arg(long)]
    d: Option<usize>,
    /// Total number of samples.
    #[arg(long = "T", alias = "t")]
    t: Option<usize>,
    /// Number of workers.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Stop a solver once its duality gap reaches this value.
    #[arg(long)]
    eps: Option<f64>,
    /// Outer iterations per solver.
    #[arg(long = "K", alias = "k")]
    k: Option<usize>,
    /// Stepsize multiplier; a comma list for `sweep`.
    #[arg(long, value_delimiter = ',')]
    c: Vec<f64>,
    /// paus, mirror-prox or euclidean; a comma list for `compare`.
    #[arg(long, value_delimiter = ',')]
    solver: Vec<SolverKind>,
    #[arg(long, value_enum)]
    geometry: Option<GeometryChoice>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// key=value file with the same keys as the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Draw the sign independently per matrix entry.
    #[arg(long)]
    per_entry: bool,
    /// Write measured elapsed times instead of zeros.
    #[arg(long)]
    wall_clock: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GeometryChoice {
    Entropy,
    Euclidean,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Run,
    Compare,
    Sweep,
    Check,
}

/// Fully resolved settings of one invocation.
#[derive(Clone, Debug, PartialEq)]
pub struct CliConfig {
    pub command: Command,
    pub game: GameSpec,
    pub k: usize,
    pub eps: Option<f64>,
    pub c: Vec<f64>,
    pub solvers: Vec<SolverKind>,
    pub out: PathBuf,
    pub wall_clock: bool,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Solver(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(s) | CliError::Solver(s) => f.write_str(s),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Parameter(_) => CliError::Usage(e.to_string()),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

#[derive(Debug, Default)]
struct FileConfig {
    d: Option<usize>,
    t: Option<usize>,
    m: Option<usize>,
    seed: Option<u64>,
    eps: Option<f64>,
    k: Option<usize>,
    c: Option<Vec<f64>>,
    solver: Option<Vec<SolverKind>>,
    geometry: Option<GeometryChoice>,
    out: Option<PathBuf>,
    per_entry: Option<bool>,
    wall_clock: Option<bool>,
}

fn parse_value<T: std::str::FromStr>(path: &Path, line: usize, key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| CliError::Usage(format!("{}:{line}: bad value for {key}: {e}", path.display())))
}

fn parse_list<T: std::str::FromStr>(path: &Path, line: usize, key: &str, value: &str) -> Result<Vec<T>, CliError>
where
    T::Err: fmt::Display,
{
    value.split(',').map(|v| parse_value(path, line, key, v.trim())).collect()
}

fn read_config_file(path: &Path) -> Result<FileConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let mut cfg = FileConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let entry = raw.split('#').next().unwrap_or("").trim();
        if entry.is_empty() {
            continue;
        }
        let (key, value) = entry
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("{}:{line}: expected key=value", path.display())))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "d" => cfg.d = Some(parse_value(path, line, key, value)?),
            "T" | "t" => cfg.t = Some(parse_value(path, line, key, value)?),
            "m" => cfg.m = Some(parse_value(path, line, key, value)?),
            "seed" => cfg.seed = Some(parse_value(path, line, key, value)?),
            "eps" => cfg.eps = Some(parse_value(path, line, key, value)?),
            "K" | "k" => cfg.k = Some(parse_value(path, line, key, value)?),
            "c" => cfg.c = Some(parse_list(path, line, key, value)?),
            "solver" => cfg.solver = Some(parse_list(path, line, key, value)?),
            "geometry" => {
                cfg.geometry = Some(
                    GeometryChoice::from_str(value, true)
                        .map_err(|e| CliError::Usage(format!("{}:{line}: bad value for geometry: {e}", path.display())))?,
                )
            }
            "out" => cfg.out = Some(PathBuf::from(value)),
            "per_entry" | "per-entry" => cfg.per_entry = Some(parse_value(path, line, key, value)?),
            "wall_clock" | "wall-clock" => cfg.wall_clock = Some(parse_value(path, line, key, value)?),
            _ => return Err(CliError::Usage(format!("{}:{line}: unknown key {key:?}", path.display()))),
        }
    }
    Ok(cfg)
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn resolve_common(command: Command, args: CommonArgs) -> Result<CliConfig, CliError> {
    let file = match &args.config {
        Some(path) => {
            let f = read_config_file(path)?;
            if command == Command::Compare && f.seed.is_none() {
                return Err(usage(format!("{}: a config file for compare must set seed", path.display())));
            }
            f
        }
        None => FileConfig::default(),
    };
    let defaults = GameSpec::default();
    let game = GameSpec {
        d: args.d.or(file.d).unwrap_or(defaults.d),
        t: args.t.or(file.t).unwrap_or(defaults.t),
        m: args.m.or(file.m).unwrap_or(defaults.m),
        seed: args.seed.or(file.seed).unwrap_or(defaults.seed),
        base: defaults.base,
        per_entry: args.per_entry || file.per_entry.unwrap_or(false),
    };
    game.validate().map_err(|e| usage(e.to_string()))?;

    let k = args.k.or(file.k).unwrap_or(DEFAULT_K);
    if k == 0 {
        return Err(usage("K must be at least 1"));
    }
    let eps = args.eps.or(file.eps);
    if let Some(e) = eps {
        if !(e > 0.0) || !e.is_finite() {
            return Err(usage(format!("eps must be positive, got {e}")));
        }
    }

    let c = if !args.c.is_empty() { args.c } else { file.c.unwrap_or_default() };
    let c = match (command, c.is_empty()) {
        (Command::Sweep, true) => DEFAULT_SWEEP.to_vec(),
        (_, true) => vec![1.0],
        (Command::Sweep, false) => c,
        (_, false) if c.len() == 1 => c,
        _ => return Err(usage("--c takes a single value outside sweep")),
    };
    if let Some(bad) = c.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(usage(format!("c must be positive, got {bad}")));
    }

    let solvers = if !args.solver.is_empty() { args.solver } else { file.solver.unwrap_or_default() };
    let solvers = match (command, solvers.is_empty()) {
        (Command::Compare, true) => SolverKind::ALL.to_vec(),
        (_, true) => vec![SolverKind::Paus],
        (Command::Compare, false) => solvers,
        (_, false) if solvers.len() == 1 => solvers,
        _ => return Err(usage("--solver takes a single value outside compare")),
    };
    let geometry = args.geometry.or(file.geometry).unwrap_or(GeometryChoice::Entropy);
    let solvers = solvers
        .into_iter()
        .map(|s| match (geometry, s) {
            (GeometryChoice::Entropy, s) => Ok(s),
            (GeometryChoice::Euclidean, SolverKind::Paus | SolverKind::Euclidean) => Ok(SolverKind::Euclidean),
            (GeometryChoice::Euclidean, SolverKind::MirrorProx) => {
                Err(usage("mirror-prox runs with the entropic setup only; drop --geometry euclidean"))
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    for (i, s) in solvers.iter().enumerate() {
        if solvers[..i].contains(s) {
            return Err(usage(format!("solver {s} selected twice")));
        }
    }

    Ok(CliConfig {
        command,
        game,
        k,
        eps,
        c,
        solvers,
        out: args.out.or(file.out).unwrap_or_else(|| PathBuf::from("results")),
        wall_clock: args.wall_clock || file.wall_clock.unwrap_or(false),
    })
}

/// Parses `argv` (program name first) into a resolved configuration. Help and
/// version requests come back as the clap error that prints them.
pub fn resolve<I, T>(argv: I) -> Result<CliConfig, ResolveError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(ResolveError::Clap)?;
    let (command, args) = match cli.command {
        CommandArgs::Run(a) => (Command::Run, a),
        CommandArgs::Compare(a) => (Command::Compare, a),
        CommandArgs::Sweep(a) => (Command::Sweep, a),
        CommandArgs::Check => (Command::Check, CommonArgs::default()),
    };
    resolve_common(command, args).map_err(ResolveError::Cli)
}

#[derive(Debug)]
pub enum ResolveError {
    Clap(clap::Error),
    Cli(CliError),
}

fn report(result: &ExperimentResult, eps: Option<f64>) -> bool {
    let mut ok = true;
    for s in &result.series {
        if let Some(e) = &s.error {
            eprintln!("{}: failed: {e}", s.label);
            ok = false;
            continue;
        }
        let Some(last) = s.log.last() else {
            println!("{}: no records", s.label);
            continue;
        };
        let mut line = format!("{}: gamma {:.4e}, {} rounds, gap {:.4e}", s.label, s.gamma, last.round, last.gap);
        if let Some(e) = eps {
            match rounds_to_gap(&s.log, e) {
                Some(r) => line.push_str(&format!(", gap {e:e} at round {r}")),
                None => line.push_str(&format!(", gap {e:e} not reached")),
            }
        }
        println!("{line}");
    }
    ok
}

fn execute(cfg: &CliConfig) -> Result<bool, CliError> {
    let game = PreparedGame::new(&cfg.game)?;
    let budget = Budget { k: cfg.k, target_gap: cfg.eps };
    let c = &game.constants;
    println!("d = {}, T = {}, m = {}, seed = {}: L = {:.4}, L_F1 = {:.4}, delta = {:.4e}", cfg.game.d, cfg.game.t, cfg.game.m, cfg.game.seed, c.l, c.l_f1, c.delta);
    let result = match cfg.command {
        Command::Run | Command::Compare => run_comparison(&game, &cfg.solvers, budget, cfg.c[0], true),
        Command::Sweep => run_sweep(&game, cfg.solvers[0], &cfg.c, budget, true),
        Command::Check => unreachable!("check has no experiment"),
    };
    let ok = report(&result, cfg.eps);
    let written = emit_csv(&result, &cfg.out, cfg.wall_clock)?;
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(ok)
}

fn check() -> i32 {
    let outcomes = run_all_checks();
    let mut failed = 0;
    for o in &outcomes {
        println!("{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
        failed += usize::from(!o.passed);
    }
    if failed > 0 {
        eprintln!("{failed} of {} checks failed", outcomes.len());
        EXIT_CHECK
    } else {
        EXIT_OK
    }
}

/// Entry point of the binary; returns the process exit code.
pub fn parse_and_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cfg = match resolve(argv) {
        Ok(cfg) => cfg,
        Err(ResolveError::Clap(e)) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => {
                    use clap::CommandFactory;
                    eprintln!("\n{}", Cli::command().render_help());
                    EXIT_USAGE
                }
            };
        }
        Err(ResolveError::Cli(e)) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    if cfg.command == Command::Check {
        return check();
    }
    match execute(&cfg) {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_SOLVER,
        Err(CliError::Usage(e)) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
        Err(CliError::Solver(e)) => {
            eprintln!("error: {e}");
            EXIT_SOLVER
        }
    }
}
