use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use harmap_core::config::{load_config, RunConfig};
use harmap_core::decompositions::{decompose, DecomposeOptions, DecompositionKind};
use harmap_core::report::{to_json, CheckReport, Status};
use harmap_core::suite::{exit_code, run_task, tasks_for, SuiteOptions};

const EXIT_CONFIG: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "harmap", version, about = "Numerical checks for harmonic maps and harmonic symmetric tensors on flat tori")]
struct Cli {
    /// Run configuration (JSON)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Write the JSON report array here instead of stdout
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Relative tolerance replacing every per-check default
    #[arg(long, global = true, value_name = "REAL")]
    tol: Option<f64>,
    /// Grid points per axis
    #[arg(long, global = true, value_name = "N")]
    resolution: Option<usize>,
    /// Seed for random fixtures
    #[arg(long, global = true, value_name = "INT")]
    seed: Option<u64>,
    /// Record runtime_ms in each report (reports are then no longer reproducible byte for byte)
    #[arg(long, global = true)]
    timings: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Curvature identities, operator adjointness, Examples 1 and 2
    VerifyGeometry,
    /// Pullback-divergence identity, energy and the decomposition corollaries for the configured map
    VerifyMap,
    /// Split the configured tensor; prints the decomposition diagnostics as JSON on stdout
    Decompose {
        #[arg(long, value_enum)]
        kind: Kind,
    },
    /// Classify the harmonic part of the configured tensor
    Classify,
    /// First-variation and harmonic-family checks
    Variations,
    /// Run the configured task list (every task when the list is empty)
    Suite,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Kind {
    BergerEbin,
    York,
    Alpha,
}

impl From<Kind> for DecompositionKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::BergerEbin => DecompositionKind::BergerEbin,
            Kind::York => DecompositionKind::York,
            Kind::Alpha => DecompositionKind::Alpha,
        }
    }
}

fn config_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("harmap: {msg}");
    ExitCode::from(EXIT_CONFIG)
}

fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("HARMAP_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| format!("HARMAP_THREADS must be a positive integer, got {v:?}"))?;
    if n == 0 {
        return Err("HARMAP_THREADS must be at least 1".into());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn apply_overrides(cfg: &mut RunConfig, cli: &Cli) {
    if let Some(n) = cli.resolution {
        cfg.manifold.resolution = Some(n);
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.tol {
        cfg.tolerances.rel_tol = Some(t);
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        return config_error(e);
    }
    let Some(path) = &cli.config else {
        return config_error("--config PATH is required");
    };
    let mut cfg = match load_config(path) {
        Ok(c) => c,
        Err(e) => return config_error(e),
    };
    apply_overrides(&mut cfg, &cli);
    let ctx = match cfg.resolve() {
        Ok(c) => c,
        Err(e) => return config_error(e),
    };
    let opts = SuiteOptions { timings: cli.timings };

    let reports: Vec<CheckReport> = match &cli.command {
        Command::Decompose { kind } => {
            let kind = DecompositionKind::from(*kind);
            let dopts = DecomposeOptions {
                floor: ctx.tolerances.floor,
                ..Default::default()
            };
            let mut rep = match decompose(kind, &ctx.tensor, &ctx.metric, &dopts) {
                Ok(res) => {
                    println!("{}", serde_json::to_string_pretty(&res.diagnostics).expect("diagnostics serialize"));
                    res.diagnostics.to_report(&ctx.tolerances)
                }
                Err(e) => {
                    let mut r = CheckReport::new(format!("decompose-{}", kind.as_str()));
                    r.fail(e.to_string());
                    r
                }
            };
            rep.metadata.resolution = ctx.grid.resolution().to_vec();
            rep.metadata.seed = ctx.seed;
            vec![rep]
        }
        cmd => {
            let ids: Vec<String> = match cmd {
                Command::Suite if !cfg.tasks.is_empty() => cfg.tasks.clone(),
                _ => {
                    let name = match cmd {
                        Command::VerifyGeometry => "verify-geometry",
                        Command::VerifyMap => "verify-map",
                        Command::Classify => "classify",
                        Command::Variations => "variations",
                        _ => "suite",
                    };
                    tasks_for(name).expect("known command").iter().map(|s| s.to_string()).collect()
                }
            };
            ids.iter().map(|id| run_task(id, &ctx, &opts)).collect()
        }
    };

    for r in &reports {
        let status = match r.status {
            Status::Pass => "pass",
            Status::Fail => "FAIL",
            Status::Skipped => "skipped",
        };
        let detail = r.reason.as_deref().unwrap_or("");
        eprintln!("{status:>7}  {}  {detail}", r.check_id);
    }
    let json = to_json(&reports);
    match &cli.out {
        Some(p) => {
            if let Err(e) = std::fs::write(p, json + "\n") {
                return config_error(format!("{}: {e}", p.display()));
            }
        }
        None if matches!(cli.command, Command::Decompose { .. }) => {}
        None => println!("{json}"),
    }
    ExitCode::from(exit_code(&reports) as u8)
}
