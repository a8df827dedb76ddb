use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use landau_delta_cli::config::{RunConfig, Stage};
use landau_delta_cli::eval::{evaluate, EvalRequest, Function};
use landau_delta_cli::manifest::RunManifest;
use num_complex::Complex64;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(
    name = "landau-delta",
    version,
    about = "Landau Hamiltonian with random point scatterers: batch runs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    kappa: Option<f64>,
    /// Restrict to a single band N.
    #[arg(long, global = true)]
    band: Option<u32>,
    /// Window radius R.
    #[arg(long, global = true, allow_negative_numbers = true)]
    radius: Option<f64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Fractional moment exponent; also resets γ to s/2.
    #[arg(long, global = true)]
    s: Option<f64>,
    /// Comma-separated, strictly decreasing ε values.
    #[arg(long, global = true, value_delimiter = ',')]
    epsilon: Option<Vec<f64>>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Digamma and free-kernel tables, or one value with `specfun eval`.
    Specfun {
        #[command(subcommand)]
        action: Option<SpecfunAction>,
    },
    /// Eigenpairs of the finite-volume operator per band.
    Spectrum,
    /// Deterministic band intervals.
    Bands,
    /// Fractional-moment profile and decay fit.
    Localization,
    /// Degenerate Landau states, lattice checks and Gram ranks.
    Degeneracy,
    /// Regularity probe, inverse moment, Gaussian sums and decoupling.
    Regularity,
    /// Rerun a manifest and compare output checksums.
    Replay { manifest: PathBuf },
}

#[derive(Subcommand, Debug)]
enum SpecfunAction {
    /// Print one special-function value as JSON.
    Eval {
        function: Function,
        #[arg(long, default_value_t = -0.5, allow_negative_numbers = true)]
        lambda: f64,
        /// Imaginary part of λ.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        lambda_im: f64,
        #[arg(long, default_value_t = 1.0)]
        rho: f64,
        #[arg(long, default_value_t = 1.0)]
        distance: f64,
        /// Level index for `laguerre` and `projector`.
        #[arg(long, default_value_t = 0)]
        m: u32,
    },
}

fn configure(cli: &Cli, stage: Stage) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.command = stage;
    if let Some(v) = cli.seed {
        cfg.seed = v;
    }
    if let Some(v) = cli.kappa {
        cfg.kappa = v;
    }
    if let Some(v) = cli.band {
        cfg.first_band = v;
        cfg.last_band = v;
    }
    if let Some(v) = cli.radius {
        cfg.radius = v;
    }
    if let Some(v) = &cli.out {
        cfg.out = v.clone();
    }
    if let Some(v) = cli.trials {
        cfg.moments.trials = v;
    }
    if let Some(v) = cli.s {
        cfg.moments.s = v;
        cfg.moments.gamma = None;
    }
    if let Some(v) = &cli.epsilon {
        cfg.moments.epsilons = v.clone();
    }
    Ok(cfg)
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("LANDAU_DELTA_THREADS") {
        let n: usize = v.trim().parse().with_context(|| {
            format!("LANDAU_DELTA_THREADS must be a positive integer, got {v:?}")
        })?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match real_main(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main(cli: Cli) -> Result<ExitCode> {
    init_threads()?;
    let stage = match &cli.command {
        Command::Specfun {
            action:
                Some(SpecfunAction::Eval {
                    function,
                    lambda,
                    lambda_im,
                    rho,
                    distance,
                    m,
                }),
        } => {
            let req = EvalRequest {
                function: *function,
                lambda: Complex64::new(*lambda, *lambda_im),
                kappa: cli.kappa.unwrap_or(4.0),
                rho: *rho,
                distance: *distance,
                m: *m,
            };
            println!("{}", serde_json::to_string_pretty(&evaluate(&req)?)?);
            return Ok(ExitCode::SUCCESS);
        }
        Command::Specfun { action: None } => Stage::Specfun,
        Command::Spectrum => Stage::Spectrum,
        Command::Bands => Stage::Bands,
        Command::Localization => Stage::Localization,
        Command::Degeneracy => Stage::Degeneracy,
        Command::Regularity => Stage::Regularity,
        Command::Replay { manifest } => {
            let recorded = RunManifest::load(manifest)?;
            let out = cli
                .out
                .clone()
                .unwrap_or_else(|| recorded.config.out.join("replay"));
            let mismatches = landau_delta_cli::replay(&recorded, &out)?;
            if mismatches.is_empty() {
                println!("replay: {} outputs identical", recorded.outputs.len());
                return Ok(ExitCode::SUCCESS);
            }
            for m in &mismatches {
                println!(
                    "replay: {} differs (expected {}, found {})",
                    m.file,
                    m.expected,
                    m.found.as_deref().unwrap_or("missing")
                );
            }
            return Ok(ExitCode::FAILURE);
        }
    };
    let cfg = configure(&cli, stage)?;
    let manifest = landau_delta_cli::run(&cfg)?;
    for o in &manifest.outputs {
        println!("{}  {}", o.sha256, cfg.out.join(&o.file).display());
    }
    Ok(ExitCode::SUCCESS)
}
