use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use threshold_exec_cli::commands::{self, AcOverrides, RunContext};
use threshold_exec_cli::config::{FileConfig, OutputFormat};
use threshold_exec_cli::CliError;

/// Threshold-on-signal optimal trade execution toolkit.
#[derive(Parser)]
#[command(name = "threshold-exec", version, about)]
struct Cli {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// RNG seed for every stochastic run.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Table output format.
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the exact lattice benchmark and export value/policy grids.
    DpSolve {
        #[arg(long)]
        n_steps: Option<usize>,
        #[arg(long)]
        q_star: Option<usize>,
        /// Quadratic gain scale G (shorthand for the model section).
        #[arg(long)]
        scale_g: Option<f64>,
    },
    /// Evaluate named policies exactly and report performance ratios.
    PolicyEval {
        #[arg(long)]
        n_steps: Option<usize>,
        #[arg(long)]
        q_star: Option<usize>,
        /// Policy names (closed forms or "optimal"); default: all.
        #[arg(long, value_delimiter = ',')]
        variants: Vec<String>,
    },
    /// Sweep Q* and compare performance ratios of every approximation.
    PerfCompare {
        #[arg(long)]
        n_steps: Option<usize>,
        #[arg(long)]
        q_star_min: Option<usize>,
        #[arg(long)]
        q_star_max: Option<usize>,
    },
    /// Monte Carlo simulation of the discrete trading dynamics.
    Simulate {
        #[arg(long)]
        n_steps: Option<usize>,
        #[arg(long)]
        q_star: Option<usize>,
        #[arg(long)]
        paths: Option<usize>,
        /// Steps at which to record inventory statistics.
        #[arg(long, value_delimiter = ',')]
        checkpoints: Option<Vec<usize>>,
        #[arg(long)]
        p0: Option<f64>,
        /// Policy driving the simulation.
        #[arg(long)]
        variant: Option<String>,
        /// Simulate the unforced threshold chain (no completion target).
        #[arg(long)]
        free_chain: bool,
    },
    /// Compare discrete-chain ensembles against the diffusion prediction.
    IabVerify {
        /// Field kind: constant, deterministic, or ac.
        #[arg(long)]
        field: Option<String>,
        /// Fill probability of the constant field.
        #[arg(long)]
        fill: Option<f64>,
        /// Discretization scale N.
        #[arg(long)]
        scale: Option<usize>,
        /// Normalized target of the deterministic-pacing field.
        #[arg(long)]
        q_star_frac: Option<f64>,
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        checkpoints: Option<Vec<usize>>,
    },
    /// Almgren-Chriss schedule with Gaussian uncertainty bands.
    AcBands {
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        q_star: Option<f64>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        gamma_perm: Option<f64>,
        #[arg(long)]
        lambda_risk: Option<f64>,
        #[arg(long)]
        tau: Option<f64>,
        /// Signal observations per unit time (u).
        #[arg(long)]
        obs_rate: Option<f64>,
        /// Run the Monte Carlo band validation.
        #[arg(long)]
        validate: bool,
        #[arg(long)]
        validate_paths: Option<usize>,
    },
    /// Solve the shift-calibration condition and print both constants.
    Calibrate,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file_cfg = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let seed = cli.seed.or(file_cfg.seed).unwrap_or(0);
    let out_dir = cli
        .out
        .clone()
        .or_else(|| file_cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let format = cli.format.or(file_cfg.format).unwrap_or_default();
    let threads = cli
        .threads
        .or(file_cfg.threads)
        .unwrap_or_else(num_threads_default);
    if threads == 0 {
        return Err(CliError::Config("threads must be positive".into()));
    }
    // The CLI owns the pool size; modules only fan work out over it.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global();
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", out_dir.display())))?;

    let ctx = RunContext {
        out_dir,
        seed,
        format,
        threads,
    };

    match cli.command {
        Command::DpSolve {
            n_steps,
            q_star,
            scale_g,
        } => commands::cmd_dp_solve(&ctx, &file_cfg, n_steps, q_star, scale_g),
        Command::PolicyEval {
            n_steps,
            q_star,
            variants,
        } => commands::cmd_policy_eval(&ctx, &file_cfg, n_steps, q_star, variants),
        Command::PerfCompare {
            n_steps,
            q_star_min,
            q_star_max,
        } => commands::cmd_perf_compare(&ctx, &file_cfg, n_steps, q_star_min, q_star_max),
        Command::Simulate {
            n_steps,
            q_star,
            paths,
            checkpoints,
            p0,
            variant,
            free_chain,
        } => commands::cmd_simulate(
            &ctx, &file_cfg, n_steps, q_star, paths, checkpoints, p0, variant, free_chain,
        ),
        Command::IabVerify {
            field,
            fill,
            scale,
            q_star_frac,
            paths,
            checkpoints,
        } => commands::cmd_iab_verify(
            &ctx,
            &file_cfg,
            field,
            fill,
            scale,
            q_star_frac,
            paths,
            checkpoints,
        ),
        Command::AcBands {
            horizon,
            q_star,
            sigma,
            eta,
            gamma_perm,
            lambda_risk,
            tau,
            obs_rate,
            validate,
            validate_paths,
        } => {
            let over = AcOverrides {
                horizon,
                q_star,
                sigma,
                eta,
                gamma_perm,
                lambda_risk,
                tau,
                obs_rate,
            };
            commands::cmd_ac_bands(&ctx, &file_cfg, over, validate, validate_paths)
        }
        Command::Calibrate => commands::cmd_calibrate(&ctx),
    }
}

fn num_threads_default() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}
