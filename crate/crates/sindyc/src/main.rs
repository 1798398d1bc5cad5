//! Thin command-line front end over the library's experiment recipes.
//!
//! Exit codes: 0 success, 2 usage/config/schema problems, 3 numerical
//! failures (divergence, rank deficiency).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sindyc::experiment::{
    cmd_dmd, cmd_identify, cmd_pareto, cmd_simulate, cmd_validate, parse_alpha_grid,
    ExperimentConfig,
};
use sindyc::Error;

#[derive(Parser)]
#[command(
    name = "sindyc",
    version,
    about = "Identify dynamical-system models from time-series data: DMD/DMDc and sparse nonlinear identification with inputs and control"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a configured benchmark system and write the trajectory CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (default: config output_dir, then
        /// $SINDYC_OUTPUT_ROOT/simulate, then ./sindyc_out/simulate).
        #[arg(long)]
        output: Option<PathBuf>,
        /// Override the seed of stochastic signals.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit a sparse model to a trajectory CSV; writes model.json and
    /// equations.txt.
    Identify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Ignore recorded input columns (fit an autonomous model).
        #[arg(long)]
        no_input: bool,
        /// Derivative estimator: central | tv.
        #[arg(long)]
        diff: Option<String>,
        /// TV regularization weight.
        #[arg(long)]
        tv_lambda: Option<f64>,
        /// TV outer iteration count.
        #[arg(long)]
        tv_iters: Option<usize>,
        /// Hard threshold for the stlsq solver.
        #[arg(long)]
        threshold: Option<f64>,
        /// Polynomial degree of the library.
        #[arg(long)]
        degree: Option<u32>,
        /// Keep every n-th sample of the data file.
        #[arg(long)]
        stride: Option<usize>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Simulate a saved model against fresh truth under the configured
    /// forcing; writes validation.csv and rms_summary.csv.
    Validate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Sweep the sparsity weight and write the pareto.csv trade-off table.
    Pareto {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Log-spaced grid as lo:hi:count (e.g. 1e-6:1e2:25).
        #[arg(long)]
        alphas: Option<String>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Decompose a trajectory CSV into modes and eigenvalues; writes
    /// dmd.json.
    Dmd {
        #[arg(long)]
        data: PathBuf,
        /// Use the input-aware decomposition (requires u columns).
        #[arg(long)]
        control: bool,
        /// Truncation rank.
        #[arg(long)]
        rank: Option<usize>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn resolve_output(
    flag: Option<PathBuf>,
    config: Option<&ExperimentConfig>,
    command: &str,
) -> PathBuf {
    if let Some(dir) = flag {
        return dir;
    }
    if let Some(dir) = config.and_then(|c| c.output_dir.clone()) {
        return dir;
    }
    if let Ok(root) = std::env::var("SINDYC_OUTPUT_ROOT") {
        return PathBuf::from(root).join(command);
    }
    PathBuf::from("sindyc_out").join(command)
}

fn run() -> Result<(), Error> {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate {
            config,
            output,
            seed,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if seed.is_some() {
                cfg.seed = seed;
            }
            let out = resolve_output(output, Some(&cfg), "simulate");
            let path = cmd_simulate(&cfg, &out)?;
            println!("wrote {}", path.display());
        }
        Command::Identify {
            config,
            data,
            no_input,
            diff,
            tv_lambda,
            tv_iters,
            threshold,
            degree,
            stride,
            output,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(d) = diff {
                cfg.differentiation.method = d;
            }
            if let Some(l) = tv_lambda {
                cfg.differentiation.tv_lambda = l;
            }
            if let Some(i) = tv_iters {
                cfg.differentiation.tv_iterations = i;
            }
            if let Some(t) = threshold {
                cfg.solver.threshold = t;
            }
            if let Some(d) = degree {
                cfg.library.poly_degree = d;
            }
            if stride.is_some() {
                cfg.stride = stride;
            }
            let out = resolve_output(output, Some(&cfg), "identify");
            let (model, equations) = cmd_identify(&cfg, &data, no_input, &out)?;
            println!("{equations}");
            println!(
                "# {} active terms; model written to {}",
                model.active_terms(),
                out.join("model.json").display()
            );
        }
        Command::Validate {
            config,
            model,
            output,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let out = resolve_output(output, Some(&cfg), "validate");
            let summary = cmd_validate(&cfg, &model, &out)?;
            for (i, (err, scale)) in summary.rms_error.iter().zip(&summary.truth_rms).enumerate() {
                println!("x{}: rms error {err:.6e} (truth rms {scale:.6e})", i + 1);
            }
            if summary.diverged {
                println!(
                    "model diverged at t = {:.6}",
                    summary.blowup_time.unwrap_or(f64::NAN)
                );
            }
        }
        Command::Pareto {
            config,
            data,
            alphas,
            output,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let grid = alphas.as_deref().map(parse_alpha_grid).transpose()?;
            let out = resolve_output(output, Some(&cfg), "pareto");
            let curve = cmd_pareto(&cfg, &data, grid, &out)?;
            let sel = curve.selected_point();
            println!(
                "{} grid points; selected alpha {:.3e} with {} active terms (validation rms {:.3e})",
                curve.points.len(),
                sel.alpha,
                sel.nnz,
                sel.validation_error
            );
        }
        Command::Dmd {
            data,
            control,
            rank,
            output,
        } => {
            let out = resolve_output(output, None, "dmd");
            let json = cmd_dmd(&data, control, rank, &out)?;
            let eigs = json["eigenvalues"].as_array().map_or(0, Vec::len);
            println!(
                "{eigs} eigenvalues; written to {}",
                out.join("dmd.json").display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Divergence { .. } | Error::Rank(_) | Error::Linalg(_) => 3,
                _ => 2,
            };
            ExitCode::from(code)
        }
    }
}
