use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use covert_aircomp::baselines::{brute_force_scalar, Scheme};
use covert_aircomp::covertness::covert_roots;
use covert_aircomp::error::Result;
use covert_aircomp::harness::{run_experiment_traced, summarize, write_outputs, ExperimentFile, Preset, Scale};
use covert_aircomp::model::{sample_channels, SystemConfig};
use covert_aircomp::solver::run;

#[derive(Parser)]
#[command(version, about = "Covert over-the-air computation beamforming simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo experiment from a JSON config or a preset.
    Run {
        #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
        config: Option<PathBuf>,
        /// Output directory; overrides the one in the config.
        #[arg(long, env = "COVERT_AIRCOMP_OUT")]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        /// Comma-separated subset of proposed,random_an,mrt_an,no_an.
        #[arg(long, value_delimiter = ',')]
        schemes: Option<Vec<Scheme>>,
        /// fig1, fig2, fig3 or fig4.
        #[arg(long)]
        preset: Option<Preset>,
        /// Preset size: desk or full.
        #[arg(long, default_value = "desk", requires = "preset")]
        scale: Scale,
    },
    /// Print the covert roots and cap factor for a detection coefficient.
    Roots {
        #[arg(long)]
        epsilon: f64,
    },
    /// Compare the solver with a grid search on single-antenna channels.
    Oracle {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        trials: u64,
        #[arg(long, default_value_t = 400)]
        grid: usize,
    },
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run { config, out, seed, trials, schemes, preset, scale } => {
            let mut spec = match (config, preset) {
                (Some(path), _) => ExperimentFile::load(&path)?.into_spec(),
                (None, Some(p)) => p.spec(scale),
                (None, None) => unreachable!("clap requires one of --config and --preset"),
            };
            if let Some(seed) = seed {
                spec.base.seed = seed;
            }
            if let Some(trials) = trials {
                spec.trials = trials;
            }
            if let Some(schemes) = schemes {
                spec.schemes = schemes;
            }
            if let Some(out) = out {
                spec.output_dir = out;
            }
            let (records, traces) = run_experiment_traced(&spec)?;
            write_outputs(&spec, &records, &traces, &spec.output_dir)?;
            println!("{:>12} {:>10} {:>14} {:>12} {:>6}", spec.sweep.name(), "scheme", "mean_nmse", "stderr", "fails");
            for s in summarize(&records) {
                println!("{:>12} {:>10} {:>14.6} {:>12.2e} {:>6}", s.sweep_value, s.scheme, s.mean, s.stderr, s.failures);
            }
            println!("wrote {}", spec.output_dir.display());
        }
        Command::Roots { epsilon } => {
            let b = covert_roots(epsilon)?;
            println!("x1 = {:.12}", b.x1);
            println!("x2 = {:.12}", b.x2);
            println!("cap factor = {:.12}", b.cap_factor);
        }
        Command::Oracle { seed, trials, grid } => {
            let config = SystemConfig::scalar().with_seed(seed);
            let mut worst: f64 = 0.0;
            println!("{:>5} {:>12} {:>12} {:>10}", "trial", "grid_mse", "solver_mse", "rel_diff");
            for t in 0..trials {
                let ch = sample_channels(&config, t)?;
                let (grid_mse, _, _) = brute_force_scalar(&ch, &config, grid)?;
                let report = run(&ch, &config)?;
                let rel = (report.mse - grid_mse) / grid_mse;
                worst = worst.max(rel.abs());
                println!("{t:>5} {grid_mse:>12.6} {:>12.6} {rel:>10.2e}", report.mse);
            }
            println!("largest relative difference {worst:.3e}");
        }
    }
    Ok(())
}
