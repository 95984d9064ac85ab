use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use hho_obstacle::adapt::Strategy;
use hho_obstacle::vi_solver::PdasOptions;
use hho_obstacle_cli::{run, RunConfig};

/// Adaptive HHO solver for the elliptic obstacle problem.
#[derive(Debug, Parser)]
#[command(name = "hho-obstacle", version)]
struct Args {
    /// Benchmark: example1, example2, smooth_unconstrained, flat_obstacle, affine_patch.
    #[arg(long, default_value = "example1")]
    problem: String,
    /// Face degree (0 or 1).
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Dörfler bulk fraction.
    #[arg(long, default_value_t = 0.3)]
    theta: f64,
    /// adaptive or uniform.
    #[arg(long, default_value = "adaptive")]
    strategy: Strategy,
    #[arg(long, default_value_t = 100_000)]
    max_dofs: usize,
    #[arg(long, default_value_t = 100)]
    max_levels: usize,
    #[arg(long, default_value = "output")]
    output: PathBuf,
    /// Write mesh_L.json every N levels (0: never).
    #[arg(long, default_value_t = 0)]
    export_mesh_every: usize,
    /// Start every PDAS solve from scratch.
    #[arg(long)]
    no_warm_start: bool,
    #[arg(long)]
    pdas_tol: Option<f64>,
    #[arg(long)]
    pdas_max_iter: Option<usize>,
    /// Fill the seconds column of history.csv (makes it run dependent).
    #[arg(long)]
    record_timings: bool,
}

impl From<Args> for RunConfig {
    fn from(a: Args) -> Self {
        let defaults = PdasOptions::default();
        RunConfig {
            problem: a.problem,
            k: a.k,
            theta: a.theta,
            strategy: a.strategy,
            max_dofs: a.max_dofs,
            max_levels: a.max_levels,
            output: a.output,
            export_mesh_every: a.export_mesh_every,
            warm_start: !a.no_warm_start,
            pdas: PdasOptions {
                tol: a.pdas_tol.unwrap_or(defaults.tol),
                max_iter: a.pdas_max_iter.unwrap_or(defaults.max_iter),
                ..defaults
            },
            record_timings: a.record_timings,
            seed: 0,
        }
    }
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) => {
            let _ = e.print();
            // usage errors are configuration errors; exit code 2 is reserved for solver failures
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let config = RunConfig::from(args);
    match run(&config) {
        Ok(history) => {
            if let Some(last) = history.levels.last() {
                println!(
                    "{} levels, final: {} cells, {} dofs, eta = {:.6e}",
                    history.levels.len(),
                    last.cells,
                    last.dofs,
                    last.eta_total
                );
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
