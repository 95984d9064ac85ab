//! Run configuration and driver behind the `hho-obstacle` binary.

use std::fs;
use std::path::{Path, PathBuf};

use hho_obstacle::adapt::{adaptive_loop_with, AdaptOptions, ConvergenceHistory, Strategy};
use hho_obstacle::io::{export_history, export_mesh};
use hho_obstacle::problems;
use hho_obstacle::vi_solver::PdasOptions;
use hho_obstacle::Error;
use serde::{Deserialize, Serialize};

/// Fully resolved settings of one run; written back as `config.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub problem: String,
    pub k: usize,
    pub theta: f64,
    pub strategy: Strategy,
    pub max_dofs: usize,
    pub max_levels: usize,
    pub output: PathBuf,
    /// Write `mesh_L.json` every this many levels; 0 disables snapshots.
    pub export_mesh_every: usize,
    pub warm_start: bool,
    pub pdas: PdasOptions,
    /// Fill the `seconds` column of the history.
    pub record_timings: bool,
    /// Reserved for test harnesses; the solver itself is deterministic.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let adapt = AdaptOptions::default();
        Self {
            problem: "example1".into(),
            k: adapt.k,
            theta: adapt.theta,
            strategy: adapt.strategy,
            max_dofs: adapt.max_dofs,
            max_levels: adapt.max_levels,
            output: PathBuf::from("output"),
            export_mesh_every: 0,
            warm_start: adapt.warm_start,
            pdas: adapt.pdas,
            record_timings: false,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn adapt_options(&self) -> AdaptOptions {
        AdaptOptions {
            k: self.k,
            theta: self.theta,
            max_dofs: self.max_dofs,
            max_levels: self.max_levels,
            strategy: self.strategy,
            warm_start: self.warm_start,
            pdas: self.pdas,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("cannot write output: {0}")]
    Output(String),
    #[error("solver failed after {levels} levels: {message}")]
    Solver { levels: usize, message: String },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Output(_) => 1,
            RunError::Solver { .. } => 2,
        }
    }
}

fn output_error(path: &Path, e: impl std::fmt::Display) -> RunError {
    RunError::Output(format!("{}: {e}", path.display()))
}

/// Runs the adaptive loop and writes `history.csv`, `config.json` and the
/// mesh snapshots into `config.output`. The history is written even when the
/// solver fails part way.
pub fn run(config: &RunConfig) -> Result<ConvergenceHistory, RunError> {
    let problem = problems::by_name(&config.problem).map_err(|_| {
        RunError::Config(format!(
            "unknown problem {:?}; expected one of {}",
            config.problem,
            problems::NAMES.join(", ")
        ))
    })?;
    let opts = config.adapt_options();
    opts.validate().map_err(|e| RunError::Config(e.to_string()))?;
    fs::create_dir_all(&config.output).map_err(|e| output_error(&config.output, e))?;
    let config_path = config.output.join("config.json");
    let json = serde_json::to_string_pretty(config).map_err(|e| RunError::Config(e.to_string()))?;
    fs::write(&config_path, json + "\n").map_err(|e| output_error(&config_path, e))?;

    let mut snapshot_error = None;
    let result = adaptive_loop_with(&problem, &opts, |view| {
        let level = view.record.level;
        if config.export_mesh_every > 0 && level % config.export_mesh_every == 0 && snapshot_error.is_none() {
            let path = config.output.join(format!("mesh_{level}.json"));
            if let Err(e) = export_mesh(view.mesh, &path) {
                snapshot_error = Some(output_error(&path, e));
            }
        }
    });
    let (history, failure) = match result {
        Ok(h) => (h, None),
        Err(f) => (f.history, Some(f.error)),
    };
    let history_path = config.output.join("history.csv");
    export_history(&history, &history_path, config.record_timings).map_err(|e| output_error(&history_path, e))?;
    if let Some(e) = snapshot_error {
        return Err(e);
    }
    match failure {
        None => Ok(history),
        Some(e @ (Error::InvalidInput(_) | Error::UnsupportedFaceDegree(_))) => Err(RunError::Config(e.to_string())),
        Some(e) => Err(RunError::Solver {
            levels: history.levels.len(),
            message: e.to_string(),
        }),
    }
}
