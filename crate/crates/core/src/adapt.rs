//! Dörfler marking and the SOLVE → ESTIMATE → MARK → REFINE driver.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::assembly::{apply_boundary_data, assemble_global, obstacle_averages, GlobalSystem, ReducedSystem};
use crate::estimator::{
    data_oscillation, estimate, exact_energy_errors, local_efficiency_ratios, quantile, ErrorReport,
    EstimatorBreakdown, EstimatorInput,
};
use crate::mesh::Mesh;
use crate::postprocess::{conforming_post, ConformingField, PiecewiseField};
use crate::problems::ProblemSpec;
use crate::vi_solver::{
    compute_multiplier, solve_pdas, DiscreteSolution, Multiplier, MultiplierStructure, PdasOptions,
};
use crate::{Error, Result};

/// Cells selected for refinement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Marking {
    /// Ascending cell indices.
    pub marked: Vec<usize>,
    /// Set when every indicator is zero and nothing needs refining.
    pub converged: bool,
}

/// Greedy bulk marking: cells are taken by decreasing indicator (ties by
/// index) until they carry `theta` of the total.
pub fn dorfler_mark(indicators: &[f64], theta: f64) -> Result<Marking> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidInput(format!("marking fraction {theta} not in (0, 1)")));
    }
    if let Some(bad) = indicators.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::InvalidInput(format!(
            "indicator {bad} is not a finite nonnegative value"
        )));
    }
    let total: f64 = indicators.iter().sum();
    if total == 0.0 {
        return Ok(Marking {
            marked: Vec::new(),
            converged: true,
        });
    }
    let mut order: Vec<usize> = (0..indicators.len()).collect();
    order.sort_by(|&a, &b| indicators[b].total_cmp(&indicators[a]).then(a.cmp(&b)));
    let goal = theta * total;
    let mut sum = 0.0;
    let mut marked = Vec::new();
    for c in order {
        marked.push(c);
        sum += indicators[c];
        if sum >= goal {
            break;
        }
    }
    marked.sort_unstable();
    Ok(Marking {
        marked,
        converged: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Adaptive,
    Uniform,
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adaptive" => Ok(Strategy::Adaptive),
            "uniform" => Ok(Strategy::Uniform),
            _ => Err(Error::InvalidInput(format!("unknown strategy {s:?}"))),
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Strategy::Adaptive => "adaptive",
            Strategy::Uniform => "uniform",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptOptions {
    /// Face degree.
    pub k: usize,
    pub theta: f64,
    /// A level whose free dof count would exceed this is not solved.
    pub max_dofs: usize,
    pub max_levels: usize,
    pub strategy: Strategy,
    /// Start each PDAS solve from the active set inherited from the parent cells.
    pub warm_start: bool,
    pub pdas: PdasOptions,
}

impl Default for AdaptOptions {
    fn default() -> Self {
        Self {
            k: 1,
            theta: 0.3,
            max_dofs: 100_000,
            max_levels: 100,
            strategy: Strategy::Adaptive,
            warm_start: true,
            pdas: PdasOptions::default(),
        }
    }
}

impl AdaptOptions {
    pub fn validate(&self) -> Result<()> {
        if self.k > crate::hho::MAX_FACE_DEGREE {
            return Err(Error::UnsupportedFaceDegree(self.k));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::InvalidInput(format!("theta = {} not in (0, 1)", self.theta)));
        }
        if self.max_levels == 0 {
            return Err(Error::InvalidInput("max_levels must be positive".into()));
        }
        if self.pdas.tol.is_nan()
            || self.pdas.tol <= 0.0
            || self.pdas.c.is_nan()
            || self.pdas.c <= 0.0
            || self.pdas.max_iter == 0
        {
            return Err(Error::InvalidInput("PDAS options must be positive".into()));
        }
        Ok(())
    }
}

/// One row of a convergence history. The `eta*` entries are square roots of
/// the global sums, so `eta_total² = eta1² + eta2² + eta3² + eta_pos² + eta_contact²`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelRecord {
    pub level: usize,
    pub cells: usize,
    /// Free degrees of freedom.
    pub dofs: usize,
    pub error_energy: Option<f64>,
    pub eta_total: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub eta3: f64,
    pub eta_pos: f64,
    pub eta_contact: f64,
    pub efficiency: Option<f64>,
    pub pdas_iters: usize,
    /// Wall-clock time of the level.
    pub seconds: Option<f64>,
    /// Diagnostics kept in memory only.
    pub extra: Option<LevelDiagnostics>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelDiagnostics {
    pub active_cells: usize,
    pub multiplier: MultiplierStructure,
    /// Smallest per-cell estimator contribution.
    pub min_component: f64,
    /// 95th percentile of the local efficiency ratios.
    pub local_efficiency_p95: Option<f64>,
}

impl LevelRecord {
    pub fn from_report(level: usize, cells: usize, dofs: usize, report: &ErrorReport, pdas_iters: usize) -> Self {
        Self {
            level,
            cells,
            dofs,
            error_energy: report.energy_error,
            eta_total: report.eta,
            eta1: report.parts.e1.sqrt(),
            eta2: report.parts.e2.sqrt(),
            eta3: report.parts.e3.sqrt(),
            eta_pos: report.parts.epos.sqrt(),
            eta_contact: report.parts.econ.max(0.0).sqrt(),
            efficiency: report.efficiency,
            pdas_iters,
            seconds: None,
            extra: None,
        }
    }

    /// Equality of the exported columns.
    pub fn same_columns(&self, other: &Self) -> bool {
        Self {
            extra: None,
            ..self.clone()
        } == Self {
            extra: None,
            ..other.clone()
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceHistory {
    pub levels: Vec<LevelRecord>,
}

impl ConvergenceHistory {
    pub fn last(&self) -> Option<&LevelRecord> {
        self.levels.last()
    }

    /// Levels whose dof count is within a factor ten of the last level.
    pub fn final_decade(&self) -> &[LevelRecord] {
        let Some(last) = self.last() else { return &[] };
        let start = self
            .levels
            .iter()
            .position(|l| l.dofs as f64 >= last.dofs as f64 / 10.0)
            .unwrap_or(0);
        &self.levels[start..]
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len()) as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Everything computed on one level, handed to observers before refinement.
pub struct LevelView<'a> {
    pub record: &'a LevelRecord,
    pub mesh: &'a Mesh,
    pub system: &'a GlobalSystem,
    pub reduced: &'a ReducedSystem,
    pub solution: &'a DiscreteSolution,
    pub multiplier: &'a Multiplier,
    pub field: &'a PiecewiseField,
    pub post: &'a ConformingField,
    pub breakdown: &'a EstimatorBreakdown,
    /// Per-cell squared energy errors, when the exact solution is known.
    pub errors: Option<&'a [f64]>,
}

/// An aborted run together with the levels completed before the failure.
#[derive(Debug, thiserror::Error)]
#[error("adaptive loop aborted after {} levels: {error}", history.levels.len())]
pub struct AdaptFailure {
    pub history: ConvergenceHistory,
    #[source]
    pub error: Error,
}

impl From<AdaptFailure> for Error {
    fn from(f: AdaptFailure) -> Self {
        f.error
    }
}

pub fn adaptive_loop(
    problem: &ProblemSpec,
    opts: &AdaptOptions,
) -> std::result::Result<ConvergenceHistory, AdaptFailure> {
    adaptive_loop_with(problem, opts, |_| {})
}

/// Runs the loop and calls `observer` once per solved level.
pub fn adaptive_loop_with<O>(
    problem: &ProblemSpec,
    opts: &AdaptOptions,
    mut observer: O,
) -> std::result::Result<ConvergenceHistory, AdaptFailure>
where
    O: FnMut(&LevelView<'_>),
{
    let mut history = ConvergenceHistory::default();
    match run_levels(problem, opts, &mut history, &mut observer) {
        Ok(()) => Ok(history),
        Err(error) => Err(AdaptFailure { history, error }),
    }
}

fn run_levels<O>(
    problem: &ProblemSpec,
    opts: &AdaptOptions,
    history: &mut ConvergenceHistory,
    observer: &mut O,
) -> Result<()>
where
    O: FnMut(&LevelView<'_>),
{
    opts.validate()?;
    let g = problem
        .boundary
        .as_deref()
        .map(|g| g as &(dyn Fn(crate::Point) -> f64 + Sync));
    let mut mesh = problem.mesh.clone();
    let mut warm: Option<Vec<bool>> = None;
    for level in 0..opts.max_levels {
        let start = Instant::now();
        let system = assemble_global(&mesh, opts.k, &*problem.load)?;
        let reduced = apply_boundary_data(&system, &mesh, g)?;
        let dofs = reduced.num_free();
        if dofs > opts.max_dofs {
            if level == 0 {
                return Err(Error::InvalidInput(format!(
                    "max_dofs {} below the initial {dofs} dofs",
                    opts.max_dofs
                )));
            }
            break;
        }
        let obstacle = obstacle_averages(&mesh, &*problem.obstacle)?;
        let initial = if opts.warm_start { warm.as_deref() } else { None };
        let outcome = solve_pdas(&reduced, &obstacle, mesh.areas(), &opts.pdas, initial)?.into_result()?;
        let multiplier = compute_multiplier(&mesh, &system, &outcome.solution, &outcome.active, outcome.iterations)?;
        let (field, post) = conforming_post(&mesh, &system, &outcome.solution, g)?;
        let breakdown = estimate(
            &EstimatorInput {
                mesh: &mesh,
                system: &system,
                solution: &outcome.solution,
                multiplier: &multiplier,
                field: &field,
                post: &post,
            },
            problem,
        )?;
        let errors = match problem.exact {
            Some(_) => Some(exact_energy_errors(&mesh, &field, problem)?),
            None => None,
        };
        let report = ErrorReport::new(errors.as_ref().map(|e| e.iter().sum::<f64>().sqrt()), &breakdown);
        let indicators = breakdown.indicators();
        let local_efficiency_p95 = match &errors {
            Some(errors) => {
                let osc = data_oscillation(&mesh, &problem.load, opts.k)?;
                Some(quantile(
                    &local_efficiency_ratios(&mesh, &indicators, errors, &osc),
                    0.95,
                ))
            }
            None => None,
        };
        let mut record = LevelRecord::from_report(level, mesh.num_cells(), dofs, &report, outcome.iterations);
        record.extra = Some(LevelDiagnostics {
            active_cells: outcome.num_active(),
            multiplier: multiplier.structure(&mesh, &system.load),
            min_component: breakdown.min_component(),
            local_efficiency_p95,
        });
        let marking = match opts.strategy {
            Strategy::Adaptive => Some(dorfler_mark(&indicators, opts.theta)?),
            Strategy::Uniform => None,
        };
        record.seconds = Some(start.elapsed().as_secs_f64());
        observer(&LevelView {
            record: &record,
            mesh: &mesh,
            system: &system,
            reduced: &reduced,
            solution: &outcome.solution,
            multiplier: &multiplier,
            field: &field,
            post: &post,
            breakdown: &breakdown,
            errors: errors.as_deref(),
        });
        history.levels.push(record);
        if level + 1 == opts.max_levels || dofs == opts.max_dofs {
            break;
        }
        let (next, parents) = match marking {
            Some(m) if m.converged => break,
            Some(m) => mesh.refine_nvb_with_parents(&m.marked)?,
            None => mesh.uniform_refine_with_parents()?,
        };
        warm = Some(parents.iter().map(|&p| outcome.active[p]).collect());
        mesh = next;
    }
    Ok(())
}
