//! Residual a posteriori estimator for the discrete obstacle problem, exact
//! energy errors and efficiency indices.

use rayon::prelude::*;

use crate::assembly::GlobalSystem;
use crate::fem_tables::{data_degree, form_degree, triangle_rule, TriangleRule};
use crate::mesh::Mesh;
use crate::postprocess::{ConformingField, PiecewiseField};
use crate::problems::{Interface, ProblemSpec, ScalarField};
use crate::vi_solver::{DiscreteSolution, Multiplier};
use crate::{Error, Point, Result};

/// Degree of the rule used on each sub-triangle for the obstacle terms.
pub const OBSTACLE_RULE_DEGREE: usize = 5;
/// Degree of the rule used for exact energy errors.
pub const ERROR_RULE_DEGREE: usize = 8;
/// Uniform subdivision depth for cells meeting a curved interface.
pub const INTERFACE_DEPTH: usize = 2;
/// Depth down to which sub-triangles crossing a curved interface are split.
pub const INTERFACE_MAX_DEPTH: usize = 9;
/// Uniform subdivision depth for cells touching a point singularity.
pub const SINGULAR_POINT_DEPTH: usize = 4;
/// Depth down to which sub-triangles touching a point singularity are split.
pub const SINGULAR_POINT_MAX_DEPTH: usize = 16;
/// Energy errors below this are roundoff and treated as zero by
/// [`efficiency_index`].
pub const ZERO_ERROR_THRESHOLD: f64 = 1e-10;

/// Squared per-cell contributions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EstimatorBreakdown {
    /// `‖∇(p_T u_T − u*)‖²_T`.
    pub e1: Vec<f64>,
    /// `h_T² ‖r − π⁰_T r‖²_T` with `r = f + Δp_T u_T − σ_T`.
    pub e2: Vec<f64>,
    /// `s_T(u_T, u_T)`.
    pub e3: Vec<f64>,
    /// `‖∇(χ − u*)⁺‖²_T`.
    pub epos: Vec<f64>,
    /// `∫_T σ_T (χ − u*)⁻` on contact cells, nonnegative since `σ_T ≤ 0`.
    pub econ: Vec<f64>,
}

/// Global sums of the squared contributions.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EstimatorTotals {
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
    pub epos: f64,
    pub econ: f64,
}

impl EstimatorTotals {
    pub fn total(&self) -> f64 {
        self.e1 + self.e2 + self.e3 + self.epos + self.econ
    }

    pub fn eta(&self) -> f64 {
        self.total().sqrt()
    }
}

impl EstimatorBreakdown {
    pub fn num_cells(&self) -> usize {
        self.e1.len()
    }

    pub fn cell_total(&self, c: usize) -> f64 {
        self.e1[c] + self.e2[c] + self.e3[c] + self.epos[c] + self.econ[c]
    }

    /// `η_T²` for every cell.
    pub fn indicators(&self) -> Vec<f64> {
        (0..self.num_cells()).map(|c| self.cell_total(c)).collect()
    }

    /// Sums in ascending cell order.
    pub fn totals(&self) -> EstimatorTotals {
        let sum = |v: &[f64]| v.iter().sum::<f64>();
        EstimatorTotals {
            e1: sum(&self.e1),
            e2: sum(&self.e2),
            e3: sum(&self.e3),
            epos: sum(&self.epos),
            econ: sum(&self.econ),
        }
    }

    pub fn eta(&self) -> f64 {
        self.indicators().iter().sum::<f64>().sqrt()
    }

    pub fn min_component(&self) -> f64 {
        [&self.e1, &self.e2, &self.e3, &self.epos, &self.econ]
            .iter()
            .flat_map(|v| v.iter().copied())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Points and weights of `rule` mapped to each of the `4^depth` sub-triangles
/// of uniform red refinement.
pub fn subdivided_rule(tri: &[Point; 3], depth: usize, rule: &TriangleRule) -> Vec<(Point, f64)> {
    let mut tris = vec![*tri];
    for _ in 0..depth {
        let mut next = Vec::with_capacity(tris.len() * 4);
        for t in &tris {
            next.extend(split(t));
        }
        tris = next;
    }
    tris.iter().flat_map(|t| rule.physical(t).collect::<Vec<_>>()).collect()
}

/// Inputs of [`estimate`] that all refer to one mesh level.
pub struct EstimatorInput<'a> {
    pub mesh: &'a Mesh,
    pub system: &'a GlobalSystem,
    pub solution: &'a DiscreteSolution,
    pub multiplier: &'a Multiplier,
    pub field: &'a PiecewiseField,
    pub post: &'a ConformingField,
}

pub fn estimate(input: &EstimatorInput<'_>, problem: &ProblemSpec) -> Result<EstimatorBreakdown> {
    let EstimatorInput {
        mesh,
        system,
        solution,
        multiplier,
        field,
        post,
    } = *input;
    let n = mesh.num_cells();
    if system.dofmap.num_cells != n
        || solution.values.len() != system.dofmap.total()
        || multiplier.cell.len() != n
        || field.num_cells() != n
        || post.vertex_values.len() != mesh.num_vertices()
    {
        return Err(Error::Mismatch("estimator inputs come from different levels".into()));
    }
    let k = system.k();
    let form = triangle_rule(form_degree(k))?;
    let data = triangle_rule(data_degree(k))?;
    let obstacle_rule = triangle_rule(OBSTACLE_RULE_DEGREE)?;
    let rows: Vec<[f64; 5]> = (0..n)
        .into_par_iter()
        .map(|c| {
            let tri = mesh.cell_points(c);
            let e1: f64 = form
                .physical(&tri)
                .map(|(x, w)| {
                    let gp = field.gradient(c, x);
                    let gs = post.gradient(mesh, c, x);
                    w * ((gp[0] - gs[0]).powi(2) + (gp[1] - gs[1]).powi(2))
                })
                .sum();
            let shift = field.laplacian(c) - multiplier.cell[c];
            let e2 = mesh.diameter(c).powi(2)
                * mean_deviation(&data.physical(&tri).collect::<Vec<_>>(), |x| (problem.load)(x) + shift);
            let local = system.dofmap.restrict(c, &solution.values);
            let e3 = system.locals[c].stabilization_energy(&local);
            let mut epos = 0.0;
            let mut econ = 0.0;
            for (x, w) in subdivided_rule(&tri, 1, obstacle_rule) {
                let gap = (problem.obstacle)(x) - post.value(mesh, c, x);
                if gap > 0.0 {
                    let gc = (problem.obstacle_gradient)(x);
                    let gs = post.gradient(mesh, c, x);
                    epos += w * ((gc[0] - gs[0]).powi(2) + (gc[1] - gs[1]).powi(2));
                } else if multiplier.active[c] {
                    econ += w * multiplier.cell[c] * gap;
                }
            }
            [e1, e2, e3, epos, econ]
        })
        .collect();
    let col = |i: usize| rows.iter().map(|r| r[i]).collect();
    Ok(EstimatorBreakdown {
        e1: col(0),
        e2: col(1),
        e3: col(2),
        epos: col(3),
        econ: col(4),
    })
}

/// `‖g − mean(g)‖²` over the given quadrature points.
fn mean_deviation(points: &[(Point, f64)], g: impl Fn(Point) -> f64) -> f64 {
    let values: Vec<f64> = points.iter().map(|&(x, _)| g(x)).collect();
    let area: f64 = points.iter().map(|p| p.1).sum();
    let mean = points.iter().zip(&values).map(|(p, v)| p.1 * v).sum::<f64>() / area;
    points.iter().zip(&values).map(|(p, v)| p.1 * (v - mean).powi(2)).sum()
}

/// `osc_h(f; T)² = h_T² ‖f − π⁰_T f‖²_T`, with the same rule the estimator uses.
pub fn data_oscillation(mesh: &Mesh, f: &ScalarField, k: usize) -> Result<Vec<f64>> {
    let rule = triangle_rule(data_degree(k))?;
    Ok((0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let pts: Vec<_> = rule.physical(&mesh.cell_points(c)).collect();
            mesh.diameter(c).powi(2) * mean_deviation(&pts, |x| f(x))
        })
        .collect())
}

fn split(tri: &[Point; 3]) -> [[Point; 3]; 4] {
    let [a, b, c] = *tri;
    let mid = |p: Point, q: Point| [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
    let (ab, bc, ca) = (mid(a, b), mid(b, c), mid(c, a));
    [[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]
}

fn depth_limits(interface: &Interface) -> (usize, usize) {
    match interface {
        Interface::Circle { .. } => (INTERFACE_DEPTH, INTERFACE_MAX_DEPTH),
        Interface::Point(_) => (SINGULAR_POINT_DEPTH, SINGULAR_POINT_MAX_DEPTH),
    }
}

/// Quadrature for integrands that lose smoothness across `interfaces`: the
/// cell is split uniformly to the base depth of the interfaces it meets, and
/// sub-triangles still crossing an interface keep being split up to its
/// maximal depth.
pub fn interface_rule(tri: &[Point; 3], interfaces: &[Interface], rule: &TriangleRule) -> Vec<(Point, f64)> {
    fn visit(
        t: &[Point; 3],
        level: usize,
        base: usize,
        interfaces: &[Interface],
        rule: &TriangleRule,
        out: &mut Vec<(Point, f64)>,
    ) {
        let deeper = level < base || interfaces.iter().any(|i| level < depth_limits(i).1 && i.meets(t));
        if deeper {
            for child in split(t) {
                visit(&child, level + 1, base, interfaces, rule, out);
            }
        } else {
            out.extend(rule.physical(t));
        }
    }
    let base = interfaces
        .iter()
        .filter(|i| i.meets(tri))
        .map(|i| depth_limits(i).0)
        .max()
        .unwrap_or(0);
    let mut out = Vec::new();
    if base > 0 {
        visit(tri, 0, base, interfaces, rule, &mut out);
    } else {
        out.extend(rule.physical(tri));
    }
    out
}

/// Per-cell `‖∇(u − p_T u_T)‖²_T`.
pub fn exact_energy_errors(mesh: &Mesh, field: &PiecewiseField, problem: &ProblemSpec) -> Result<Vec<f64>> {
    let exact = problem.exact.as_ref().ok_or(Error::MissingExactSolution)?;
    if field.num_cells() != mesh.num_cells() {
        return Err(Error::Mismatch("field and mesh differ".into()));
    }
    let rule = triangle_rule(ERROR_RULE_DEGREE)?;
    Ok((0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let tri = mesh.cell_points(c);
            interface_rule(&tri, &exact.interfaces, rule)
                .into_iter()
                .map(|(x, w)| {
                    let gu = (exact.gradient)(x);
                    let gp = field.gradient(c, x);
                    w * ((gu[0] - gp[0]).powi(2) + (gu[1] - gp[1]).powi(2))
                })
                .sum()
        })
        .collect())
}

/// `‖∇_h(u − p_h u_h)‖`.
pub fn exact_energy_error(mesh: &Mesh, field: &PiecewiseField, problem: &ProblemSpec) -> Result<f64> {
    Ok(exact_energy_errors(mesh, field, problem)?.iter().sum::<f64>().sqrt())
}

/// `η / error`.
pub fn efficiency_index(error: f64, eta: f64) -> Result<f64> {
    if error.is_nan() || error <= ZERO_ERROR_THRESHOLD || !eta.is_finite() {
        return Err(Error::ZeroError(error));
    }
    Ok(eta / error)
}

/// Energy error, estimator and their ratio for one level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    pub energy_error: Option<f64>,
    pub eta: f64,
    pub efficiency: Option<f64>,
    pub parts: EstimatorTotals,
}

impl ErrorReport {
    pub fn new(energy_error: Option<f64>, breakdown: &EstimatorBreakdown) -> Self {
        let parts = breakdown.totals();
        let eta = parts.eta();
        Self {
            energy_error,
            eta,
            efficiency: energy_error.and_then(|e| efficiency_index(e, eta).ok()),
            parts,
        }
    }
}

/// Per-cell `η_T / (‖∇(u − p u_h)‖ + osc)` with both terms taken over the
/// cells sharing a vertex with `T`.
pub fn local_efficiency_ratios(mesh: &Mesh, indicators: &[f64], errors: &[f64], osc: &[f64]) -> Vec<f64> {
    let patches = mesh.vertex_patches();
    (0..mesh.num_cells())
        .map(|c| {
            let den: f64 = patches[c].iter().map(|&t| errors[t] + osc[t]).sum();
            if den > 0.0 {
                (indicators[c] / den).sqrt()
            } else {
                0.0
            }
        })
        .collect()
}

/// The `p`-quantile (`0 ≤ p ≤ 1`) by nearest rank.
pub fn quantile(values: &[f64], p: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let idx = ((p * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1;
    v[idx]
}
