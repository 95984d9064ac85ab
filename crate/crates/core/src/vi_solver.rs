//! Primal-dual active set solution of the discrete obstacle problem and the
//! discrete Lagrange multiplier.
//!
//! Sign convention: `λ̂ = F − A u`, restricted to cell dofs. It is zero off
//! the active set and nonpositive on it, and `σ_T = λ̂_T / |T|`.

use std::collections::HashSet;

use crate::assembly::{GlobalSystem, ObstacleAverages, ReducedSystem};
use crate::linsolve::solve_spd;
use crate::mesh::Mesh;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PdasOptions {
    /// Complementarity weight in the active set test.
    pub c: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for PdasOptions {
    fn default() -> Self {
        Self {
            c: 1.0,
            max_iter: 100,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdasStatus {
    Converged,
    MaxIterations,
    Cycling,
}

/// Full dof vector (cells first, then face blocks).
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSolution {
    pub k: usize,
    pub num_cells: usize,
    pub values: Vec<f64>,
}

impl DiscreteSolution {
    pub fn cell_values(&self) -> &[f64] {
        &self.values[..self.num_cells]
    }
}

#[derive(Debug, Clone)]
pub struct PdasOutcome {
    pub solution: DiscreteSolution,
    /// Free-dof values of the solution.
    pub free_values: Vec<f64>,
    /// `F − A u` on cells.
    pub lambda: Vec<f64>,
    pub active: Vec<bool>,
    pub iterations: usize,
    pub status: PdasStatus,
}

impl PdasOutcome {
    pub fn converged(&self) -> bool {
        self.status == PdasStatus::Converged
    }

    pub fn num_active(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    /// Turns a non-converged outcome into an error.
    pub fn into_result(self) -> Result<Self> {
        match self.status {
            PdasStatus::Converged => Ok(self),
            s => Err(Error::PdasNotConverged(format!(
                "{s:?} after {} iterations ({} active cells)",
                self.iterations,
                self.num_active()
            ))),
        }
    }
}

/// Solves `min ½ uᵀKu − rhsᵀu` over free dofs subject to `u_T ≥ χ̄_T`.
/// Cells occupy the first free indices.
pub fn solve_pdas(
    reduced: &ReducedSystem,
    obstacle: &ObstacleAverages,
    areas: &[f64],
    opts: &PdasOptions,
    initial_active: Option<&[bool]>,
) -> Result<PdasOutcome> {
    let n = obstacle.values.len();
    let nfree = reduced.num_free();
    assert!(n <= nfree && areas.len() == n);
    let chi = &obstacle.values;
    let mut active = match initial_active {
        Some(a) => {
            assert_eq!(a.len(), n);
            a.to_vec()
        }
        None => vec![false; n],
    };
    let rhs_norm = reduced.rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let max_area = areas.iter().fold(0.0f64, |m, &a| m.max(a));
    let mut visited: HashSet<Vec<bool>> = HashSet::new();
    visited.insert(active.clone());
    let mut iterations = 0;
    loop {
        iterations += 1;
        let u = solve_with_active(reduced, chi, &active)?;
        let ku = reduced.matrix.mul_vec(&u);
        let unorm = u.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let threshold = opts.tol * (rhs_norm + max_area * unorm);
        let mut next = vec![false; n];
        let mut mu = vec![0.0; n];
        for c in 0..n {
            if active[c] {
                mu[c] = ku[c] - reduced.rhs[c];
            }
            next[c] = mu[c] + opts.c * areas[c] * (chi[c] - u[c]) > threshold;
        }
        let status = if next == active {
            Some(PdasStatus::Converged)
        } else if !visited.insert(next.clone()) {
            Some(PdasStatus::Cycling)
        } else if iterations >= opts.max_iter {
            Some(PdasStatus::MaxIterations)
        } else {
            None
        };
        if let Some(status) = status {
            return Ok(PdasOutcome {
                solution: DiscreteSolution {
                    k: reduced.k,
                    num_cells: n,
                    values: reduced.expand(&u),
                },
                free_values: u,
                lambda: mu.iter().map(|m| -m).collect(),
                active,
                iterations,
                status,
            });
        }
        active = next;
    }
}

/// Equality-constrained solve with `u_T = χ̄_T` on active cells.
pub fn solve_with_active(reduced: &ReducedSystem, chi: &[f64], active: &[bool]) -> Result<Vec<f64>> {
    let nfree = reduced.num_free();
    let inactive: Vec<usize> = (0..nfree).filter(|&i| i >= active.len() || !active[i]).collect();
    let mut u = vec![0.0; nfree];
    for (c, &a) in active.iter().enumerate() {
        if a {
            u[c] = chi[c];
        }
    }
    let sub = reduced.matrix.submatrix(&inactive, &inactive);
    let rhs: Vec<f64> = inactive
        .iter()
        .map(|&i| {
            let coupling: f64 = reduced
                .matrix
                .row(i)
                .filter(|&(j, _)| j < active.len() && active[j])
                .map(|(j, v)| v * chi[j])
                .sum();
            reduced.rhs[i] - coupling
        })
        .collect();
    let x = solve_spd(&sub, &rhs)?;
    for (&i, v) in inactive.iter().zip(x) {
        u[i] = v;
    }
    Ok(u)
}

/// Discrete Lagrange multiplier: one value per cell and a block per face.
#[derive(Debug, Clone, PartialEq)]
pub struct Multiplier {
    pub cell: Vec<f64>,
    pub faces: Vec<Vec<f64>>,
    pub active: Vec<bool>,
    pub iterations: usize,
}

/// Maxima used to check the structure of the multiplier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiplierStructure {
    /// `max_T σ_T` (should be ≤ 0).
    pub max_cell: f64,
    /// `max |σ_T|` over inactive cells.
    pub max_inactive: f64,
    /// `max ‖σ_F‖_∞` over interior faces.
    pub max_interior_face: f64,
    /// `max ‖σ_F‖_∞` over boundary faces (discrete fluxes).
    pub max_boundary_face: f64,
    /// `max(1, ‖F‖_∞ / min |T|)`.
    pub scale: f64,
}

impl MultiplierStructure {
    pub fn holds(&self, cell_tol: f64, face_tol: f64) -> bool {
        self.max_cell <= cell_tol * self.scale
            && self.max_inactive <= cell_tol * self.scale
            && self.max_interior_face <= face_tol * self.scale
    }
}

/// Tests the residual `F − A u` against every basis dof:
/// `|T| σ_T = (f, 1)_T − (A u)_T` and `M_F σ_F = −(A u)_F`.
pub fn compute_multiplier(
    mesh: &Mesh,
    system: &GlobalSystem,
    solution: &DiscreteSolution,
    active: &[bool],
    iterations: usize,
) -> Result<Multiplier> {
    let dm = &system.dofmap;
    if solution.values.len() != dm.total() || mesh.num_cells() != dm.num_cells {
        return Err(Error::Mismatch(format!(
            "solution has {} dofs, system has {}",
            solution.values.len(),
            dm.total()
        )));
    }
    let au = system.matrix.mul_vec(&solution.values);
    let cell = (0..dm.num_cells)
        .map(|c| (system.load[c] - au[c]) / mesh.area(c))
        .collect();
    let faces = mesh
        .faces()
        .iter()
        .enumerate()
        .map(|(f, face)| {
            (0..=dm.k)
                .map(|l| {
                    let mass = if l == 0 { face.length } else { face.length / 12.0 };
                    -au[dm.face_dof(f, l)] / mass
                })
                .collect()
        })
        .collect();
    Ok(Multiplier {
        cell,
        faces,
        active: active.to_vec(),
        iterations,
    })
}

impl Multiplier {
    pub fn structure(&self, mesh: &Mesh, load: &[f64]) -> MultiplierStructure {
        let fmax = load.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let amin = mesh.areas().iter().copied().fold(f64::INFINITY, f64::min);
        let mut s = MultiplierStructure {
            max_cell: f64::NEG_INFINITY,
            max_inactive: 0.0,
            max_interior_face: 0.0,
            max_boundary_face: 0.0,
            scale: (fmax / amin).max(1.0),
        };
        for (c, &sig) in self.cell.iter().enumerate() {
            s.max_cell = s.max_cell.max(sig);
            if !self.active[c] {
                s.max_inactive = s.max_inactive.max(sig.abs());
            }
        }
        for (face, block) in mesh.faces().iter().zip(&self.faces) {
            let m = block.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if face.is_boundary() {
                s.max_boundary_face = s.max_boundary_face.max(m);
            } else {
                s.max_interior_face = s.max_interior_face.max(m);
            }
        }
        s
    }
}

/// Max-norms of the four KKT residuals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResidual {
    /// `‖K u − rhs + λ̂‖_∞` with `λ̂` on cell rows.
    pub stationarity: f64,
    /// `max (χ̄_T − u_T)⁺`.
    pub feasibility: f64,
    /// `max (λ̂_T)⁺`.
    pub sign: f64,
    /// `max |λ̂_T (u_T − χ̄_T)|`.
    pub complementarity: f64,
}

impl KktResidual {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.feasibility)
            .max(self.sign)
            .max(self.complementarity)
    }
}

pub fn kkt_residual(
    reduced: &ReducedSystem,
    obstacle: &ObstacleAverages,
    free_values: &[f64],
    lambda: &[f64],
) -> KktResidual {
    let chi = &obstacle.values;
    let ku = reduced.matrix.mul_vec(free_values);
    let stationarity = (0..free_values.len())
        .map(|i| {
            let l = if i < lambda.len() { lambda[i] } else { 0.0 };
            (ku[i] - reduced.rhs[i] + l).abs()
        })
        .fold(0.0, f64::max);
    let mut r = KktResidual {
        stationarity,
        feasibility: 0.0,
        sign: 0.0,
        complementarity: 0.0,
    };
    for c in 0..chi.len() {
        r.feasibility = r.feasibility.max(chi[c] - free_values[c]);
        r.sign = r.sign.max(lambda[c]);
        r.complementarity = r.complementarity.max((lambda[c] * (free_values[c] - chi[c])).abs());
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{apply_boundary_data, assemble_global, obstacle_averages};
    use crate::Point;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn square() -> Mesh {
        Mesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap()
    }

    fn setup(
        mesh: &Mesh,
        k: usize,
        f: impl Fn(Point) -> f64 + Sync,
        chi: impl Fn(Point) -> f64 + Sync,
    ) -> (GlobalSystem, ReducedSystem, ObstacleAverages) {
        let sys = assemble_global(mesh, k, f).unwrap();
        let red = apply_boundary_data(&sys, mesh, None).unwrap();
        let obs = obstacle_averages(mesh, chi).unwrap();
        (sys, red, obs)
    }

    /// Minimizer over all `2^n` active sets with dense equality-constrained
    /// solves, keeping only feasible candidates with the right multiplier sign.
    fn enumerate(red: &ReducedSystem, chi: &[f64]) -> DVector<f64> {
        let k = red.matrix.to_dense();
        let b = DVector::from_column_slice(&red.rhs);
        let n = chi.len();
        let nf = b.len();
        let mut best: Option<(f64, DVector<f64>)> = None;
        for mask in 0..(1usize << n) {
            let act = |i: usize| i < n && mask >> i & 1 == 1;
            let free: Vec<usize> = (0..nf).filter(|&i| !act(i)).collect();
            let mut u = DVector::zeros(nf);
            for i in 0..n {
                if act(i) {
                    u[i] = chi[i];
                }
            }
            let kk = DMatrix::from_fn(free.len(), free.len(), |i, j| k[(free[i], free[j])]);
            let r = &b - &k * &u;
            let rr = DVector::from_fn(free.len(), |i, _| r[free[i]]);
            let x = kk.cholesky().unwrap().solve(&rr);
            for (i, &g) in free.iter().enumerate() {
                u[g] = x[i];
            }
            let grad = &k * &u - &b;
            let ok = (0..n).all(|i| u[i] >= chi[i] - 1e-12 && (!act(i) || grad[i] >= -1e-12));
            if ok {
                let energy = 0.5 * u.dot(&(&k * &u)) - b.dot(&u);
                if best.as_ref().is_none_or(|(e, _)| energy < *e) {
                    best = Some((energy, u));
                }
            }
        }
        best.unwrap().1
    }

    #[test]
    fn far_obstacle_is_inactive() {
        let m = square().uniform_refine().unwrap();
        let (sys, red, obs) = setup(&m, 1, |x| 1.0 + x[0], |_| -1e9);
        let out = solve_pdas(&red, &obs, m.areas(), &PdasOptions::default(), None).unwrap();
        assert_eq!(
            (out.iterations, out.num_active(), out.status),
            (1, 0, PdasStatus::Converged)
        );
        let plain = solve_spd(&red.matrix, &red.rhs).unwrap();
        assert_eq!(out.free_values, plain);
        assert!(out.lambda.iter().all(|&l| l == 0.0));
        let mult = compute_multiplier(&m, &sys, &out.solution, &out.active, out.iterations).unwrap();
        let st = mult.structure(&m, &sys.load);
        assert!(st.max_cell.abs() <= 1e-9 * st.scale && st.max_interior_face <= 1e-9 * st.scale);
    }

    #[test]
    fn two_cell_square_matches_enumeration() {
        let m = square();
        for k in 0..=1 {
            let (_, red, obs) = setup(&m, k, |_| -10.0, |_| 0.0);
            let out = solve_pdas(&red, &obs, m.areas(), &PdasOptions::default(), None).unwrap();
            assert!(out.converged());
            let oracle = enumerate(&red, &obs.values);
            let diff = (DVector::from_vec(out.free_values.clone()) - oracle).amax();
            assert!(diff < 1e-10, "k={k}: {diff}");
        }
    }

    #[test]
    fn random_problems_match_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let base = square().uniform_refine().unwrap();
        for trial in 0..8 {
            let k = trial % 2;
            let (a, b, c) = (
                rng.gen_range(-20.0..5.0),
                rng.gen_range(-10.0..10.0),
                rng.gen_range(-0.3..0.1),
            );
            let (_, red, obs) = setup(&base, k, move |x| a + b * x[0], move |x| c + 0.2 * x[1]);
            let out = solve_pdas(&red, &obs, base.areas(), &PdasOptions::default(), None).unwrap();
            assert!(out.converged());
            let diff = (DVector::from_vec(out.free_values.clone()) - enumerate(&red, &obs.values)).amax();
            assert!(diff < 1e-8, "trial {trial}: {diff}");
        }
    }

    #[test]
    fn multiplier_and_kkt_on_contact_problem() {
        let m = square().uniform_refine().unwrap().uniform_refine().unwrap();
        let (sys, red, obs) = setup(&m, 1, |_| -20.0, |x| -0.6 + 0.1 * x[0] * (1.0 - x[0]));
        let out = solve_pdas(&red, &obs, m.areas(), &PdasOptions::default(), None).unwrap();
        assert!(out.converged() && out.num_active() > 0 && out.num_active() < m.num_cells());
        let kkt = kkt_residual(&red, &obs, &out.free_values, &out.lambda);
        assert!(kkt.max() <= 1e-10, "{kkt:?}");
        let mult = compute_multiplier(&m, &sys, &out.solution, &out.active, out.iterations).unwrap();
        let st = mult.structure(&m, &sys.load);
        assert!(st.holds(1e-9, 1e-8), "{st:?}");
        for c in 0..m.num_cells() {
            if out.active[c] {
                let rel = (mult.cell[c] - out.lambda[c] / m.area(c)).abs();
                assert!(rel <= 1e-10 * mult.cell[c].abs().max(1e-300) + 1e-12 * st.scale);
            }
        }
        // complementarity
        let comp: f64 = (0..m.num_cells())
            .map(|c| mult.cell[c].abs() * (out.free_values[c] - obs.values[c]) * m.area(c))
            .sum();
        assert!(comp <= 1e-9 * st.scale);
    }

    #[test]
    fn discrete_variational_inequality() {
        let m = square().uniform_refine().unwrap().uniform_refine().unwrap();
        let (sys, red, obs) = setup(&m, 1, |_| -20.0, |_| -0.6);
        let out = solve_pdas(&red, &obs, m.areas(), &PdasOptions::default(), None).unwrap();
        let u = &out.free_values;
        let ku = red.matrix.mul_vec(u);
        let scale = u.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let v: Vec<f64> = (0..u.len())
                .map(|i| {
                    if i < m.num_cells() {
                        u[i] + rng.gen_range(0.0..0.1)
                    } else {
                        u[i] + rng.gen_range(-0.1..0.1)
                    }
                })
                .collect();
            // a_h(u, v − u) − (f, v_T − u_T)
            let val: f64 = (0..u.len()).map(|i| (ku[i] - red.rhs[i]) * (v[i] - u[i])).sum();
            assert!(val >= -1e-9 * scale, "{val}");
        }
        let _ = sys;
    }

    #[test]
    fn kkt_residual_responses() {
        let m = square().uniform_refine().unwrap().uniform_refine().unwrap();
        let (_, red, obs) = setup(&m, 0, |_| -20.0, |_| -0.6);
        let out = solve_pdas(&red, &obs, m.areas(), &PdasOptions::default(), None).unwrap();
        let base = kkt_residual(&red, &obs, &out.free_values, &out.lambda);
        assert!(base.max() <= 1e-10);
        let c = (0..m.num_cells()).find(|&c| !out.active[c]).unwrap();
        let eps = 1e-6;
        let mut u = out.free_values.clone();
        u[c] += eps;
        let pert = kkt_residual(&red, &obs, &u, &out.lambda);
        let diag = red.matrix.get(c, c);
        assert!(pert.stationarity >= 0.99 * eps * diag && pert.stationarity <= eps * diag * 1.01 + base.stationarity);
        assert!(pert.feasibility <= base.feasibility + 1e-15 && pert.sign == base.sign);
        let mut bad = out.free_values.clone();
        bad[c] = obs.values[c] - 1.0;
        assert!((kkt_residual(&red, &obs, &bad, &out.lambda).feasibility - 1.0).abs() < 1e-14);
    }

    #[test]
    fn warm_start_from_solution_takes_one_iteration() {
        let m = square().uniform_refine().unwrap().uniform_refine().unwrap();
        let (_, red, obs) = setup(&m, 1, |_| -20.0, |_| -0.6);
        let cold = solve_pdas(&red, &obs, m.areas(), &PdasOptions::default(), None).unwrap();
        let warm = solve_pdas(&red, &obs, m.areas(), &PdasOptions::default(), Some(&cold.active)).unwrap();
        assert_eq!(warm.iterations, 1);
        assert_eq!(warm.free_values, cold.free_values);
    }
}
