//! Global degrees of freedom, sparse assembly, Dirichlet elimination and the
//! cell averages of the obstacle.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::fem_tables::{data_degree, project_face, triangle_rule};
use crate::hho::{self, local_operators, local_size, LocalOperators};
use crate::mesh::Mesh;
use crate::sparse::CsrMatrix;
use crate::{Point, Result};

/// Numbering: cell `c` is dof `c`; mode `l` of face `f` is `n + f (k + 1) + l`.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    pub k: usize,
    pub num_cells: usize,
    pub num_faces: usize,
    /// Global indices of free dofs in ascending order; cells come first, so
    /// free index `c` is cell `c`.
    pub free: Vec<usize>,
    /// Global indices of boundary face dofs in ascending order.
    pub dirichlet: Vec<usize>,
    free_index: Vec<Option<usize>>,
    cell_faces: Vec<[usize; 3]>,
}

impl DofMap {
    pub fn total(&self) -> usize {
        self.num_cells + self.num_faces * (self.k + 1)
    }

    pub fn num_free(&self) -> usize {
        self.free.len()
    }

    pub fn cell_dof(&self, cell: usize) -> usize {
        cell
    }

    pub fn face_dof(&self, face: usize, l: usize) -> usize {
        self.num_cells + face * (self.k + 1) + l
    }

    pub fn free_index(&self, global: usize) -> Option<usize> {
        self.free_index[global]
    }

    pub fn is_dirichlet(&self, global: usize) -> bool {
        self.free_index[global].is_none()
    }

    /// Global indices of a cell's local dofs, in local order.
    pub fn local_dofs(&self, cell: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(local_size(self.k));
        out.push(cell);
        for f in self.cell_faces[cell] {
            for l in 0..=self.k {
                out.push(self.face_dof(f, l));
            }
        }
        out
    }

    /// Restriction of a global vector to one cell.
    pub fn restrict(&self, cell: usize, v: &[f64]) -> DVector<f64> {
        DVector::from_iterator(local_size(self.k), self.local_dofs(cell).into_iter().map(|g| v[g]))
    }
}

pub fn build_dof_map(mesh: &Mesh, k: usize) -> DofMap {
    let n = mesh.num_cells();
    let m = mesh.num_faces();
    let total = n + m * (k + 1);
    let mut free = Vec::with_capacity(total);
    let mut dirichlet = Vec::new();
    let mut free_index = vec![None; total];
    free.extend(0..n);
    for (f, face) in mesh.faces().iter().enumerate() {
        for l in 0..=k {
            let g = n + f * (k + 1) + l;
            if face.is_boundary() {
                dirichlet.push(g);
            } else {
                free.push(g);
            }
        }
    }
    for (i, &g) in free.iter().enumerate() {
        free_index[g] = Some(i);
    }
    DofMap {
        k,
        num_cells: n,
        num_faces: m,
        free,
        dirichlet,
        free_index,
        cell_faces: (0..n).map(|c| mesh.cell_faces(c)).collect(),
    }
}

/// The assembled operator over all dofs.
#[derive(Debug, Clone)]
pub struct GlobalSystem {
    pub dofmap: DofMap,
    pub matrix: CsrMatrix,
    /// Assembled stabilization part alone.
    pub stabilization: CsrMatrix,
    /// `∫_T f` on cell dofs, zero on face dofs.
    pub load: Vec<f64>,
    pub locals: Vec<LocalOperators>,
}

impl GlobalSystem {
    pub fn k(&self) -> usize {
        self.dofmap.k
    }

    /// `Σ_T a_T(ℛ_T v, ℛ_T v)` evaluated element by element.
    pub fn energy_by_cells(&self, v: &[f64]) -> f64 {
        self.locals
            .iter()
            .enumerate()
            .map(|(c, op)| op.energy(&self.dofmap.restrict(c, v)))
            .sum()
    }
}

pub fn cell_integrals<F>(mesh: &Mesh, f: F, degree: usize) -> Result<Vec<f64>>
where
    F: Fn(Point) -> f64 + Sync,
{
    let rule = triangle_rule(degree)?;
    Ok((0..mesh.num_cells())
        .into_par_iter()
        .map(|c| rule.physical(&mesh.cell_points(c)).map(|(x, w)| w * f(x)).sum())
        .collect())
}

pub fn assemble_global<F>(mesh: &Mesh, k: usize, f: F) -> Result<GlobalSystem>
where
    F: Fn(Point) -> f64 + Sync,
{
    let dofmap = build_dof_map(mesh, k);
    let locals = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| local_operators(mesh, c, k))
        .collect::<Result<Vec<_>>>()?;
    let nloc = local_size(k);
    let mut a = Vec::with_capacity(locals.len() * nloc * nloc);
    let mut s = Vec::with_capacity(locals.len() * nloc * nloc);
    for (c, op) in locals.iter().enumerate() {
        let dofs = dofmap.local_dofs(c);
        for (i, &gi) in dofs.iter().enumerate() {
            for (j, &gj) in dofs.iter().enumerate() {
                a.push((gi, gj, op.stiffness[(i, j)]));
                s.push((gi, gj, op.stabilization[(i, j)]));
            }
        }
    }
    let total = dofmap.total();
    let matrix = CsrMatrix::from_triplets(total, total, &a);
    let stabilization = CsrMatrix::from_triplets(total, total, &s);
    let mut load = cell_integrals(mesh, f, data_degree(k))?;
    load.resize(total, 0.0);
    Ok(GlobalSystem {
        dofmap,
        matrix,
        stabilization,
        load,
        locals,
    })
}

/// The system restricted to free dofs after fixing the Dirichlet values.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub k: usize,
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// Values of `dofmap.dirichlet`, in the same order.
    pub dirichlet_values: Vec<f64>,
    pub free: Vec<usize>,
    pub dirichlet: Vec<usize>,
    pub total: usize,
}

impl ReducedSystem {
    /// Full dof vector from free values.
    pub fn expand(&self, free_values: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; self.total];
        for (&g, &v) in self.free.iter().zip(free_values) {
            u[g] = v;
        }
        for (&g, &v) in self.dirichlet.iter().zip(&self.dirichlet_values) {
            u[g] = v;
        }
        u
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&g| full[g]).collect()
    }

    pub fn num_free(&self) -> usize {
        self.free.len()
    }
}

/// Fixes boundary face dofs to `π^k_F g` (zero when `g` is `None`) and
/// eliminates them.
pub fn apply_boundary_data(
    system: &GlobalSystem,
    mesh: &Mesh,
    g: Option<&(dyn Fn(Point) -> f64 + Sync)>,
) -> Result<ReducedSystem> {
    let dm = &system.dofmap;
    let k = dm.k;
    let mut dirichlet_values = vec![0.0; dm.dirichlet.len()];
    if let Some(g) = g {
        let mut pos = 0;
        for (f, face) in mesh.faces().iter().enumerate() {
            if face.is_boundary() {
                let proj = project_face(g, mesh, f, k)?;
                for (l, p) in proj.into_iter().enumerate() {
                    debug_assert_eq!(dm.dirichlet[pos + l], dm.face_dof(f, l));
                    dirichlet_values[pos + l] = p;
                }
                pos += k + 1;
            }
        }
    }
    let matrix = system.matrix.submatrix(&dm.free, &dm.free);
    let coupling = system.matrix.submatrix(&dm.free, &dm.dirichlet);
    let lift = coupling.mul_vec(&dirichlet_values);
    let rhs = dm.free.iter().zip(&lift).map(|(&g, l)| system.load[g] - l).collect();
    Ok(ReducedSystem {
        k,
        matrix,
        rhs,
        dirichlet_values,
        free: dm.free.clone(),
        dirichlet: dm.dirichlet.clone(),
        total: dm.total(),
    })
}

/// Cell means `χ̄_T = (χ, 1)_T / |T|`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleAverages {
    pub values: Vec<f64>,
}

pub fn obstacle_averages<F>(mesh: &Mesh, chi: F) -> Result<ObstacleAverages>
where
    F: Fn(Point) -> f64 + Sync,
{
    let ints = cell_integrals(mesh, chi, data_degree(hho::MAX_FACE_DEGREE))?;
    Ok(ObstacleAverages {
        values: ints.iter().zip(mesh.areas()).map(|(i, a)| i / a).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hho::oracle::dense_stiffness;
    use crate::linsolve::solve_spd;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn square() -> Mesh {
        Mesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap()
    }

    fn solve(mesh: &Mesh, k: usize, f: impl Fn(Point) -> f64 + Sync, g: &(dyn Fn(Point) -> f64 + Sync)) -> Vec<f64> {
        let sys = assemble_global(mesh, k, f).unwrap();
        let red = apply_boundary_data(&sys, mesh, Some(g)).unwrap();
        red.expand(&solve_spd(&red.matrix, &red.rhs).unwrap())
    }

    #[test]
    fn dof_counts() {
        let tri = Mesh::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]]).unwrap();
        let d = build_dof_map(&tri, 1);
        assert_eq!((d.total(), d.dirichlet.len(), d.num_free()), (7, 6, 1));
        let d = build_dof_map(&square(), 0);
        assert_eq!((d.total(), d.num_free() - 2), (7, 1));
        let d = build_dof_map(&square(), 1);
        assert_eq!((d.total(), d.num_free() - 2), (12, 2));
        let mut all: Vec<usize> = d.free.iter().chain(&d.dirichlet).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..12).collect::<Vec<_>>());
    }

    #[test]
    fn constants_are_in_the_kernel() {
        let m = square().uniform_refine().unwrap();
        for k in 0..=1 {
            let sys = assemble_global(&m, k, |_| 0.0).unwrap();
            assert!(sys.load.iter().all(|&v| v == 0.0));
            let mut c = vec![0.0; sys.dofmap.total()];
            c[..m.num_cells()].fill(3.0);
            for f in 0..m.num_faces() {
                c[sys.dofmap.face_dof(f, 0)] = 3.0;
            }
            assert!(sys.matrix.mul_vec(&c).iter().all(|v| v.abs() < 1e-12));
            assert!(sys.matrix.is_symmetric(0.0));
        }
    }

    #[test]
    fn two_cell_matrix_matches_dense_oracle() {
        let m = square();
        for k in 0..=1 {
            let sys = assemble_global(&m, k, |_| 1.0).unwrap();
            let n = sys.dofmap.total();
            let mut oracle = nalgebra::DMatrix::<f64>::zeros(n, n);
            for c in 0..2 {
                let local = dense_stiffness(m.cell_points(c), m.cells()[c], k);
                let mut map = vec![c];
                for f in m.cell_faces(c) {
                    for l in 0..=k {
                        map.push(2 + f * (k + 1) + l);
                    }
                }
                for i in 0..map.len() {
                    for j in 0..map.len() {
                        oracle[(map[i], map[j])] += local[(i, j)];
                    }
                }
            }
            let diff = (sys.matrix.to_dense() - &oracle).amax();
            assert!(diff < 1e-11, "k={k}: {diff}");
            assert!((sys.load[0] - 0.5).abs() < 1e-15 && (sys.load[1] - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_boundary_data_gives_constant_solution() {
        let m = square().uniform_refine().unwrap();
        for k in 0..=1 {
            let u = solve(&m, k, |_| 0.0, &|_| 1.0);
            let dm = build_dof_map(&m, k);
            assert!(u[..m.num_cells()].iter().all(|v| (v - 1.0).abs() < 1e-12));
            for f in 0..m.num_faces() {
                assert!((u[dm.face_dof(f, 0)] - 1.0).abs() < 1e-12);
                if k == 1 {
                    assert!(u[dm.face_dof(f, 1)].abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn boundary_values_are_face_projections() {
        let m = square();
        let sys = assemble_global(&m, 1, |_| 0.0).unwrap();
        let red = apply_boundary_data(&sys, &m, Some(&|x: Point| x[0])).unwrap();
        let u = red.expand(&vec![0.0; red.num_free()]);
        for (f, face) in m.boundary_faces() {
            let [a, b] = face.vertices;
            let (xa, xb) = (m.vertices()[a][0], m.vertices()[b][0]);
            assert!((u[sys.dofmap.face_dof(f, 0)] - 0.5 * (xa + xb)).abs() < 1e-15);
            // linear mode runs from lower to higher vertex index
            assert!((u[sys.dofmap.face_dof(f, 1)] - (xb - xa)).abs() < 1e-15);
        }
        let hom = apply_boundary_data(&sys, &m, None).unwrap();
        assert_eq!(hom.rhs, hom.free.iter().map(|&g| sys.load[g]).collect::<Vec<_>>());
    }

    #[test]
    fn affine_patch_test() {
        let m = Mesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.4, 0.6]],
            vec![[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]],
        )
        .unwrap()
        .refine_nvb(&[0, 2])
        .unwrap();
        let g = |x: Point| 0.3 + 2.0 * x[0] - 1.5 * x[1];
        for k in 0..=1 {
            let u = solve(&m, k, |_| 0.0, &g);
            let dm = build_dof_map(&m, k);
            for (c, v) in u[..m.num_cells()].iter().enumerate() {
                assert!((v - g(m.centroid(c))).abs() < 1e-9);
            }
            for f in 0..m.num_faces() {
                let p = project_face(g, &m, f, k).unwrap();
                for l in 0..=k {
                    assert!((u[dm.face_dof(f, l)] - p[l]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn quadratic_form_is_sum_of_local_forms() {
        let m = square().uniform_refine().unwrap().uniform_refine().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for k in 0..=1 {
            let sys = assemble_global(&m, k, |_| 0.0).unwrap();
            let v: Vec<f64> = (0..sys.dofmap.total()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let a = sys.matrix.quadratic_form(&v);
            let b = sys.energy_by_cells(&v);
            assert!((a - b).abs() <= 1e-12 * b);
        }
    }

    #[test]
    fn obstacle_cell_means() {
        let tri = Mesh::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]]).unwrap();
        assert!((obstacle_averages(&tri, |x| x[0]).unwrap().values[0] - 1.0 / 3.0).abs() < 1e-15);
        let m = square();
        assert_eq!(obstacle_averages(&m, |_| 0.0).unwrap().values, vec![0.0, 0.0]);
        assert!(obstacle_averages(&m, |_| -1.0)
            .unwrap()
            .values
            .iter()
            .all(|&v| (v + 1.0).abs() < 1e-15));
    }
}
