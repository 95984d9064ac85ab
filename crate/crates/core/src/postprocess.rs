//! The piecewise reconstruction of a discrete solution and its
//! node-averaged continuous counterpart.

use rayon::prelude::*;

use crate::assembly::GlobalSystem;
use crate::fem_tables::{edge_rule, project_cell, triangle_rule, CellBasis};
use crate::mesh::Mesh;
use crate::vi_solver::DiscreteSolution;
use crate::{Error, Point, Result};

/// A broken polynomial: one coefficient block per cell in that cell's
/// scaled monomial basis.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseField {
    pub degree: usize,
    pub bases: Vec<CellBasis>,
    pub coeffs: Vec<Vec<f64>>,
}

impl PiecewiseField {
    pub fn from_fn<F>(mesh: &Mesh, degree: usize, f: F) -> Result<Self>
    where
        F: Fn(Point) -> f64 + Sync,
    {
        let coeffs = (0..mesh.num_cells())
            .into_par_iter()
            .map(|c| project_cell(&f, mesh, c, degree))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            degree,
            bases: (0..mesh.num_cells())
                .map(|c| CellBasis::for_cell(mesh, c, degree))
                .collect(),
            coeffs,
        })
    }

    pub fn num_cells(&self) -> usize {
        self.coeffs.len()
    }

    pub fn value(&self, cell: usize, x: Point) -> f64 {
        self.bases[cell].value(&self.coeffs[cell], x)
    }

    pub fn gradient(&self, cell: usize, x: Point) -> Point {
        self.bases[cell].gradient(&self.coeffs[cell], x)
    }

    pub fn laplacian(&self, cell: usize) -> f64 {
        self.bases[cell].laplacian_of(&self.coeffs[cell])
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        for block in &mut out.coeffs {
            for v in block {
                *v *= a;
            }
        }
        out
    }

    /// `self + a * other`, on the same mesh and degree.
    pub fn axpy(&self, a: f64, other: &PiecewiseField) -> Self {
        let mut out = self.clone();
        for (block, ob) in out.coeffs.iter_mut().zip(&other.coeffs) {
            for (v, o) in block.iter_mut().zip(ob) {
                *v += a * o;
            }
        }
        out
    }
}

/// Per-cell reconstructed potentials of a discrete solution.
pub fn reconstruct_field(system: &GlobalSystem, solution: &DiscreteSolution) -> Result<PiecewiseField> {
    let dm = &system.dofmap;
    if solution.values.len() != dm.total() {
        return Err(Error::Mismatch(format!(
            "solution has {} dofs, system has {}",
            solution.values.len(),
            dm.total()
        )));
    }
    let coeffs = system
        .locals
        .par_iter()
        .enumerate()
        .map(|(c, op)| op.reconstruct(&dm.restrict(c, &solution.values)).as_slice().to_vec())
        .collect();
    Ok(PiecewiseField {
        degree: dm.k + 1,
        bases: system.locals.iter().map(|op| op.cell.reconstruction_basis()).collect(),
        coeffs,
    })
}

/// Continuous Lagrange field of degree 1 (vertex values) or 2 (vertex and
/// edge-midpoint values).
#[derive(Debug, Clone, PartialEq)]
pub struct ConformingField {
    pub degree: usize,
    pub vertex_values: Vec<f64>,
    /// Indexed by face; empty for degree 1.
    pub edge_values: Vec<f64>,
}

/// Barycentric coordinates of `x` and their constant gradients.
pub fn barycentric(tri: &[Point; 3], x: Point) -> ([f64; 3], [Point; 3]) {
    let [a, b, c] = *tri;
    let twice = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    let grads = [
        [(b[1] - c[1]) / twice, (c[0] - b[0]) / twice],
        [(c[1] - a[1]) / twice, (a[0] - c[0]) / twice],
        [(a[1] - b[1]) / twice, (b[0] - a[0]) / twice],
    ];
    let l1 = grads[1][0] * (x[0] - a[0]) + grads[1][1] * (x[1] - a[1]);
    let l2 = grads[2][0] * (x[0] - a[0]) + grads[2][1] * (x[1] - a[1]);
    ([1.0 - l1 - l2, l1, l2], grads)
}

impl ConformingField {
    fn local_values(&self, mesh: &Mesh, cell: usize) -> ([f64; 3], [f64; 3]) {
        let v = mesh.cells()[cell];
        let vert = [
            self.vertex_values[v[0]],
            self.vertex_values[v[1]],
            self.vertex_values[v[2]],
        ];
        let mut edge = [0.0; 3];
        if self.degree == 2 {
            let f = mesh.cell_faces(cell);
            edge = [self.edge_values[f[0]], self.edge_values[f[1]], self.edge_values[f[2]]];
        }
        (vert, edge)
    }

    pub fn value(&self, mesh: &Mesh, cell: usize, x: Point) -> f64 {
        let (l, _) = barycentric(&mesh.cell_points(cell), x);
        let (vert, edge) = self.local_values(mesh, cell);
        if self.degree == 1 {
            return (0..3).map(|i| vert[i] * l[i]).sum();
        }
        (0..3)
            .map(|i| {
                let (j, k) = ((i + 1) % 3, (i + 2) % 3);
                vert[i] * l[i] * (2.0 * l[i] - 1.0) + edge[i] * 4.0 * l[j] * l[k]
            })
            .sum()
    }

    pub fn gradient(&self, mesh: &Mesh, cell: usize, x: Point) -> Point {
        let (l, g) = barycentric(&mesh.cell_points(cell), x);
        let (vert, edge) = self.local_values(mesh, cell);
        let mut out = [0.0; 2];
        for i in 0..3 {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            for d in 0..2 {
                out[d] += if self.degree == 1 {
                    vert[i] * g[i][d]
                } else {
                    vert[i] * (4.0 * l[i] - 1.0) * g[i][d] + edge[i] * 4.0 * (l[j] * g[k][d] + l[k] * g[j][d])
                };
            }
        }
        out
    }

    /// The same function as a broken polynomial of equal degree.
    pub fn to_piecewise(&self, mesh: &Mesh) -> Result<PiecewiseField> {
        PiecewiseField::from_fn_cellwise(mesh, self.degree, |c, x| self.value(mesh, c, x))
    }

    /// Values at all boundary nodes.
    pub fn boundary_values(&self, mesh: &Mesh) -> Vec<f64> {
        let bv = mesh.boundary_vertices();
        let mut out: Vec<f64> = (0..mesh.num_vertices())
            .filter(|&v| bv[v])
            .map(|v| self.vertex_values[v])
            .collect();
        if self.degree == 2 {
            out.extend(mesh.boundary_faces().map(|(f, _)| self.edge_values[f]));
        }
        out
    }
}

impl PiecewiseField {
    /// Cellwise projection of a function that may depend on the cell.
    pub fn from_fn_cellwise<F>(mesh: &Mesh, degree: usize, f: F) -> Result<Self>
    where
        F: Fn(usize, Point) -> f64 + Sync,
    {
        let coeffs = (0..mesh.num_cells())
            .into_par_iter()
            .map(|c| project_cell(|x| f(c, x), mesh, c, degree))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            degree,
            bases: (0..mesh.num_cells())
                .map(|c| CellBasis::for_cell(mesh, c, degree))
                .collect(),
            coeffs,
        })
    }
}

/// Values assigned to nodes on the domain boundary.
#[derive(Clone, Copy)]
pub enum BoundaryRule<'a> {
    Zero,
    /// Same averaging as interior nodes.
    Average,
    Prescribed(&'a (dyn Fn(Point) -> f64 + Sync)),
}

/// Averages the cell values at every Lagrange node of degree `w.degree`
/// (1 or 2) over the cells sharing that node.
pub fn node_average(mesh: &Mesh, w: &PiecewiseField, rule: BoundaryRule<'_>) -> Result<ConformingField> {
    if !(1..=2).contains(&w.degree) || w.num_cells() != mesh.num_cells() {
        return Err(Error::Mismatch(format!(
            "field of degree {} on {} cells for a mesh with {} cells",
            w.degree,
            w.num_cells(),
            mesh.num_cells()
        )));
    }
    let boundary = mesh.boundary_vertices();
    let vertex_cells = mesh.vertex_cells();
    let node_value = |x: Point, cells: &mut dyn Iterator<Item = usize>, on_boundary: bool| -> f64 {
        if on_boundary {
            match rule {
                BoundaryRule::Zero => return 0.0,
                BoundaryRule::Prescribed(g) => return g(x),
                BoundaryRule::Average => {}
            }
        }
        let (mut sum, mut count) = (0.0, 0usize);
        for c in cells {
            sum += w.value(c, x);
            count += 1;
        }
        sum / count as f64
    };
    let vertex_values = (0..mesh.num_vertices())
        .map(|v| node_value(mesh.vertices()[v], &mut vertex_cells[v].iter().copied(), boundary[v]))
        .collect();
    let edge_values = if w.degree == 2 {
        mesh.faces()
            .iter()
            .map(|f| {
                let mut cells = std::iter::once(f.cells.0).chain(f.cells.1);
                node_value(f.midpoint, &mut cells, f.is_boundary())
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(ConformingField {
        degree: w.degree,
        vertex_values,
        edge_values,
    })
}

/// Reconstruction followed by node averaging; boundary nodes take `g` (or
/// zero for homogeneous data).
pub fn conforming_post(
    mesh: &Mesh,
    system: &GlobalSystem,
    solution: &DiscreteSolution,
    g: Option<&(dyn Fn(Point) -> f64 + Sync)>,
) -> Result<(PiecewiseField, ConformingField)> {
    let field = reconstruct_field(system, solution)?;
    let rule = match g {
        Some(g) => BoundaryRule::Prescribed(g),
        None => BoundaryRule::Zero,
    };
    let averaged = node_average(mesh, &field, rule)?;
    Ok((field, averaged))
}

/// Integrates `f(x)` on face `face` with a rule exact for degree `degree`.
fn face_integral(mesh: &Mesh, face: usize, degree: usize, f: impl Fn(Point) -> f64) -> Result<f64> {
    let fc = &mesh.faces()[face];
    let [a, b] = fc.vertices.map(|v| mesh.vertices()[v]);
    Ok(edge_rule(degree)?
        .iter()
        .map(|(t, w)| w * fc.length * f([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]))
        .sum())
}

/// `‖[w]‖²_F` for every face; the jump on a boundary face is the trace
/// minus the prescribed value (zero without data).
pub fn face_jumps(mesh: &Mesh, w: &PiecewiseField, g: Option<&(dyn Fn(Point) -> f64 + Sync)>) -> Result<Vec<f64>> {
    let degree = 2 * w.degree.max(2) + 2;
    (0..mesh.num_faces())
        .into_par_iter()
        .map(|f| {
            let face = &mesh.faces()[f];
            face_integral(mesh, f, degree, |x| {
                let inner = w.value(face.cells.0, x);
                let outer = match face.cells.1 {
                    Some(c) => w.value(c, x),
                    None => g.map_or(0.0, |g| g(x)),
                };
                (inner - outer).powi(2)
            })
        })
        .collect()
}

/// Per-cell ratio of `‖Ew − w‖²_T + h_T² ‖∇(Ew − w)‖²_T` to
/// `Σ h_F ‖[w]‖²_F` over faces touching the cell boundary.
pub fn averaging_ratios(mesh: &Mesh, w: &PiecewiseField, averaged: &ConformingField) -> Result<Vec<f64>> {
    let jumps = face_jumps(mesh, w, None)?;
    let vertex_faces = mesh.vertex_faces();
    let rule = triangle_rule(2 * w.degree + 2)?;
    (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let h = mesh.diameter(c);
            let mut num = 0.0;
            for (x, wt) in rule.physical(&mesh.cell_points(c)) {
                let d = averaged.value(mesh, c, x) - w.value(c, x);
                let ga = averaged.gradient(mesh, c, x);
                let gw = w.gradient(c, x);
                num += wt * (d * d + h * h * ((ga[0] - gw[0]).powi(2) + (ga[1] - gw[1]).powi(2)));
            }
            let mut faces: Vec<usize> = mesh.cells()[c]
                .iter()
                .flat_map(|&v| vertex_faces[v].iter().copied())
                .collect();
            faces.sort_unstable();
            faces.dedup();
            let den: f64 = faces.iter().map(|&f| mesh.faces()[f].length * jumps[f]).sum();
            Ok(if den > 0.0 { num / den } else { 0.0 })
        })
        .collect()
}
