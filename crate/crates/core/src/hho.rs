//! Element-local HHO operators for piecewise-constant cell unknowns and
//! degree-`k` face unknowns (`k ∈ {0, 1}`).
//!
//! Local dof vectors are laid out as `[v_T, v_F0[0..=k], v_F1[..], v_F2[..]]`
//! where face `i` is opposite vertex `i`. The potential reconstruction has
//! degree `k + 1` and is expressed in the scaled monomial [`CellBasis`].

use nalgebra::{DMatrix, DVector};

use crate::fem_tables::project_on_face;
use crate::fem_tables::{data_degree, edge_rule, form_degree, project_cell, triangle_rule, CellBasis, FaceBasis};
use crate::mesh::Mesh;
use crate::{Error, Point, Result};

pub const MAX_FACE_DEGREE: usize = 1;

/// Number of local unknowns for face degree `k`.
pub fn local_size(k: usize) -> usize {
    1 + 3 * (k + 1)
}

/// Index of mode `l` of local face `i` in a local dof vector.
pub fn face_dof(k: usize, face: usize, l: usize) -> usize {
    1 + face * (k + 1) + l
}

/// Cell and face unknowns of one element.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalDofs {
    pub cell: f64,
    pub faces: [Vec<f64>; 3],
}

impl LocalDofs {
    pub fn constant(c: f64, k: usize) -> Self {
        let mut face = vec![0.0; k + 1];
        face[0] = c;
        Self {
            cell: c,
            faces: [face.clone(), face.clone(), face],
        }
    }

    pub fn degree(&self) -> usize {
        self.faces[0].len() - 1
    }

    pub fn to_vector(&self) -> DVector<f64> {
        let mut v = Vec::with_capacity(local_size(self.degree()));
        v.push(self.cell);
        for f in &self.faces {
            v.extend_from_slice(f);
        }
        DVector::from_vec(v)
    }

    pub fn from_slice(v: &[f64], k: usize) -> Self {
        assert_eq!(v.len(), local_size(k));
        let block = |i: usize| v[face_dof(k, i, 0)..face_dof(k, i, 0) + k + 1].to_vec();
        Self {
            cell: v[0],
            faces: [block(0), block(1), block(2)],
        }
    }
}

/// Geometry of one triangle together with its face bases.
#[derive(Debug, Clone)]
pub struct LocalCell {
    pub k: usize,
    pub points: [Point; 3],
    pub area: f64,
    pub diameter: f64,
    pub centroid: Point,
    pub faces: [FaceBasis; 3],
    /// Outward unit normals.
    pub normals: [Point; 3],
}

impl LocalCell {
    /// Builds the cell from counterclockwise vertices. `ids` orders the
    /// endpoints of each face: its basis runs from the lower to the higher id.
    pub fn from_points(points: [Point; 3], ids: [usize; 3], k: usize) -> Result<Self> {
        if k > MAX_FACE_DEGREE {
            return Err(Error::UnsupportedFaceDegree(k));
        }
        let [a, b, c] = points;
        let area = 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]));
        let dist = |p: Point, q: Point| (p[0] - q[0]).hypot(p[1] - q[1]);
        let diameter = dist(a, b).max(dist(b, c)).max(dist(c, a));
        if area.is_nan() || area <= 1e-14 * diameter * diameter {
            return Err(Error::InvalidInput(format!(
                "degenerate or clockwise triangle {points:?}"
            )));
        }
        let centroid = [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0];
        let face = |i: usize| {
            let (p, q) = ((i + 1) % 3, (i + 2) % 3);
            let (s, e) = if ids[p] < ids[q] { (p, q) } else { (q, p) };
            FaceBasis::new(k, points[s], points[e])
        };
        let normal = |i: usize| {
            let (p, q) = (points[(i + 1) % 3], points[(i + 2) % 3]);
            let len = dist(p, q);
            [(q[1] - p[1]) / len, -(q[0] - p[0]) / len]
        };
        Ok(Self {
            k,
            points,
            area,
            diameter,
            centroid,
            faces: [face(0), face(1), face(2)],
            normals: [normal(0), normal(1), normal(2)],
        })
    }

    pub fn from_mesh(mesh: &Mesh, cell: usize, k: usize) -> Result<Self> {
        let ids = mesh.cells()[cell];
        Self::from_points(mesh.cell_points(cell), ids, k).map_err(|e| match e {
            Error::InvalidInput(_) => Error::DegenerateCell(cell),
            e => e,
        })
    }

    /// Basis of the reconstruction space, degree `k + 1`.
    pub fn reconstruction_basis(&self) -> CellBasis {
        CellBasis::new(self.k + 1, self.centroid, self.diameter)
    }

    pub fn face_lengths(&self) -> [f64; 3] {
        [self.faces[0].length, self.faces[1].length, self.faces[2].length]
    }
}

/// `(π⁰_T v, (π^k_F v)_F)`.
pub fn interpolate_local<F>(v: F, cell: &LocalCell) -> Result<LocalDofs>
where
    F: Fn(Point) -> f64,
{
    let rule = triangle_rule(data_degree(cell.k))?;
    let mean = rule.physical(&cell.points).map(|(x, w)| w * v(x)).sum::<f64>() / cell.area;
    let face = |i: usize| project_on_face(&v, &cell.faces[i], data_degree(cell.k));
    Ok(LocalDofs {
        cell: mean,
        faces: [face(0)?, face(1)?, face(2)?],
    })
}

/// Same as [`interpolate_local`] but keyed by a mesh cell.
pub fn interpolate_on_mesh<F>(v: F, mesh: &Mesh, cell: usize, k: usize) -> Result<LocalDofs>
where
    F: Fn(Point) -> f64,
{
    let local = LocalCell::from_mesh(mesh, cell, k)?;
    let mut dofs = interpolate_local(&v, &local)?;
    // identical up to rounding, but keep the cell mean consistent with projections elsewhere
    dofs.cell = project_cell(&v, mesh, cell, 0)?[0];
    Ok(dofs)
}

/// `∫_T ∇φ_i · ∇φ_j` over the reconstruction basis.
pub fn reconstruction_stiffness(cell: &LocalCell) -> Result<DMatrix<f64>> {
    let basis = cell.reconstruction_basis();
    let n = basis.dim();
    let mut k = DMatrix::zeros(n, n);
    for (x, w) in triangle_rule(form_degree(cell.k))?.physical(&cell.points) {
        let g = basis.grad(x);
        for i in 1..n {
            for j in 1..n {
                k[(i, j)] += w * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
            }
        }
    }
    Ok(k)
}

/// The reconstruction matrix: column `j` holds the coefficients of the
/// reconstructed potential of the `j`-th local unit vector.
pub fn gradient_reconstruction(cell: &LocalCell) -> Result<DMatrix<f64>> {
    let stiffness = reconstruction_stiffness(cell)?;
    gradient_reconstruction_with(cell, &stiffness)
}

fn gradient_reconstruction_with(cell: &LocalCell, stiffness: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let k = cell.k;
    let basis = cell.reconstruction_basis();
    let n = basis.dim();
    let nloc = local_size(k);
    let mut rhs = DMatrix::zeros(n, nloc);
    let rule = edge_rule(form_degree(k))?;
    for (i, face) in cell.faces.iter().enumerate() {
        let normal = cell.normals[i];
        for (t, w) in rule.iter() {
            let x = face.point(t);
            let psi = face.eval(t);
            let g = basis.grad(x);
            for j in 1..n {
                let flux = w * face.length * (g[j][0] * normal[0] + g[j][1] * normal[1]);
                rhs[(j, 0)] -= flux;
                for l in 0..=k {
                    rhs[(j, face_dof(k, i, l))] += flux * psi[l];
                }
            }
        }
    }
    let reduced = stiffness.view((1, 1), (n - 1, n - 1)).into_owned();
    let chol = reduced
        .cholesky()
        .ok_or_else(|| Error::InvalidInput("singular reconstruction stiffness".into()))?;
    let upper = chol.solve(&rhs.rows(1, n - 1).into_owned());
    let means = basis_means(cell)?;
    let mut r = DMatrix::zeros(n, nloc);
    r.rows_mut(1, n - 1).copy_from(&upper);
    for col in 0..nloc {
        let mut c0 = if col == 0 { 1.0 } else { 0.0 };
        for j in 1..n {
            c0 -= means[j] * upper[(j - 1, col)];
        }
        r[(0, col)] = c0;
    }
    Ok(r)
}

fn basis_means(cell: &LocalCell) -> Result<Vec<f64>> {
    let basis = cell.reconstruction_basis();
    let mut m = vec![0.0; basis.dim()];
    for (x, w) in triangle_rule(form_degree(cell.k))?.physical(&cell.points) {
        for (mj, p) in m.iter_mut().zip(basis.eval(x)) {
            *mj += w * p / cell.area;
        }
    }
    Ok(m)
}

/// `Σ_F h_F⁻¹ ‖π^k_F(v_F − (R v)|_F)‖²_F` as a matrix.
pub fn stabilization(cell: &LocalCell, reconstruction: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let l = stabilization_factor(cell, reconstruction)?;
    Ok(l.transpose() * l)
}

/// A matrix `L` with `stabilization = Lᵀ L`; row block `i` is the scaled
/// projected trace mismatch on face `i`.
pub fn stabilization_factor(cell: &LocalCell, reconstruction: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let k = cell.k;
    let basis = cell.reconstruction_basis();
    let n = basis.dim();
    let nloc = local_size(k);
    let rule = edge_rule(form_degree(k))?;
    let mut factor = DMatrix::zeros(3 * (k + 1), nloc);
    for (i, face) in cell.faces.iter().enumerate() {
        let mass = face.mass();
        // N[l, j] = ∫_F ψ_l φ_j
        let mut trace = DMatrix::zeros(k + 1, n);
        for (t, w) in rule.iter() {
            let psi = face.eval(t);
            let phi = basis.eval(face.point(t));
            for l in 0..=k {
                for j in 0..n {
                    trace[(l, j)] += w * face.length * psi[l] * phi[j];
                }
            }
        }
        let diff = trace * reconstruction;
        for l in 0..=k {
            let scale = (mass[(l, l)] / face.length).sqrt();
            for col in 0..nloc {
                let mut d = -diff[(l, col)] / mass[(l, l)];
                if col == face_dof(k, i, l) {
                    d += 1.0;
                }
                factor[(i * (k + 1) + l, col)] = scale * d;
            }
        }
    }
    Ok(factor)
}

/// `Σ_F h_F⁻¹ ‖v_F − v_T‖²_F`, the local discrete seminorm.
pub fn face_seminorm_gram(cell: &LocalCell) -> DMatrix<f64> {
    let k = cell.k;
    let nloc = local_size(k);
    let mut h = DMatrix::zeros(nloc, nloc);
    for (i, face) in cell.faces.iter().enumerate() {
        let mass = face.mass();
        let mut jump = DMatrix::zeros(k + 1, nloc);
        for l in 0..=k {
            jump[(l, face_dof(k, i, l))] = 1.0;
        }
        jump[(0, 0)] = -1.0;
        h += jump.transpose() * &mass * &jump / face.length;
    }
    h
}

/// All local matrices of one element.
#[derive(Debug, Clone)]
pub struct LocalOperators {
    pub cell: LocalCell,
    /// Reconstruction, `dim P^{k+1} × local_size(k)`.
    pub reconstruction: DMatrix<f64>,
    /// Stiffness of the reconstruction basis.
    pub basis_stiffness: DMatrix<f64>,
    /// Consistent part `Rᵀ K R`.
    pub consistency: DMatrix<f64>,
    pub stabilization: DMatrix<f64>,
    /// `stabilization = factorᵀ factor`.
    pub stabilization_factor: DMatrix<f64>,
    /// `consistency + stabilization`.
    pub stiffness: DMatrix<f64>,
}

impl LocalOperators {
    pub fn k(&self) -> usize {
        self.cell.k
    }

    /// `a_T(v, v)`.
    pub fn energy(&self, v: &DVector<f64>) -> f64 {
        v.dot(&(&self.stiffness * v))
    }

    /// `s_T(v, v)`, evaluated from the factor so that it is nonnegative and
    /// accurate down to roundoff of the trace mismatch.
    pub fn stabilization_energy(&self, v: &DVector<f64>) -> f64 {
        (&self.stabilization_factor * v).norm_squared()
    }

    /// Coefficients of the reconstructed potential.
    pub fn reconstruct(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.reconstruction * v
    }
}

pub fn local_stiffness(cell: LocalCell) -> Result<LocalOperators> {
    let basis_stiffness = reconstruction_stiffness(&cell)?;
    let reconstruction = gradient_reconstruction_with(&cell, &basis_stiffness)?;
    let consistency = reconstruction.transpose() * &basis_stiffness * &reconstruction;
    let factor = stabilization_factor(&cell, &reconstruction)?;
    let stab = factor.transpose() * &factor;
    let mut stiffness = &consistency + &stab;
    // exact symmetry
    let sym = (&stiffness + stiffness.transpose()) * 0.5;
    stiffness.copy_from(&sym);
    Ok(LocalOperators {
        cell,
        reconstruction,
        basis_stiffness,
        consistency,
        stabilization: stab,
        stabilization_factor: factor,
        stiffness,
    })
}

pub fn local_operators(mesh: &Mesh, cell: usize, k: usize) -> Result<LocalOperators> {
    local_stiffness(LocalCell::from_mesh(mesh, cell, k)?)
}
