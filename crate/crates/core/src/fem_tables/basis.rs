use nalgebra::{DMatrix, DVector};

use super::quadrature::{edge_rule, triangle_rule};
use super::{data_degree, form_degree};
use crate::mesh::Mesh;
use crate::{Error, Point, Result};

pub const MAX_CELL_DEGREE: usize = 2;

/// Scaled monomials `((x - x_T) / h_T)^α`, `|α| ≤ degree`, ordered
/// `1, X, Y, X², XY, Y²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellBasis {
    pub degree: usize,
    pub center: Point,
    pub h: f64,
}

impl CellBasis {
    pub fn new(degree: usize, center: Point, h: f64) -> Self {
        assert!(
            degree <= MAX_CELL_DEGREE,
            "cell basis degree {degree} > {MAX_CELL_DEGREE}"
        );
        Self { degree, center, h }
    }

    pub fn for_cell(mesh: &Mesh, cell: usize, degree: usize) -> Self {
        Self::new(degree, mesh.centroid(cell), mesh.diameter(cell))
    }

    pub fn dim(&self) -> usize {
        (self.degree + 1) * (self.degree + 2) / 2
    }

    fn local(&self, x: Point) -> (f64, f64) {
        ((x[0] - self.center[0]) / self.h, (x[1] - self.center[1]) / self.h)
    }

    /// Values of all basis functions; entries past `dim()` are zero.
    pub fn eval(&self, x: Point) -> [f64; 6] {
        let (u, v) = self.local(x);
        let mut out = [1.0, u, v, u * u, u * v, v * v];
        for e in out.iter_mut().skip(self.dim()) {
            *e = 0.0;
        }
        out
    }

    pub fn grad(&self, x: Point) -> [[f64; 2]; 6] {
        let (u, v) = self.local(x);
        let s = 1.0 / self.h;
        let mut out = [
            [0.0, 0.0],
            [s, 0.0],
            [0.0, s],
            [2.0 * u * s, 0.0],
            [v * s, u * s],
            [0.0, 2.0 * v * s],
        ];
        for e in out.iter_mut().skip(self.dim()) {
            *e = [0.0, 0.0];
        }
        out
    }

    /// Laplacians of the basis functions (all constant).
    pub fn laplacian(&self) -> [f64; 6] {
        let s = 2.0 / (self.h * self.h);
        if self.degree >= 2 {
            [0.0, 0.0, 0.0, s, 0.0, s]
        } else {
            [0.0; 6]
        }
    }

    pub fn value(&self, coeffs: &[f64], x: Point) -> f64 {
        self.eval(x).iter().zip(coeffs).map(|(b, c)| b * c).sum()
    }

    pub fn gradient(&self, coeffs: &[f64], x: Point) -> Point {
        let g = self.grad(x);
        let mut out = [0.0, 0.0];
        for (gi, c) in g.iter().zip(coeffs) {
            out[0] += c * gi[0];
            out[1] += c * gi[1];
        }
        out
    }

    pub fn laplacian_of(&self, coeffs: &[f64]) -> f64 {
        self.laplacian().iter().zip(coeffs).map(|(l, c)| l * c).sum()
    }
}

/// Scaled monomials `((s - s_F) / h_F)^j`, `j ≤ degree`, in the arc-length
/// parameter running from `start` to `end`. Evaluated at the affine
/// parameter `t ∈ [0, 1]` this is `1, t - 1/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceBasis {
    pub degree: usize,
    pub start: Point,
    pub end: Point,
    pub length: f64,
}

impl FaceBasis {
    pub fn new(degree: usize, start: Point, end: Point) -> Self {
        assert!(degree <= 1, "face basis degree {degree} > 1");
        let length = (end[0] - start[0]).hypot(end[1] - start[1]);
        Self {
            degree,
            start,
            end,
            length,
        }
    }

    /// Basis of a mesh face, oriented from its lower- to higher-indexed vertex.
    pub fn for_face(mesh: &Mesh, face: usize, degree: usize) -> Self {
        let f = &mesh.faces()[face];
        let v = mesh.vertices();
        Self::new(degree, v[f.vertices[0]], v[f.vertices[1]])
    }

    pub fn dim(&self) -> usize {
        self.degree + 1
    }

    pub fn point(&self, t: f64) -> Point {
        [
            self.start[0] + t * (self.end[0] - self.start[0]),
            self.start[1] + t * (self.end[1] - self.start[1]),
        ]
    }

    pub fn eval(&self, t: f64) -> [f64; 2] {
        if self.degree == 0 {
            [1.0, 0.0]
        } else {
            [1.0, t - 0.5]
        }
    }

    /// Affine parameter of the orthogonal projection of `x` onto the face line.
    pub fn parameter(&self, x: Point) -> f64 {
        let d = [self.end[0] - self.start[0], self.end[1] - self.start[1]];
        ((x[0] - self.start[0]) * d[0] + (x[1] - self.start[1]) * d[1]) / (self.length * self.length)
    }

    pub fn value(&self, coeffs: &[f64], t: f64) -> f64 {
        self.eval(t).iter().zip(coeffs).map(|(b, c)| b * c).sum()
    }

    /// Face mass matrix; diagonal `diag(h_F, h_F / 12)` for this basis.
    pub fn mass(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        m[(0, 0)] = self.length;
        if n == 2 {
            m[(1, 1)] = self.length / 12.0;
        }
        m
    }
}

/// L²(T) projection of `f` onto polynomials of degree `m`, as coefficients
/// in [`CellBasis::for_cell`].
pub fn project_cell<F>(f: F, mesh: &Mesh, cell: usize, m: usize) -> Result<Vec<f64>>
where
    F: Fn(Point) -> f64,
{
    let basis = CellBasis::for_cell(mesh, cell, m);
    let n = basis.dim();
    let rule = triangle_rule(data_degree(m).max(2 * m))?;
    let mut mass = DMatrix::zeros(n, n);
    let mut rhs = DVector::zeros(n);
    for (x, w) in rule.physical(&mesh.cell_points(cell)) {
        let phi = basis.eval(x);
        let fx = f(x);
        for i in 0..n {
            rhs[i] += w * fx * phi[i];
            for j in 0..n {
                mass[(i, j)] += w * phi[i] * phi[j];
            }
        }
    }
    let chol = mass.cholesky().ok_or(Error::LocalSolve(cell))?;
    Ok(chol.solve(&rhs).iter().copied().collect())
}

/// L²(F) projection of `g` onto polynomials of degree `k`, as coefficients in
/// [`FaceBasis::for_face`].
pub fn project_face<G>(g: G, mesh: &Mesh, face: usize, k: usize) -> Result<Vec<f64>>
where
    G: Fn(Point) -> f64,
{
    if k > 1 {
        return Err(Error::UnsupportedFaceDegree(k));
    }
    project_on_face(&g, &FaceBasis::for_face(mesh, face, k), data_degree(k))
}

pub(crate) fn project_on_face<G>(g: &G, basis: &FaceBasis, degree: usize) -> Result<Vec<f64>>
where
    G: Fn(Point) -> f64,
{
    let rule = edge_rule(degree.max(form_degree(basis.degree)))?;
    let mass = basis.mass();
    let mut out = vec![0.0; basis.dim()];
    for (t, w) in rule.iter() {
        let psi = basis.eval(t);
        let gx = g(basis.point(t));
        for (o, p) in out.iter_mut().zip(psi) {
            *o += w * basis.length * gx * p;
        }
    }
    for (i, o) in out.iter_mut().enumerate() {
        *o /= mass[(i, i)];
    }
    Ok(out)
}
