//! Sparse symmetric positive definite solves.
//!
//! The primary path is a supernodal sparse Cholesky factorization followed by
//! one step of iterative refinement. If the factorization fails, a Jacobi
//! preconditioned conjugate gradient iteration is used instead.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};

use crate::sparse::CsrMatrix;
use crate::{Error, Result};

/// Relative residual target of the conjugate gradient fallback.
pub const CG_TOLERANCE: f64 = 1e-12;

/// Which route produced a solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveRoute {
    Cholesky,
    ConjugateGradient { iterations: usize },
}

pub fn solve_spd(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    solve_spd_with_route(a, b).map(|(x, _)| x)
}

pub fn solve_spd_with_route(a: &CsrMatrix, b: &[f64]) -> Result<(Vec<f64>, SolveRoute)> {
    assert_eq!(a.nrows(), a.ncols());
    assert_eq!(a.nrows(), b.len());
    if b.is_empty() {
        return Ok((Vec::new(), SolveRoute::Cholesky));
    }
    match cholesky_solve(a, b) {
        Ok(x) => Ok((x, SolveRoute::Cholesky)),
        Err(_) => {
            let (x, iterations) = conjugate_gradient(a, b, CG_TOLERANCE, 20 * b.len() + 100)?;
            Ok((x, SolveRoute::ConjugateGradient { iterations }))
        }
    }
}

fn cholesky_solve(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.nrows();
    // lower triangle only; CSR rows of a symmetric matrix are its CSC columns
    let entries: Vec<Triplet<usize, usize, f64>> = a
        .triplets()
        .filter(|&(r, c, _)| r >= c)
        .map(|(r, c, v)| Triplet::new(r, c, v))
        .collect();
    let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &entries)
        .map_err(|e| Error::LinearSolve(format!("{e:?}")))?;
    let llt = mat
        .sp_cholesky(Side::Lower)
        .map_err(|e| Error::LinearSolve(format!("{e:?}")))?;
    let rhs = Mat::from_fn(n, 1, |i, _| b[i]);
    let sol = llt.solve(&rhs);
    let mut x: Vec<f64> = (0..n).map(|i| sol[(i, 0)]).collect();
    // one step of iterative refinement
    let ax = a.mul_vec(&x);
    let res = Mat::from_fn(n, 1, |i, _| b[i] - ax[i]);
    let dx = llt.solve(&res);
    for (i, xi) in x.iter_mut().enumerate() {
        *xi += dx[(i, 0)];
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::LinearSolve("non-finite Cholesky solution".into()));
    }
    Ok(x)
}

/// Jacobi-preconditioned conjugate gradients; returns the solution and the
/// iteration count.
pub fn conjugate_gradient(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, usize)> {
    let n = b.len();
    let diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, 0));
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    for it in 1..=max_iter {
        let ap = a.mul_vec(&p);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            return Err(Error::LinearSolve(format!(
                "matrix not positive definite (pᵀAp = {pap:e})"
            )));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rnorm <= tol * bnorm {
            return Ok((x, it));
        }
        for i in 0..n {
            z[i] = r[i] * diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::LinearSolve(format!(
        "conjugate gradients did not reach {tol:e} in {max_iter} iterations"
    )))
}
