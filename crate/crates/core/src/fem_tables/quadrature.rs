use std::sync::OnceLock;

use crate::{Error, Point, Result};

pub const MAX_TRIANGLE_DEGREE: usize = 10;
pub const MAX_EDGE_DEGREE: usize = 21;

/// A positive-weight quadrature rule on a reference domain.
///
/// Triangle rules use barycentric points on the reference triangle
/// `{(0,0), (1,0), (0,1)}` with weights summing to its area 1/2. Edge rules use
/// the affine parameter in `[0, 1]` with weights summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadRule<P> {
    pub points: Vec<P>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

pub type TriangleRule = QuadRule<[f64; 3]>;
pub type EdgeRule = QuadRule<f64>;

impl<P: Copy> QuadRule<P> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (P, f64)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }
}

impl TriangleRule {
    /// Maps the rule onto a physical triangle; weights absorb the Jacobian.
    pub fn physical(&self, tri: &[Point; 3]) -> impl Iterator<Item = (Point, f64)> + '_ {
        let [a, b, c] = *tri;
        let jac = ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])).abs();
        self.iter().map(move |(l, w)| {
            (
                [
                    l[0] * a[0] + l[1] * b[0] + l[2] * c[0],
                    l[0] * a[1] + l[1] * b[1] + l[2] * c[1],
                ],
                w * jac,
            )
        })
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn build_edge_rule(degree: usize) -> EdgeRule {
    let n = degree / 2 + 1;
    let (x, w) = gauss_legendre(n);
    QuadRule {
        points: x.iter().map(|&t| 0.5 * (t + 1.0)).collect(),
        weights: w.iter().map(|&w| 0.5 * w).collect(),
        degree,
    }
}

/// Collapsed Gauss product rule: `x = s`, `y = t (1 - s)` with Jacobian `1 - s`.
fn build_triangle_rule(degree: usize) -> TriangleRule {
    let outer = build_edge_rule(degree + 1);
    let inner = build_edge_rule(degree);
    let mut points = Vec::with_capacity(outer.len() * inner.len());
    let mut weights = Vec::with_capacity(outer.len() * inner.len());
    for (s, ws) in outer.iter() {
        for (t, wt) in inner.iter() {
            let x = s;
            let y = t * (1.0 - s);
            points.push([1.0 - x - y, x, y]);
            weights.push(ws * wt * (1.0 - s));
        }
    }
    QuadRule {
        points,
        weights,
        degree,
    }
}

/// Rule on the reference triangle exact for total degree `degree`.
pub fn triangle_rule(degree: usize) -> Result<&'static TriangleRule> {
    static RULES: OnceLock<Vec<TriangleRule>> = OnceLock::new();
    if degree > MAX_TRIANGLE_DEGREE {
        return Err(Error::UnsupportedDegree {
            degree,
            max: MAX_TRIANGLE_DEGREE,
        });
    }
    let rules = RULES.get_or_init(|| (0..=MAX_TRIANGLE_DEGREE).map(build_triangle_rule).collect());
    Ok(&rules[degree])
}

/// Gauss rule on `[0, 1]` exact for polynomials of degree `degree`.
pub fn edge_rule(degree: usize) -> Result<&'static EdgeRule> {
    static RULES: OnceLock<Vec<EdgeRule>> = OnceLock::new();
    if degree > MAX_EDGE_DEGREE {
        return Err(Error::UnsupportedDegree {
            degree,
            max: MAX_EDGE_DEGREE,
        });
    }
    let rules = RULES.get_or_init(|| (0..=MAX_EDGE_DEGREE).map(build_edge_rule).collect());
    Ok(&rules[degree])
}
