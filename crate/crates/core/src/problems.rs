//! Benchmark data sets: load, obstacle, boundary data, initial mesh and,
//! where known, the exact solution.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::mesh::Mesh;
use crate::{Error, Point, Result};

pub type ScalarField = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(Point) -> Point + Send + Sync>;

/// Curves across which the exact solution loses smoothness; cells meeting
/// them get subdivided quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Interface {
    Circle { center: Point, radius: f64 },
    Point(Point),
}

impl Interface {
    /// Whether the closed triangle may meet the interface.
    pub fn meets(&self, tri: &[Point; 3]) -> bool {
        let dist = |p: Point, c: Point| (p[0] - c[0]).hypot(p[1] - c[1]);
        match *self {
            Interface::Circle { center, radius } => {
                let d: Vec<f64> = tri.iter().map(|&p| dist(p, center)).collect();
                let dmax = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                dmax >= radius && min_distance(tri, center) <= radius
            }
            Interface::Point(p) => min_distance(tri, p) <= 1e-12,
        }
    }
}

/// Distance from `p` to the closed triangle.
fn min_distance(tri: &[Point; 3], p: Point) -> f64 {
    let [a, b, c] = *tri;
    let cross = |o: Point, u: Point, v: Point| (u[0] - o[0]) * (v[1] - o[1]) - (u[1] - o[1]) * (v[0] - o[0]);
    let (d1, d2, d3) = (cross(a, b, p), cross(b, c, p), cross(c, a, p));
    let neg = d1 < 0.0 || d2 < 0.0 || d3 < 0.0;
    let pos = d1 > 0.0 || d2 > 0.0 || d3 > 0.0;
    if !(neg && pos) {
        return 0.0;
    }
    let seg = |u: Point, v: Point| {
        let (dx, dy) = (v[0] - u[0], v[1] - u[1]);
        let t = (((p[0] - u[0]) * dx + (p[1] - u[1]) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
        (p[0] - u[0] - t * dx).hypot(p[1] - u[1] - t * dy)
    };
    seg(a, b).min(seg(b, c)).min(seg(c, a))
}

#[derive(Clone)]
pub struct ExactSolution {
    pub value: ScalarField,
    pub gradient: VectorField,
    pub interfaces: Vec<Interface>,
}

#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub mesh: Mesh,
    pub load: ScalarField,
    pub obstacle: ScalarField,
    pub obstacle_gradient: VectorField,
    /// Dirichlet data; `None` means homogeneous.
    pub boundary: Option<ScalarField>,
    pub exact: Option<ExactSolution>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("cells", &self.mesh.num_cells())
            .field("has_boundary_data", &self.boundary.is_some())
            .field("has_exact", &self.exact.is_some())
            .finish()
    }
}

/// Value of an obstacle that never becomes active.
pub const FAR_OBSTACLE: f64 = -1e9;

pub const NAMES: [&str; 5] = [
    "example1",
    "example2",
    "smooth_unconstrained",
    "flat_obstacle",
    "affine_patch",
];

pub fn by_name(name: &str) -> Result<ProblemSpec> {
    match name {
        "example1" => Ok(example1()),
        "example2" => Ok(example2()),
        "smooth_unconstrained" => Ok(smooth_unconstrained()),
        "flat_obstacle" => Ok(flat_obstacle()),
        "affine_patch" => Ok(affine_patch()),
        _ => Err(Error::InvalidInput(format!(
            "unknown problem '{name}'; expected one of {}",
            NAMES.join(", ")
        ))),
    }
}

fn field(f: impl Fn(Point) -> f64 + Send + Sync + 'static) -> ScalarField {
    Arc::new(f)
}

fn vector(f: impl Fn(Point) -> Point + Send + Sync + 'static) -> VectorField {
    Arc::new(f)
}

fn constant(c: f64) -> ScalarField {
    field(move |_| c)
}

fn zero_gradient() -> VectorField {
    vector(|_| [0.0, 0.0])
}

/// `(0, 1)²` split along the diagonal through the origin.
pub fn unit_square_mesh() -> Mesh {
    Mesh::new(
        vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
        vec![[0, 1, 2], [0, 2, 3]],
    )
    .expect("unit square mesh")
}

/// `(-a, a)²` as a 3×3 vertex grid with every quadrant split along the
/// diagonal through the center.
pub fn centered_square_mesh(a: f64) -> Mesh {
    let mut vertices = Vec::with_capacity(9);
    for j in 0..3 {
        for i in 0..3 {
            vertices.push([(i as f64 - 1.0) * a, (j as f64 - 1.0) * a]);
        }
    }
    // center is vertex 4
    let cells = vec![
        [4, 0, 1],
        [4, 3, 0],
        [4, 1, 2],
        [4, 2, 5],
        [4, 5, 8],
        [4, 8, 7],
        [4, 7, 6],
        [4, 6, 3],
    ];
    Mesh::new(vertices, cells).expect("square mesh")
}

/// `(-2, 2)² ∖ [0, 2) × (-2, 0]`: three squares, each split along the
/// diagonal through the reentrant corner.
pub fn l_domain_mesh() -> Mesh {
    let vertices = vec![
        [0.0, 0.0],
        [2.0, 0.0],
        [2.0, 2.0],
        [0.0, 2.0],
        [-2.0, 2.0],
        [-2.0, 0.0],
        [-2.0, -2.0],
        [0.0, -2.0],
    ];
    let cells = vec![[0, 1, 2], [0, 2, 3], [0, 3, 4], [0, 4, 5], [0, 5, 6], [0, 6, 7]];
    Mesh::new(vertices, cells).expect("L-domain mesh")
}

pub const EXAMPLE1_CONTACT_RADIUS: f64 = 0.7;

/// Radially symmetric contact problem on `(-1, 1)²` with `χ = 0` and
/// exact solution `((r² − r₀²)⁺)²`.
pub fn example1() -> ProblemSpec {
    let r0 = EXAMPLE1_CONTACT_RADIUS;
    let r0s = r0 * r0;
    let u = move |x: Point| {
        let s = (x[0] * x[0] + x[1] * x[1] - r0s).max(0.0);
        s * s
    };
    ProblemSpec {
        name: "example1".into(),
        mesh: centered_square_mesh(1.0),
        load: field(move |x| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            if r2 > r0s {
                -4.0 * (4.0 * r2 - 2.0 * r0s)
            } else {
                -8.0 * r0s * (1.0 - r2 + r0s)
            }
        }),
        obstacle: constant(0.0),
        obstacle_gradient: zero_gradient(),
        boundary: Some(field(u)),
        exact: Some(ExactSolution {
            value: field(u),
            gradient: vector(move |x| {
                let s = (x[0] * x[0] + x[1] * x[1] - r0s).max(0.0);
                [4.0 * s * x[0], 4.0 * s * x[1]]
            }),
            interfaces: vec![Interface::Circle {
                center: [0.0, 0.0],
                radius: r0,
            }],
        }),
    }
}

/// Smooth cutoff: 1 for `r ≤ 1/4`, 0 for `r ≥ 3/4`; returns value and the
/// first two radial derivatives.
pub fn cutoff(r: f64) -> (f64, f64, f64) {
    let t = 2.0 * (r - 0.25);
    if t < 0.0 {
        (1.0, 0.0, 0.0)
    } else if t < 1.0 {
        let g = -6.0 * t.powi(5) + 15.0 * t.powi(4) - 10.0 * t.powi(3) + 1.0;
        let dg = 2.0 * (-30.0 * t.powi(4) + 60.0 * t.powi(3) - 30.0 * t * t);
        let ddg = 4.0 * (-120.0 * t.powi(3) + 180.0 * t * t - 60.0 * t);
        (g, dg, ddg)
    } else {
        (0.0, 0.0, 0.0)
    }
}

/// Polar angle in `[0, 2π)`.
pub fn angle(x: Point) -> f64 {
    let t = x[1].atan2(x[0]);
    if t < 0.0 {
        t + 2.0 * PI
    } else {
        t
    }
}

/// L-shaped domain with a corner singularity, `χ = 0` and `g = 0`.
pub fn example2() -> ProblemSpec {
    let u = |x: Point| {
        let r = x[0].hypot(x[1]);
        if r == 0.0 {
            return 0.0;
        }
        r.powf(2.0 / 3.0) * (2.0 * angle(x) / 3.0).sin() * cutoff(r).0
    };
    ProblemSpec {
        name: "example2".into(),
        mesh: l_domain_mesh(),
        load: field(|x| {
            let r = x[0].hypot(x[1]);
            let jump = if r <= 1.25 { 0.0 } else { 1.0 };
            if r == 0.0 {
                return -jump;
            }
            let s = (2.0 * angle(x) / 3.0).sin();
            let (_, dg, ddg) = cutoff(r);
            -r.powf(2.0 / 3.0) * s * (dg / r + ddg) - 4.0 / 3.0 * r.powf(-1.0 / 3.0) * s * dg - jump
        }),
        obstacle: constant(0.0),
        obstacle_gradient: zero_gradient(),
        boundary: None,
        exact: Some(ExactSolution {
            value: field(u),
            gradient: vector(|x| {
                let r = x[0].hypot(x[1]);
                if r == 0.0 {
                    return [0.0, 0.0];
                }
                let th = angle(x);
                let (s, c) = ((2.0 * th / 3.0).sin(), (2.0 * th / 3.0).cos());
                let (g, dg, _) = cutoff(r);
                let ur = (2.0 / 3.0 * r.powf(-1.0 / 3.0) * g + r.powf(2.0 / 3.0) * dg) * s;
                let ut = 2.0 / 3.0 * r.powf(-1.0 / 3.0) * c * g;
                let (ct, st) = (th.cos(), th.sin());
                [ur * ct - ut * st, ur * st + ut * ct]
            }),
            interfaces: vec![Interface::Point([0.0, 0.0])],
        }),
    }
}

/// `u = sin(πx) sin(πy)` on the unit square with an inactive obstacle.
pub fn smooth_unconstrained() -> ProblemSpec {
    let u = |x: Point| (PI * x[0]).sin() * (PI * x[1]).sin();
    ProblemSpec {
        name: "smooth_unconstrained".into(),
        mesh: unit_square_mesh(),
        load: field(move |x| 2.0 * PI * PI * u(x)),
        obstacle: constant(FAR_OBSTACLE),
        obstacle_gradient: zero_gradient(),
        boundary: None,
        exact: Some(ExactSolution {
            value: field(u),
            gradient: vector(|x| {
                [
                    PI * (PI * x[0]).cos() * (PI * x[1]).sin(),
                    PI * (PI * x[0]).sin() * (PI * x[1]).cos(),
                ]
            }),
            interfaces: Vec::new(),
        }),
    }
}

/// `f = 1`, `χ = −1`, `g = 0` on the unit square: the obstacle stays inactive.
pub fn flat_obstacle() -> ProblemSpec {
    ProblemSpec {
        name: "flat_obstacle".into(),
        mesh: unit_square_mesh(),
        load: constant(1.0),
        obstacle: constant(-1.0),
        obstacle_gradient: zero_gradient(),
        boundary: None,
        exact: None,
    }
}

/// Affine solution with `f = 0` and an inactive obstacle; reproduced exactly.
pub fn affine_patch() -> ProblemSpec {
    let g = |x: Point| 1.0 + 2.0 * x[0] - 0.5 * x[1];
    ProblemSpec {
        name: "affine_patch".into(),
        mesh: unit_square_mesh(),
        load: constant(0.0),
        obstacle: constant(FAR_OBSTACLE),
        obstacle_gradient: zero_gradient(),
        boundary: Some(field(g)),
        exact: Some(ExactSolution {
            value: field(g),
            gradient: vector(|_| [2.0, -0.5]),
            interfaces: Vec::new(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Fourth-order five-point Laplacian.
    fn fd_laplacian(u: &dyn Fn(Point) -> f64, x: Point, h: f64) -> f64 {
        let d2 = |e: Point| {
            let at = |s: f64| u([x[0] + s * e[0], x[1] + s * e[1]]);
            (-at(2.0 * h) + 16.0 * at(h) - 30.0 * at(0.0) + 16.0 * at(-h) - at(-2.0 * h)) / (12.0 * h * h)
        };
        d2([1.0, 0.0]) + d2([0.0, 1.0])
    }

    fn in_l_domain(x: Point) -> bool {
        x[0].abs() < 2.0 && x[1].abs() < 2.0 && !(x[0] >= 0.0 && x[1] <= 0.0)
    }

    #[test]
    fn example1_load_is_minus_laplacian_outside_contact() {
        let p = example1();
        let ex = p.exact.as_ref().unwrap();
        let r0s = EXAMPLE1_CONTACT_RADIUS.powi(2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut count = 0;
        while count < 1000 {
            let x: Point = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let r2 = x[0] * x[0] + x[1] * x[1];
            if r2.sqrt() < EXAMPLE1_CONTACT_RADIUS + 0.03 {
                continue;
            }
            count += 1;
            // closed form: Δ(r² − r₀²)² = 16 r² − 8 r₀²
            let symbolic = -(16.0 * r2 - 8.0 * r0s);
            assert!(((p.load)(x) - symbolic).abs() < 1e-12);
            let fd = -fd_laplacian(&*ex.value, x, 1e-2);
            assert!(((p.load)(x) - fd).abs() < 1e-10, "{x:?}");
        }
    }

    #[test]
    fn example1_contact_region_is_consistent() {
        let p = example1();
        let ex = p.exact.as_ref().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let r = rng.gen_range(0.0..EXAMPLE1_CONTACT_RADIUS);
            let t = rng.gen_range(0.0..2.0 * PI);
            let x = [r * t.cos(), r * t.sin()];
            assert_eq!((ex.value)(x), 0.0);
            assert!((p.load)(x) < 0.0);
        }
        // double root at r₀: value and gradient vanish
        let x = [EXAMPLE1_CONTACT_RADIUS, 0.0];
        assert_eq!((ex.value)(x), 0.0);
        assert_eq!((ex.gradient)(x), [0.0, 0.0]);
    }

    #[test]
    fn cutoff_endpoints() {
        assert_eq!(cutoff(0.25), (1.0, 0.0, 0.0));
        assert_eq!(cutoff(0.75), (0.0, 0.0, 0.0));
        let (g, dg, _) = cutoff(0.75 - 1e-12);
        assert!(g.abs() < 1e-20 && dg.abs() < 1e-20);
        let (g, dg, _) = cutoff(0.25 + 1e-12);
        assert!((g - 1.0).abs() < 1e-20 && dg.abs() < 1e-20);
    }

    #[test]
    fn example2_load_matches_laplacian_on_annulus() {
        let p = example2();
        let ex = p.exact.as_ref().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut count = 0;
        while count < 1000 {
            let r = rng.gen_range(0.3..0.7);
            let t = rng.gen_range(0.05..1.5 * PI - 0.05);
            let x = [r * t.cos(), r * t.sin()];
            if !in_l_domain(x) {
                continue;
            }
            count += 1;
            // Richardson step on the fourth-order stencil
            let (coarse, fine) = (fd_laplacian(&*ex.value, x, 4e-3), fd_laplacian(&*ex.value, x, 2e-3));
            let fd = -(16.0 * fine - coarse) / 15.0;
            assert!(((p.load)(x) - fd).abs() < 1e-8, "{x:?}: {} vs {fd}", (p.load)(x));
        }
    }

    #[test]
    fn example2_vanishes_on_boundary() {
        let p = example2();
        let ex = p.exact.as_ref().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let edges: [(Point, Point); 6] = [
            ([0.0, 0.0], [2.0, 0.0]),
            ([2.0, 0.0], [2.0, 2.0]),
            ([2.0, 2.0], [-2.0, 2.0]),
            ([-2.0, 2.0], [-2.0, -2.0]),
            ([-2.0, -2.0], [0.0, -2.0]),
            ([0.0, -2.0], [0.0, 0.0]),
        ];
        for i in 0..1000 {
            let (a, b) = edges[i % 6];
            let t: f64 = rng.gen_range(0.0..1.0);
            let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            assert!((ex.value)(x).abs() <= 1e-14, "{x:?}");
        }
    }

    #[test]
    fn exact_solutions_are_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for p in [example1(), example2(), smooth_unconstrained(), affine_patch()] {
            let ex = p.exact.as_ref().unwrap();
            let lo = p
                .mesh
                .vertices()
                .iter()
                .fold([f64::INFINITY; 2], |m, v| [m[0].min(v[0]), m[1].min(v[1])]);
            let hi = p
                .mesh
                .vertices()
                .iter()
                .fold([f64::NEG_INFINITY; 2], |m, v| [m[0].max(v[0]), m[1].max(v[1])]);
            let mut n = 0;
            while n < 10_000 {
                let x = [rng.gen_range(lo[0]..hi[0]), rng.gen_range(lo[1]..hi[1])];
                if p.name == "example2" && !in_l_domain(x) {
                    continue;
                }
                n += 1;
                assert!((ex.value)(x) >= (p.obstacle)(x) - 1e-12, "{}: {x:?}", p.name);
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for p in [example1(), example2(), smooth_unconstrained()] {
            let ex = p.exact.as_ref().unwrap();
            for _ in 0..200 {
                let x = [rng.gen_range(-0.9..0.9), rng.gen_range(0.1..0.9)];
                let h = 1e-6;
                let g = (ex.gradient)(x);
                let fx = ((ex.value)([x[0] + h, x[1]]) - (ex.value)([x[0] - h, x[1]])) / (2.0 * h);
                let fy = ((ex.value)([x[0], x[1] + h]) - (ex.value)([x[0], x[1] - h])) / (2.0 * h);
                assert!((g[0] - fx).abs() < 1e-6 && (g[1] - fy).abs() < 1e-6, "{} {x:?}", p.name);
            }
        }
    }

    #[test]
    fn coarse_meshes() {
        let l = l_domain_mesh();
        assert_eq!((l.num_vertices(), l.num_cells(), l.num_faces()), (8, 6, 13));
        assert_eq!(l.boundary_faces().count(), 8);
        assert_eq!(l.num_vertices() as i64 - l.num_faces() as i64 + l.num_cells() as i64, 1);
        assert!((l.total_area() - 12.0).abs() < 1e-14);
        let s = centered_square_mesh(1.0);
        assert_eq!(s.num_cells(), 8);
        assert!((s.total_area() - 4.0).abs() < 1e-14);
        assert!(by_name("nope").is_err());
        for n in NAMES {
            assert_eq!(by_name(n).unwrap().name, n);
        }
    }

    #[test]
    fn interface_detection() {
        let c = Interface::Circle {
            center: [0.0, 0.0],
            radius: 0.7,
        };
        assert!(c.meets(&[[0.6, 0.0], [0.8, 0.0], [0.7, 0.1]]));
        assert!(!c.meets(&[[0.0, 0.0], [0.1, 0.0], [0.0, 0.1]]));
        assert!(!c.meets(&[[0.9, 0.0], [1.0, 0.0], [0.9, 0.1]]));
        // chord crossing the circle with all vertices outside
        assert!(c.meets(&[[-1.0, 0.1], [1.0, 0.1], [0.0, 2.0]]));
        let o = Interface::Point([0.0, 0.0]);
        assert!(o.meets(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]));
        assert!(!o.meets(&[[0.1, 0.0], [1.0, 0.0], [0.0, 1.0]]));
    }
}
