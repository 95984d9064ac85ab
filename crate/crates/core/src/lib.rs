//! Lowest-order hybrid high-order (HHO) discretization of the elliptic
//! obstacle problem on conforming triangle meshes.
//!
//! The crate is organized bottom-up:
//!
//! - [`mesh`]: conforming 2D triangulations and newest-vertex bisection.
//! - [`fem_tables`]: quadrature, scaled-monomial bases and L² projections.
//! - [`hho`]: element-local interpolation, potential reconstruction,
//!   stabilization and stiffness.
//! - [`assembly`]: global degrees of freedom, sparse assembly, Dirichlet
//!   elimination and obstacle cell averages.
//! - [`vi_solver`]: primal-dual active set solution of the discrete
//!   variational inequality and the discrete Lagrange multiplier.
//! - [`postprocess`]: the piecewise reconstruction and its node-averaged
//!   conforming counterpart.
//! - [`estimator`]: the residual-type a posteriori estimator, exact energy
//!   errors and efficiency indices.
//! - [`adapt`]: Dörfler marking and the SOLVE → ESTIMATE → MARK → REFINE loop.
//! - [`problems`]: benchmark data sets.
//! - [`io`]: CSV histories and JSON mesh snapshots.
//!
//! ```no_run
//! use hho_obstacle::adapt::{adaptive_loop, AdaptOptions};
//! use hho_obstacle::problems::example1;
//!
//! let problem = example1();
//! let opts = AdaptOptions { max_dofs: 20_000, ..AdaptOptions::default() };
//! let history = adaptive_loop(&problem, &opts).expect("adaptive run");
//! for level in &history.levels {
//!     println!("{} {} {:e}", level.level, level.dofs, level.eta_total);
//! }
//! ```

pub mod adapt;
pub mod assembly;
pub mod error;
pub mod estimator;
pub mod fem_tables;
pub mod hho;
pub mod io;
pub mod linsolve;
pub mod mesh;
pub mod postprocess;
pub mod problems;
pub mod sparse;
pub mod vi_solver;

pub use error::{Error, Result};
pub use mesh::Mesh;

/// A point in the plane.
pub type Point = [f64; 2];
