//! Poisson structures on ℝ⁴ whose symplectic leaves are the fibres of a
//! map `(C1, C2): ℝ⁴ → ℝ²`.
//!
//! - [`expr`]: exact rational polynomials in `x, y, z, t` and the parameter `s`.
//! - [`poisson`]: the determinant construction, Jacobi and Casimir checks,
//!   rank, Hamiltonian fields, linear part.
//! - [`models`]: the Lefschetz, fold, cusp and move charts.
//! - [`leaves`]: leaf frames, anchor solves, leaf symplectic form, RK4 flow.
//! - [`cli`]: the command-line front end.

pub mod cli;
pub mod expr;
pub mod leaves;
pub mod models;
pub mod point;
pub mod poisson;

pub use expr::{Expr, Var};
pub use point::Point4;
pub use poisson::{Bivector, CasimirPair};
