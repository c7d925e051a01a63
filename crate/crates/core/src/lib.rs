//! Symmetries and conservation laws of gl-regular Nijenhuis operators, and
//! integration of hydrodynamic-type systems `u_{tᵢ} = Aᵢ(u) u_x` in quadratures.
//!
//! The crate is organised bottom-up:
//!
//! * [`linalg`] — pointwise characteristic polynomials, Krylov matrices, commutant
//!   expansions and the `Aᵢ` recursion;
//! * [`jet`], [`dual`], [`real`] — derivative-carrying scalars;
//! * [`fields`] — operator, scalar and 1-form fields with exact partials, curves and
//!   block specifications;
//! * [`calculus`] — torsion, the `⟨L, M⟩` bracket and the residual tests built on it;
//! * [`jordan`] — `h(U)`, the symmetry family of a Toeplitz block and block composition;
//! * [`hierarchy`] — pullbacks, hierarchies of conservation laws, path integration and
//!   companion-coordinate checks;
//! * [`hydro`] — the `Aᵢ` fields, common symmetries/conservation laws and grid residuals;
//! * [`solver`] — the curve-to-solution pipeline.

pub mod calculus;
pub mod counterexamples;
pub mod dual;
pub mod error;
pub mod fields;
pub mod hierarchy;
pub mod hydro;
pub mod jet;
pub mod jordan;
pub mod linalg;
pub mod quadrature;
pub mod real;
pub mod solver;
pub mod spline;

pub use error::{Error, Result};
pub use real::Real;
