//! Semi-analytic solver for the Thomas-Fermi boundary-value problem.
//!
//! The crate builds the solution as a homotopy-analysis deformation series
//! over the generalized decaying basis alpha*(alpha + beta*x)^(-gamma*m),
//! accelerates the initial-slope series with diagonal Pade approximants (and
//! Wynn's epsilon algorithm as an independent cross-check), and validates
//! everything against a shooting-method reference integration of the
//! original equation.
//!
//! Module map:
//! - [`number`]: exact rationals, fixed-precision reals, dual-mode
//!   coefficients.
//! - [`series`]: algebra of finite series over the decaying basis.
//! - [`ham`]: the deformation recursion (initial guess, auxiliary operator,
//!   per-order solve, diagnostics).
//! - [`accel`]: diagonal Pade at p = 1, epsilon acceleration, percentage
//!   error.
//! - [`shooting`]: independent adaptive Runge-Kutta shooting reference.
//! - [`report`]: reproduction harness, published reference values, CSV/JSON
//!   emission; the thin `tfham` binary wraps it in subcommands.
//!
//! Each major capability also has a runnable example; see `examples/`.

pub mod error;
pub mod ham;
pub mod number;
pub mod series;

pub use error::{Error, Result};
pub use ham::{
    equation_residual, initial_guess, AuxOperator, DeformationSequence, HamConfig,
    OperatorDenominator, OrderDiagnostics,
};
pub use number::{parse_rational, Coeff, NumericMode, Rational, Real, DEFAULT_PRECISION};
pub use series::{BasisParams, BasisSeries, DerivOrder, Exponent};
