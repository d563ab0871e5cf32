//! Error taxonomy shared by every layer of the crate.

use crate::series::Exponent;
use thiserror::Error;

/// Everything that can go wrong, from number parsing up to report assembly.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed numeric literal.
    #[error("cannot parse {0:?} as an exact rational")]
    Parse(String),

    /// A fraction literal with a zero denominator.
    #[error("zero denominator in {0:?}")]
    DivisionByZero(String),

    /// Binary series operation on operands with different basis parameters
    /// or numeric modes.
    #[error("operands disagree: {0}")]
    ParameterMismatch(String),

    /// An operation would create a term that grows at infinity, leaving the
    /// decaying basis.
    #[error("term t^(-{exponent}) escapes the decaying basis")]
    BasisEscape { exponent: Exponent },

    /// Inverting the auxiliary operator hit a forcing exponent whose
    /// preimage lies in the operator kernel.
    #[error("resonant forcing exponent {exponent}: preimage lies in the operator kernel")]
    Resonance { exponent: Exponent },

    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Index or size outside the available data.
    #[error("range error: {0}")]
    Range(String),

    /// Invalid run configuration.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A lower deformation order is missing from the sequence.
    #[error("sequencing error: {0}")]
    Sequencing(String),

    /// Singular linear system while constructing a Pade approximant.
    /// Reported as-is; the system is never perturbed to force a solution.
    #[error("degenerate [{m},{m}] Pade system: {detail}")]
    Degenerate { m: usize, detail: String },

    /// A deformation order could not be produced; wraps the underlying
    /// failure with the order index that hit it.
    #[error("order {order}: {source}")]
    OrderFailure {
        order: usize,
        #[source]
        source: Box<Error>,
    },

    /// Shooting bracket whose endpoints classify the same way.
    #[error("bracket error: {0}")]
    Bracket(String),

    /// Adaptive integration could not continue.
    #[error("integration failure at x = {x}: {detail}")]
    Integration { x: f64, detail: String },

    /// The series went non-positive where the square root of u^3 is needed.
    #[error("branch error: u(x) <= 0 at x = {x}")]
    Branch { x: f64 },

    /// I/O while writing reports.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
