//! Numeric tower: exact rationals, configurable-precision reals, and the
//! dual-mode coefficient that every series in this crate carries.
//!
//! Exact mode is the correctness oracle: no operation ever rounds. Approx
//! mode is the production path for deep recursions where rational bit-length
//! would blow up; it uses binary floats with a fixed per-run mantissa
//! precision (64 bits minimum, 512 by default).

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rug::ops::Pow;

use crate::error::{Error, Result};
use crate::series::Exponent;

/// Exact arbitrary-precision rational, always in canonical form
/// (gcd(|num|, den) = 1, den > 0). Arithmetic never rounds.
pub type Rational = rug::Rational;

/// Binary floating-point number with explicit mantissa precision in bits.
pub type Real = rug::Float;

/// Smallest admissible mantissa precision for Approx mode.
pub const MIN_PRECISION: u32 = 64;

/// Default mantissa precision used by the CLI.
pub const DEFAULT_PRECISION: u32 = 512;

/// Accumulation in Approx mode drops coefficients within this many bits of
/// the precision floor; see [`Coeff::is_negligible`].
const DROP_GUARD_BITS: i64 = 16;

/// Which coefficient field a computation runs in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NumericMode {
    /// Rational coefficients, exact arithmetic.
    Exact,
    /// Float coefficients with the given mantissa precision in bits.
    Approx(u32),
}

impl NumericMode {
    pub fn validate(self) -> Result<()> {
        match self {
            NumericMode::Exact => Ok(()),
            NumericMode::Approx(p) if p >= MIN_PRECISION => Ok(()),
            NumericMode::Approx(p) => Err(Error::Config(format!(
                "precision {p} below the {MIN_PRECISION}-bit minimum"
            ))),
        }
    }

    /// Precision used when a real value must be produced from this mode.
    pub fn precision(self) -> u32 {
        match self {
            NumericMode::Exact => DEFAULT_PRECISION,
            NumericMode::Approx(p) => p,
        }
    }
}

impl fmt::Display for NumericMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NumericMode::Exact => write!(f, "exact"),
            NumericMode::Approx(p) => write!(f, "float/{p}"),
        }
    }
}

/// Parse an integer, a fraction `p/q`, or a finite decimal into an exact
/// [`Rational`]. No exponent notation, no rounding.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let s = text.trim();
    if s.is_empty() {
        return Err(Error::Parse(text.to_owned()));
    }
    if s.contains('/') {
        return Rational::from_str(s).map_err(|e| {
            if e.to_string().contains("denominator is zero")
                || format!("{e:?}").contains("DenomZero")
            {
                Error::DivisionByZero(text.to_owned())
            } else {
                Error::Parse(text.to_owned())
            }
        });
    }
    if let Some(dot) = s.find('.') {
        let (head, tail) = s.split_at(dot);
        let frac = &tail[1..];
        let (sign, digits) = match head.strip_prefix('-') {
            Some(rest) => (-1, rest),
            None => (1, head.strip_prefix('+').unwrap_or(head)),
        };
        if frac.contains(['+', '-', '.']) || (digits.is_empty() && frac.is_empty()) {
            return Err(Error::Parse(text.to_owned()));
        }
        let all: String = format!("{digits}{frac}");
        if all.is_empty() || !all.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Error::Parse(text.to_owned()));
        }
        let num = rug::Integer::from_str(&all).map_err(|_| Error::Parse(text.to_owned()))?;
        let den = rug::Integer::from(10).pow(frac.len() as u32);
        return Ok(Rational::from((num * sign, den)));
    }
    Rational::from_str(s).map_err(|_| Error::Parse(text.to_owned()))
}

/// Parse a decimal string into a [`Real`] at the given precision.
pub fn parse_real(text: &str, precision: u32) -> Result<Real> {
    let parsed = Real::parse(text.trim()).map_err(|_| Error::Parse(text.to_owned()))?;
    Ok(Real::with_val(precision, parsed))
}

/// Render a real so that parsing it back at the same precision recovers the
/// value exactly.
pub fn real_to_string(value: &Real) -> String {
    value.to_string_radix(10, None)
}

/// A series coefficient: exact rational or fixed-precision real, matching
/// the run's [`NumericMode`]. Mixing modes in one operation is a programming
/// error and panics; the series layer rejects mixed operands with a proper
/// [`Error::ParameterMismatch`] before any coefficient arithmetic happens.
#[derive(Clone, Debug, PartialEq)]
pub enum Coeff {
    Exact(Rational),
    Approx(Real),
}

impl Coeff {
    pub fn zero(mode: NumericMode) -> Self {
        match mode {
            NumericMode::Exact => Coeff::Exact(Rational::new()),
            NumericMode::Approx(p) => Coeff::Approx(Real::with_val(p, 0)),
        }
    }

    pub fn one(mode: NumericMode) -> Self {
        Coeff::from_rational(&Rational::from(1), mode)
    }

    pub fn from_rational(r: &Rational, mode: NumericMode) -> Self {
        match mode {
            NumericMode::Exact => Coeff::Exact(r.clone()),
            NumericMode::Approx(p) => Coeff::Approx(Real::with_val(p, r)),
        }
    }

    pub fn mode(&self) -> NumericMode {
        match self {
            Coeff::Exact(_) => NumericMode::Exact,
            Coeff::Approx(f) => NumericMode::Approx(f.prec()),
        }
    }

    fn pair<'a>(&'a self, other: &'a Coeff) -> (&'a Coeff, &'a Coeff) {
        assert_eq!(
            self.mode(),
            other.mode(),
            "coefficient arithmetic across numeric modes"
        );
        (self, other)
    }

    pub fn add(&self, other: &Coeff) -> Coeff {
        match self.pair(other) {
            (Coeff::Exact(a), Coeff::Exact(b)) => Coeff::Exact(Rational::from(a + b)),
            (Coeff::Approx(a), Coeff::Approx(b)) => Coeff::Approx(a.clone() + b),
            _ => unreachable!(),
        }
    }

    pub fn add_assign(&mut self, other: &Coeff) {
        assert_eq!(self.mode(), other.mode(), "coefficient arithmetic across numeric modes");
        match (self, other) {
            (Coeff::Exact(a), Coeff::Exact(b)) => *a += b,
            (Coeff::Approx(a), Coeff::Approx(b)) => *a += b,
            _ => unreachable!(),
        }
    }

    pub fn sub(&self, other: &Coeff) -> Coeff {
        match self.pair(other) {
            (Coeff::Exact(a), Coeff::Exact(b)) => Coeff::Exact(Rational::from(a - b)),
            (Coeff::Approx(a), Coeff::Approx(b)) => Coeff::Approx(a.clone() - b),
            _ => unreachable!(),
        }
    }

    pub fn mul(&self, other: &Coeff) -> Coeff {
        match self.pair(other) {
            (Coeff::Exact(a), Coeff::Exact(b)) => Coeff::Exact(Rational::from(a * b)),
            (Coeff::Approx(a), Coeff::Approx(b)) => Coeff::Approx(a.clone() * b),
            _ => unreachable!(),
        }
    }

    /// Division; the caller is responsible for a nonzero divisor.
    pub fn div(&self, other: &Coeff) -> Coeff {
        match self.pair(other) {
            (Coeff::Exact(a), Coeff::Exact(b)) => Coeff::Exact(Rational::from(a / b)),
            (Coeff::Approx(a), Coeff::Approx(b)) => Coeff::Approx(a.clone() / b),
            _ => unreachable!(),
        }
    }

    pub fn neg(&self) -> Coeff {
        match self {
            Coeff::Exact(a) => Coeff::Exact(Rational::from(-a.clone())),
            Coeff::Approx(a) => Coeff::Approx(-a.clone()),
        }
    }

    /// Multiply by an exact rational factor (exact in both modes up to the
    /// mode's own rounding).
    pub fn scale(&self, factor: &Rational) -> Coeff {
        match self {
            Coeff::Exact(a) => Coeff::Exact(Rational::from(a * factor)),
            Coeff::Approx(a) => {
                let f = Real::with_val(a.prec(), factor);
                Coeff::Approx(a.clone() * f)
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Coeff::Exact(a) => a.cmp0() == Ordering::Equal,
            Coeff::Approx(a) => a.is_zero(),
        }
    }

    /// Whether the coefficient should be dropped from a series after
    /// accumulation: exact zero in Exact mode, or within [`DROP_GUARD_BITS`]
    /// of the precision floor in Approx mode. The threshold 2^(16 - p) is far
    /// below any meaningful coefficient at the supported precisions, so only
    /// roundoff residue is ever removed.
    pub fn is_negligible(&self) -> bool {
        match self {
            Coeff::Exact(a) => a.cmp0() == Ordering::Equal,
            Coeff::Approx(a) => match a.get_exp() {
                None => a.is_zero(),
                Some(e) => (e as i64) <= DROP_GUARD_BITS - a.prec() as i64,
            },
        }
    }

    /// `|self| > |other|`, for pivot selection.
    pub fn abs_gt(&self, other: &Coeff) -> bool {
        match self.pair(other) {
            (Coeff::Exact(a), Coeff::Exact(b)) => {
                Rational::from(a.clone().abs()) > Rational::from(b.clone().abs())
            }
            (Coeff::Approx(a), Coeff::Approx(b)) => {
                a.clone().abs() > b.clone().abs()
            }
            _ => unreachable!(),
        }
    }

    /// Convert to a real at the requested precision (exact rationals are
    /// correctly rounded once).
    pub fn to_real(&self, precision: u32) -> Real {
        match self {
            Coeff::Exact(a) => Real::with_val(precision, a),
            Coeff::Approx(a) => Real::with_val(precision, a),
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Coeff::Exact(a) => a.to_f64(),
            Coeff::Approx(a) => a.to_f64(),
        }
    }

    /// Decimal rendering used by reports: `p/q` in Exact mode, a
    /// full-precision decimal string in Approx mode.
    pub fn decimal_string(&self) -> String {
        match self {
            Coeff::Exact(a) => a.to_string(),
            Coeff::Approx(a) => real_to_string(a),
        }
    }
}

impl fmt::Display for Coeff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coeff::Exact(a) => write!(f, "{a}"),
            Coeff::Approx(a) => write!(f, "{}", a.to_f64()),
        }
    }
}

/// `base^exp` for a positive rational base and rational exponent, in the
/// given mode. Integer exponents are exact in both modes. Fractional
/// exponents require Approx mode; exact series never carry them (enforced at
/// series construction), so hitting one here in Exact mode is a bug.
pub fn rational_pow(base: &Rational, exp: &Exponent, mode: NumericMode) -> Coeff {
    if exp.is_integer() {
        let n32 = i32::try_from(*exp.numer()).expect("exponent magnitude out of range");
        let powed = Rational::from(base.pow(n32));
        return Coeff::from_rational(&powed, mode);
    }
    match mode {
        NumericMode::Exact => {
            panic!("fractional power {exp} of a rational in exact mode")
        }
        NumericMode::Approx(p) => {
            let b = Real::with_val(p, base);
            let e = Real::with_val(p, Rational::from((*exp.numer(), *exp.denom())));
            Coeff::Approx(Real::with_val(p, b.pow(&e)))
        }
    }
}
