//! Finite series over the decaying basis (alpha + beta*x)^(-e).
//!
//! A [`BasisSeries`] is a sparse map from nonnegative rational exponents e to
//! nonzero coefficients; it represents sum_e c_e * t^(-e) with t = alpha +
//! beta*x. The term e = 0 is the constant term. Exponents live on a rational
//! lattice (integers when gamma is an integer, multiples of 1/q for gamma =
//! p/q), which keeps the basis closed under the three generating operations:
//! products add exponents, multiplication by x shifts by one, and the second
//! derivative shifts by two.
//!
//! Invariants:
//! - no stored zero (or negligible, in Approx mode) coefficients,
//! - all exponents >= 0 and finite,
//! - terms are ordered by ascending exponent, so iteration order and
//!   therefore every downstream report is deterministic.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::Signed;
use rug::ops::Pow;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::number::{parse_rational, parse_real, rational_pow, Coeff, NumericMode, Rational, Real};

/// Exponent of a basis term: an exact rational on the run's lattice.
pub type Exponent = num_rational::Ratio<i64>;

/// Convert a lattice exponent to an arbitrary-precision rational.
pub fn exponent_to_rational(e: Exponent) -> Rational {
    Rational::from((*e.numer(), *e.denom()))
}

/// Basis parameters alpha, beta, gamma of the family
/// alpha * (alpha + beta*x)^(-gamma*m).
#[derive(Clone, Debug, PartialEq)]
pub struct BasisParams {
    alpha: Rational,
    beta: Rational,
    gamma: Rational,
    gamma_exp: Exponent,
}

impl BasisParams {
    pub fn new(alpha: Rational, beta: Rational, gamma: Rational) -> Result<Self> {
        for (name, v) in [("alpha", &alpha), ("beta", &beta), ("gamma", &gamma)] {
            if *v <= 0 {
                return Err(Error::Config(format!("{name} must be strictly positive")));
            }
        }
        let num = gamma.numer().to_i64().ok_or_else(|| {
            Error::Config("gamma numerator out of lattice range".into())
        })?;
        let den = gamma.denom().to_i64().ok_or_else(|| {
            Error::Config("gamma denominator out of lattice range".into())
        })?;
        Ok(Self {
            alpha,
            beta,
            gamma,
            gamma_exp: Exponent::new(num, den),
        })
    }

    /// alpha = beta = gamma = 1: the classic basis (1 + x)^(-m).
    pub fn unit() -> Self {
        Self::new(Rational::from(1), Rational::from(1), Rational::from(1)).unwrap()
    }

    pub fn alpha(&self) -> &Rational {
        &self.alpha
    }

    pub fn beta(&self) -> &Rational {
        &self.beta
    }

    pub fn gamma(&self) -> &Rational {
        &self.gamma
    }

    /// gamma as a lattice exponent.
    pub fn gamma_exponent(&self) -> Exponent {
        self.gamma_exp
    }

    /// Whether every basis exponent generated from gamma is an integer.
    pub fn integer_lattice(&self) -> bool {
        self.gamma_exp.is_integer()
    }
}

/// Derivative order selector for [`BasisSeries::deriv_at_zero`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DerivOrder {
    First,
    Second,
}

/// Finite sum of coefficient * (alpha + beta*x)^(-e) terms.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisSeries {
    params: BasisParams,
    mode: NumericMode,
    terms: BTreeMap<Exponent, Coeff>,
}

impl BasisSeries {
    pub fn zero(params: BasisParams, mode: NumericMode) -> Self {
        Self {
            params,
            mode,
            terms: BTreeMap::new(),
        }
    }

    /// Single term c * t^(-e). Exact mode admits only integer exponents:
    /// boundary constants such as alpha^(-e) must stay rational.
    pub fn monomial(params: BasisParams, mode: NumericMode, e: Exponent, c: &Rational) -> Result<Self> {
        let mut s = Self::zero(params, mode);
        s.check_exponent(e)?;
        let coeff = Coeff::from_rational(c, mode);
        if !coeff.is_negligible() {
            s.terms.insert(e, coeff);
        }
        Ok(s)
    }

    /// Build from (exponent, coefficient) pairs, accumulating duplicates.
    pub fn from_terms<I>(params: BasisParams, mode: NumericMode, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Exponent, Coeff)>,
    {
        let mut s = Self::zero(params, mode);
        for (e, c) in terms {
            s.check_exponent(e)?;
            if c.mode() != mode {
                return Err(Error::ParameterMismatch(format!(
                    "coefficient mode {} differs from series mode {}",
                    c.mode(),
                    mode
                )));
            }
            accumulate(&mut s.terms, e, c);
        }
        s.normalize();
        Ok(s)
    }

    fn check_exponent(&self, e: Exponent) -> Result<()> {
        if e.is_negative() {
            return Err(Error::BasisEscape { exponent: e });
        }
        if self.mode == NumericMode::Exact && !e.is_integer() {
            return Err(Error::Domain(format!(
                "exact mode requires integer exponents, got {e}"
            )));
        }
        Ok(())
    }

    fn compatible(&self, other: &Self) -> Result<()> {
        if self.params != other.params {
            return Err(Error::ParameterMismatch(
                "basis parameters differ".into(),
            ));
        }
        if self.mode != other.mode {
            return Err(Error::ParameterMismatch(format!(
                "numeric modes differ ({} vs {})",
                self.mode, other.mode
            )));
        }
        Ok(())
    }

    fn normalize(&mut self) {
        self.terms.retain(|_, c| !c.is_negligible());
    }

    pub fn params(&self) -> &BasisParams {
        &self.params
    }

    pub fn mode(&self) -> NumericMode {
        self.mode
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn min_exponent(&self) -> Option<Exponent> {
        self.terms.keys().next().copied()
    }

    pub fn max_exponent(&self) -> Option<Exponent> {
        self.terms.keys().next_back().copied()
    }

    pub fn coeff(&self, e: Exponent) -> Option<&Coeff> {
        self.terms.get(&e)
    }

    pub fn terms(&self) -> impl Iterator<Item = (Exponent, &Coeff)> {
        self.terms.iter().map(|(e, c)| (*e, c))
    }

    /// Convert coefficients to another numeric mode. Exact -> Approx rounds
    /// once per coefficient; Approx -> Exact takes the exact binary value.
    pub fn with_mode(&self, mode: NumericMode) -> Result<Self> {
        let terms = self.terms.iter().map(|(e, c)| {
            let converted = match (c, mode) {
                (Coeff::Exact(r), _) => Coeff::from_rational(r, mode),
                (Coeff::Approx(f), NumericMode::Approx(p)) => {
                    Coeff::Approx(Real::with_val(p, f))
                }
                (Coeff::Approx(f), NumericMode::Exact) => {
                    let r = f.to_rational().expect("finite float");
                    Coeff::Exact(r)
                }
            };
            (*e, converted)
        });
        Self::from_terms(self.params.clone(), mode, terms.collect::<Vec<_>>())
    }

    /// Termwise sum. Cancellation removes terms.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.compatible(other)?;
        let mut out = self.clone();
        for (e, c) in &other.terms {
            accumulate(&mut out.terms, *e, c.clone());
        }
        out.normalize();
        Ok(out)
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c = c.neg();
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    /// Full convolution: exponents add, coefficients multiply-accumulate.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.compatible(other)?;
        let mut out = Self::zero(self.params.clone(), self.mode);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                accumulate(&mut out.terms, ea + eb, ca.mul(cb));
            }
        }
        out.normalize();
        Ok(out)
    }

    /// Multiply by an exact rational factor.
    pub fn scale(&self, factor: &Rational) -> Self {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c = c.scale(factor);
        }
        out.normalize();
        out
    }

    /// Multiply by x, using x = (t - alpha)/beta:
    /// c*t^(-e) -> (c/beta)*t^(-(e-1)) - (c*alpha/beta)*t^(-e).
    /// Every exponent must be >= 1 so the result stays in the decaying basis.
    pub fn mul_by_x(&self) -> Result<Self> {
        let one = Exponent::from_integer(1);
        if let Some((e, _)) = self.terms.iter().next() {
            if *e < one {
                return Err(Error::BasisEscape { exponent: *e });
            }
        }
        let inv_beta = self.params.beta.clone().recip();
        let alpha_over_beta = Rational::from(&self.params.alpha * &inv_beta);
        let mut out = Self::zero(self.params.clone(), self.mode);
        for (e, c) in &self.terms {
            accumulate(&mut out.terms, e - one, c.scale(&inv_beta));
            accumulate(&mut out.terms, *e, c.scale(&alpha_over_beta).neg());
        }
        out.normalize();
        Ok(out)
    }

    /// Termwise second derivative in x:
    /// c*t^(-e) -> c*e*(e+1)*beta^2 * t^(-(e+2)).
    pub fn d2(&self) -> Self {
        let beta_sq = Rational::from(&self.params.beta * &self.params.beta);
        let two = Exponent::from_integer(2);
        let mut out = Self::zero(self.params.clone(), self.mode);
        for (e, c) in &self.terms {
            let er = exponent_to_rational(*e);
            let factor = Rational::from(&er * &beta_sq) * (er + 1u32);
            if factor == 0 {
                continue;
            }
            accumulate(&mut out.terms, e + two, c.scale(&factor));
        }
        out.normalize();
        out
    }

    /// Evaluate at x >= 0 in floating point. The result precision is taken
    /// from `x`; exact coefficients are converted (correctly rounded) first.
    pub fn eval(&self, x: &Real) -> Result<Real> {
        if x.is_sign_negative() && !x.is_zero() {
            return Err(Error::Domain(format!("evaluation at negative x = {x}")));
        }
        let prec = x.prec();
        let t = Real::with_val(prec, &self.params.alpha)
            + Real::with_val(prec, &self.params.beta) * x;
        let mut acc = Real::with_val(prec, 0);
        for (e, c) in &self.terms {
            let power = real_power(&t, -e, prec);
            acc += c.to_real(prec) * power;
        }
        Ok(acc)
    }

    /// Value at a rational point, staying exact in Exact mode.
    pub fn value_at_rational(&self, x: &Rational) -> Result<Coeff> {
        if *x < 0 {
            return Err(Error::Domain(format!("evaluation at negative x = {x}")));
        }
        let t = Rational::from(&self.params.beta * x) + &self.params.alpha;
        let mut acc = Coeff::zero(self.mode);
        for (e, c) in &self.terms {
            let power = rational_pow(&t, &-e, self.mode);
            acc.add_assign(&c.mul(&power));
        }
        Ok(acc)
    }

    /// Value at x = 0 (exact in Exact mode).
    pub fn value_at_zero(&self) -> Coeff {
        self.value_at_rational(&Rational::new())
            .expect("x = 0 is in the domain")
    }

    /// First or second derivative at x = 0, termwise:
    /// order 1: sum of -c*e*beta * alpha^(-e-1),
    /// order 2: sum of  c*e*(e+1)*beta^2 * alpha^(-e-2).
    /// Exact in Exact mode.
    pub fn deriv_at_zero(&self, order: DerivOrder) -> Coeff {
        let mut acc = Coeff::zero(self.mode);
        let alpha = &self.params.alpha;
        let beta = &self.params.beta;
        for (e, c) in &self.terms {
            let er = exponent_to_rational(*e);
            let one = Exponent::from_integer(1);
            let term = match order {
                DerivOrder::First => {
                    let factor = -Rational::from(&er * beta);
                    let power = rational_pow(alpha, &(-e - one), self.mode);
                    c.scale(&factor).mul(&power)
                }
                DerivOrder::Second => {
                    let ep1 = er.clone() + 1u32;
                    let factor = Rational::from(&er * &ep1) * Rational::from(beta * beta);
                    let power = rational_pow(alpha, &(-e - one - one), self.mode);
                    c.scale(&factor).mul(&power)
                }
            };
            acc.add_assign(&term);
        }
        acc
    }

    /// JSON form used by the CLI: parameters as exact-fraction strings and
    /// terms as exponent/coefficient string pairs (fractions in Exact mode,
    /// full-precision decimals in Approx mode).
    pub fn to_json(&self) -> Value {
        let terms: Vec<Value> = self
            .terms
            .iter()
            .map(|(e, c)| json!({"e": e.to_string(), "c": c.decimal_string()}))
            .collect();
        json!({
            "alpha": self.params.alpha.to_string(),
            "beta": self.params.beta.to_string(),
            "gamma": self.params.gamma.to_string(),
            "terms": terms,
        })
    }

    pub fn from_json(value: &Value, mode: NumericMode) -> Result<Self> {
        let field = |name: &str| -> Result<&str> {
            value
                .get(name)
                .and_then(Value::as_str)
                .ok_or_else(|| Error::Parse(format!("missing field {name:?}")))
        };
        let params = BasisParams::new(
            parse_rational(field("alpha")?)?,
            parse_rational(field("beta")?)?,
            parse_rational(field("gamma")?)?,
        )?;
        let terms = value
            .get("terms")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Parse("missing terms array".into()))?;
        let mut pairs = Vec::with_capacity(terms.len());
        for t in terms {
            let e_str = t
                .get("e")
                .and_then(Value::as_str)
                .ok_or_else(|| Error::Parse("term without exponent".into()))?;
            let c_str = t
                .get("c")
                .and_then(Value::as_str)
                .ok_or_else(|| Error::Parse("term without coefficient".into()))?;
            let e_rat = parse_rational(e_str)?;
            let e = Exponent::new(
                e_rat.numer().to_i64().ok_or_else(|| Error::Parse(e_str.into()))?,
                e_rat.denom().to_i64().ok_or_else(|| Error::Parse(e_str.into()))?,
            );
            let c = match mode {
                NumericMode::Exact => Coeff::Exact(parse_rational(c_str)?),
                NumericMode::Approx(p) => match parse_rational(c_str) {
                    Ok(r) => Coeff::from_rational(&r, mode),
                    Err(_) => Coeff::Approx(parse_real(c_str, p)?),
                },
            };
            pairs.push((e, c));
        }
        Self::from_terms(params, mode, pairs)
    }
}

/// `t^e` at the given precision for a rational lattice exponent `e`.
fn real_power(t: &Real, e: Exponent, prec: u32) -> Real {
    if e.is_integer() {
        let n = i32::try_from(*e.numer()).expect("exponent magnitude out of range");
        Real::with_val(prec, t.pow(n))
    } else {
        let ef = Real::with_val(prec, Rational::from((*e.numer(), *e.denom())));
        Real::with_val(prec, t.pow(&ef))
    }
}

fn accumulate(map: &mut BTreeMap<Exponent, Coeff>, e: Exponent, c: Coeff) {
    match map.entry(e) {
        std::collections::btree_map::Entry::Vacant(slot) => {
            slot.insert(c);
        }
        std::collections::btree_map::Entry::Occupied(mut slot) => {
            slot.get_mut().add_assign(&c);
        }
    }
}

impl fmt::Display for BasisSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if *e == Exponent::from_integer(0) {
                write!(f, "{c}")?;
            } else {
                write!(f, "{c}*t^-{e}")?;
            }
        }
        Ok(())
    }
}
