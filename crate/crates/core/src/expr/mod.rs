//! Exact sparse polynomials in the chart coordinates `x, y, z, t` and the
//! move parameter `s`, with rational coefficients.
//!
//! Every scalar the toolkit manipulates symbolically (Casimirs, bivector
//! components, Hamiltonians, conformal factors) is an [`Expr`]. Because the
//! representation is canonical, "is this polynomial zero" is an exact test,
//! which is what makes the Jacobi identity decidable here.

mod parse;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::point::Point4;

pub use parse::{parse, ParseError};

/// Largest exponent accepted for any single variable.
pub const MAX_EXPONENT: u32 = 64;

/// Slot of the parameter `s` in an exponent vector.
pub(crate) const S_SLOT: usize = 4;

const SYMBOLS: [char; 5] = ['x', 'y', 'z', 't', 's'];

/// A differentiation variable. The parameter `s` is deliberately absent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    X,
    Y,
    Z,
    T,
}

impl Var {
    pub const ALL: [Var; 4] = [Var::X, Var::Y, Var::Z, Var::T];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Var> {
        Self::ALL.get(i).copied()
    }

    pub fn symbol(self) -> char {
        SYMBOLS[self.index()]
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

/// Exponent vector `(e_x, e_y, e_z, e_t, e_s)`.
///
/// Ordered graded-lexicographically with `x > y > z > t > s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Monomial(pub [u32; 5]);

impl Monomial {
    pub const ONE: Monomial = Monomial([0; 5]);

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    /// Degree in the coordinates only, ignoring `s`.
    pub fn coordinate_degree(&self) -> u32 {
        self.0[..S_SLOT].iter().sum()
    }

    pub fn exponent(&self, v: Var) -> u32 {
        self.0[v.index()]
    }

    pub fn s_exponent(&self) -> u32 {
        self.0[S_SLOT]
    }

    pub fn is_one(&self) -> bool {
        self.0 == [0; 5]
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        let mut e = self.0;
        for (a, b) in e.iter_mut().zip(other.0.iter()) {
            *a += *b;
        }
        Monomial(e)
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (sym, &e) in SYMBOLS.iter().zip(self.0.iter()) {
            if e == 0 {
                continue;
            }
            if !first {
                f.write_str("*")?;
            }
            first = false;
            if e == 1 {
                write!(f, "{sym}")?;
            } else {
                write!(f, "{sym}^{e}")?;
            }
        }
        if first {
            f.write_str("1")?;
        }
        Ok(())
    }
}

/// Exact polynomial in `x, y, z, t, s` over the rationals, kept in canonical
/// form: no zero coefficients, one entry per exponent vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Expr {
    terms: BTreeMap<Monomial, BigRational>,
}

impl Expr {
    pub fn zero() -> Expr {
        Expr::default()
    }

    pub fn one() -> Expr {
        Expr::constant(BigRational::one())
    }

    pub fn constant(c: BigRational) -> Expr {
        Expr::term(Monomial::ONE, c)
    }

    pub fn int(n: i64) -> Expr {
        Expr::constant(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn rational(num: i64, den: i64) -> Expr {
        Expr::constant(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn var(v: Var) -> Expr {
        let mut e = [0; 5];
        e[v.index()] = 1;
        Expr::term(Monomial(e), BigRational::one())
    }

    /// The move parameter `s`.
    pub fn s() -> Expr {
        let mut e = [0; 5];
        e[S_SLOT] = 1;
        Expr::term(Monomial(e), BigRational::one())
    }

    pub fn term(m: Monomial, c: BigRational) -> Expr {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        Expr { terms }
    }

    /// Builds a polynomial from arbitrary (possibly repeated or zero) terms.
    pub fn from_terms<I>(iter: I) -> Expr
    where
        I: IntoIterator<Item = (Monomial, BigRational)>,
    {
        let mut out = Expr::zero();
        for (m, c) in iter {
            out.add_term(m, c);
        }
        out
    }

    fn add_term(&mut self, m: Monomial, c: BigRational) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(existing) => {
                *existing += c;
                if existing.is_zero() {
                    self.terms.remove(&m);
                }
            }
            None => {
                self.terms.insert(m, c);
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms in descending graded-lex order (the printing order).
    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter().rev()
    }

    pub fn coefficient(&self, m: &Monomial) -> BigRational {
        self.terms.get(m).cloned().unwrap_or_else(BigRational::zero)
    }

    /// Total degree; the zero polynomial has degree 0.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn max_exponent(&self) -> u32 {
        self.terms
            .keys()
            .flat_map(|m| m.0.iter().copied())
            .max()
            .unwrap_or(0)
    }

    /// Rational value if the polynomial is a constant.
    pub fn as_constant(&self) -> Option<BigRational> {
        match self.terms.len() {
            0 => Some(BigRational::zero()),
            1 => self.terms.get(&Monomial::ONE).cloned(),
            _ => None,
        }
    }

    /// True when no term involves a coordinate (the polynomial may still
    /// depend on `s`).
    pub fn is_coordinate_free(&self) -> bool {
        self.terms.keys().all(|m| m.coordinate_degree() == 0)
    }

    pub fn depends_on_s(&self) -> bool {
        self.terms.keys().any(|m| m.s_exponent() > 0)
    }

    /// Re-establishes the canonical form. Values built through the public
    /// API are already canonical, so this is the identity on them.
    pub fn normalize(&self) -> Expr {
        Expr::from_terms(self.terms.iter().map(|(m, c)| (*m, c.clone())))
    }

    pub fn scale(&self, c: &BigRational) -> Expr {
        if c.is_zero() {
            return Expr::zero();
        }
        Expr {
            terms: self.terms.iter().map(|(m, a)| (*m, a * c)).collect(),
        }
    }

    pub fn pow(&self, n: u32) -> Expr {
        let mut result = Expr::one();
        let mut base = self.clone();
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                result = &result * &base;
            }
            n >>= 1;
            if n > 0 {
                base = &base * &base;
            }
        }
        result
    }

    /// Exact partial derivative with respect to a coordinate.
    pub fn differentiate(&self, v: Var) -> Expr {
        let i = v.index();
        Expr::from_terms(self.terms.iter().filter(|(m, _)| m.0[i] > 0).map(|(m, c)| {
            let mut e = m.0;
            let k = e[i];
            e[i] -= 1;
            (Monomial(e), c * BigRational::from_integer(BigInt::from(k)))
        }))
    }

    /// Replaces the parameter `s` by an exact value.
    pub fn substitute_s(&self, value: &BigRational) -> Expr {
        Expr::from_terms(self.terms.iter().map(|(m, c)| {
            let mut e = m.0;
            let k = e[S_SLOT];
            e[S_SLOT] = 0;
            (Monomial(e), c * pow_rational(value, k))
        }))
    }

    /// Double-precision value at `p`, summing terms in descending graded-lex
    /// order.
    pub fn evaluate(&self, p: &Point4) -> f64 {
        let vals = p.values();
        self.terms()
            .map(|(m, c)| rational_to_f64(c) * monomial_value(m, &vals))
            .sum()
    }

    /// Pre-converts coefficients to `f64` for repeated numeric evaluation.
    pub fn compile(&self) -> CompiledExpr {
        CompiledExpr {
            terms: self
                .terms()
                .map(|(m, c)| (*m, rational_to_f64(c)))
                .collect(),
        }
    }

    /// Exact equality of the denoted polynomials.
    pub fn equals(&self, other: &Expr) -> bool {
        (self - other).is_zero()
    }
}

fn pow_rational(value: &BigRational, k: u32) -> BigRational {
    let mut out = BigRational::one();
    for _ in 0..k {
        out *= value;
    }
    out
}

pub(crate) fn rational_to_f64(c: &BigRational) -> f64 {
    c.to_f64().unwrap_or_else(|| {
        // numerator or denominator beyond f64 range; fall back to a ratio of
        // scaled magnitudes
        let n = c.numer().to_f64().unwrap_or(f64::INFINITY);
        let d = c.denom().to_f64().unwrap_or(f64::INFINITY);
        n / d
    })
}

fn monomial_value(m: &Monomial, vals: &[f64; 5]) -> f64 {
    m.0.iter()
        .zip(vals.iter())
        .filter(|(e, _)| **e > 0)
        .map(|(&e, &v)| v.powi(e as i32))
        .product()
}

/// Float image of an [`Expr`] for hot numeric loops.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledExpr {
    terms: Vec<(Monomial, f64)>,
}

impl CompiledExpr {
    pub fn evaluate(&self, p: &Point4) -> f64 {
        let vals = p.values();
        self.terms
            .iter()
            .map(|(m, c)| c * monomial_value(m, &vals))
            .sum()
    }
}

/// Differentiates `e` with respect to `v`.
pub fn differentiate(e: &Expr, v: Var) -> Expr {
    e.differentiate(v)
}

/// Evaluates `e` at `p`.
pub fn evaluate(e: &Expr, p: &Point4) -> f64 {
    e.evaluate(p)
}

/// Exact polynomial equality.
pub fn equals(a: &Expr, b: &Expr) -> bool {
    a.equals(b)
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        for (i, (m, c)) in self.terms().enumerate() {
            let negative = c.is_negative();
            match (i, negative) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            let mag = c.abs();
            if m.is_one() {
                write_rational(f, &mag)?;
            } else if mag.is_one() {
                write!(f, "{m}")?;
            } else {
                write_rational(f, &mag)?;
                write!(f, "*{m}")?;
            }
        }
        Ok(())
    }
}

fn write_rational(f: &mut fmt::Formatter<'_>, c: &BigRational) -> fmt::Result {
    if c.is_integer() {
        write!(f, "{}", c.numer())
    } else {
        write!(f, "{}/{}", c.numer(), c.denom())
    }
}

impl FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

impl From<Var> for Expr {
    fn from(v: Var) -> Expr {
        Expr::var(v)
    }
}

impl From<i64> for Expr {
    fn from(n: i64) -> Expr {
        Expr::int(n)
    }
}

impl<'a> Add<&'a Expr> for &'a Expr {
    type Output = Expr;

    fn add(self, rhs: &'a Expr) -> Expr {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl<'a> Sub<&'a Expr> for &'a Expr {
    type Output = Expr;

    fn sub(self, rhs: &'a Expr) -> Expr {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl<'a> Mul<&'a Expr> for &'a Expr {
    type Output = Expr;

    fn mul(self, rhs: &'a Expr) -> Expr {
        let mut out = Expr::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }
}

impl Neg for &Expr {
    type Output = Expr;

    fn neg(self) -> Expr {
        Expr {
            terms: self.terms.iter().map(|(m, c)| (*m, -c)).collect(),
        }
    }
}

impl AddAssign<&Expr> for Expr {
    fn add_assign(&mut self, rhs: &Expr) {
        for (m, c) in &rhs.terms {
            self.add_term(*m, c.clone());
        }
    }
}

impl SubAssign<&Expr> for Expr {
    fn sub_assign(&mut self, rhs: &Expr) {
        for (m, c) in &rhs.terms {
            self.add_term(*m, -c);
        }
    }
}

macro_rules! forward_owned_binop {
    ($tr:ident, $method:ident) => {
        impl $tr<Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                (&self).$method(&rhs)
            }
        }
        impl<'a> $tr<&'a Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: &'a Expr) -> Expr {
                (&self).$method(rhs)
            }
        }
        impl<'a> $tr<Expr> for &'a Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                self.$method(&rhs)
            }
        }
    };
}

forward_owned_binop!(Add, add);
forward_owned_binop!(Sub, sub);
forward_owned_binop!(Mul, mul);

impl Neg for Expr {
    type Output = Expr;

    fn neg(self) -> Expr {
        -&self
    }
}

impl std::iter::Sum for Expr {
    fn sum<I: Iterator<Item = Expr>>(iter: I) -> Expr {
        let mut out = Expr::zero();
        for e in iter {
            out += &e;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Expr {
        s.parse().unwrap()
    }

    #[test]
    fn cusp_casimir_has_four_terms() {
        let e = p("x^3 - 3*x*t + y^2 - z^2");
        assert_eq!(e.len(), 4);
        assert_eq!(e.to_string(), "x^3 - 3*x*t + y^2 - z^2");
    }

    #[test]
    fn zero_is_empty() {
        assert!(p("0").is_empty());
        assert_eq!(Expr::zero().to_string(), "0");
    }

    #[test]
    fn scalar_distributes_over_sum() {
        let e = p("2*(t*x + y*z)");
        assert_eq!(e.len(), 2);
        assert!(e.equals(&p("2*x*t + 2*y*z")));
    }

    #[test]
    fn derivatives_of_move_casimirs() {
        let cusp = p("x^3 - 3*x*t + y^2 - z^2");
        assert!(cusp.differentiate(Var::X).equals(&p("3*x^2 - 3*t")));
        assert!(p("7/2").differentiate(Var::T).is_zero());
        let flip = p("x^4 - x^2*s + x*t + y^2 - z^2");
        assert!(flip.differentiate(Var::X).equals(&p("4*x^3 - 2*x*s + t")));
    }

    #[test]
    fn s_is_never_a_differentiation_variable() {
        let e = p("s^2*x + s");
        assert!(e.differentiate(Var::X).equals(&p("s^2")));
        for v in Var::ALL {
            assert_ne!(v.symbol(), 's');
        }
    }

    #[test]
    fn evaluation_examples() {
        let on_arc = Point4::new(1.0, 0.0, 0.0, 1.0);
        assert_eq!(p("3*t - 3*x^2").evaluate(&on_arc), 0.0);
        assert_eq!(p("7/2").evaluate(&Point4::new(0.3, -1.0, 2.0, 9.0)), 3.5);
        assert_eq!(p("2*z").evaluate(&Point4::new(0.0, 1.0, 1.0, 1.0)), 2.0);
        let with_s = Point4::new(1.0, 0.0, 0.0, 0.0).with_s(2.0);
        assert_eq!(p("x*s^2").evaluate(&with_s), 4.0);
    }

    #[test]
    fn equality_examples() {
        assert!(
            p("x^3 - 3*x*(t^2 - s) + y^2 - z^2").equals(&p("x^3 - 3*x*t^2 + 3*x*s + y^2 - z^2"))
        );
        assert!(p("3*(t - x^2)").equals(&p("3*t - 3*x^2")));
        assert!(!p("2*y").equals(&p("2*z")));
    }

    #[test]
    fn printing_order_is_graded_lex() {
        let e = p("s + t + z + y + x + x*s + x^2 + 1");
        assert_eq!(e.to_string(), "x^2 + x*s + x + y + z + t + s + 1");
    }

    #[test]
    fn rational_coefficients_print_and_reparse() {
        let e = p("-3/2*x^2*y + 1/3 - y");
        assert_eq!(e.to_string(), "-3/2*x^2*y - y + 1/3");
        assert_eq!(p(&e.to_string()), e);
    }

    #[test]
    fn substitute_parameter() {
        let birth = p("x^3 - 3*x*(t^2 - s) + y^2 - z^2");
        let at_zero = birth.substitute_s(&BigRational::zero());
        assert!(at_zero.equals(&p("x^3 - 3*x*t^2 + y^2 - z^2")));
        assert!(!at_zero.depends_on_s());
    }

    #[test]
    fn normalize_is_identity_on_canonical_values() {
        let e = p("(x + y)^3 - x^3");
        assert_eq!(e.normalize(), e);
    }

    #[test]
    fn compiled_matches_exact_evaluation() {
        let e = p("x^4 - x^2*s + x*t + y^2 - z^2");
        let q = Point4::new(0.5, -1.25, 2.0, 0.75).with_s(-1.0);
        assert_eq!(e.compile().evaluate(&q), e.evaluate(&q));
    }

    #[test]
    fn pow_matches_repeated_product() {
        let e = p("x - 2*t + 1/2");
        assert_eq!(e.pow(3), &(&e * &e) * &e);
        assert_eq!(e.pow(0), Expr::one());
    }
}
