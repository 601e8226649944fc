//! Recursive-descent parser for the polynomial input grammar:
//!
//! ```text
//! expr     := term (('+'|'-') term)*
//! term     := factor ('*' factor)*
//! factor   := base ('^' nat)?
//! base     := var | rational | '(' expr ')' | '-' factor
//! var      := 'x' | 'y' | 'z' | 't' | 's'
//! rational := int ('/' nat)?
//! ```
//!
//! Whitespace is insignificant and implicit multiplication is rejected.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use thiserror::Error;

use super::{Expr, Monomial, Var, MAX_EXPONENT, S_SLOT};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at column {column}: {message}")]
    Syntax { column: usize, message: String },
    #[error("overflow at column {column}: {message}")]
    Overflow { column: usize, message: String },
}

impl ParseError {
    pub fn column(&self) -> usize {
        match self {
            ParseError::Syntax { column, .. } | ParseError::Overflow { column, .. } => *column,
        }
    }
}

/// Parses `text` into a canonical [`Expr`].
pub fn parse(text: &str) -> Result<Expr, ParseError> {
    let mut p = Parser {
        chars: text.chars().collect(),
        pos: 0,
    };
    let e = p.expr()?;
    p.skip_ws();
    if let Some(c) = p.peek() {
        return Err(p.syntax(format!("unexpected '{c}'")));
    }
    Ok(e)
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
}

impl Parser {
    fn skip_ws(&mut self) {
        while self.chars.get(self.pos).is_some_and(|c| c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn column(&self) -> usize {
        self.pos + 1
    }

    fn syntax(&self, message: impl Into<String>) -> ParseError {
        ParseError::Syntax {
            column: self.column(),
            message: message.into(),
        }
    }

    fn expect_more(&mut self, what: &str) -> Result<char, ParseError> {
        self.peek()
            .ok_or_else(|| self.syntax(format!("unexpected end of input, expected {what}")))
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.term()?;
        while let Some(c @ ('+' | '-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            if c == '+' {
                acc += &rhs;
            } else {
                acc -= &rhs;
            }
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.factor()?;
        while let Some('*') = self.peek() {
            self.pos += 1;
            let start = self.column();
            let rhs = self.factor()?;
            acc = &acc * &rhs;
            check_exponents(&acc, start)?;
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        let start = {
            self.skip_ws();
            self.column()
        };
        let base = self.base()?;
        if let Some('^') = self.peek() {
            self.pos += 1;
            self.skip_ws();
            let exp_col = self.column();
            let n = self.nat()?;
            if n > BigInt::from(MAX_EXPONENT) {
                return Err(ParseError::Overflow {
                    column: exp_col,
                    message: format!("exponent {n} exceeds {MAX_EXPONENT}"),
                });
            }
            let n = u32::try_from(&n).expect("bounded by MAX_EXPONENT");
            if base.max_exponent().saturating_mul(n) > MAX_EXPONENT {
                return Err(ParseError::Overflow {
                    column: start,
                    message: format!("power produces an exponent above {MAX_EXPONENT}"),
                });
            }
            return Ok(base.pow(n));
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<Expr, ParseError> {
        let c = self.expect_more("a variable, number, '(' or '-'")?;
        match c {
            'x' | 'y' | 'z' | 't' => {
                self.pos += 1;
                let v = match c {
                    'x' => Var::X,
                    'y' => Var::Y,
                    'z' => Var::Z,
                    _ => Var::T,
                };
                self.reject_implicit()?;
                Ok(Expr::var(v))
            }
            's' => {
                self.pos += 1;
                self.reject_implicit()?;
                let mut e = [0; 5];
                e[S_SLOT] = 1;
                Ok(Expr::term(Monomial(e), BigRational::from_integer(1.into())))
            }
            '0'..='9' => {
                let r = self.rational()?;
                self.reject_implicit()?;
                Ok(Expr::constant(r))
            }
            '(' => {
                self.pos += 1;
                let inner = self.expr()?;
                match self.peek() {
                    Some(')') => {
                        self.pos += 1;
                        self.reject_implicit()?;
                        Ok(inner)
                    }
                    Some(other) => Err(self.syntax(format!("expected ')', found '{other}'"))),
                    None => Err(self.syntax("unexpected end of input, expected ')'")),
                }
            }
            '-' => {
                self.pos += 1;
                Ok(-self.factor()?)
            }
            other => Err(self.syntax(format!("unexpected '{other}'"))),
        }
    }

    /// A variable, literal or closing parenthesis directly followed by another
    /// operand means the input relied on implicit multiplication.
    fn reject_implicit(&mut self) -> Result<(), ParseError> {
        let save = self.pos;
        match self.peek() {
            Some(c) if c.is_ascii_alphanumeric() || c == '(' => {
                Err(self.syntax(format!("unexpected '{c}' (use '*' for multiplication)")))
            }
            _ => {
                self.pos = save;
                Ok(())
            }
        }
    }

    fn digits(&mut self) -> Result<BigInt, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.chars.get(self.pos).is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(match self.chars.get(self.pos) {
                Some(c) => self.syntax(format!("expected a number, found '{c}'")),
                None => self.syntax("unexpected end of input, expected a number"),
            });
        }
        let s: String = self.chars[start..self.pos].iter().collect();
        Ok(s.parse().expect("ascii digits"))
    }

    fn nat(&mut self) -> Result<BigInt, ParseError> {
        self.digits()
    }

    fn rational(&mut self) -> Result<BigRational, ParseError> {
        let num = self.digits()?;
        if let Some('/') = self.peek() {
            self.pos += 1;
            self.skip_ws();
            let den_col = self.column();
            let den = self.nat()?;
            if den.is_zero() {
                return Err(ParseError::Syntax {
                    column: den_col,
                    message: "zero denominator".into(),
                });
            }
            return Ok(BigRational::new(num, den));
        }
        Ok(BigRational::from_integer(num))
    }
}

fn check_exponents(e: &Expr, column: usize) -> Result<(), ParseError> {
    if e.max_exponent() > MAX_EXPONENT {
        return Err(ParseError::Overflow {
            column,
            message: format!("product produces an exponent above {MAX_EXPONENT}"),
        });
    }
    Ok(())
}
