//! Polynomials in `x1`, `x2` with literal coefficients, degree at most 4.
//!
//! Grammar: sums and differences of products of numbers, variables and
//! parenthesized polynomials, with non-negative integer powers `^n`.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

pub const MAX_DEGREE: u32 = 4;

#[derive(Debug, Error, PartialEq)]
pub enum ExprError {
    #[error("unexpected character '{ch}' at column {col}")]
    Unexpected { ch: char, col: usize },
    #[error("unexpected end of expression")]
    Eof,
    #[error("bad number '{0}'")]
    Number(String),
    #[error("unknown variable '{0}' (expected x1 or x2)")]
    Variable(String),
    #[error("degree {0} exceeds the maximum of {MAX_DEGREE}")]
    Degree(u32),
    #[error("trailing input at column {0}")]
    Trailing(usize),
}

/// Coefficients keyed by the exponent pair `(p, q)` of `x1^p x2^q`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Polynomial {
    terms: BTreeMap<(u32, u32), f64>,
}

impl Polynomial {
    pub fn constant(c: f64) -> Self {
        let mut p = Polynomial::default();
        p.add_term((0, 0), c);
        p
    }

    fn var(which: usize) -> Self {
        let mut p = Polynomial::default();
        p.add_term(if which == 1 { (1, 0) } else { (0, 1) }, 1.0);
        p
    }

    fn add_term(&mut self, e: (u32, u32), c: f64) {
        let slot = self.terms.entry(e).or_insert(0.0);
        *slot += c;
        if *slot == 0.0 {
            self.terms.remove(&e);
        }
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|(p, q)| p + q).max().unwrap_or(0)
    }

    /// The value if the polynomial has no variable terms.
    pub fn as_constant(&self) -> Option<f64> {
        match self.terms.len() {
            0 => Some(0.0),
            1 => self.terms.get(&(0, 0)).copied(),
            _ => None,
        }
    }

    pub fn eval(&self, x: [f64; 2]) -> f64 {
        self.terms
            .iter()
            .map(|(&(p, q), c)| c * x[0].powi(p as i32) * x[1].powi(q as i32))
            .sum()
    }

    fn add(mut self, other: &Polynomial, sign: f64) -> Self {
        for (&e, &c) in &other.terms {
            self.add_term(e, sign * c);
        }
        self
    }

    fn mul(&self, other: &Polynomial) -> Result<Self, ExprError> {
        let mut out = Polynomial::default();
        for (&(p1, q1), &c1) in &self.terms {
            for (&(p2, q2), &c2) in &other.terms {
                let e = (p1 + p2, q1 + q2);
                if e.0 + e.1 > MAX_DEGREE {
                    return Err(ExprError::Degree(e.0 + e.1));
                }
                out.add_term(e, c1 * c2);
            }
        }
        Ok(out)
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (&(p, q), c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{c}")?;
            for (name, k) in [("x1", p), ("x2", q)] {
                match k {
                    0 => {}
                    1 => write!(f, "*{name}")?,
                    _ => write!(f, "*{name}^{k}")?,
                }
            }
        }
        Ok(())
    }
}

pub fn parse(src: &str) -> Result<Polynomial, ExprError> {
    let mut p = Parser {
        chars: src.chars().collect(),
        pos: 0,
    };
    let out = p.sum()?;
    p.skip_ws();
    if p.pos < p.chars.len() {
        return Err(ExprError::Trailing(p.pos + 1));
    }
    Ok(out)
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

    fn sum(&mut self) -> Result<Polynomial, ExprError> {
        let mut acc = match self.peek() {
            Some('-') => {
                self.pos += 1;
                Polynomial::default().add(&self.product()?, -1.0)
            }
            Some('+') => {
                self.pos += 1;
                self.product()?
            }
            _ => self.product()?,
        };
        while let Some(c @ ('+' | '-')) = self.peek() {
            self.pos += 1;
            let rhs = self.product()?;
            acc = acc.add(&rhs, if c == '+' { 1.0 } else { -1.0 });
        }
        Ok(acc)
    }

    fn product(&mut self) -> Result<Polynomial, ExprError> {
        let mut acc = self.power()?;
        while self.peek() == Some('*') {
            self.pos += 1;
            acc = acc.mul(&self.power()?)?;
        }
        Ok(acc)
    }

    fn power(&mut self) -> Result<Polynomial, ExprError> {
        let base = self.atom()?;
        if self.peek() != Some('^') {
            return Ok(base);
        }
        self.pos += 1;
        self.skip_ws();
        let start = self.pos;
        while self.chars.get(self.pos).is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        let n: u32 = text.parse().map_err(|_| match self.chars.get(start) {
            Some(&ch) => ExprError::Unexpected { ch, col: start + 1 },
            None => ExprError::Eof,
        })?;
        if n.saturating_mul(base.degree()) > MAX_DEGREE {
            return Err(ExprError::Degree(n.saturating_mul(base.degree())));
        }
        let mut out = Polynomial::constant(1.0);
        for _ in 0..n {
            out = out.mul(&base)?;
        }
        Ok(out)
    }

    fn atom(&mut self) -> Result<Polynomial, ExprError> {
        let Some(c) = self.peek() else {
            return Err(ExprError::Eof);
        };
        if c == '(' {
            self.pos += 1;
            let inner = self.sum()?;
            return match self.peek() {
                Some(')') => {
                    self.pos += 1;
                    Ok(inner)
                }
                Some(ch) => Err(ExprError::Unexpected { ch, col: self.pos + 1 }),
                None => Err(ExprError::Eof),
            };
        }
        if c.is_ascii_digit() || c == '.' {
            let start = self.pos;
            while let Some(&d) = self.chars.get(self.pos) {
                let exp_sign = (d == '+' || d == '-')
                    && matches!(self.chars.get(self.pos.wrapping_sub(1)), Some('e' | 'E'));
                if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exp_sign {
                    self.pos += 1;
                } else {
                    break;
                }
            }
            let text: String = self.chars[start..self.pos].iter().collect();
            return text
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(Polynomial::constant)
                .ok_or(ExprError::Number(text));
        }
        if c.is_ascii_alphabetic() {
            let start = self.pos;
            while self.chars.get(self.pos).is_some_and(|c| c.is_ascii_alphanumeric()) {
                self.pos += 1;
            }
            let name: String = self.chars[start..self.pos].iter().collect();
            return match name.as_str() {
                "x1" => Ok(Polynomial::var(1)),
                "x2" => Ok(Polynomial::var(2)),
                _ => Err(ExprError::Variable(name)),
            };
        }
        Err(ExprError::Unexpected { ch: c, col: self.pos + 1 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_and_precedence() {
        assert_eq!(parse("0.05").unwrap().as_constant(), Some(0.05));
        assert_eq!(parse("1 + 2*3").unwrap().as_constant(), Some(7.0));
        assert_eq!(parse("-2^2").unwrap().as_constant(), Some(-4.0));
        assert_eq!(parse("1e-2").unwrap().as_constant(), Some(0.01));
    }

    #[test]
    fn expands_products() {
        let p = parse("(x1 + x2)^2 - 2*x1*x2").unwrap();
        let q = parse("x1^2 + x2^2").unwrap();
        assert_eq!(p, q);
        assert!((p.eval([0.3, -0.4]) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn degree_cap() {
        assert!(parse("x1^4").is_ok());
        assert_eq!(parse("x1^5"), Err(ExprError::Degree(5)));
        assert_eq!(parse("x1^2 * x2^3"), Err(ExprError::Degree(5)));
        // Cancellation does not lower the degree of a product.
        assert!(parse("(x1^3 + 1) * (x2^2)").is_err());
    }

    #[test]
    fn diagnostics() {
        assert_eq!(parse("1 + y"), Err(ExprError::Variable("y".into())));
        assert_eq!(parse("1 +"), Err(ExprError::Eof));
        assert_eq!(parse("(1 + x1"), Err(ExprError::Eof));
        assert_eq!(parse("2 3"), Err(ExprError::Trailing(3)));
        assert_eq!(parse("1 $ 2"), Err(ExprError::Trailing(3)));
    }
}
