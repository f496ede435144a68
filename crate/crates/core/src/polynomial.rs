//! Real polynomials in `x = ℜz`, `y = ℑz`, parsed from short expressions such as
//! `"x^2 - 3*x*y + (y - 1)^3"`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const MAX_EXPONENT: u32 = 32;
pub const MAX_DEGREE: u32 = 64;
const MAX_DEPTH: usize = 64;
const MAX_INPUT: usize = 4096;

/// Sparse coefficients keyed by `(deg_x, deg_y)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polynomial {
    terms: BTreeMap<(u32, u32), f64>,
}

impl Polynomial {
    pub fn constant(c: f64) -> Self {
        Self::monomial(c, 0, 0)
    }

    pub fn monomial(c: f64, i: u32, j: u32) -> Self {
        let mut terms = BTreeMap::new();
        if c != 0.0 {
            terms.insert((i, j), c);
        }
        Self { terms }
    }

    pub fn x() -> Self {
        Self::monomial(1.0, 1, 0)
    }

    pub fn y() -> Self {
        Self::monomial(1.0, 0, 1)
    }

    pub fn parse(src: &str) -> Result<Self> {
        if src.len() > MAX_INPUT {
            return Err(Error::Parse { position: MAX_INPUT, message: "expression too long".into() });
        }
        let mut p = Parser { src: src.as_bytes(), pos: 0, depth: 0 };
        let poly = p.expr()?;
        p.skip_ws();
        if p.pos < p.src.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(poly)
    }

    pub fn terms(&self) -> impl Iterator<Item = ((u32, u32), f64)> + '_ {
        self.terms.iter().map(|(&k, &v)| (k, v))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|(i, j)| i + j).max().unwrap_or(0)
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.terms.iter().map(|(&(i, j), c)| c * x.powi(i as i32) * y.powi(j as i32)).sum()
    }

    pub fn dx(&self) -> Self {
        self.map_terms(|(i, j), c| (i > 0).then(|| ((i - 1, j), c * i as f64)))
    }

    pub fn dy(&self) -> Self {
        self.map_terms(|(i, j), c| (j > 0).then(|| ((i, j - 1), c * j as f64)))
    }

    fn map_terms(&self, f: impl Fn((u32, u32), f64) -> Option<((u32, u32), f64)>) -> Self {
        let mut out = Self::default();
        for (&k, &c) in &self.terms {
            if let Some((k, c)) = f(k, c) {
                out.add_term(k, c);
            }
        }
        out
    }

    fn add_term(&mut self, k: (u32, u32), c: f64) {
        let entry = self.terms.entry(k).or_insert(0.0);
        *entry += c;
        if *entry == 0.0 {
            self.terms.remove(&k);
        }
    }

    fn add(mut self, other: &Self, sign: f64) -> Self {
        for (&k, &c) in &other.terms {
            self.add_term(k, sign * c);
        }
        self
    }

    fn mul(&self, other: &Self) -> Result<Self> {
        if self.degree() + other.degree() > MAX_DEGREE {
            return Err(Error::InvalidParameter(format!("polynomial degree exceeds {MAX_DEGREE}")));
        }
        let mut out = Self::default();
        for (&(i, j), &a) in &self.terms {
            for (&(k, m), &b) in &other.terms {
                out.add_term((i + k, j + m), a * b);
            }
        }
        Ok(out)
    }

    fn pow(&self, e: u32) -> Result<Self> {
        if self.degree().saturating_mul(e) > MAX_DEGREE {
            return Err(Error::InvalidParameter(format!("polynomial degree exceeds {MAX_DEGREE}")));
        }
        let mut out = Self::constant(1.0);
        for _ in 0..e {
            out = out.mul(self)?;
        }
        Ok(out)
    }
}

impl FromStr for Polynomial {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (n, (&(i, j), &c)) in self.terms.iter().enumerate() {
            if n > 0 {
                write!(f, " + ")?;
            }
            // `{:?}` keeps enough digits to round-trip
            write!(f, "({c:?})")?;
            if i > 0 {
                write!(f, "*x^{i}")?;
            }
            if j > 0 {
                write!(f, "*y^{j}")?;
            }
        }
        Ok(())
    }
}

impl Serialize for Polynomial {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Polynomial {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    depth: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> Error {
        Error::Parse { position: self.pos, message: message.into() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn wrap(&self, e: Error) -> Error {
        match e {
            Error::InvalidParameter(m) => Error::Parse { position: self.pos, message: m },
            other => other,
        }
    }

    fn expr(&mut self) -> Result<Polynomial> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(self.error("expression nested too deeply"));
        }
        let mut acc = self.term()?;
        while let Some(op @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            acc = acc.add(&rhs, if op == b'+' { 1.0 } else { -1.0 });
        }
        self.depth -= 1;
        Ok(acc)
    }

    fn term(&mut self) -> Result<Polynomial> {
        let mut acc = self.unary()?;
        while self.peek() == Some(b'*') {
            self.pos += 1;
            let rhs = self.unary()?;
            acc = acc.mul(&rhs).map_err(|e| self.wrap(e))?;
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Polynomial> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                self.depth += 1;
                if self.depth > MAX_DEPTH {
                    return Err(self.error("expression nested too deeply"));
                }
                let inner = self.unary()?;
                self.depth -= 1;
                Ok(Polynomial::default().add(&inner, -1.0))
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Polynomial> {
        let base = self.atom()?;
        if self.peek() != Some(b'^') {
            return Ok(base);
        }
        self.pos += 1;
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected a non-negative integer exponent"));
        }
        let e: u32 = std::str::from_utf8(&self.src[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .filter(|&e| e <= MAX_EXPONENT)
            .ok_or_else(|| Error::Parse { position: start, message: format!("exponent above {MAX_EXPONENT}") })?;
        base.pow(e).map_err(|e| self.wrap(e))
    }

    fn atom(&mut self) -> Result<Polynomial> {
        match self.peek() {
            Some(b'x') => {
                self.pos += 1;
                Ok(Polynomial::x())
            }
            Some(b'y') => {
                self.pos += 1;
                Ok(Polynomial::y())
            }
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.error("expected ')'"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(_) => Err(self.error("expected a number, 'x', 'y' or '('")),
            None => Err(self.error("unexpected end of expression")),
        }
    }

    fn number(&mut self) -> Result<Polynomial> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
        };
        digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            digits(self);
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let mark = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            let exp_start = self.pos;
            digits(self);
            if exp_start == self.pos {
                self.pos = mark;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Polynomial::constant(v)),
            _ => Err(Error::Parse { position: start, message: format!("invalid number '{text}'") }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_expands() {
        let p = Polynomial::parse("(x + y)^2 - 2*x*y").unwrap();
        assert_eq!(p, Polynomial::parse("x^2 + y^2").unwrap());
        assert_eq!(p.eval(3.0, 4.0), 25.0);
        let q: Polynomial = "-x^3 + 1.5e1 * y - -2".parse().unwrap();
        assert_eq!(q.eval(2.0, 1.0), -8.0 + 15.0 + 2.0);
        assert_eq!(Polynomial::parse("x - x").unwrap(), Polynomial::default());
    }

    #[test]
    fn derivatives() {
        let p = Polynomial::parse("x^3*y^2 + 4*y").unwrap();
        assert_eq!(p.dx(), Polynomial::parse("3*x^2*y^2").unwrap());
        assert_eq!(p.dy(), Polynomial::parse("2*x^3*y + 4").unwrap());
        assert_eq!(p.dx().dx().dx().dx(), Polynomial::default());
    }

    #[test]
    fn display_round_trips() {
        let p = Polynomial::parse("0.1*x^2*y - 3*y^5 + 7").unwrap();
        assert_eq!(Polynomial::parse(&p.to_string()).unwrap(), p);
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<Polynomial>(&json).unwrap(), p);
    }

    #[test]
    fn parse_errors_carry_position() {
        for (src, pos) in [("x +", 3), ("x * (y", 6), ("2 ^ x", 4), ("x y", 2), ("z", 0), ("", 0)] {
            match Polynomial::parse(src) {
                Err(Error::Parse { position, .. }) => assert_eq!(position, pos, "{src}"),
                other => panic!("{src}: {other:?}"),
            }
        }
        assert!(Polynomial::parse("x^33").is_err());
        assert!(Polynomial::parse("(x^30)^3").is_err());
        assert!(Polynomial::parse(&"(".repeat(200)).is_err());
        assert!(Polynomial::parse(&"-".repeat(200)).is_err());
    }
}
