//! Infix parser for expression strings in geometry spec files.
//!
//! Grammar (precedence low to high): `+ -`, `* /`, unary `-`, `^` with an
//! integer exponent, then atoms: numbers, `pi`, coordinates, function calls
//! `exp log sin cos sqrt`, and parentheses.

use super::expr::{Func, ScalarExpr};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("parse error at column {pos}: {msg}")]
pub struct ParseError {
    pub pos: usize,
    pub msg: String,
}

/// Parse `src`, allowing only the listed coordinate names as variables.
pub fn parse_expr(src: &str, coords: &[String]) -> Result<ScalarExpr, ParseError> {
    let mut p = Parser {
        src: src.as_bytes(),
        pos: 0,
        coords,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    coords: &'a [String],
}

impl Parser<'_> {
    fn err(&self, msg: impl Into<String>) -> ParseError {
        ParseError {
            pos: self.pos + 1,
            msg: msg.into(),
        }
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

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(format!("expected `{}`", c as char)))
        }
    }

    fn expr(&mut self) -> Result<ScalarExpr, ParseError> {
        let mut acc = self.term()?;
        loop {
            if self.eat(b'+') {
                acc = acc + self.term()?;
            } else if self.eat(b'-') {
                acc = acc - self.term()?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<ScalarExpr, ParseError> {
        let mut acc = self.unary()?;
        loop {
            if self.eat(b'*') {
                acc = acc * self.unary()?;
            } else if self.eat(b'/') {
                acc = acc / self.unary()?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<ScalarExpr, ParseError> {
        if self.eat(b'-') {
            return Ok(-self.unary()?);
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<ScalarExpr, ParseError> {
        let base = self.atom()?;
        if !self.eat(b'^') {
            return Ok(base);
        }
        let k = if self.eat(b'(') {
            let k = self.int()?;
            self.expect(b')')?;
            k
        } else {
            self.int()?
        };
        Ok(base.powi(k))
    }

    fn int(&mut self) -> Result<i32, ParseError> {
        self.skip_ws();
        let start = self.pos;
        if matches!(self.src.get(self.pos), Some(b'-') | Some(b'+')) {
            self.pos += 1;
        }
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        text.parse::<i32>().map_err(|_| {
            self.pos = start;
            self.err("exponent must be an integer")
        })
    }

    fn atom(&mut self) -> Result<ScalarExpr, ParseError> {
        match self.peek() {
            None => Err(self.err("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.ident(),
            Some(c) => Err(self.err(format!("unexpected character `{}`", c as char))),
        }
    }

    fn number(&mut self) -> Result<ScalarExpr, ParseError> {
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
        if matches!(self.src.get(self.pos), Some(b'e') | Some(b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'-') | Some(b'+')) {
                self.pos += 1;
            }
            if self.src.get(self.pos).is_some_and(|c| c.is_ascii_digit()) {
                digits(self);
            } else {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(ScalarExpr::constant(v)),
            _ => {
                self.pos = start;
                Err(self.err(format!("bad number `{text}`")))
            }
        }
    }

    fn ident(&mut self) -> Result<ScalarExpr, ParseError> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        if let Some(f) = Func::from_name(name) {
            self.expect(b'(')?;
            let arg = self.expr()?;
            self.expect(b')')?;
            return Ok(arg.apply(f));
        }
        if name == "pi" {
            return Ok(ScalarExpr::constant(std::f64::consts::PI));
        }
        if self.coords.iter().any(|c| c == name) {
            return Ok(ScalarExpr::coord(name));
        }
        self.pos = start;
        Err(self.err(format!("unknown identifier `{name}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::expr::{eval, Bindings, Symbol};

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn at(pairs: &[(&str, f64)]) -> Bindings {
        Bindings::new(pairs.iter().map(|(n, v)| (Symbol::new(n), *v)))
    }

    #[test]
    fn precedence() {
        let c = names(&["x", "y"]);
        let e = parse_expr("1 + 2*x^2 - -y/4", &c).unwrap();
        let v = eval(e, &at(&[("x", 3.0), ("y", 8.0)])).unwrap();
        assert_eq!(v, 1.0 + 18.0 + 2.0);
        let e = parse_expr("-x^2", &c).unwrap();
        assert_eq!(eval(e, &at(&[("x", 3.0)])).unwrap(), -9.0);
        let e = parse_expr("x^(-2) * 2e1", &c).unwrap();
        assert_eq!(eval(e, &at(&[("x", 2.0)])).unwrap(), 5.0);
    }

    #[test]
    fn functions_and_pi() {
        let c = names(&["t"]);
        let e = parse_expr("exp(2*t) + sin(pi/2) + log(1) + sqrt(4) + cos(0)", &c).unwrap();
        let v = eval(e, &at(&[("t", 0.0)])).unwrap();
        assert!((v - 5.0).abs() < 1e-15);
    }

    #[test]
    fn errors_carry_position() {
        let c = names(&["x"]);
        let err = parse_expr("x + q", &c).unwrap_err();
        assert_eq!(err.pos, 5);
        assert!(err.msg.contains("unknown identifier"));
        assert!(parse_expr("x^1.5", &c).is_err());
        assert!(parse_expr("(x", &c).is_err());
        assert!(parse_expr("x x", &c).is_err());
        assert!(parse_expr("", &c).is_err());
    }

    #[test]
    fn display_round_trips() {
        let c = names(&["x", "y"]);
        for src in [
            "exp(-x)*(1 + y^2)^(-2) - 0.1*sin(x*y)",
            "4/(1 + x^2 + y^2)^2",
            "-(x - y)/sqrt(1 + x^2)",
            "x - -3*y",
        ] {
            let e = parse_expr(src, &c).unwrap();
            let again = parse_expr(&e.to_string(), &c).unwrap();
            assert_eq!(e, again, "{src} -> {e}");
        }
    }
}
