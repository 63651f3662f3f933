//! Arithmetic expressions over (t, x, y) for initial data and targets.
//!
//! Grammar (recursive descent, right-associative `^`):
//!
//! ```text
//! expr    := term  (('+' | '-') term)*
//! term    := factor (('*' | '/') factor)*
//! factor  := unary ('^' factor)?
//! unary   := '-' unary | primary
//! primary := number | 't' | 'x' | 'y' | 'pi' | fn '(' expr ')' | '(' expr ')'
//! fn      := 'sin' | 'cos' | 'exp'
//! ```
//!
//! Just enough for manufactured solutions: `sin(pi*x)`,
//! `0.5*(1-t)*sin(2*pi*x)`, `exp(-t)*x^2`, and the like.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Func {
    Sin,
    Cos,
    Exp,
}

#[derive(Debug, Clone)]
pub enum Expr {
    Num(f64),
    T,
    X,
    Y,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn eval(&self, t: f64, x: f64, y: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::T => t,
            Expr::X => x,
            Expr::Y => y,
            Expr::Neg(e) => -e.eval(t, x, y),
            Expr::Add(a, b) => a.eval(t, x, y) + b.eval(t, x, y),
            Expr::Sub(a, b) => a.eval(t, x, y) - b.eval(t, x, y),
            Expr::Mul(a, b) => a.eval(t, x, y) * b.eval(t, x, y),
            Expr::Div(a, b) => a.eval(t, x, y) / b.eval(t, x, y),
            Expr::Pow(a, b) => a.eval(t, x, y).powf(b.eval(t, x, y)),
            Expr::Call(f, e) => {
                let v = e.eval(t, x, y);
                match f {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Exp => v.exp(),
                }
            }
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, msg: &str) -> Error {
        Error::config(format!("expression parse error at byte {}: {msg}", self.pos))
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

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek();
        if c.is_some() {
            self.pos += 1;
        }
        c
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected '{}'", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Some(b'/') => {
                    self.pos += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        // unary minus binds looser than '^': -2^2 = -(2^2)
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        let base = self.primary()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let exp = self.factor()?; // right-associative
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            Some(c) => Err(self.err(&format!("unexpected '{}'", c as char))),
            None => Err(self.err("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() {
            let c = self.src[self.pos];
            if c.is_ascii_digit() || c == b'.' {
                self.pos += 1;
            } else if (c == b'e' || c == b'E') && self.pos > start {
                self.pos += 1;
                if matches!(self.src.get(self.pos), Some(b'+') | Some(b'-')) {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        text.parse::<f64>()
            .map(Expr::Num)
            .map_err(|_| self.err(&format!("bad number '{text}'")))
    }

    fn ident(&mut self) -> Result<Expr> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphabetic() {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        match name {
            "t" => Ok(Expr::T),
            "x" => Ok(Expr::X),
            "y" => Ok(Expr::Y),
            "pi" => Ok(Expr::Num(std::f64::consts::PI)),
            "sin" | "cos" | "exp" => {
                let f = match name {
                    "sin" => Func::Sin,
                    "cos" => Func::Cos,
                    _ => Func::Exp,
                };
                self.expect(b'(')?;
                let arg = self.expr()?;
                self.expect(b')')?;
                Ok(Expr::Call(f, Box::new(arg)))
            }
            other => Err(self.err(&format!("unknown identifier '{other}'"))),
        }
    }
}

/// Parse an expression over (t, x, y).
pub fn parse(src: &str) -> Result<Expr> {
    let mut p = Parser { src: src.as_bytes(), pos: 0 };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.err("trailing input"));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn eval(src: &str, t: f64, x: f64, y: f64) -> f64 {
        parse(src).unwrap().eval(t, x, y)
    }

    #[test]
    fn arithmetic_and_precedence() {
        assert_eq!(eval("1+2*3", 0.0, 0.0, 0.0), 7.0);
        assert_eq!(eval("(1+2)*3", 0.0, 0.0, 0.0), 9.0);
        assert_eq!(eval("2^3^2", 0.0, 0.0, 0.0), 512.0); // right-assoc
        assert_eq!(eval("-2^2", 0.0, 0.0, 0.0), -4.0);
        assert_eq!(eval("6/3/2", 0.0, 0.0, 0.0), 1.0);
    }

    #[test]
    fn variables_and_functions() {
        let v = eval("sin(pi*x)*exp(-t)+0.5*y", 1.0, 0.5, 2.0);
        assert!((v - (1.0 * (-1.0f64).exp() + 1.0)).abs() < 1e-15);
        assert!((eval("cos(pi)", 0.0, 0.0, 0.0) + 1.0).abs() < 1e-15);
        assert!((eval("1.5e-2*x", 0.0, 2.0, 0.0) - 0.03).abs() < 1e-15);
    }

    #[test]
    fn parse_errors() {
        assert!(parse("sin(").is_err());
        assert!(parse("1 +").is_err());
        assert!(parse("foo(2)").is_err());
        assert!(parse("1 2").is_err());
        assert!(parse("").is_err());
    }
}
