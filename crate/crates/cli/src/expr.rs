//! Whitelisted scalar expressions: sums of `a*sin(2*pi*k*x/L)` and
//! `a*cos(…)` terms in the coordinates `x`, `y`, `z`.
//!
//! The coefficient, `*k` and `/L` parts are optional; `k` must be an
//! integer so every term is periodic on a torus of side `L`.

use std::f64::consts::TAU;
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Func {
    Sin,
    Cos,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrigTerm {
    pub amplitude: f64,
    pub func: Func,
    pub k: i64,
    pub axis: usize,
    pub length: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrigSum {
    pub terms: Vec<TrigTerm>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParseError {
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "column {}: {}", self.column, self.message)
    }
}

impl TrigSum {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let arg = TAU * t.k as f64 * x[t.axis] / t.length;
                t.amplitude
                    * match t.func {
                        Func::Sin => arg.sin(),
                        Func::Cos => arg.cos(),
                    }
            })
            .sum()
    }

    pub fn max_axis(&self) -> Option<usize> {
        self.terms.iter().map(|t| t.axis).max()
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                i += 1;
                if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                    i += 1;
                }
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text
                .parse()
                .map_err(|_| ParseError { column: col, message: format!("malformed number `{text}`") })?;
            out.push((col, Tok::Num(v)));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                i += 1;
            }
            out.push((col, Tok::Ident(chars[start..i].iter().collect())));
        } else if "+-*/()".contains(c) {
            out.push((col, Tok::Sym(c)));
            i += 1;
        } else {
            return Err(ParseError { column: col, message: format!("unexpected character `{c}`") });
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn column(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(c, _)| *c)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError { column: self.column(), message: message.into() })
    }

    fn eat_sym(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, c: char) -> Result<(), ParseError> {
        if self.eat_sym(c) {
            Ok(())
        } else {
            self.err(format!("expected `{c}`"))
        }
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        match self.peek() {
            Some(Tok::Num(v)) => {
                let v = *v;
                self.pos += 1;
                Ok(v)
            }
            _ => self.err("expected a number"),
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.err("expected a name"),
        }
    }

    fn term(&mut self, sign: f64) -> Result<TrigTerm, ParseError> {
        let amplitude = if matches!(self.peek(), Some(Tok::Num(_))) {
            let a = self.number()?;
            self.expect_sym('*')?;
            a
        } else {
            1.0
        };
        let column = self.column();
        let func = match self.ident()?.as_str() {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            other => return Err(ParseError { column, message: format!("only sin and cos are allowed, found `{other}`") }),
        };
        self.expect_sym('(')?;
        if self.number()? != 2.0 {
            return self.err("the argument must start with `2*pi`");
        }
        self.expect_sym('*')?;
        if self.ident()? != "pi" {
            return self.err("the argument must start with `2*pi`");
        }
        self.expect_sym('*')?;
        let mut k = 1;
        if matches!(self.peek(), Some(Tok::Num(_))) {
            let v = self.number()?;
            if v.fract() != 0.0 || v.abs() > 1e6 {
                return self.err(format!("wavenumber must be an integer, got {v}"));
            }
            k = v as i64;
            self.expect_sym('*')?;
        }
        let column = self.column();
        let axis = match self.ident()?.as_str() {
            "x" => 0,
            "y" => 1,
            "z" => 2,
            other => return Err(ParseError { column, message: format!("unknown coordinate `{other}`") }),
        };
        let mut length = 1.0;
        if self.eat_sym('/') {
            length = self.number()?;
            if length <= 0.0 {
                return self.err("period length must be positive");
            }
        }
        self.expect_sym(')')?;
        Ok(TrigTerm { amplitude: sign * amplitude, func, k, axis, length })
    }
}

pub fn parse(src: &str) -> Result<TrigSum, ParseError> {
    let toks = tokenize(src)?;
    let end = src.chars().count() + 1;
    let mut p = Parser { toks, pos: 0, end };
    if p.peek().is_none() {
        return p.err("empty expression");
    }
    let mut terms = Vec::new();
    let mut sign = if p.eat_sym('-') {
        -1.0
    } else {
        p.eat_sym('+');
        1.0
    };
    loop {
        terms.push(p.term(sign)?);
        if p.eat_sym('+') {
            sign = 1.0;
        } else if p.eat_sym('-') {
            sign = -1.0;
        } else if p.peek().is_none() {
            break;
        } else {
            return p.err("expected `+`, `-` or end of expression");
        }
    }
    Ok(TrigSum { terms })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_and_short_forms() {
        let e = parse("0.3*sin(2*pi*x) - cos(2*pi*2*y/0.5)").unwrap();
        assert_eq!(e.terms.len(), 2);
        assert_eq!(e.terms[0], TrigTerm { amplitude: 0.3, func: Func::Sin, k: 1, axis: 0, length: 1.0 });
        assert_eq!(e.terms[1], TrigTerm { amplitude: -1.0, func: Func::Cos, k: 2, axis: 1, length: 0.5 });
    }

    #[test]
    fn evaluates() {
        let e = parse("2*cos(2*pi*x)").unwrap();
        assert!((e.eval(&[0.5]) + 2.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_whitelisted() {
        assert!(parse("exp(x)").is_err());
        assert!(parse("0.3*sin(3*pi*x)").is_err());
        assert!(parse("0.3*sin(2*pi*1.5*x)").is_err());
        assert!(parse("0.3*sin(2*pi*w)").is_err());
        assert!(parse("0.3*sin(2*pi*x) 1").is_err());
        assert_eq!(parse("0.3*tan(2*pi*x)").unwrap_err().column, 5);
    }
}
