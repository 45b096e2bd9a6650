//! Recursive-descent parser for the function DSL.
//!
//! Grammar:
//!   expr   := term (('+' | '-') term)*
//!   term   := factor (('*' | '/') factor)*
//!   factor := '-' factor | atom ('^' int)?
//!   atom   := number | var | builtin '(' expr ')' | '(' expr ')'
//!           | '[' expr (',' expr)* ']'

use super::{Builtin, Expr};
use crate::scalar::Rat;
use num::bigint::BigInt;
use num::pow::Pow;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: expected {expected}")]
    Syntax { offset: usize, expected: String },
    #[error("arity error at byte {offset}: variable x{index} exceeds declared arity {arity}")]
    Arity {
        offset: usize,
        index: usize,
        arity: usize,
    },
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    arity: usize,
}

pub fn parse(text: &str, arity: usize) -> Result<Expr, ParseError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        arity,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(ParseError::Syntax {
            offset: p.pos,
            expected: "end of input".into(),
        });
    }
    Ok(e)
}

impl<'a> Parser<'a> {
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

    fn expect(&mut self, c: u8, what: &str) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(ParseError::Syntax {
                offset: self.pos,
                expected: what.into(),
            })
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.term()?;
        loop {
            if self.eat(b'+') {
                acc = Expr::Add(Box::new(acc), Box::new(self.term()?));
            } else if self.eat(b'-') {
                acc = Expr::Sub(Box::new(acc), Box::new(self.term()?));
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.factor()?;
        loop {
            if self.eat(b'*') {
                acc = Expr::Mul(Box::new(acc), Box::new(self.factor()?));
            } else if self.eat(b'/') {
                acc = Expr::Div(Box::new(acc), Box::new(self.factor()?));
            } else {
                return Ok(acc);
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        // unary minus binds looser than '^': -x1^2 is -(x1^2)
        if self.eat(b'-') {
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        let base = self.atom()?;
        if self.eat(b'^') {
            let exp = self.integer()?;
            Ok(Expr::Pow(Box::new(base), exp))
        } else {
            Ok(base)
        }
    }

    fn integer(&mut self) -> Result<i32, ParseError> {
        self.skip_ws();
        let start = self.pos;
        let neg = self.eat(b'-');
        self.skip_ws();
        let digits_start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == digits_start {
            return Err(ParseError::Syntax {
                offset: start,
                expected: "integer exponent".into(),
            });
        }
        let s = std::str::from_utf8(&self.src[digits_start..self.pos]).unwrap();
        let v: i32 = s.parse().map_err(|_| ParseError::Syntax {
            offset: start,
            expected: "integer exponent in range".into(),
        })?;
        Ok(if neg { -v } else { v })
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')', "')'")?;
                Ok(e)
            }
            Some(b'[') => {
                self.pos += 1;
                let mut parts = vec![self.expr()?];
                while self.eat(b',') {
                    parts.push(self.expr()?);
                }
                self.expect(b']', "']'")?;
                Ok(Expr::Vector(parts))
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            _ => Err(ParseError::Syntax {
                offset: self.pos,
                expected: "number, variable, builtin, '(', '[', or '-'".into(),
            }),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        let mut frac_digits = 0usize;
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            let fs = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            frac_digits = self.pos - fs;
            if frac_digits == 0 && self.pos - start == 1 {
                return Err(ParseError::Syntax {
                    offset: start,
                    expected: "digits".into(),
                });
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        let digits: String = text.chars().filter(|c| *c != '.').collect();
        let num: BigInt = digits.parse().map_err(|_| ParseError::Syntax {
            offset: start,
            expected: "numeric literal".into(),
        })?;
        let den = BigInt::from(10u32).pow(frac_digits as u32);
        Ok(Expr::Num(Rat::new(num, den)))
    }

    fn ident(&mut self) -> Result<Expr, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        if let Some(idx_str) = name.strip_prefix('x') {
            if let Ok(idx) = idx_str.parse::<usize>() {
                if idx == 0 || idx > self.arity {
                    return Err(ParseError::Arity {
                        offset: start,
                        index: idx,
                        arity: self.arity,
                    });
                }
                return Ok(Expr::Var(idx - 1));
            }
        }
        let builtin = match name {
            "exp" => Builtin::Exp,
            "sin" => Builtin::Sin,
            "cos" => Builtin::Cos,
            "sqrt1p" => Builtin::Sqrt1p,
            "bump" => Builtin::Bump,
            _ => {
                return Err(ParseError::Syntax {
                    offset: start,
                    expected: "variable x1..xn or builtin (exp, sin, cos, sqrt1p, bump)".into(),
                })
            }
        };
        self.expect(b'(', "'(' after builtin")?;
        let arg = self.expr()?;
        self.expect(b')', "')'")?;
        Ok(Expr::Builtin(builtin, Box::new(arg)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wellformed_inputs() {
        assert!(parse("exp(-x1^2 - x2^2)", 2).is_ok());
        let v = parse("[x1 + x2^2, x2]", 2).unwrap();
        assert_eq!(v.target_dim(), 2);
        assert!(parse("0.4*x1*exp(-x1^2)", 1).is_ok());
    }

    #[test]
    fn truncated_input_offset() {
        let err = parse("x1 +", 1).unwrap_err();
        assert_eq!(
            err,
            ParseError::Syntax {
                offset: 4,
                expected: "number, variable, builtin, '(', '[', or '-'".into()
            }
        );
    }

    #[test]
    fn arity_violation() {
        let err = parse("x3", 2).unwrap_err();
        assert!(matches!(err, ParseError::Arity { index: 3, arity: 2, .. }));
    }

    #[test]
    fn precedence() {
        // 1 + 2*x1^2 parses as 1 + (2*(x1^2))
        let e = parse("1 + 2*x1^2", 1).unwrap();
        match e {
            Expr::Add(_, rhs) => match *rhs {
                Expr::Mul(_, r2) => assert!(matches!(*r2, Expr::Pow(_, 2))),
                other => panic!("unexpected {other:?}"),
            },
            other => panic!("unexpected {other:?}"),
        }
    }
}
