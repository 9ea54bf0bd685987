//! Recursive-descent parser for the expression grammar:
//!
//! ```text
//! expr   := ['-'] term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := '-' factor | base ('^' factor)?
//! base   := number | symbol | func '(' expr ')' | '(' expr ')'
//! number := integer ('/' integer)?
//! func   := sin | cos | tan | exp | log | sqrt | asin
//! symbol := [A-Za-z_][A-Za-z0-9_]*
//! ```
//!
//! `parse` returns the raw (unnormalized) tree; `print(parse(s))` is the
//! identity on normalized trees.

use super::{Expr, Func, Node};
use num_bigint::BigInt;
use num_rational::BigRational;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown function name `{name}` at byte {offset}")]
    UnknownFunction { offset: usize, name: String },
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Expr {
    /// Parses `source` into an unnormalized expression tree.
    pub fn parse(source: &str) -> Result<Expr, ParseError> {
        let mut p = Parser {
            src: source.as_bytes(),
            pos: 0,
        };
        p.skip_ws();
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(e)
    }

    /// Parses and normalizes in one step.
    pub fn parse_normalized(source: &str) -> Result<Expr, ParseError> {
        Ok(Expr::parse(source)?.normalize())
    }
}

impl<'a> Parser<'a> {
    fn err(&self, message: &str) -> ParseError {
        ParseError::Syntax {
            offset: self.pos,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            self.skip_ws();
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut terms: Vec<Expr> = Vec::new();
        let negate_first = self.eat(b'-');
        let first = self.term()?;
        terms.push(if negate_first { neg_raw(first) } else { first });
        loop {
            if self.eat(b'+') {
                terms.push(self.term()?);
            } else if self.eat(b'-') {
                let t = self.term()?;
                terms.push(neg_raw(t));
            } else {
                break;
            }
        }
        Ok(if terms.len() == 1 {
            terms.pop().unwrap()
        } else {
            Expr(std::sync::Arc::new(Node::Sum(terms)))
        })
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut factors = vec![self.factor()?];
        loop {
            if self.eat(b'*') {
                factors.push(self.factor()?);
            } else if self.eat(b'/') {
                let f = self.factor()?;
                factors.push(Expr(std::sync::Arc::new(Node::IntPow(f, -1))));
            } else {
                break;
            }
        }
        Ok(if factors.len() == 1 {
            factors.pop().unwrap()
        } else {
            Expr(std::sync::Arc::new(Node::Prod(factors)))
        })
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        if self.eat(b'-') {
            let f = self.factor()?;
            return Ok(neg_raw(f));
        }
        let b = self.base()?;
        if self.eat(b'^') {
            let e = self.factor()?;
            return Ok(Expr(std::sync::Arc::new(Node::Pow(b, e))));
        }
        Ok(b)
    }

    fn base(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                self.skip_ws();
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.err("expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.name(),
            _ => Err(self.err("expected a number, symbol, function call or `(`")),
        }
    }

    fn integer(&mut self) -> Result<BigInt, ParseError> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.err("expected an integer"));
        }
        let s = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        Ok(s.parse().unwrap())
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let n = self.integer()?;
        self.skip_ws();
        Ok(Expr(std::sync::Arc::new(Node::Num(BigRational::from_integer(n)))))
    }

    fn name(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap().to_string();
        self.skip_ws();
        if self.peek() == Some(b'(') {
            let func = match name.as_str() {
                "sin" => Some(Func::Sin),
                "cos" => Some(Func::Cos),
                "tan" => Some(Func::Tan),
                "exp" => Some(Func::Exp),
                "log" => Some(Func::Log),
                "asin" => Some(Func::Asin),
                "sqrt" => None,
                _ => {
                    return Err(ParseError::UnknownFunction {
                        offset: start,
                        name,
                    })
                }
            };
            self.pos += 1;
            self.skip_ws();
            let arg = self.expr()?;
            if !self.eat(b')') {
                return Err(self.err("expected `)` closing function argument"));
            }
            Ok(match func {
                Some(f) => Expr(std::sync::Arc::new(Node::Func(f, arg))),
                None => Expr(std::sync::Arc::new(Node::Pow(
                    arg,
                    Expr::rational(1, 2),
                ))),
            })
        } else {
            Ok(Expr(std::sync::Arc::new(Node::Sym(name))))
        }
    }
}

fn neg_raw(e: Expr) -> Expr {
    Expr(std::sync::Arc::new(Node::Prod(vec![Expr::from_int(-1), e])))
}
