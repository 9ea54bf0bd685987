//! Pretty-printer. `Expr::parse(&e.to_string())` normalizes back to `e`
//! for any normalized `e`.

use super::{Expr, Node};
use num_rational::BigRational;
use num_traits::{One, Signed};
use std::fmt;

const PREC_SUM: u8 = 0;
const PREC_PROD: u8 = 1;
const PREC_POW: u8 = 2;
const PREC_ATOM: u8 = 3;

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", print_prec(self, PREC_SUM))
    }
}

fn print_num(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

fn prec_of(e: &Expr) -> u8 {
    match e.node() {
        Node::Num(r) => {
            if r.is_negative() || !r.is_integer() {
                PREC_PROD
            } else {
                PREC_ATOM
            }
        }
        Node::Sym(_) | Node::Func(..) => PREC_ATOM,
        Node::Sum(_) => PREC_SUM,
        Node::Prod(_) => PREC_PROD,
        Node::IntPow(..) | Node::Pow(..) => PREC_POW,
    }
}

fn print_prec(e: &Expr, parent: u8) -> String {
    let s = print_raw(e);
    if prec_of(e) < parent {
        format!("({s})")
    } else {
        s
    }
}

fn print_raw(e: &Expr) -> String {
    match e.node() {
        Node::Num(r) => print_num(r),
        Node::Sym(s) => s.clone(),
        Node::Func(f, a) => format!("{}({})", f.name(), print_prec(a, PREC_SUM)),
        Node::Sum(ts) => {
            let mut out = String::new();
            for (i, t) in ts.iter().enumerate() {
                let (c, m) = t.coeff_and_monomial();
                if c.is_negative() {
                    out.push_str(if i == 0 { "-" } else { " - " });
                    let flipped = flip_term(&(-c), &m);
                    out.push_str(&print_prec(&flipped, PREC_PROD));
                } else {
                    if i > 0 {
                        out.push_str(" + ");
                    }
                    out.push_str(&print_prec(t, PREC_PROD));
                }
            }
            out
        }
        Node::Prod(fs) => {
            let mut parts: Vec<String> = Vec::new();
            let mut prefix = String::new();
            for (i, f) in fs.iter().enumerate() {
                if i == 0 {
                    if let Node::Num(r) = f.node() {
                        if (-r.clone()).is_one() {
                            prefix.push('-');
                            continue;
                        }
                        parts.push(print_num(r));
                        continue;
                    }
                }
                parts.push(print_prec(f, PREC_POW));
            }
            format!("{prefix}{}", parts.join("*"))
        }
        Node::IntPow(b, k) => {
            let bs = print_prec(b, PREC_ATOM);
            if *k >= 0 {
                format!("{bs}^{k}")
            } else {
                format!("{bs}^({k})")
            }
        }
        Node::Pow(b, ex) => {
            if let Node::Num(r) = ex.node() {
                if *r == BigRational::new(1.into(), 2.into()) {
                    return format!("sqrt({})", print_prec(b, PREC_SUM));
                }
            }
            let bs = print_prec(b, PREC_ATOM);
            format!("{bs}^({})", print_prec(ex, PREC_SUM))
        }
    }
}

/// Rebuilds `c * m` without normalizing (the inputs come from a normalized
/// term whose sign was flipped for printing).
fn flip_term(c: &BigRational, m: &Expr) -> Expr {
    use std::sync::Arc;
    if m.is_literal_one() {
        return Expr::from_big(c.clone());
    }
    if c.is_one() {
        return m.clone();
    }
    let mut fs = vec![Expr::from_big(c.clone())];
    match m.node() {
        Node::Prod(inner) => fs.extend(inner.iter().cloned()),
        _ => fs.push(m.clone()),
    }
    Expr(Arc::new(Node::Prod(fs)))
}
