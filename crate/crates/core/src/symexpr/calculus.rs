//! Exact differentiation, simultaneous substitution, and polynomial-degree
//! utilities over the expression fragment.

use super::{nfunc, nprod, nsum, npow_expr, npow_int, Expr, Func, Node};
use num_traits::ToPrimitive;
use std::collections::BTreeMap;

impl Expr {
    /// Exact partial derivative with respect to `x`, normalized. Symbols
    /// other than `x` are treated as constants.
    pub fn diff(&self, x: &str) -> Expr {
        let e = self.normalize();
        d(&e, x)
    }

    /// Simultaneous substitution of symbols, then normalization. Bindings
    /// are applied in one pass, so `{x -> y, y -> x}` swaps.
    pub fn substitute(&self, bindings: &BTreeMap<String, Expr>) -> Expr {
        subst(self, bindings).normalize()
    }

    /// Replaces a single symbol.
    pub fn substitute_one(&self, x: &str, v: &Expr) -> Expr {
        let mut m = BTreeMap::new();
        m.insert(x.to_string(), v.clone());
        self.substitute(&m)
    }

    /// Total polynomial degree in the given symbols; `None` when the
    /// expression is not polynomial in them (they occur inside a function
    /// argument, a denominator, or a symbolic power).
    pub fn poly_degree_in(&self, syms: &std::collections::BTreeSet<String>) -> Option<i64> {
        let e = self.normalize();
        e.terms()
            .iter()
            .map(|t| term_degree(t, syms))
            .try_fold(0i64, |acc, d| d.map(|d| acc.max(d)))
    }

    /// Splits a normalized expression into homogeneous components by degree
    /// in `syms`. Returns `None` when not polynomial in them.
    pub fn split_by_degree(
        &self,
        syms: &std::collections::BTreeSet<String>,
    ) -> Option<BTreeMap<i64, Expr>> {
        let e = self.normalize();
        let mut buckets: BTreeMap<i64, Vec<Expr>> = BTreeMap::new();
        for t in e.terms() {
            let d = term_degree(&t, syms)?;
            buckets.entry(d).or_default().push(t);
        }
        Some(
            buckets
                .into_iter()
                .map(|(d, ts)| (d, nsum(ts)))
                .collect(),
        )
    }
}

pub(crate) fn term_degree(t: &Expr, syms: &std::collections::BTreeSet<String>) -> Option<i64> {
    let mut deg = 0i64;
    for f in t.factors() {
        let (b, ex) = f.base_and_exponent();
        let touches = b.symbols().iter().any(|s| syms.contains(s));
        if !touches {
            continue;
        }
        // Polynomial only when the base is itself a bare symbol from the
        // set and the exponent a non-negative integer.
        match b.node() {
            Node::Sym(s) if syms.contains(s) => {
                let k = ex.as_rational()?.to_integer().to_i64()?;
                if !ex.as_rational()?.is_integer() || k < 0 {
                    return None;
                }
                deg += k;
            }
            _ => return None,
        }
    }
    Some(deg)
}

fn subst(e: &Expr, m: &BTreeMap<String, Expr>) -> Expr {
    match e.node() {
        Node::Num(_) => e.clone(),
        Node::Sym(s) => m.get(s).cloned().unwrap_or_else(|| e.clone()),
        Node::Sum(ts) => Expr::sum(ts.iter().map(|t| subst(t, m))),
        Node::Prod(fs) => Expr::product(fs.iter().map(|f| subst(f, m))),
        Node::IntPow(b, k) => subst(b, m).powi(*k),
        Node::Pow(b, ex) => subst(b, m).pow_expr(subst(ex, m)),
        Node::Func(f, a) => Expr::func(*f, subst(a, m)),
    }
}

fn d(e: &Expr, x: &str) -> Expr {
    match e.node() {
        Node::Num(_) => Expr::zero(),
        Node::Sym(s) => {
            if s == x {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Node::Sum(ts) => nsum(ts.iter().map(|t| d(t, x)).collect()),
        Node::Prod(fs) => {
            let mut parts = Vec::new();
            for (i, f) in fs.iter().enumerate() {
                let df = d(f, x);
                if df.is_literal_zero() {
                    continue;
                }
                let mut rest: Vec<Expr> = fs.clone();
                rest[i] = df;
                parts.push(nprod(rest));
            }
            nsum(parts)
        }
        Node::IntPow(b, k) => {
            let db = d(b, x);
            if db.is_literal_zero() {
                return Expr::zero();
            }
            nprod(vec![Expr::from_int(*k), npow_int(b.clone(), k - 1), db])
        }
        Node::Pow(b, ex) => {
            // d(b^e) = b^e * (e' log b + e b'/b)
            let db = d(b, x);
            let de = d(ex, x);
            let mut inner = Vec::new();
            if !de.is_literal_zero() {
                inner.push(nprod(vec![de, nfunc(Func::Log, b.clone())]));
            }
            if !db.is_literal_zero() {
                inner.push(nprod(vec![ex.clone(), db, npow_int(b.clone(), -1)]));
            }
            if inner.is_empty() {
                return Expr::zero();
            }
            nprod(vec![npow_expr(b.clone(), ex.clone()), nsum(inner)])
        }
        Node::Func(f, a) => {
            let da = d(a, x);
            if da.is_literal_zero() {
                return Expr::zero();
            }
            let outer = match f {
                Func::Sin => nfunc(Func::Cos, a.clone()),
                Func::Cos => nprod(vec![Expr::from_int(-1), nfunc(Func::Sin, a.clone())]),
                Func::Tan => nsum(vec![
                    Expr::one(),
                    npow_int(nfunc(Func::Tan, a.clone()), 2),
                ]),
                Func::Exp => nfunc(Func::Exp, a.clone()),
                Func::Log => npow_int(a.clone(), -1),
                Func::Asin => {
                    // 1 / sqrt(1 - a^2)
                    let radicand = nsum(vec![
                        Expr::one(),
                        nprod(vec![Expr::from_int(-1), npow_int(a.clone(), 2)]),
                    ]);
                    npow_expr(radicand, Expr::rational(-1, 2))
                }
            };
            nprod(vec![outer, da])
        }
    }
}
