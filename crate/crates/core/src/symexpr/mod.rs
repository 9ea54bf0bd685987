//! Self-contained symbolic expression kernel.
//!
//! The value type [`Expr`] is an immutable tree over a fixed fragment:
//! exact rational constants, named symbols, n-ary sums and products,
//! integer powers, rational powers (`sqrt` is surface syntax for the
//! exponent 1/2), powers with symbolic exponent, and the unary functions
//! `sin`, `cos`, `tan`, `exp`, `log`, `asin`.
//!
//! Every operation returns structurally canonical trees: sums and products
//! are flattened, like terms collected, rational arithmetic folded, and the
//! single trigonometric rewrite `sin^2 u -> 1 - cos^2 u` applied
//! innermost-first. Structural equality of normalized trees therefore
//! implies mathematical equality; the converse is handled by the two-tier
//! zero test in [`ZeroCtx`].

mod calculus;
mod display;
mod eval;
pub mod linalg;
mod parse;
mod zero;

pub use eval::EvalError;
pub use parse::ParseError;
pub(crate) use calculus::term_degree;
pub use zero::{Assumption, Sampler, ZeroCtx, ZeroError, ZeroStatus, ZeroVerdict};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::collections::BTreeMap;
use std::sync::Arc;

/// Cap on multinomial expansion of `(a + b + ...)^k`.
const EXPAND_CAP: i64 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Asin,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Asin => "asin",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub(crate) enum Node {
    Num(BigRational),
    Sym(String),
    Sum(Vec<Expr>),
    Prod(Vec<Expr>),
    /// Integer power with exponent outside {0, 1}.
    IntPow(Expr, i64),
    /// Power with a non-integer exponent (rational constant or symbolic).
    Pow(Expr, Expr),
    Func(Func, Expr),
}

/// Immutable symbolic scalar. Cheap to clone and safe to share across
/// threads; all operations are pure.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Expr(Arc<Node>);

impl Expr {
    pub(crate) fn node(&self) -> &Node {
        &self.0
    }

    fn new(n: Node) -> Expr {
        Expr(Arc::new(n))
    }

    // ---- constructors ------------------------------------------------

    pub fn zero() -> Expr {
        Expr::from_int(0)
    }

    pub fn one() -> Expr {
        Expr::from_int(1)
    }

    pub fn from_int(n: i64) -> Expr {
        Expr::new(Node::Num(BigRational::from_integer(BigInt::from(n))))
    }

    pub fn rational(num: i64, den: i64) -> Expr {
        assert!(den != 0, "rational literal with zero denominator");
        Expr::new(Node::Num(BigRational::new(BigInt::from(num), BigInt::from(den))))
    }

    pub fn from_big(r: BigRational) -> Expr {
        Expr::new(Node::Num(r))
    }

    pub fn sym(name: impl Into<String>) -> Expr {
        Expr::new(Node::Sym(name.into()))
    }

    pub fn func(f: Func, arg: Expr) -> Expr {
        nfunc(f, arg.normalize())
    }

    pub fn sin(a: Expr) -> Expr {
        Expr::func(Func::Sin, a)
    }
    pub fn cos(a: Expr) -> Expr {
        Expr::func(Func::Cos, a)
    }
    pub fn tan(a: Expr) -> Expr {
        Expr::func(Func::Tan, a)
    }
    pub fn exp(a: Expr) -> Expr {
        Expr::func(Func::Exp, a)
    }
    pub fn log(a: Expr) -> Expr {
        Expr::func(Func::Log, a)
    }
    pub fn asin(a: Expr) -> Expr {
        Expr::func(Func::Asin, a)
    }
    pub fn sqrt(a: Expr) -> Expr {
        a.pow_rational(1, 2)
    }

    pub fn sum(terms: impl IntoIterator<Item = Expr>) -> Expr {
        nsum(terms.into_iter().map(|t| t.normalize()).collect())
    }

    pub fn product(factors: impl IntoIterator<Item = Expr>) -> Expr {
        nprod(factors.into_iter().map(|f| f.normalize()).collect())
    }

    pub fn powi(&self, k: i64) -> Expr {
        npow_int(self.normalize(), k)
    }

    pub fn pow_rational(&self, num: i64, den: i64) -> Expr {
        npow_expr(
            self.normalize(),
            Expr::rational(num, den),
        )
    }

    pub fn pow_expr(&self, e: Expr) -> Expr {
        npow_expr(self.normalize(), e.normalize())
    }

    pub fn neg(&self) -> Expr {
        nprod(vec![Expr::from_int(-1), self.normalize()])
    }

    // ---- predicates and accessors -------------------------------------

    pub fn is_num(&self) -> bool {
        matches!(self.node(), Node::Num(_))
    }

    pub fn as_rational(&self) -> Option<&BigRational> {
        match self.node() {
            Node::Num(r) => Some(r),
            _ => None,
        }
    }

    pub fn is_literal_zero(&self) -> bool {
        matches!(self.node(), Node::Num(r) if r.is_zero())
    }

    pub fn is_literal_one(&self) -> bool {
        matches!(self.node(), Node::Num(r) if r.is_one())
    }

    pub fn as_symbol(&self) -> Option<&str> {
        match self.node() {
            Node::Sym(s) => Some(s),
            _ => None,
        }
    }

    /// Collects every symbol name occurring in the tree.
    pub fn symbols(&self) -> std::collections::BTreeSet<String> {
        let mut out = std::collections::BTreeSet::new();
        self.visit(&mut |n| {
            if let Node::Sym(s) = n {
                out.insert(s.clone());
            }
        });
        out
    }

    pub fn depends_on(&self, sym: &str) -> bool {
        let mut found = false;
        self.visit(&mut |n| {
            if let Node::Sym(s) = n {
                if s == sym {
                    found = true;
                }
            }
        });
        found
    }

    fn visit(&self, f: &mut impl FnMut(&Node)) {
        f(self.node());
        match self.node() {
            Node::Sum(v) | Node::Prod(v) => v.iter().for_each(|e| e.visit(f)),
            Node::IntPow(b, _) => b.visit(f),
            Node::Pow(b, e) => {
                b.visit(f);
                e.visit(f);
            }
            Node::Func(_, a) => a.visit(f),
            _ => {}
        }
    }

    /// Terms of the expression viewed as a sum (a non-sum is one term).
    pub fn terms(&self) -> Vec<Expr> {
        match self.node() {
            Node::Sum(v) => v.clone(),
            _ => vec![self.clone()],
        }
    }

    /// Splits a normalized term into its rational coefficient and the
    /// residual monomial (`1` for a pure constant).
    pub fn coeff_and_monomial(&self) -> (BigRational, Expr) {
        match self.node() {
            Node::Num(r) => (r.clone(), Expr::one()),
            Node::Prod(fs) => {
                if let Node::Num(r) = fs[0].node() {
                    let rest: Vec<Expr> = fs[1..].to_vec();
                    let mono = if rest.len() == 1 {
                        rest[0].clone()
                    } else {
                        Expr::new(Node::Prod(rest))
                    };
                    (r.clone(), mono)
                } else {
                    (BigRational::one(), self.clone())
                }
            }
            _ => (BigRational::one(), self.clone()),
        }
    }

    /// Factors of a normalized product (a non-product is one factor).
    pub fn factors(&self) -> Vec<Expr> {
        match self.node() {
            Node::Prod(v) => v.clone(),
            _ => vec![self.clone()],
        }
    }

    /// Base and exponent of a factor: `x^3 -> (x, 3)`, `x -> (x, 1)`,
    /// `u^(1/2) -> (u, 1/2)`, `u^s -> (u, s)`.
    pub fn base_and_exponent(&self) -> (Expr, Expr) {
        match self.node() {
            Node::IntPow(b, k) => (b.clone(), Expr::from_int(*k)),
            Node::Pow(b, e) => (b.clone(), e.clone()),
            _ => (self.clone(), Expr::one()),
        }
    }

    // ---- normalization -------------------------------------------------

    /// Canonical form: flattened and sorted sums/products, folded rational
    /// constants, collected like terms, `x^0 -> 1`, `x^1 -> x`, the
    /// Pythagorean rewrite, and exact folding of perfect rational powers.
    /// Idempotent.
    pub fn normalize(&self) -> Expr {
        match self.node() {
            Node::Num(_) | Node::Sym(_) => self.clone(),
            Node::Sum(ts) => nsum(ts.iter().map(|t| t.normalize()).collect()),
            Node::Prod(fs) => nprod(fs.iter().map(|f| f.normalize()).collect()),
            Node::IntPow(b, k) => npow_int(b.normalize(), *k),
            Node::Pow(b, e) => npow_expr(b.normalize(), e.normalize()),
            Node::Func(f, a) => nfunc(*f, a.normalize()),
        }
    }

    /// Writes the expression as `numerator / denominator`, pulling every
    /// factor with a negative exponent out of each term into a common
    /// denominator. Both parts are normalized and the denominator is a
    /// product of positive powers. Used by the zero test: `e = 0` on the
    /// domain where `e` is defined iff the numerator vanishes.
    pub fn clear_denominators(&self) -> (Expr, Expr) {
        let e = self.normalize();
        let terms = e.terms();
        // Per-term denominator exponents, keyed by base.
        let mut dens: Vec<BTreeMap<Expr, BigRational>> = Vec::new();
        for t in &terms {
            let mut d = BTreeMap::new();
            for f in t.factors() {
                let (b, ex) = f.base_and_exponent();
                if let Node::Num(r) = ex.node() {
                    if r.is_negative() {
                        d.insert(b, -r.clone());
                    }
                }
            }
            dens.push(d);
        }
        let mut common: BTreeMap<Expr, BigRational> = BTreeMap::new();
        for d in &dens {
            for (b, ex) in d {
                let cur = common.entry(b.clone()).or_insert_with(BigRational::zero);
                if *ex > *cur {
                    *cur = ex.clone();
                }
            }
        }
        if common.is_empty() {
            return (e, Expr::one());
        }
        let mut num_terms = Vec::new();
        for t in terms.iter() {
            // Multiply by the full common denominator; the term's own
            // negative powers cancel through product collection.
            let mut factors = vec![t.clone()];
            for (b, need) in &common {
                factors.push(npow_expr(b.clone(), Expr::from_big(need.clone())));
            }
            num_terms.push(nprod(factors));
        }
        let num = nsum(num_terms);
        let den = nprod(
            common
                .into_iter()
                .map(|(b, ex)| npow_expr(b, Expr::from_big(ex)))
                .collect(),
        );
        (num, den)
    }
}

impl From<i64> for Expr {
    fn from(n: i64) -> Expr {
        Expr::from_int(n)
    }
}

// ---- operator overloads (normalizing) ----------------------------------

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        nsum(vec![self.normalize(), rhs.normalize()])
    }
}
impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        nsum(vec![self.normalize(), rhs.neg()])
    }
}
impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        nprod(vec![self.normalize(), rhs.normalize()])
    }
}
impl std::ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        nprod(vec![self.normalize(), npow_int(rhs.normalize(), -1)])
    }
}
impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(&self)
    }
}

impl<'a> std::ops::Add for &'a Expr {
    type Output = Expr;
    fn add(self, rhs: &Expr) -> Expr {
        self.clone() + rhs.clone()
    }
}
impl<'a> std::ops::Sub for &'a Expr {
    type Output = Expr;
    fn sub(self, rhs: &Expr) -> Expr {
        self.clone() - rhs.clone()
    }
}
impl<'a> std::ops::Mul for &'a Expr {
    type Output = Expr;
    fn mul(self, rhs: &Expr) -> Expr {
        self.clone() * rhs.clone()
    }
}
impl<'a> std::ops::Div for &'a Expr {
    type Output = Expr;
    fn div(self, rhs: &Expr) -> Expr {
        self.clone() / rhs.clone()
    }
}

// ---- smart constructors over normalized inputs ---------------------------

/// True when the normalized expression carries a leading minus sign, used
/// for odd/even function canonicalization.
fn is_negative_form(e: &Expr) -> bool {
    match e.node() {
        Node::Num(r) => r.is_negative(),
        Node::Prod(fs) => matches!(fs[0].node(), Node::Num(r) if r.is_negative()),
        Node::Sum(ts) => is_negative_form(&ts[0]),
        _ => false,
    }
}

pub(crate) fn nsum(terms: Vec<Expr>) -> Expr {
    let mut constant = BigRational::zero();
    let mut collected: BTreeMap<Expr, BigRational> = BTreeMap::new();
    let mut stack: Vec<Expr> = terms;
    while let Some(t) = stack.pop() {
        match t.node() {
            Node::Num(r) => constant += r,
            Node::Sum(ts) => stack.extend(ts.iter().cloned()),
            _ => {
                let (c, m) = t.coeff_and_monomial();
                *collected.entry(m).or_insert_with(BigRational::zero) += c;
            }
        }
    }
    let mut out: Vec<Expr> = Vec::new();
    if !constant.is_zero() {
        out.push(Expr::from_big(constant));
    }
    for (m, c) in collected {
        if c.is_zero() {
            continue;
        }
        if c.is_one() {
            out.push(m);
        } else {
            out.push(nprod(vec![Expr::from_big(c), m]));
        }
    }
    out.sort();
    match out.len() {
        0 => Expr::zero(),
        1 => out.pop().unwrap(),
        _ => Expr::new(Node::Sum(out)),
    }
}

pub(crate) fn nprod(factors: Vec<Expr>) -> Expr {
    // Flatten and fold the rational coefficient.
    let mut coeff = BigRational::one();
    let mut flat: Vec<Expr> = Vec::new();
    let mut stack: Vec<Expr> = factors;
    while let Some(f) = stack.pop() {
        match f.node() {
            Node::Num(r) => {
                if r.is_zero() {
                    return Expr::zero();
                }
                coeff *= r;
            }
            Node::Prod(fs) => stack.extend(fs.iter().cloned()),
            _ => flat.push(f),
        }
    }
    // Collect powers of a common base.
    let mut powers: BTreeMap<Expr, Vec<Expr>> = BTreeMap::new();
    for f in flat {
        let (b, ex) = f.base_and_exponent();
        powers.entry(b).or_default().push(ex);
    }
    let mut assembled: Vec<Expr> = Vec::new();
    for (b, exps) in powers {
        let ex = nsum(exps);
        let f = npow_expr(b, ex);
        match f.node() {
            Node::Num(r) => {
                if r.is_zero() {
                    return Expr::zero();
                }
                coeff *= r;
            }
            Node::Prod(fs) => {
                // Exponent arithmetic may re-split (e.g. sin^2 rewrite).
                for g in fs {
                    match g.node() {
                        Node::Num(r) => coeff *= r,
                        _ => assembled.push(g.clone()),
                    }
                }
            }
            _ => {
                if !f.is_literal_one() {
                    assembled.push(f);
                }
            }
        }
    }
    // Distribute over any sum factor (full expansion).
    if let Some(pos) = assembled.iter().position(|f| matches!(f.node(), Node::Sum(_))) {
        let sum = assembled.remove(pos);
        let rest: Vec<Expr> = assembled;
        let Node::Sum(ts) = sum.node() else { unreachable!() };
        let expanded: Vec<Expr> = ts
            .iter()
            .map(|t| {
                let mut fs = rest.clone();
                fs.push(t.clone());
                fs.push(Expr::from_big(coeff.clone()));
                nprod(fs)
            })
            .collect();
        return nsum(expanded);
    }
    assembled.sort();
    if assembled.is_empty() {
        return Expr::from_big(coeff);
    }
    if coeff.is_one() {
        if assembled.len() == 1 {
            return assembled.pop().unwrap();
        }
        return Expr::new(Node::Prod(assembled));
    }
    let mut out = vec![Expr::from_big(coeff)];
    out.extend(assembled);
    Expr::new(Node::Prod(out))
}

pub(crate) fn npow_int(base: Expr, k: i64) -> Expr {
    if k == 0 {
        return Expr::one();
    }
    if k == 1 {
        return base;
    }
    match base.node() {
        Node::Num(r) => {
            if r.is_zero() && k < 0 {
                // Undefined; kept as an opaque atom so evaluation can fail
                // cleanly instead of the kernel panicking.
                return Expr::new(Node::IntPow(base.clone(), k));
            }
            let mut v = BigRational::one();
            let a = if k > 0 { r.clone() } else { r.recip() };
            for _ in 0..k.unsigned_abs() {
                v *= &a;
            }
            Expr::from_big(v)
        }
        Node::Prod(fs) => nprod(fs.iter().map(|f| npow_int(f.clone(), k)).collect()),
        Node::IntPow(b, j) => npow_int(b.clone(), j.saturating_mul(k)),
        Node::Pow(b, e) => npow_expr(b.clone(), nprod(vec![e.clone(), Expr::from_int(k)])),
        Node::Sum(_) if (2..=EXPAND_CAP).contains(&k) => {
            let mut acc = base.clone();
            for _ in 1..k {
                acc = expand_mul(&acc, &base);
            }
            acc
        }
        Node::Func(Func::Sin, u) if k >= 2 => {
            // sin^2 u -> 1 - cos^2 u, innermost-first (u is already normal).
            let one_minus_cos2 = nsum(vec![
                Expr::one(),
                nprod(vec![
                    Expr::from_int(-1),
                    npow_int(Expr::new(Node::Func(Func::Cos, u.clone())), 2),
                ]),
            ]);
            let mut fs = vec![npow_int(one_minus_cos2, k / 2)];
            if k % 2 == 1 {
                fs.push(base.clone());
            }
            nprod(fs)
        }
        _ => Expr::new(Node::IntPow(base, k)),
    }
}

/// Power with arbitrary normalized exponent.
pub(crate) fn npow_expr(base: Expr, expo: Expr) -> Expr {
    if expo.is_literal_zero() {
        return Expr::one();
    }
    if expo.is_literal_one() {
        return base;
    }
    if let Node::Num(r) = expo.node() {
        if r.is_integer() {
            if let Some(k) = r.to_integer().to_i64() {
                return npow_int(base, k);
            }
        }
        return npow_rat(base, r.clone());
    }
    match base.node() {
        Node::Prod(fs) => nprod(fs.iter().map(|f| npow_expr(f.clone(), expo.clone())).collect()),
        Node::IntPow(b, j) => {
            npow_expr(b.clone(), nprod(vec![expo, Expr::from_int(*j)]))
        }
        Node::Pow(b, e) => npow_expr(b.clone(), nprod(vec![e.clone(), expo])),
        _ => Expr::new(Node::Pow(base, expo)),
    }
}

/// Non-integer rational exponent.
fn npow_rat(base: Expr, r: BigRational) -> Expr {
    match base.node() {
        Node::Num(q) => {
            if let Some(folded) = fold_rational_power(q, &r) {
                return folded;
            }
            Expr::new(Node::Pow(base, Expr::from_big(r)))
        }
        Node::Prod(fs) => nprod(
            fs.iter()
                .map(|f| npow_rat(f.clone(), r.clone()))
                .collect(),
        ),
        Node::Pow(b, e) => npow_expr(
            b.clone(),
            nprod(vec![e.clone(), Expr::from_big(r)]),
        ),
        Node::Sum(_) => {
            // Normalize the radicand over a common denominator so that
            // e.g. (1 - q^2/(2E))^(1/2) and (2E - q^2)^(1/2) share atoms.
            let (num, den) = base.clear_denominators();
            if !den.is_literal_one() {
                return nprod(vec![
                    npow_rat(num, r.clone()),
                    npow_rat(den, -r),
                ]);
            }
            // Pull a common rational coefficient out of the radicand when
            // it is a perfect power (e.g. sqrt(4x+4y) -> 2 sqrt(x+y)).
            let common = common_rational_coefficient(&base);
            if !common.is_one() {
                if let Some(folded) = fold_rational_power(&common, &r) {
                    let reduced = nprod(vec![
                        Expr::from_big(common.recip()),
                        base.clone(),
                    ]);
                    return nprod(vec![folded, Expr::new(Node::Pow(reduced, Expr::from_big(r)))]);
                }
            }
            Expr::new(Node::Pow(base, Expr::from_big(r)))
        }
        _ => Expr::new(Node::Pow(base, Expr::from_big(r))),
    }
}

/// Greatest common rational coefficient of the terms of a normalized sum.
fn common_rational_coefficient(e: &Expr) -> BigRational {
    let terms = e.terms();
    let mut nums: Vec<BigInt> = Vec::new();
    let mut dens: Vec<BigInt> = Vec::new();
    for t in &terms {
        let (c, _) = t.coeff_and_monomial();
        nums.push(c.numer().abs());
        dens.push(c.denom().clone());
    }
    use num_integer::Integer;
    let gnum = nums.into_iter().fold(BigInt::zero(), |a, b| a.gcd(&b));
    let glcm = dens.into_iter().fold(BigInt::one(), |a, b| a.lcm(&b));
    if gnum.is_zero() {
        BigRational::one()
    } else {
        BigRational::new(gnum, glcm)
    }
}

/// Exact value of `q^r` when it exists in the rationals (integer roots of
/// numerator and denominator).
fn fold_rational_power(q: &BigRational, r: &BigRational) -> Option<Expr> {
    if q.is_zero() {
        return if r.is_negative() { None } else { Some(Expr::zero()) };
    }
    if q.is_negative() {
        return None;
    }
    let p = r.numer().to_i64()?;
    let root = r.denom().to_i64()?;
    let nr = nth_root_exact(q.numer(), root)?;
    let dr = nth_root_exact(q.denom(), root)?;
    let base = BigRational::new(nr, dr);
    let mut v = BigRational::one();
    let a = if p >= 0 { base } else { base.recip() };
    for _ in 0..p.unsigned_abs() {
        v *= &a;
    }
    Some(Expr::from_big(v))
}

fn nth_root_exact(n: &BigInt, k: i64) -> Option<BigInt> {
    if k <= 0 {
        return None;
    }
    if n.is_zero() || n.is_one() {
        return Some(n.clone());
    }
    let r = n.nth_root(k as u32);
    if num_traits::pow::pow(r.clone(), k as usize) == *n {
        Some(r)
    } else {
        None
    }
}

/// Term-by-term product of two sums. Terms of a normalized sum are never
/// sums themselves, so this cannot re-enter power collection on the same
/// pair (which would loop).
fn expand_mul(a: &Expr, b: &Expr) -> Expr {
    let mut out = Vec::new();
    for ta in a.terms() {
        for tb in b.terms() {
            out.push(nprod(vec![ta.clone(), tb.clone()]));
        }
    }
    nsum(out)
}

pub(crate) fn nfunc(f: Func, a: Expr) -> Expr {
    // Exact special values.
    if let Node::Num(r) = a.node() {
        if r.is_zero() {
            match f {
                Func::Sin | Func::Tan | Func::Asin => return Expr::zero(),
                Func::Cos | Func::Exp => return Expr::one(),
                Func::Log => {} // log 0 undefined, keep
            }
        }
        if r.is_one() && f == Func::Log {
            return Expr::zero();
        }
    }
    // log(exp u) = u; exp(log u) = u on the common domain.
    if let Node::Func(g, u) = a.node() {
        match (f, g) {
            (Func::Log, Func::Exp) | (Func::Exp, Func::Log) => return u.clone(),
            _ => {}
        }
    }
    // Odd/even canonicalization.
    if is_negative_form(&a) {
        let na = a.neg();
        match f {
            Func::Sin | Func::Tan | Func::Asin => {
                return nprod(vec![Expr::from_int(-1), Expr::new(Node::Func(f, na))]);
            }
            Func::Cos => return Expr::new(Node::Func(f, na)),
            _ => {}
        }
    }
    Expr::new(Node::Func(f, a))
}
