//! Floating-point evaluation with explicit domain guards. The guard
//! threshold is configurable so the randomized zero test can stay well away
//! from singular sets while the integrator uses a tighter fence.

use super::{Expr, Func, Node};
use num_traits::ToPrimitive;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EvalError {
    #[error("unbound symbol `{0}`")]
    Unbound(String),
    #[error("domain violation in {context}: argument {value}")]
    Domain { context: &'static str, value: f64 },
    #[error("value within {guard} of a singularity in {context}")]
    NearSingular { context: &'static str, guard: f64 },
    #[error("overflow or non-finite intermediate value")]
    NonFinite,
}

impl Expr {
    /// Evaluates with the default guard (1e-12) around singular sets.
    pub fn eval(&self, env: &BTreeMap<String, f64>) -> Result<f64, EvalError> {
        self.eval_guarded(env, 1e-12)
    }

    /// Evaluates, rejecting points within `guard` of denominators, branch
    /// points of `log`/`sqrt`/`asin`, and poles of `tan`.
    pub fn eval_guarded(&self, env: &BTreeMap<String, f64>, guard: f64) -> Result<f64, EvalError> {
        let v = ev(self, env, guard)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite)
        }
    }
}

fn ev(e: &Expr, env: &BTreeMap<String, f64>, guard: f64) -> Result<f64, EvalError> {
    match e.node() {
        Node::Num(r) => Ok(r.to_f64().ok_or(EvalError::NonFinite)?),
        Node::Sym(s) => env
            .get(s)
            .copied()
            .ok_or_else(|| EvalError::Unbound(s.clone())),
        Node::Sum(ts) => {
            let mut acc = 0.0;
            for t in ts {
                acc += ev(t, env, guard)?;
            }
            Ok(acc)
        }
        Node::Prod(fs) => {
            let mut acc = 1.0;
            for f in fs {
                acc *= ev(f, env, guard)?;
            }
            Ok(acc)
        }
        Node::IntPow(b, k) => {
            let bv = ev(b, env, guard)?;
            if *k < 0 && bv.abs() <= guard {
                return Err(EvalError::NearSingular {
                    context: "denominator",
                    guard,
                });
            }
            Ok(bv.powi(*k as i32))
        }
        Node::Pow(b, ex) => {
            let bv = ev(b, env, guard)?;
            let xv = ev(ex, env, guard)?;
            if bv < 0.0 {
                return Err(EvalError::Domain {
                    context: "fractional power of negative base",
                    value: bv,
                });
            }
            if bv.abs() <= guard && xv < 0.0 {
                return Err(EvalError::NearSingular {
                    context: "negative power",
                    guard,
                });
            }
            Ok(bv.powf(xv))
        }
        Node::Func(f, a) => {
            let av = ev(a, env, guard)?;
            match f {
                Func::Sin => Ok(av.sin()),
                Func::Cos => Ok(av.cos()),
                Func::Tan => {
                    if av.cos().abs() <= guard {
                        return Err(EvalError::NearSingular {
                            context: "tan",
                            guard,
                        });
                    }
                    Ok(av.tan())
                }
                Func::Exp => Ok(av.exp()),
                Func::Log => {
                    if av <= guard {
                        return Err(EvalError::Domain {
                            context: "log",
                            value: av,
                        });
                    }
                    Ok(av.ln())
                }
                Func::Asin => {
                    if av.abs() >= 1.0 - guard {
                        return Err(EvalError::Domain {
                            context: "asin",
                            value: av,
                        });
                    }
                    Ok(av.asin())
                }
            }
        }
    }
}
