//! Two-tier zero test.
//!
//! Tier 1 is exact: normalize, then clear denominators and normalize the
//! numerator; a literal `0` proves the expression vanishes identically on
//! its domain. Tier 2 evaluates at seeded pseudo-random rational points
//! (avoiding singular sets and respecting declared domain assumptions):
//! a value above [`NONZERO_EPS`] proves non-vanishing with a witness, and
//! uniformly tiny values yield the explicit `probably_zero` verdict, which
//! is never silently upgraded.

use super::{Expr, EvalError};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeMap;
use thiserror::Error;

/// Default seed for the sampler (spelled out in the CLI docs).
pub const DEFAULT_SEED: u64 = 0x6D65_6368;
/// Default number of sample points.
pub const DEFAULT_POINTS: usize = 16;
/// |value| above this proves the expression nonzero at the witness point.
pub const NONZERO_EPS: f64 = 1e-9;
/// |value| below this at every sample point reads `probably_zero`.
pub const ZERO_EPS: f64 = 1e-12;
/// Guard distance kept from singular sets while sampling.
const SAMPLE_GUARD: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroStatus {
    ProvedZero,
    ProvedNonzero,
    ProbablyZero,
}

#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    /// Sample point, as `symbol = p/q` pairs (printed exactly).
    pub point: Vec<(String, String)>,
    /// Value of the expression there.
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ZeroVerdict {
    pub status: ZeroStatus,
    pub witness: Option<Witness>,
}

impl ZeroVerdict {
    pub fn proved_zero() -> Self {
        ZeroVerdict {
            status: ZeroStatus::ProvedZero,
            witness: None,
        }
    }

    pub fn is_zeroish(&self) -> bool {
        self.status != ZeroStatus::ProvedNonzero
    }

    pub fn is_proved_zero(&self) -> bool {
        self.status == ZeroStatus::ProvedZero
    }
}

#[derive(Debug, Clone, Error)]
pub enum ZeroError {
    #[error("evaluation domain exhausted: no valid sample point in {draws} draws")]
    EvaluationDomainExhausted { draws: usize },
}

/// Declared domain assumption attached to a chart or a problem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Assumption {
    /// Expression stays away from zero.
    Nonzero(Expr),
    /// Expression is strictly positive.
    Positive(Expr),
}

impl Assumption {
    fn holds(&self, env: &BTreeMap<String, f64>) -> bool {
        match self {
            Assumption::Nonzero(e) => match e.eval_guarded(env, SAMPLE_GUARD) {
                Ok(v) => v.abs() > 1e-3,
                Err(_) => false,
            },
            Assumption::Positive(e) => match e.eval_guarded(env, SAMPLE_GUARD) {
                Ok(v) => v > 1e-3,
                Err(_) => false,
            },
        }
    }
}

/// Seeded rational-point sampler. Passed explicitly; never global.
#[derive(Debug, Clone)]
pub struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Sampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// A random nonzero rational with magnitude in roughly [1/13, 3].
    pub fn rational(&mut self) -> BigRational {
        let mut num: i64 = 0;
        while num == 0 {
            num = self.rng.gen_range(-20..=20);
        }
        let den: i64 = self.rng.gen_range(7..=13);
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    pub fn point(&mut self, symbols: &[String]) -> BTreeMap<String, BigRational> {
        symbols
            .iter()
            .map(|s| (s.clone(), self.rational()))
            .collect()
    }
}

/// Context for zero tests: seed, sample count, and domain assumptions.
/// Cheap to clone; operations derive fresh samplers from the seed so that
/// results are deterministic for a given configuration.
#[derive(Debug, Clone)]
pub struct ZeroCtx {
    pub seed: u64,
    pub n_points: usize,
    pub assumptions: Vec<Assumption>,
}

impl Default for ZeroCtx {
    fn default() -> Self {
        ZeroCtx {
            seed: DEFAULT_SEED,
            n_points: DEFAULT_POINTS,
            assumptions: Vec::new(),
        }
    }
}

impl ZeroCtx {
    pub fn new(seed: u64, n_points: usize) -> Self {
        ZeroCtx {
            seed,
            n_points: n_points.max(1),
            assumptions: Vec::new(),
        }
    }

    pub fn with_assumptions(&self, extra: impl IntoIterator<Item = Assumption>) -> Self {
        let mut c = self.clone();
        c.assumptions.extend(extra);
        c
    }

    /// Two-tier zero test.
    pub fn is_zero(&self, e: &Expr) -> Result<ZeroVerdict, ZeroError> {
        let n = e.normalize();
        if n.is_literal_zero() {
            return Ok(ZeroVerdict::proved_zero());
        }
        // A nonzero rational constant is exactly nonzero.
        if let Some(r) = n.as_rational() {
            return Ok(ZeroVerdict {
                status: ZeroStatus::ProvedNonzero,
                witness: Some(Witness {
                    point: vec![],
                    value: r.to_f64().unwrap_or(f64::NAN),
                }),
            });
        }
        let (num, _den) = n.clear_denominators();
        if num.is_literal_zero() {
            return Ok(ZeroVerdict::proved_zero());
        }
        self.sample_verdict(&n)
    }

    /// Convenience: treat domain exhaustion as `probably_zero` is never
    /// acceptable, so this propagates instead; most call sites use `?`.
    pub fn sample_verdict(&self, e: &Expr) -> Result<ZeroVerdict, ZeroError> {
        // Bind the assumption symbols as well, or points could never
        // satisfy an assumption over a symbol absent from `e`.
        let mut all = e.symbols();
        for a in &self.assumptions {
            match a {
                Assumption::Nonzero(g) | Assumption::Positive(g) => all.extend(g.symbols()),
            }
        }
        let symbols: Vec<String> = all.into_iter().collect();
        let mut sampler = Sampler::new(self.seed);
        let mut valid = 0usize;
        let mut draws = 0usize;
        let max_draws = 100 * self.n_points;
        let mut max_abs = 0.0f64;
        while valid < self.n_points && draws < max_draws {
            draws += 1;
            let pt = sampler.point(&symbols);
            let env: BTreeMap<String, f64> = pt
                .iter()
                .map(|(k, v)| (k.clone(), v.to_f64().unwrap()))
                .collect();
            if !self.assumptions.iter().all(|a| a.holds(&env)) {
                continue;
            }
            let v = match e.eval_guarded(&env, SAMPLE_GUARD) {
                Ok(v) => v,
                Err(EvalError::Unbound(_)) => {
                    // Should not happen (we bind every symbol), but bail
                    // deterministically rather than loop.
                    return Err(ZeroError::EvaluationDomainExhausted { draws });
                }
                Err(_) => continue,
            };
            valid += 1;
            if v.abs() > NONZERO_EPS {
                return Ok(ZeroVerdict {
                    status: ZeroStatus::ProvedNonzero,
                    witness: Some(Witness {
                        point: pt
                            .iter()
                            .map(|(k, r)| (k.clone(), r.to_string()))
                            .collect(),
                        value: v,
                    }),
                });
            }
            max_abs = max_abs.max(v.abs());
        }
        if valid < self.n_points {
            return Err(ZeroError::EvaluationDomainExhausted { draws });
        }
        let _ = max_abs < ZERO_EPS; // values in the gray band still read probably_zero
        Ok(ZeroVerdict {
            status: ZeroStatus::ProbablyZero,
            witness: None,
        })
    }
}
