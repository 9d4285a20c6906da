//! Continuous parameters of `(-Δ)^s u = λ (K u^{-δ} + f(u))`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::weights::{self, Regime};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Declared structural properties of a nonlinearity. Branch tracing and
/// multiplicity need all of them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Compliance {
    /// `f(0) = 0`.
    pub vanishes_at_zero: bool,
    /// `f ≥ 0` and nondecreasing on `(0, ∞)`.
    pub monotone: bool,
    /// `liminf t f'(t) / f(t) > 1`.
    pub superlinear: bool,
    /// `f(t) ≤ c (1 + t^p)` for a subcritical `p`.
    pub power_growth: bool,
    /// `f(t) ≥ c t^q` for large `t`, some `q > 1`.
    pub power_lower_bound: bool,
}

impl Compliance {
    pub fn all(&self) -> bool {
        self.vanishes_at_zero && self.monotone && self.superlinear && self.power_growth && self.power_lower_bound
    }
}

#[derive(Clone)]
pub struct CustomNonlinearity {
    pub f: ScalarFn,
    pub df: ScalarFn,
    pub d2f: ScalarFn,
    pub compliance: Compliance,
}

impl fmt::Debug for CustomNonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomNonlinearity")
            .field("compliance", &self.compliance)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum Nonlinearity {
    None,
    /// `f(t) = coeff · t^p`
    Power { p: f64, coeff: f64 },
    Custom(CustomNonlinearity),
}

/// Structural properties found for a nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypothesisAudit {
    pub compliance: Compliance,
    /// Upper growth exponent, when known.
    pub p: Option<f64>,
    /// Lower growth exponent, when known.
    pub q: Option<f64>,
    /// `liminf t f'(t) / f(t)` as `t → ∞`, when known.
    pub superlinearity: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub s: f64,
    pub delta: f64,
    pub beta: f64,
    /// `C` in `K = C d^{-β}`.
    pub k_coeff: f64,
    pub nonlinearity: Nonlinearity,
    pub lambda: f64,
}

impl ProblemSpec {
    /// Pure singular problem with `λ = 1` and no nonlinearity.
    pub fn new(s: f64, delta: f64, beta: f64, k_coeff: f64) -> Result<Self> {
        let spec = ProblemSpec {
            s,
            delta,
            beta,
            k_coeff,
            nonlinearity: Nonlinearity::None,
            lambda: 1.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_power(mut self, p: f64, coeff: f64) -> Result<Self> {
        self.nonlinearity = Nonlinearity::Power { p, coeff };
        self.validate()?;
        Ok(self)
    }

    pub fn with_nonlinearity(mut self, nonlinearity: Nonlinearity) -> Result<Self> {
        self.nonlinearity = nonlinearity;
        self.validate()?;
        Ok(self)
    }

    pub fn with_lambda(mut self, lambda: f64) -> Result<Self> {
        self.lambda = lambda;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(Error::invalid(format!("s must lie in (0, 1), got {}", self.s)));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::invalid(format!("delta must be finite and >= 0, got {}", self.delta)));
        }
        if !(self.beta >= 0.0 && self.beta < 2.0 * self.s) {
            return Err(Error::invalid(format!(
                "beta must lie in [0, 2s) = [0, {}), got {}; no solution exists for beta >= 2s",
                2.0 * self.s,
                self.beta
            )));
        }
        if !(self.k_coeff > 0.0 && self.k_coeff.is_finite()) {
            return Err(Error::invalid(format!("K coefficient must be positive, got {}", self.k_coeff)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        if let Nonlinearity::Power { p, coeff } = self.nonlinearity {
            if !(p > 1.0 && p.is_finite()) {
                return Err(Error::invalid(format!("power p must exceed 1, got {p}")));
            }
            if !(coeff > 0.0 && coeff.is_finite()) {
                return Err(Error::invalid(format!("power coefficient must be positive, got {coeff}")));
            }
        }
        Ok(())
    }

    pub fn has_nonlinearity(&self) -> bool {
        !matches!(self.nonlinearity, Nonlinearity::None)
    }

    pub fn power(&self) -> Option<f64> {
        match self.nonlinearity {
            Nonlinearity::Power { p, .. } => Some(p),
            _ => None,
        }
    }

    pub fn f(&self, t: f64) -> f64 {
        match &self.nonlinearity {
            Nonlinearity::None => 0.0,
            Nonlinearity::Power { p, coeff } => coeff * t.max(0.0).powf(*p),
            Nonlinearity::Custom(c) => (c.f)(t),
        }
    }

    pub fn df(&self, t: f64) -> f64 {
        match &self.nonlinearity {
            Nonlinearity::None => 0.0,
            Nonlinearity::Power { p, coeff } => coeff * p * t.max(0.0).powf(p - 1.0),
            Nonlinearity::Custom(c) => (c.df)(t),
        }
    }

    pub fn d2f(&self, t: f64) -> f64 {
        match &self.nonlinearity {
            Nonlinearity::None => 0.0,
            Nonlinearity::Power { p, coeff } => coeff * p * (p - 1.0) * t.max(0.0).powf(p - 2.0),
            Nonlinearity::Custom(c) => (c.d2f)(t),
        }
    }

    /// `max f'` over `[0, t_max]`; exact for power laws, sampled otherwise.
    pub fn max_derivative_on(&self, t_max: f64) -> f64 {
        match &self.nonlinearity {
            Nonlinearity::None => 0.0,
            Nonlinearity::Power { .. } => self.df(t_max),
            Nonlinearity::Custom(c) => (0..=512)
                .map(|k| (c.df)(t_max * k as f64 / 512.0))
                .fold(0.0, f64::max),
        }
    }

    pub fn audit(&self) -> HypothesisAudit {
        match &self.nonlinearity {
            Nonlinearity::None => HypothesisAudit {
                compliance: Compliance::default(),
                p: None,
                q: None,
                superlinearity: None,
            },
            Nonlinearity::Power { p, coeff } => {
                let f = |t: f64| coeff * t.powf(*p);
                let df = |t: f64| coeff * p * t.powf(p - 1.0);
                let vanishes_at_zero = f(0.0) == 0.0;
                // nonnegative and nondecreasing on a sample of (0, ∞)
                let samples: Vec<f64> = (0..64).map(|k| 1e-4 * 1.4f64.powi(k)).collect();
                let monotone = samples.iter().all(|t| f(*t) >= 0.0 && df(*t) >= 0.0);
                let ratio = samples.iter().map(|t| t * df(*t) / f(*t)).fold(f64::INFINITY, f64::min);
                HypothesisAudit {
                    compliance: Compliance {
                        vanishes_at_zero,
                        monotone,
                        superlinear: ratio > 1.0,
                        power_growth: *p > 1.0,
                        power_lower_bound: *p > 1.0,
                    },
                    p: Some(*p),
                    q: Some(*p),
                    superlinearity: Some(ratio),
                }
            }
            Nonlinearity::Custom(c) => HypothesisAudit {
                compliance: c.compliance,
                p: None,
                q: None,
                superlinearity: None,
            },
        }
    }

    /// `2β + δ(2s - 1) < 1 + 2s`: the energy `∫ K u^{1-δ}` is finite.
    pub fn hs_flag(&self) -> bool {
        2.0 * self.beta + self.delta * (2.0 * self.s - 1.0) < 1.0 + 2.0 * self.s
    }

    pub fn regime(&self) -> Regime {
        weights::classify_regime(self.s, self.delta, self.beta)
    }

    /// `(1 + 2s) / (1 - 2s)` in one dimension; unbounded for `s >= 1/2`.
    pub fn critical_power(&self) -> f64 {
        if self.s < 0.5 {
            (1.0 + 2.0 * self.s) / (1.0 - 2.0 * self.s)
        } else {
            f64::INFINITY
        }
    }

    /// Rejects a power nonlinearity at or above the critical exponent.
    pub fn require_subcritical(&self) -> Result<()> {
        if let Some(p) = self.power() {
            let pc = self.critical_power();
            if p >= pc * (1.0 - 1e-12) {
                return Err(Error::invalid(format!(
                    "power p = {p} is not subcritical (needs p < {pc})"
                )));
            }
        }
        if let Nonlinearity::Custom(c) = &self.nonlinearity {
            if !c.compliance.all() {
                return Err(Error::invalid("custom nonlinearity does not declare every structural property"));
            }
        }
        Ok(())
    }

    /// `K(x_i) = C d(x_i)^{-β}`.
    pub fn k_field(&self, grid: &Grid) -> Result<Vec<f64>> {
        weights::weight_k(grid, self.s, self.beta, self.k_coeff)
    }
}
