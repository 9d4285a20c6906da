//! Flat `key = value` run configuration with `[section]` headers.
//!
//! ```text
//! [problem]
//! s = 0.4
//! delta = 0.5
//! p = 2
//! ```

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use fracfold::continuation::StepPolicy;
use fracfold::{Nonlinearity, ProblemSpec, SolverOptions};

use crate::error::{HarnessError, Result};

/// Everything a run needs. Every field has a default; see [`RunConfig::default`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub s: f64,
    pub delta: f64,
    pub beta: f64,
    /// Coefficient `C` of `K = C d^{-β}`.
    pub k_coeff: f64,
    /// Power of `f(u) = c u^p`; `0` selects no nonlinearity.
    pub p: f64,
    pub coeff: f64,
    pub lambda: f64,
    pub half_width: f64,
    pub n: usize,
    pub newton_tol: f64,
    pub eigen_tol: f64,
    pub eps_stop: f64,
    pub initial_lambda: f64,
    pub initial_step: f64,
    pub growth_cap: f64,
    pub max_arc_steps: usize,
    /// Targets of the multiplicity scan as fractions of `Λ`.
    pub multiplicity_fractions: Vec<f64>,
    pub out: PathBuf,
    pub seed: u64,
    pub trials: usize,
    pub suites: Vec<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let sol = SolverOptions::default();
        let pol = StepPolicy::default();
        RunConfig {
            s: 0.4,
            delta: 0.5,
            beta: 0.0,
            k_coeff: 1.0,
            p: 2.0,
            coeff: 1.0,
            lambda: 0.25,
            half_width: 1.0,
            n: 256,
            newton_tol: sol.newton_tol,
            eigen_tol: 1e-8,
            eps_stop: sol.eps_gap,
            initial_lambda: pol.initial_lambda,
            initial_step: pol.initial_step,
            growth_cap: 1e3,
            max_arc_steps: pol.max_arc_steps,
            multiplicity_fractions: vec![0.5, 0.8, 0.95],
            out: PathBuf::from("out"),
            seed: 0,
            trials: 10,
            suites: vec!["all".to_string()],
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
    value.parse().map_err(|_| HarnessError::Config {
        line,
        msg: format!("cannot parse {key} = {value:?}"),
    })
}

fn parse_list<T: FromStr>(key: &str, value: &str, line: usize) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| parse(key, v, line))
        .collect()
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut section = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap().trim();
            if body.is_empty() {
                continue;
            }
            if let Some(name) = body.strip_prefix('[').and_then(|b| b.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| HarnessError::Config {
                line,
                msg: format!("expected key = value, got {body:?}"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            match (section.as_str(), key) {
                ("problem", "s") => cfg.s = parse(key, value, line)?,
                ("problem", "delta") => cfg.delta = parse(key, value, line)?,
                ("problem", "beta") => cfg.beta = parse(key, value, line)?,
                ("problem", "k_coeff") => cfg.k_coeff = parse(key, value, line)?,
                ("problem", "p") => cfg.p = parse(key, value, line)?,
                ("problem", "coeff") => cfg.coeff = parse(key, value, line)?,
                ("problem", "lambda") => cfg.lambda = parse(key, value, line)?,
                ("grid", "half_width") => cfg.half_width = parse(key, value, line)?,
                ("grid", "n") => cfg.n = parse(key, value, line)?,
                ("solver", "newton_tol") => cfg.newton_tol = parse(key, value, line)?,
                ("solver", "eigen_tol") => cfg.eigen_tol = parse(key, value, line)?,
                ("solver", "eps_stop") => cfg.eps_stop = parse(key, value, line)?,
                ("continuation", "initial_lambda") => cfg.initial_lambda = parse(key, value, line)?,
                ("continuation", "initial_step") => cfg.initial_step = parse(key, value, line)?,
                ("continuation", "growth_cap") => cfg.growth_cap = parse(key, value, line)?,
                ("continuation", "max_arc_steps") => cfg.max_arc_steps = parse(key, value, line)?,
                ("continuation", "multiplicity_fractions") => cfg.multiplicity_fractions = parse_list(key, value, line)?,
                ("output", "dir") => cfg.out = PathBuf::from(value),
                ("verify", "seed") => cfg.seed = parse(key, value, line)?,
                ("verify", "trials") => cfg.trials = parse(key, value, line)?,
                ("verify", "suites") => cfg.suites = parse_list(key, value, line)?,
                _ => {
                    return Err(HarnessError::Config {
                        line,
                        msg: format!("unknown key {key:?} in section [{section}]"),
                    })
                }
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Canonical text form; `parse(serialize(c)) == c`.
    pub fn serialize(&self) -> String {
        let mut t = String::new();
        let _ = writeln!(t, "[problem]");
        let _ = writeln!(t, "s = {}", self.s);
        let _ = writeln!(t, "delta = {}", self.delta);
        let _ = writeln!(t, "beta = {}", self.beta);
        let _ = writeln!(t, "k_coeff = {}", self.k_coeff);
        let _ = writeln!(t, "p = {}", self.p);
        let _ = writeln!(t, "coeff = {}", self.coeff);
        let _ = writeln!(t, "lambda = {}", self.lambda);
        let _ = writeln!(t, "\n[grid]");
        let _ = writeln!(t, "half_width = {}", self.half_width);
        let _ = writeln!(t, "n = {}", self.n);
        let _ = writeln!(t, "\n[solver]");
        let _ = writeln!(t, "newton_tol = {}", self.newton_tol);
        let _ = writeln!(t, "eigen_tol = {}", self.eigen_tol);
        let _ = writeln!(t, "eps_stop = {}", self.eps_stop);
        let _ = writeln!(t, "\n[continuation]");
        let _ = writeln!(t, "initial_lambda = {}", self.initial_lambda);
        let _ = writeln!(t, "initial_step = {}", self.initial_step);
        let _ = writeln!(t, "growth_cap = {}", self.growth_cap);
        let _ = writeln!(t, "max_arc_steps = {}", self.max_arc_steps);
        let _ = writeln!(t, "multiplicity_fractions = {}", join(&self.multiplicity_fractions));
        let _ = writeln!(t, "\n[output]");
        let _ = writeln!(t, "dir = {}", self.out.display());
        let _ = writeln!(t, "\n[verify]");
        let _ = writeln!(t, "seed = {}", self.seed);
        let _ = writeln!(t, "trials = {}", self.trials);
        let _ = writeln!(t, "suites = {}", join(&self.suites));
        t
    }

    pub fn problem(&self) -> Result<ProblemSpec> {
        let spec = ProblemSpec::new(self.s, self.delta, self.beta, self.k_coeff)?.with_lambda(self.lambda)?;
        Ok(if self.p == 0.0 {
            spec.with_nonlinearity(Nonlinearity::None)?
        } else {
            spec.with_power(self.p, self.coeff)?
        })
    }

    pub fn solver(&self) -> SolverOptions {
        SolverOptions {
            newton_tol: self.newton_tol,
            eps_gap: self.eps_stop,
            ..SolverOptions::default()
        }
    }

    pub fn policy(&self) -> StepPolicy {
        StepPolicy {
            initial_lambda: self.initial_lambda,
            initial_step: self.initial_step,
            max_arc_steps: self.max_arc_steps,
            ..StepPolicy::default()
        }
    }
}
