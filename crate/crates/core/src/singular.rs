//! Nonlinear solves: the ε-regularized problem, the pure singular problem,
//! the solution map `A(λ, h)` and minimal solutions of the full problem.

use crate::error::{Error, Result};
use crate::fracops::NonlocalOperator;
use crate::linalg::{add_diagonal, sup_distance, sup_norm, SpdFactor};
use crate::problem::ProblemSpec;
use crate::weights::{self, NormReport, DEFAULT_FIT_WINDOW};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub newton_tol: f64,
    pub max_newton: usize,
    pub eps0: f64,
    pub eps_ratio: f64,
    /// Cauchy stop on the sup-gap between successive ε levels.
    pub eps_gap: f64,
    pub max_levels: usize,
    /// Arithmetic guard on `u`; never active at convergence.
    pub positivity_floor: f64,
    pub max_monotone: usize,
    pub supersolution_doublings: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            newton_tol: 1e-10,
            max_newton: 100,
            eps0: 1.0,
            eps_ratio: 0.5,
            eps_gap: 1e-6,
            max_levels: 60,
            positivity_floor: 1e-30,
            max_monotone: 5000,
            supersolution_doublings: 40,
        }
    }
}

/// Grid field with the problem it solves and its diagnostics.
#[derive(Debug, Clone)]
pub struct SolutionField {
    pub values: Vec<f64>,
    pub spec: ProblemSpec,
    pub residual: f64,
    /// Residual bound the solver certified.
    pub tolerance: f64,
    pub iterations: usize,
    pub report: Option<NormReport>,
    /// Largest `c` with `c φ_{1,s}` a discrete subsolution, when checked.
    pub subsolution_scale: Option<f64>,
}

impl SolutionField {
    pub fn sup_norm(&self) -> f64 {
        sup_norm(&self.values)
    }

    /// Cone norms against the regime weight and the boundary fit.
    pub fn attach_report(&mut self, op: &NonlocalOperator) -> Result<()> {
        let phi = &op.principal()?.vector;
        let profile = weights::build_weight_profile(phi, self.spec.s, self.spec.delta, self.spec.beta)?;
        let mut report = weights::cone_norms(&self.values, &profile)?;
        if let Ok((a, r2)) = weights::fit_boundary_exponent(&self.values, op.grid(), DEFAULT_FIT_WINDOW) {
            report.fitted_exponent = Some(a);
            report.fit_r2 = Some(r2);
        }
        self.report = Some(report);
        Ok(())
    }
}

/// `P_ε` data: `K_ε = min{1/ε, λK}`.
#[derive(Debug, Clone)]
pub struct RegularizedSpec {
    pub base: ProblemSpec,
    pub eps: f64,
    pub k_eps: Vec<f64>,
}

impl RegularizedSpec {
    pub fn new(base: &ProblemSpec, eps: f64, op: &NonlocalOperator) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::invalid(format!("epsilon must be positive, got {eps}")));
        }
        if base.has_nonlinearity() {
            return Err(Error::invalid("the regularized problem carries the singular term only"));
        }
        let k_eps = effective_weight(base, op)?
            .into_iter()
            .map(|k| k.min(1.0 / eps))
            .collect();
        Ok(RegularizedSpec {
            base: base.clone(),
            eps,
            k_eps,
        })
    }
}

fn effective_weight(spec: &ProblemSpec, op: &NonlocalOperator) -> Result<Vec<f64>> {
    let lambda = spec.lambda;
    Ok(spec.k_field(op.grid())?.into_iter().map(|k| lambda * k).collect())
}

fn check_op(spec: &ProblemSpec, op: &NonlocalOperator) -> Result<()> {
    if (spec.s - op.order()).abs() > 1e-15 {
        return Err(Error::invalid(format!(
            "spec order s = {} differs from operator order {}",
            spec.s,
            op.order()
        )));
    }
    Ok(())
}

/// Residual level below which further Newton steps only stir roundoff.
fn roundoff_floor(op: &NonlocalOperator, u: &[f64]) -> f64 {
    4e-14 * op.norm_inf() * sup_norm(u)
}

/// `‖A u - λ (K u^{-δ} + f(u))‖∞`.
pub fn residual(op: &NonlocalOperator, spec: &ProblemSpec, u: &[f64]) -> Result<f64> {
    check_op(spec, op)?;
    let k = spec.k_field(op.grid())?;
    let au = op.apply(u)?;
    Ok(au
        .iter()
        .zip(u)
        .zip(&k)
        .map(|((a, u), k)| (a - spec.lambda * (k * u.powf(-spec.delta) + spec.f(*u))).abs())
        .fold(0.0, f64::max))
}

/// Data of `(A + σI) u - w (u + ε)^{-δ} = r`.
struct SingularSystem<'a> {
    op: &'a NonlocalOperator,
    weight: &'a [f64],
    delta: f64,
    eps: f64,
    shift: f64,
    rhs: Option<&'a [f64]>,
}

impl SingularSystem<'_> {
    fn residual_vec(&self, u: &[f64]) -> Vec<f64> {
        let au = crate::linalg::matvec(self.op.matrix(), u);
        (0..u.len())
            .map(|i| {
                let r = self.rhs.map_or(0.0, |r| r[i]);
                au[i] + self.shift * u[i] - self.weight[i] * (u[i] + self.eps).powf(-self.delta) - r
            })
            .collect()
    }

    fn jacobian_diag(&self, u: &[f64]) -> Vec<f64> {
        (0..u.len())
            .map(|i| self.shift + self.delta * self.weight[i] * (u[i] + self.eps).powf(-self.delta - 1.0))
            .collect()
    }

    /// Damped Newton; the Jacobian is `A` plus a nonnegative diagonal, so
    /// it is always symmetric positive definite.
    fn solve(&self, start: Vec<f64>, opts: &SolverOptions, what: &'static str) -> Result<(Vec<f64>, f64, usize)> {
        let mut u = start;
        if u.iter().any(|v| !(*v + self.eps > opts.positivity_floor)) {
            return Err(Error::invalid(format!("{what}: starting field is not positive")));
        }
        let mut f = self.residual_vec(&u);
        let mut res = sup_norm(&f);
        for it in 0..opts.max_newton {
            let floor = opts.newton_tol.max(roundoff_floor(self.op, &u));
            if res <= floor {
                return Ok((u, res, it));
            }
            let jac = add_diagonal(self.op.matrix(), &self.jacobian_diag(&u));
            let factor = SpdFactor::new(jac)
                .ok_or_else(|| Error::Invariant(format!("{what}: Jacobian lost definiteness")))?;
            let neg: Vec<f64> = f.iter().map(|v| -v).collect();
            let du = factor.solve(&neg);
            if sup_norm(&du) <= 1e-13 * sup_norm(&u) {
                return Ok((u, res, it));
            }
            let mut t = 1.0;
            loop {
                let trial: Vec<f64> = u.iter().zip(&du).map(|(a, b)| a + t * b).collect();
                if trial.iter().all(|v| v + self.eps > opts.positivity_floor) {
                    let ft = self.residual_vec(&trial);
                    let rt = sup_norm(&ft);
                    if rt < res {
                        u = trial;
                        f = ft;
                        res = rt;
                        break;
                    }
                }
                t *= 0.5;
                if t < 1e-12 {
                    return Err(Error::NotConverged {
                        what,
                        iterations: it,
                        residual: res,
                    });
                }
            }
        }
        let floor = opts.newton_tol.max(roundoff_floor(self.op, &u));
        if res <= floor {
            return Ok((u, res, opts.max_newton));
        }
        Err(Error::NotConverged {
            what,
            iterations: opts.max_newton,
            residual: res,
        })
    }
}

fn field(values: Vec<f64>, spec: &ProblemSpec, residual: f64, tolerance: f64, iterations: usize) -> SolutionField {
    SolutionField {
        values,
        spec: spec.clone(),
        residual,
        tolerance,
        iterations,
        report: None,
        subsolution_scale: None,
    }
}

fn certified_tol(op: &NonlocalOperator, u: &[f64], opts: &SolverOptions) -> f64 {
    opts.newton_tol.max(roundoff_floor(op, u))
}

/// Solves `A u = K_ε (u + ε)^{-δ}` from the torsion-type start
/// `A u_0 = K_ε ε^{-δ}`.
pub fn solve_regularized(rspec: &RegularizedSpec, op: &NonlocalOperator, opts: &SolverOptions) -> Result<SolutionField> {
    check_op(&rspec.base, op)?;
    Error::check_len(op.len(), rspec.k_eps.len())?;
    let scale = rspec.eps.powf(-rspec.base.delta);
    let rhs: Vec<f64> = rspec.k_eps.iter().map(|k| k * scale).collect();
    let start = op.solve_dirichlet(&rhs)?;
    solve_regularized_from(rspec, op, opts, start)
}

fn solve_regularized_from(
    rspec: &RegularizedSpec,
    op: &NonlocalOperator,
    opts: &SolverOptions,
    start: Vec<f64>,
) -> Result<SolutionField> {
    let system = SingularSystem {
        op,
        weight: &rspec.k_eps,
        delta: rspec.base.delta,
        eps: rspec.eps,
        shift: 0.0,
        rhs: None,
    };
    let (u, res, it) = system.solve(start, opts, "regularized Newton")?;
    if u.iter().any(|v| *v <= 0.0) {
        return Err(Error::Invariant("regularized solution is not positive".into()));
    }
    let tol = certified_tol(op, &u, opts);
    Ok(field(u, &rspec.base, res, tol, it))
}

/// Pure singular solve `A u = λ K u^{-δ}` with weight `λK`: ε-schedule to
/// a Cauchy gap, then Newton on the unregularized system. Any nonlinearity
/// in `spec` is ignored.
pub fn solve_pure_singular(spec: &ProblemSpec, op: &NonlocalOperator, opts: &SolverOptions) -> Result<SolutionField> {
    check_op(spec, op)?;
    let mut pure = spec.clone();
    pure.nonlinearity = crate::problem::Nonlinearity::None;
    if pure.lambda == 0.0 {
        return Err(Error::invalid("pure singular problem needs lambda > 0"));
    }
    let weight = effective_weight(&pure, op)?;

    let mut eps = opts.eps0;
    let mut prev: Option<Vec<f64>> = None;
    let mut gap = f64::INFINITY;
    let mut levels = 0;
    let mut converged = false;
    while levels < opts.max_levels {
        let rspec = RegularizedSpec::new(&pure, eps, op)?;
        let sol = match &prev {
            None => solve_regularized(&rspec, op, opts)?,
            // the previous level is a subsolution of the current one
            Some(p) => solve_regularized_from(&rspec, op, opts, p.clone())?,
        };
        levels += 1;
        if let Some(p) = &prev {
            gap = sup_distance(p, &sol.values);
            if gap <= opts.eps_gap {
                prev = Some(sol.values);
                converged = true;
                break;
            }
        }
        prev = Some(sol.values);
        eps *= opts.eps_ratio;
    }
    if !converged {
        return Err(Error::ScheduleExhausted {
            regime: format!("{:?}", pure.regime()).to_uppercase(),
            levels,
            gap,
        });
    }

    let system = SingularSystem {
        op,
        weight: &weight,
        delta: pure.delta,
        eps: 0.0,
        shift: 0.0,
        rhs: None,
    };
    let (u, res, it) = system.solve(prev.unwrap(), opts, "singular Newton")?;
    if u.iter().any(|v| *v <= 0.0) {
        return Err(Error::Invariant("pure singular solution is not positive".into()));
    }
    let tol = certified_tol(op, &u, opts);
    let mut out = field(u, &pure, res, tol, levels + it);
    out.subsolution_scale = Some(check_eigen_subsolution(op, &weight, pure.delta, &out.values)?);
    out.attach_report(op)?;
    Ok(out)
}

/// Largest `c` with `c φ_{1,s}` a discrete subsolution of `A u = w u^{-δ}`,
/// after checking that `u` lies above it.
fn check_eigen_subsolution(op: &NonlocalOperator, weight: &[f64], delta: f64, u: &[f64]) -> Result<f64> {
    let pair = op.principal()?;
    let c = weight
        .iter()
        .zip(&pair.vector)
        .map(|(w, p)| (w / (pair.value * p.powf(1.0 + delta))).powf(1.0 / (1.0 + delta)))
        .fold(f64::INFINITY, f64::min);
    for (i, (v, p)) in u.iter().zip(&pair.vector).enumerate() {
        if *v < c * p * (1.0 - 1e-8) {
            return Err(Error::Invariant(format!(
                "solution falls below the eigenfunction subsolution at node {i}"
            )));
        }
    }
    Ok(c)
}

/// `λ^{1/(δ+1)} u_1`, the exact discrete solution for weight `λK`.
pub fn scale_pure_singular(u1: &SolutionField, lambda: f64, op: &NonlocalOperator) -> Result<SolutionField> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    let mut spec = u1.spec.clone();
    spec.nonlinearity = crate::problem::Nonlinearity::None;
    let factor = lambda.powf(1.0 / (spec.delta + 1.0));
    spec.lambda = u1.spec.lambda * lambda;
    let values: Vec<f64> = u1.values.iter().map(|v| factor * v).collect();
    let res = if lambda == 0.0 { 0.0 } else { residual(op, &spec, &values)? };
    let mut out = field(values, &spec, res, u1.tolerance * factor.max(1.0), u1.iterations);
    out.report = u1.report.clone().map(|mut r| {
        r.cone_norm *= factor;
        r.cone_lower *= factor;
        r
    });
    Ok(out)
}

/// `u = A(λ, h)`: the positive solution of `A u - λ K u^{-δ} = h`.
pub fn solve_a(lambda: f64, h: &[f64], spec: &ProblemSpec, op: &NonlocalOperator, opts: &SolverOptions) -> Result<SolutionField> {
    check_op(spec, op)?;
    Error::check_len(op.len(), h.len())?;
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("h is not finite"));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    let mut snap = spec.clone();
    snap.nonlinearity = crate::problem::Nonlinearity::None;
    snap.lambda = lambda;
    if lambda == 0.0 {
        let u = op.solve_dirichlet(h)?;
        let au = op.apply(&u)?;
        let res = sup_distance(&au, h);
        let tol = certified_tol(op, &u, opts);
        return Ok(field(u, &snap, res, tol, 1));
    }
    let mut unit = snap.clone();
    unit.lambda = 1.0;
    let u1 = solve_pure_singular(&unit, op, opts)?;
    let sub = scale_pure_singular(&u1, lambda, op)?.values;
    let weight = effective_weight(&snap, op)?;
    let system = SingularSystem {
        op,
        weight: &weight,
        delta: snap.delta,
        eps: 0.0,
        shift: 0.0,
        rhs: Some(h),
    };
    let (u, res, it) = system.solve(sub.clone(), opts, "solution map Newton").map_err(|e| match e {
        Error::NotConverged { iterations, residual, .. } => Error::BracketViolation {
            iterate: iterations,
            detail: format!("positivity could not be kept (residual {residual:.3e})"),
        },
        other => other,
    })?;
    if let Some(i) = u.iter().position(|v| *v <= 0.0) {
        return Err(Error::BracketViolation {
            iterate: it,
            detail: format!("solution not positive at node {i}"),
        });
    }
    let m = h.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if h.iter().all(|v| *v >= 0.0) {
        // sub ≤ u ≤ sub + M U
        let torsion = op.torsion()?;
        let slack = 1e-9 * sup_norm(&u);
        for i in 0..u.len() {
            if u[i] < sub[i] - slack || u[i] > sub[i] + m * torsion[i] + slack {
                return Err(Error::BracketViolation {
                    iterate: it,
                    detail: format!("node {i} leaves the sub/supersolution bracket"),
                });
            }
        }
    }
    let tol = certified_tol(op, &u, opts);
    Ok(field(u, &snap, res, tol, it))
}

/// Shifted monotone iteration between an ordered sub/supersolution pair.
pub fn monotone_iterate(
    lambda: f64,
    sub: &SolutionField,
    sup: &SolutionField,
    op: &NonlocalOperator,
    opts: &SolverOptions,
) -> Result<SolutionField> {
    let base = if sub.spec.has_nonlinearity() { &sub.spec } else { &sup.spec };
    let spec = base.clone().with_lambda(lambda)?;
    check_op(&spec, op)?;
    Error::check_len(op.len(), sub.values.len())?;
    Error::check_len(op.len(), sup.values.len())?;
    for i in 0..op.len() {
        if sub.values[i] > sup.values[i] {
            return Err(Error::BracketViolation {
                iterate: 0,
                detail: format!("subsolution exceeds supersolution at node {i}"),
            });
        }
    }
    let upper = sup_norm(&sup.values);
    let c = spec.max_derivative_on(upper);
    let weight = effective_weight(&spec, op)?;
    let slack = |u: &[f64]| 1e-10 * sup_norm(u).max(1.0);

    let mut u = sub.values.clone();
    for iterate in 1..=opts.max_monotone {
        let rhs: Vec<f64> = u.iter().map(|v| lambda * (c * v + spec.f(*v))).collect();
        let system = SingularSystem {
            op,
            weight: &weight,
            delta: spec.delta,
            eps: 0.0,
            shift: lambda * c,
            rhs: Some(&rhs),
        };
        let (next, _, _) = system.solve(u.clone(), opts, "monotone inner Newton")?;
        let sl = slack(&next);
        for i in 0..next.len() {
            if next[i] < u[i] - sl {
                return Err(Error::BracketViolation {
                    iterate,
                    detail: format!("iterate decreased at node {i}"),
                });
            }
            if next[i] > sup.values[i] + sl {
                return Err(Error::BracketViolation {
                    iterate,
                    detail: format!("iterate exceeded the supersolution at node {i}"),
                });
            }
        }
        u = next;
        let res = residual(op, &spec, &u)?;
        let tol = certified_tol(op, &u, opts);
        if res <= tol {
            let mut out = field(u, &spec, res, tol, iterate);
            out.attach_report(op)?;
            return Ok(out);
        }
    }
    Err(Error::NotConverged {
        what: "monotone iteration",
        iterations: opts.max_monotone,
        residual: residual(op, &spec, &u)?,
    })
}

/// Supersolution `sub + M U` with `M` doubled from
/// `max(1, λ max f(2 max sub))`; `None` when no admissible `M` is found.
pub fn find_supersolution(
    lambda: f64,
    sub: &SolutionField,
    spec: &ProblemSpec,
    op: &NonlocalOperator,
    opts: &SolverOptions,
) -> Result<Option<SolutionField>> {
    let mut snap = spec.clone();
    snap.lambda = lambda;
    let torsion = op.torsion()?;
    let k = spec.k_field(op.grid())?;
    let top = sup_norm(&sub.values);
    let mut m = (lambda * spec.f(2.0 * top)).max(1.0);
    for _ in 0..=opts.supersolution_doublings {
        let bar: Vec<f64> = sub.values.iter().zip(&torsion).map(|(a, t)| a + m * t).collect();
        let ab = op.apply(&bar)?;
        let ok = (0..bar.len()).all(|i| ab[i] >= lambda * (k[i] * bar[i].powf(-spec.delta) + spec.f(bar[i])));
        if ok {
            let res = residual(op, &snap, &bar)?;
            return Ok(Some(field(bar, &snap, res, f64::INFINITY, 0)));
        }
        m *= 2.0;
    }
    Ok(None)
}

/// Minimal solution `u_λ`, from the scaled pure singular subsolution.
///
/// With an admissible supersolution the shifted monotone iteration is
/// used; otherwise Newton is run from the subsolution, which stays below
/// the minimal solution as long as the linearization is positive definite.
pub fn solve_min(lambda: f64, spec: &ProblemSpec, op: &NonlocalOperator, opts: &SolverOptions) -> Result<SolutionField> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
    }
    check_op(spec, op)?;
    let mut unit = spec.clone();
    unit.lambda = 1.0;
    let u1 = solve_pure_singular(&unit, op, opts)?;
    let mut sub = scale_pure_singular(&u1, lambda, op)?;
    sub.spec.nonlinearity = spec.nonlinearity.clone();
    if !spec.has_nonlinearity() {
        let mut out = sub;
        out.attach_report(op)?;
        return Ok(out);
    }
    match find_supersolution(lambda, &sub, spec, op, opts)? {
        Some(sup) => monotone_iterate(lambda, &sub, &sup, op, opts),
        None => solve_min_from(lambda, &sub.values, spec, op, opts),
    }
}

/// Newton from a subsolution of the problem at `λ`. Iterates increase and
/// stay below the minimal solution; loss of definiteness of the
/// linearization or blow-up means `λ` lies beyond the fold.
pub fn solve_min_from(
    lambda: f64,
    start: &[f64],
    spec: &ProblemSpec,
    op: &NonlocalOperator,
    opts: &SolverOptions,
) -> Result<SolutionField> {
    check_op(spec, op)?;
    Error::check_len(op.len(), start.len())?;
    let snap = spec.clone().with_lambda(lambda)?;
    let k = spec.k_field(op.grid())?;
    let n = start.len();
    let mut u = start.to_vec();
    let residual_vec = |u: &[f64]| -> Result<Vec<f64>> {
        let au = op.apply(u)?;
        Ok((0..n)
            .map(|i| au[i] - lambda * (k[i] * u[i].powf(-spec.delta) + spec.f(u[i])))
            .collect())
    };
    let mut f = residual_vec(&u)?;
    let slack = 1e-9 * op.norm_inf() * sup_norm(&u);
    if f.iter().any(|v| *v > slack) {
        return Err(Error::invalid("starting field is not a subsolution"));
    }
    for it in 0..opts.max_newton {
        let res = sup_norm(&f);
        let tol = certified_tol(op, &u, opts);
        if res <= tol {
            let mut out = field(u, &snap, res, tol, it);
            out.attach_report(op)?;
            return Ok(out);
        }
        let diag: Vec<f64> = (0..n)
            .map(|i| lambda * (spec.delta * k[i] * u[i].powf(-spec.delta - 1.0) - spec.df(u[i])))
            .collect();
        let factor = SpdFactor::new(add_diagonal(op.matrix(), &diag)).ok_or_else(|| Error::NoSupersolution {
            lambda,
            reason: "linearization is not positive definite".into(),
        })?;
        let neg: Vec<f64> = f.iter().map(|v| -v).collect();
        let du = factor.solve(&neg);
        let step = sup_norm(&du);
        u.iter_mut().zip(&du).for_each(|(a, b)| *a += b);
        let top = sup_norm(&u);
        if !top.is_finite() || top > 1e8 {
            return Err(Error::NoSupersolution {
                lambda,
                reason: "iterates blow up".into(),
            });
        }
        f = residual_vec(&u)?;
        if step <= 1e-13 * top {
            let res = sup_norm(&f);
            let tol = certified_tol(op, &u, opts).max(res);
            let mut out = field(u, &snap, res, tol, it + 1);
            out.attach_report(op)?;
            return Ok(out);
        }
    }
    Err(Error::NotConverged {
        what: "minimal-solution Newton",
        iterations: opts.max_newton,
        residual: sup_norm(&f),
    })
}
