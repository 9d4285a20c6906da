//! Minimal-branch tracing, pseudo-arclength continuation around the fold,
//! second solutions, the upper tail and the small-λ uniqueness probe.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fracops::NonlocalOperator;
use crate::linalg::{self, add_diagonal, sup_distance, sup_norm, LuFactor, Matrix};
use crate::linearization::{fredholm_monitor, lambda1};
use crate::problem::{Nonlinearity, ProblemSpec};
use crate::singular::{residual, solve_min, solve_min_from, SolutionField, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Segment {
    Minimal,
    Fold,
    Upper,
}

#[derive(Debug, Clone)]
pub struct BranchPoint {
    pub lambda: f64,
    pub solution: SolutionField,
    pub sup_norm: f64,
    pub lambda1: f64,
    pub arclength: f64,
    pub monitor: f64,
    pub residual: f64,
    pub segment: Segment,
    /// Unit tangent `(u̇, λ̇)` in the weighted norm; empty on the minimal
    /// segment before fold rounding.
    pub tangent: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct FoldInfo {
    pub lambda_estimate: f64,
    pub bracket: (f64, f64),
    /// `λ''` of the quadratic fit of `λ` against arclength at the fold.
    pub quadratic_coeff: f64,
    /// `λ'` of the same fit, in units where the tangent has unit norm.
    pub normalized_slope: f64,
    /// Maximum of the fitted parabola.
    pub lambda_max: f64,
    /// RMS residual of the fit relative to `|λ''| Δσ²`.
    pub fit_residual: f64,
    pub u_at_fold: SolutionField,
}

#[derive(Debug, Clone, Default)]
pub struct Branch {
    pub points: Vec<BranchPoint>,
    /// `(λ_ok, λ_fail)` from the minimal trace.
    pub bracket: Option<(f64, f64)>,
    pub fold: Option<FoldInfo>,
    /// Weights `(w_u, w_λ)` of the arclength norm.
    pub weights: Option<(f64, f64)>,
}

impl Branch {
    pub fn minimal(&self) -> impl Iterator<Item = &BranchPoint> {
        self.points.iter().filter(|p| p.segment == Segment::Minimal)
    }

    pub fn upper(&self) -> impl Iterator<Item = &BranchPoint> {
        self.points.iter().filter(|p| p.segment == Segment::Upper)
    }

    /// Midpoint of the minimal-trace bracket.
    pub fn lambda_estimate(&self) -> Option<f64> {
        self.bracket.map(|(a, b)| 0.5 * (a + b))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepPolicy {
    pub initial_lambda: f64,
    pub initial_step: f64,
    pub growth: f64,
    /// Stop once the step falls below this fraction of `λ`.
    pub min_relative_step: f64,
    /// Stop once `Λ₁` drops below this value.
    pub lambda1_threshold: f64,
    /// Relative width of the final bracket on `Λ`.
    pub bracket_relative: f64,
    pub max_samples: usize,
    /// Compute `Λ₁` and the monitor at every sample.
    pub diagnostics: bool,
    /// Arclength step of the local samples used for the fold fit.
    pub fold_fit_step: f64,
    pub initial_arc_step: f64,
    pub max_arc_step: f64,
    pub min_arc_step: f64,
    /// Fold rounding stops once `λ` falls below this fraction of `Λ`.
    pub upper_stop_fraction: f64,
    pub max_arc_steps: usize,
}

impl Default for StepPolicy {
    fn default() -> Self {
        StepPolicy {
            initial_lambda: 0.01,
            initial_step: 0.05,
            growth: 1.5,
            min_relative_step: 1e-6,
            lambda1_threshold: 0.0,
            bracket_relative: 1e-3,
            max_samples: 400,
            diagnostics: true,
            fold_fit_step: 0.005,
            initial_arc_step: 0.01,
            max_arc_step: 0.25,
            min_arc_step: 1e-8,
            upper_stop_fraction: 0.3,
            max_arc_steps: 400,
        }
    }
}

fn require_nonlinearity(spec: &ProblemSpec) -> Result<()> {
    match &spec.nonlinearity {
        Nonlinearity::Power { .. } => Ok(()),
        Nonlinearity::Custom(c) if c.compliance.all() => Ok(()),
        Nonlinearity::Custom(_) => Err(Error::invalid("custom nonlinearity does not declare every structural property")),
        Nonlinearity::None => Err(Error::invalid("branch tracing needs a superlinear nonlinearity")),
    }
}

fn diagnostics(lambda: f64, u: &[f64], op: &NonlocalOperator, spec: &ProblemSpec, on: bool) -> Result<(f64, f64)> {
    if !on {
        return Ok((f64::NAN, f64::NAN));
    }
    let l1 = lambda1(lambda, u, op, spec)?.pair.value;
    let m = fredholm_monitor(lambda, u, op, spec)?;
    Ok((l1, m))
}

fn minimal_point(sol: SolutionField, op: &NonlocalOperator, spec: &ProblemSpec, on: bool) -> Result<BranchPoint> {
    let lambda = sol.spec.lambda;
    let (l1, monitor) = diagnostics(lambda, &sol.values, op, spec, on)?;
    Ok(BranchPoint {
        lambda,
        sup_norm: sol.sup_norm(),
        lambda1: l1,
        arclength: 0.0,
        monitor,
        residual: sol.residual,
        segment: Segment::Minimal,
        tangent: Vec::new(),
        solution: sol,
    })
}

/// Increasing-λ samples of the minimal branch with a bracket on `Λ`.
///
/// Each sample warm-starts from the previous one, which is a subsolution
/// at the larger λ. Failed steps are halved and tighten the bracket.
pub fn trace_minimal(spec: &ProblemSpec, op: &NonlocalOperator, policy: &StepPolicy, opts: &SolverOptions) -> Result<Branch> {
    require_nonlinearity(spec)?;
    let first = solve_min(policy.initial_lambda, spec, op, opts)?;
    let mut points = vec![minimal_point(first, op, spec, policy.diagnostics)?];
    let mut step = policy.initial_step;
    let mut fail: Option<f64> = None;

    while points.len() < policy.max_samples {
        let last = points.last().unwrap();
        let lam = last.lambda;
        if step < policy.min_relative_step * lam {
            break;
        }
        if let Some(hi) = fail {
            if (hi - lam) / lam <= policy.bracket_relative {
                break;
            }
        }
        if policy.diagnostics && last.lambda1 < policy.lambda1_threshold {
            break;
        }
        let mut target = lam + step;
        if let Some(hi) = fail {
            if target >= hi {
                step = 0.5 * (hi - lam);
                target = lam + step;
            }
        }
        match solve_min_from(target, &last.solution.values, spec, op, opts) {
            Ok(sol) => {
                let quick = sol.iterations <= 4;
                points.push(minimal_point(sol, op, spec, policy.diagnostics)?);
                if quick && fail.is_none() {
                    step *= policy.growth;
                }
            }
            Err(Error::NoSupersolution { .. }) | Err(Error::NotConverged { .. }) => {
                fail = Some(fail.map_or(target, |f: f64| f.min(target)));
                step *= 0.5;
            }
            Err(e) => return Err(e),
        }
    }

    let lo = points.last().unwrap().lambda;
    let hi = match fail {
        Some(h) => h,
        None => probe_failure(lo, &points.last().unwrap().solution.values, spec, op, policy, opts)?,
    };
    let mut branch = Branch {
        points,
        bracket: Some((lo, hi)),
        fold: None,
        weights: None,
    };
    assign_weights(&mut branch);
    Ok(branch)
}

/// First failing λ above `lo`, scanning geometrically.
fn probe_failure(lo: f64, u: &[f64], spec: &ProblemSpec, op: &NonlocalOperator, policy: &StepPolicy, opts: &SolverOptions) -> Result<f64> {
    let mut rel = policy.bracket_relative;
    for _ in 0..60 {
        let target = lo * (1.0 + rel);
        if solve_min_from(target, u, spec, op, opts).is_err() {
            return Ok(target);
        }
        rel *= 2.0;
    }
    Err(Error::Continuation("no failing lambda found above the minimal trace".into()))
}

fn assign_weights(branch: &mut Branch) {
    let last = branch.points.last().unwrap();
    let n = last.solution.values.len() as f64;
    let w_u = 1.0 / (last.sup_norm * last.sup_norm * n);
    let w_l = 1.0 / (last.lambda * last.lambda);
    branch.weights = Some((w_u, w_l));
    let mut arc = 0.0;
    for i in 1..branch.points.len() {
        let (a, b) = (&branch.points[i - 1], &branch.points[i]);
        let du: f64 = a
            .solution
            .values
            .iter()
            .zip(&b.solution.values)
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        arc += (w_u * du + w_l * (a.lambda - b.lambda).powi(2)).sqrt();
        branch.points[i].arclength = arc;
    }
}

/// The extended system `F(u, λ) = A u - λ (K u^{-δ} + f(u))` with its
/// derivatives and the weighted arclength constraint.
struct Extended<'a> {
    op: &'a NonlocalOperator,
    spec: &'a ProblemSpec,
    k: Vec<f64>,
    w_u: f64,
    w_l: f64,
    opts: &'a SolverOptions,
}

impl<'a> Extended<'a> {
    fn new(op: &'a NonlocalOperator, spec: &'a ProblemSpec, weights: (f64, f64), opts: &'a SolverOptions) -> Result<Self> {
        Ok(Extended {
            op,
            spec,
            k: spec.k_field(op.grid())?,
            w_u: weights.0,
            w_l: weights.1,
            opts,
        })
    }

    fn n(&self) -> usize {
        self.k.len()
    }

    fn g(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(&self.k)
            .map(|(u, k)| k * u.powf(-self.spec.delta) + self.spec.f(*u))
            .collect()
    }

    fn residual(&self, u: &[f64], lambda: f64) -> Vec<f64> {
        let au = linalg::matvec(self.op.matrix(), u);
        let g = self.g(u);
        au.iter().zip(&g).map(|(a, g)| a - lambda * g).collect()
    }

    fn jacobian(&self, u: &[f64], lambda: f64) -> Matrix {
        let d = self.spec.delta;
        let pot: Vec<f64> = u
            .iter()
            .zip(&self.k)
            .map(|(u, k)| lambda * (d * k * u.powf(-d - 1.0) - self.spec.df(*u)))
            .collect();
        add_diagonal(self.op.matrix(), &pot)
    }

    fn bordered(&self, u: &[f64], lambda: f64, t: &[f64]) -> Matrix {
        let n = self.n();
        let j = self.jacobian(u, lambda);
        let g = self.g(u);
        let mut m = Matrix::zeros(n + 1, n + 1);
        m.view_mut((0, 0), (n, n)).copy_from(&j);
        for i in 0..n {
            m[(i, n)] = -g[i];
            m[(n, i)] = self.w_u * t[i];
        }
        m[(n, n)] = self.w_l * t[n];
        m
    }

    fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        let n = self.n();
        self.w_u * a[..n].iter().zip(&b[..n]).map(|(x, y)| x * y).sum::<f64>() + self.w_l * a[n] * b[n]
    }

    fn normalize(&self, t: &mut [f64]) {
        let norm = self.dot(t, t).sqrt();
        t.iter_mut().for_each(|v| *v /= norm);
    }

    /// Tangent at `(u, λ)` oriented along `prev`.
    fn tangent(&self, x: &[f64], prev: &[f64]) -> Option<Vec<f64>> {
        let n = self.n();
        let m = self.bordered(&x[..n], x[n], prev);
        let mut rhs = vec![0.0; n + 1];
        rhs[n] = 1.0;
        let mut t = LuFactor::new(m).solve(&rhs)?;
        self.normalize(&mut t);
        if self.dot(&t, prev) < 0.0 {
            t.iter_mut().for_each(|v| *v = -*v);
        }
        Some(t)
    }

    /// Tangent of the minimal branch, `(du/dλ, 1)` normalized.
    fn initial_tangent(&self, u: &[f64], lambda: f64) -> Result<Vec<f64>> {
        let j = self.jacobian(u, lambda);
        let g = self.g(u);
        let du = LuFactor::new(j)
            .solve(&g)
            .ok_or_else(|| Error::Continuation("singular Jacobian at the start of fold rounding".into()))?;
        let mut t = du;
        t.push(1.0);
        self.normalize(&mut t);
        Ok(t)
    }

    /// Pseudo-arclength corrector from `x0` along `t` with step `ds`.
    fn correct(&self, x0: &[f64], t: &[f64], ds: f64) -> Option<(Vec<f64>, f64)> {
        let n = self.n();
        let mut y: Vec<f64> = x0.iter().zip(t).map(|(a, b)| a + ds * b).collect();
        for _ in 0..20 {
            if y[..n].iter().any(|v| !(*v > 0.0)) || !y[n].is_finite() {
                return None;
            }
            let f = self.residual(&y[..n], y[n]);
            let diff: Vec<f64> = y.iter().zip(x0).map(|(a, b)| a - b).collect();
            let mut r: Vec<f64> = f.iter().map(|v| -v).collect();
            r.push(-(self.dot(t, &diff) - ds));
            let m = self.bordered(&y[..n], y[n], t);
            let dy = LuFactor::new(m).solve(&r)?;
            y.iter_mut().zip(&dy).for_each(|(a, b)| *a += b);
            let top = sup_norm(&y[..n]);
            if sup_norm(&dy[..n]) <= 1e-11 * top && dy[n].abs() <= 1e-12 * y[n].abs() {
                if y[..n].iter().any(|v| !(*v > 0.0)) {
                    return None;
                }
                let res = sup_norm(&self.residual(&y[..n], y[n]));
                let floor = self.opts.newton_tol.max(4e-14 * self.op.norm_inf() * top);
                if res <= 1e3 * floor {
                    return Some((y, res));
                }
            }
        }
        None
    }

    fn point(&self, x: &[f64], res: f64, arclength: f64, segment: Segment, tangent: Vec<f64>, diag: bool) -> Result<BranchPoint> {
        let n = self.n();
        let lambda = x[n];
        let values = x[..n].to_vec();
        let (l1, monitor) = diagnostics(lambda, &values, self.op, self.spec, diag)?;
        let mut spec = self.spec.clone();
        spec.lambda = lambda;
        let top = sup_norm(&values);
        let tol = self.opts.newton_tol.max(4e-14 * self.op.norm_inf() * top).max(res);
        Ok(BranchPoint {
            lambda,
            sup_norm: top,
            lambda1: l1,
            arclength,
            monitor,
            residual: res,
            segment,
            tangent,
            solution: SolutionField {
                values,
                spec,
                residual: res,
                tolerance: tol,
                iterations: 0,
                report: None,
                subsolution_scale: None,
            },
        })
    }
}

fn state(p: &BranchPoint) -> Vec<f64> {
    let mut x = p.solution.values.clone();
    x.push(p.lambda);
    x
}

/// Pseudo-arclength continuation from the end of the minimal trace around
/// the fold and down the upper segment; fits `λ(σ)` by a parabola at the
/// located fold.
pub fn fold_round(branch: &Branch, op: &NonlocalOperator, spec: &ProblemSpec, policy: &StepPolicy, opts: &SolverOptions) -> Result<Branch> {
    require_nonlinearity(spec)?;
    let mut out = branch.clone();
    if out.weights.is_none() {
        if out.points.is_empty() {
            return Err(Error::Continuation("empty branch".into()));
        }
        assign_weights(&mut out);
    }
    let bracket = out
        .bracket
        .ok_or_else(|| Error::Continuation("fold rounding needs a bracket from the minimal trace".into()))?;
    let ext = Extended::new(op, spec, out.weights.unwrap(), opts)?;
    let n = ext.n();
    let start = out.points.last().unwrap().clone();
    let mut x = state(&start);
    let mut t = ext.initial_tangent(&start.solution.values, start.lambda)?;
    out.points.last_mut().unwrap().tangent = t.clone();
    let mut arc = start.arclength;
    let mut ds = policy.initial_arc_step;
    let mut fold: Option<FoldInfo> = None;
    let mut segment = Segment::Minimal;
    let mut steps = 0;

    while steps < policy.max_arc_steps {
        let Some((y, res)) = ext.correct(&x, &t, ds) else {
            ds *= 0.5;
            if ds < policy.min_arc_step {
                return Err(Error::Continuation(format!("arclength step fell below {}", policy.min_arc_step)));
            }
            continue;
        };
        steps += 1;
        let tn = ext
            .tangent(&y, &t)
            .ok_or_else(|| Error::Continuation("singular bordered system".into()))?;
        if fold.is_none() && t[n] > 0.0 && tn[n] <= 0.0 {
            let (fx, ft, fds, fres) = locate_fold(&ext, &x, &t, ds)?;
            let info = fit_fold(&ext, &fx, &ft, fres, bracket, policy)?;
            let fp = ext.point(&fx, fres, arc + fds, Segment::Fold, ft, policy.diagnostics)?;
            out.points.push(fp);
            fold = Some(info);
            segment = Segment::Upper;
        }
        arc += ds;
        let p = ext.point(&y, res, arc, segment, tn.clone(), policy.diagnostics)?;
        out.points.push(p);
        x = y;
        t = tn;
        ds = (ds * policy.growth).min(policy.max_arc_step);
        if let Some(f) = &fold {
            if x[n] < policy.upper_stop_fraction * f.lambda_estimate {
                break;
            }
        }
    }
    if fold.is_none() {
        return Err(Error::Continuation("no fold found within the arclength budget".into()));
    }
    out.fold = fold;
    Ok(out)
}

/// Bisection in arclength on the sign of `λ̇` between `x` (before the
/// fold) and the corrected point at `ds` (after it).
fn locate_fold(ext: &Extended, x: &[f64], t: &[f64], ds: f64) -> Result<(Vec<f64>, Vec<f64>, f64, f64)> {
    let n = ext.n();
    let (mut lo, mut hi) = (0.0, ds);
    let mut best: Option<(Vec<f64>, Vec<f64>, f64, f64)> = None;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let (y, res) = ext
            .correct(x, t, mid)
            .ok_or_else(|| Error::Continuation("corrector failed while locating the fold".into()))?;
        let ty = ext
            .tangent(&y, t)
            .ok_or_else(|| Error::Continuation("singular bordered system at the fold".into()))?;
        let lam_dot = ty[n];
        let done = lam_dot.abs() * ext.w_l.sqrt() < 1e-12 || hi - lo < 1e-14;
        if lam_dot > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        best = Some((y, ty, mid, res));
        if done {
            break;
        }
    }
    Ok(best.unwrap())
}

fn fit_fold(ext: &Extended, fx: &[f64], ft: &[f64], fres: f64, bracket: (f64, f64), policy: &StepPolicy) -> Result<FoldInfo> {
    let n = ext.n();
    let step = policy.fold_fit_step;
    let mut sig = vec![0.0];
    let mut lam = vec![fx[n]];
    for j in 1..=3 {
        for sgn in [-1.0, 1.0] {
            let ds = sgn * j as f64 * step;
            let (y, _) = ext
                .correct(fx, ft, ds)
                .ok_or_else(|| Error::Continuation("corrector failed near the fold".into()))?;
            sig.push(ds);
            lam.push(y[n]);
        }
    }
    let (a, b, c, rms) = quadratic_fit(&sig, &lam);
    let lambda_scale = ext.w_l.sqrt();
    let u_at_fold = SolutionField {
        values: fx[..n].to_vec(),
        spec: {
            let mut s = ext.spec.clone();
            s.lambda = fx[n];
            s
        },
        residual: fres,
        tolerance: ext.opts.newton_tol.max(4e-14 * ext.op.norm_inf() * sup_norm(&fx[..n])).max(fres),
        iterations: 0,
        report: None,
        subsolution_scale: None,
    };
    Ok(FoldInfo {
        lambda_estimate: 0.5 * (bracket.0 + bracket.1),
        bracket,
        quadratic_coeff: 2.0 * c,
        normalized_slope: b * lambda_scale,
        lambda_max: if c < 0.0 { a - b * b / (4.0 * c) } else { f64::NAN },
        fit_residual: rms / (c.abs() * step * step).max(f64::MIN_POSITIVE),
        u_at_fold,
    })
}

/// Least-squares `y = a + b x + c x²`; returns the coefficients and the
/// RMS residual.
pub fn quadratic_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64, f64) {
    let m = Matrix::from_fn(x.len(), 3, |i, j| x[i].powi(j as i32));
    let rhs = nalgebra::DVector::from_column_slice(y);
    let normal = m.transpose() * &m;
    let coef = normal
        .lu()
        .solve(&(m.transpose() * &rhs))
        .unwrap_or_else(|| nalgebra::DVector::from_element(3, f64::NAN));
    let fit = &m * &coef;
    let rms = ((fit - rhs).norm_squared() / x.len() as f64).sqrt();
    (coef[0], coef[1], coef[2], rms)
}

#[derive(Debug, Clone)]
pub struct MultiplicityRow {
    pub lambda: f64,
    pub minimal: SolutionField,
    pub second: Option<SolutionField>,
    pub gap: Option<f64>,
    /// Gap at least ten times the larger certified tolerance.
    pub distinct: bool,
}

/// Minimal and upper-segment solutions at each target λ.
pub fn multiplicity_scan(
    spec: &ProblemSpec,
    op: &NonlocalOperator,
    branch: &Branch,
    lambdas: &[f64],
    opts: &SolverOptions,
) -> Result<Vec<MultiplicityRow>> {
    spec.require_subcritical()?;
    if spec.beta != 0.0 {
        return Err(Error::invalid("multiplicity scan assumes beta = 0"));
    }
    let weights = branch
        .weights
        .ok_or_else(|| Error::Continuation("branch carries no arclength weights".into()))?;
    let ext = Extended::new(op, spec, weights, opts)?;
    let upper: Vec<&BranchPoint> = branch.upper().collect();
    let mut rows = Vec::with_capacity(lambdas.len());
    for &lam in lambdas {
        let minimal = solve_min(lam, spec, op, opts)?;
        let second = upper_solution_at(&ext, &upper, lam)?;
        let (gap, distinct) = match &second {
            Some(s) => {
                let g = sup_distance(&s.values, &minimal.values);
                (Some(g), g >= 10.0 * s.tolerance.max(minimal.tolerance))
            }
            None => (None, false),
        };
        rows.push(MultiplicityRow {
            lambda: lam,
            minimal,
            second,
            gap,
            distinct,
        });
    }
    Ok(rows)
}

/// Arclength bisection between the upper points bracketing `lam`.
fn upper_solution_at(ext: &Extended, upper: &[&BranchPoint], lam: f64) -> Result<Option<SolutionField>> {
    let n = ext.n();
    for w in upper.windows(2) {
        let (a, b) = (w[0], w[1]);
        if !(a.lambda >= lam && b.lambda <= lam) {
            continue;
        }
        let x0 = state(a);
        let t = &a.tangent;
        let total = b.arclength - a.arclength;
        let (mut lo, mut hi) = (0.0, total);
        let mut found: Option<(Vec<f64>, f64)> = None;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            let Some((y, res)) = ext.correct(&x0, t, mid) else {
                break;
            };
            let err = y[n] - lam;
            let close = err.abs() <= 1e-12 * lam;
            if err > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            found = Some((y, res));
            if close {
                break;
            }
        }
        let Some((y, _)) = found else {
            return Ok(None);
        };
        // fix λ exactly with Newton on F(·, lam) from the bisected point
        let u = newton_fixed_lambda(ext, y[..n].to_vec(), lam)?;
        let mut spec = ext.spec.clone();
        spec.lambda = lam;
        let res = residual(ext.op, &spec, &u)?;
        let tol = ext.opts.newton_tol.max(4e-14 * ext.op.norm_inf() * sup_norm(&u));
        return Ok(Some(SolutionField {
            values: u,
            spec,
            residual: res,
            tolerance: tol.max(res),
            iterations: 0,
            report: None,
            subsolution_scale: None,
        }));
    }
    Ok(None)
}

fn newton_fixed_lambda(ext: &Extended, mut u: Vec<f64>, lam: f64) -> Result<Vec<f64>> {
    for _ in 0..30 {
        let f = ext.residual(&u, lam);
        let floor = ext.opts.newton_tol.max(4e-14 * ext.op.norm_inf() * sup_norm(&u));
        if sup_norm(&f) <= floor {
            return Ok(u);
        }
        let neg: Vec<f64> = f.iter().map(|v| -v).collect();
        let du = LuFactor::new(ext.jacobian(&u, lam))
            .solve(&neg)
            .ok_or_else(|| Error::Continuation("singular Jacobian on the upper segment".into()))?;
        u.iter_mut().zip(&du).for_each(|(a, b)| *a += b);
        if u.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Continuation("upper-segment Newton left the positive cone".into()));
        }
        if sup_norm(&du) <= 1e-13 * sup_norm(&u) {
            return Ok(u);
        }
    }
    Err(Error::NotConverged {
        what: "upper-segment Newton",
        iterations: 30,
        residual: sup_norm(&ext.residual(&u, lam)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticReport {
    /// `(λ, ‖u‖∞)` along the upper segment, in continuation order.
    pub table: Vec<(f64, f64)>,
    /// Smallest λ reached on the upper segment.
    pub lambda_a_estimate: f64,
    pub reached_cap: bool,
    /// Slope of `ln ‖u‖∞` against `ln λ` over the tail.
    pub tail_exponent: f64,
    /// Largest sup norm on the minimal segment.
    pub minimal_sup: f64,
    pub fold_sup: f64,
}

/// Continues the upper segment toward small λ until the sup norm exceeds
/// `growth_cap` times its value at the fold or `max_steps` is used up.
pub fn asymptotic_bifurcation_probe(
    branch: &Branch,
    op: &NonlocalOperator,
    spec: &ProblemSpec,
    growth_cap: f64,
    max_steps: usize,
    policy: &StepPolicy,
    opts: &SolverOptions,
) -> Result<(Branch, AsymptoticReport)> {
    let fold = branch
        .fold
        .as_ref()
        .ok_or_else(|| Error::Continuation("asymptotic probe needs a rounded fold".into()))?;
    let ext = Extended::new(op, spec, branch.weights.unwrap(), opts)?;
    let n = ext.n();
    let fold_sup = sup_norm(&fold.u_at_fold.values);
    let cap = growth_cap * fold_sup;
    let mut out = branch.clone();
    let last = out
        .points
        .last()
        .filter(|p| p.segment == Segment::Upper)
        .ok_or_else(|| Error::Continuation("branch does not end on the upper segment".into()))?
        .clone();
    let mut x = state(&last);
    let mut t = last.tangent.clone();
    let mut arc = last.arclength;
    let mut ds = policy.max_arc_step.min(4.0 * policy.initial_arc_step).max(policy.initial_arc_step);
    let mut steps = 0;
    let mut reached_cap = last.sup_norm >= cap;
    // the tail is traced far from the fold; ds may grow well past the
    // fold-rounding cap
    let max_ds = 1e3;
    while !reached_cap && steps < max_steps {
        let Some((y, res)) = ext.correct(&x, &t, ds) else {
            ds *= 0.5;
            if ds < policy.min_arc_step {
                break;
            }
            continue;
        };
        steps += 1;
        let Some(tn) = ext.tangent(&y, &t) else {
            break;
        };
        arc += ds;
        out.points.push(ext.point(&y, res, arc, Segment::Upper, tn.clone(), false)?);
        x = y;
        t = tn;
        reached_cap = sup_norm(&x[..n]) >= cap;
        ds = (ds * policy.growth).min(max_ds);
    }
    let table: Vec<(f64, f64)> = out.upper().map(|p| (p.lambda, p.sup_norm)).collect();
    let lambda_a_estimate = table.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let tail: Vec<&(f64, f64)> = table.iter().filter(|r| r.1 >= 10.0 * fold_sup).collect();
    let tail_exponent = if tail.len() >= 3 {
        let lx: Vec<f64> = tail.iter().map(|r| r.0.ln()).collect();
        let ly: Vec<f64> = tail.iter().map(|r| r.1.ln()).collect();
        let (_, b, _, _) = linear_fit(&lx, &ly);
        b
    } else {
        f64::NAN
    };
    let minimal_sup = out.minimal().map(|p| p.sup_norm).fold(0.0, f64::max);
    Ok((
        out,
        AsymptoticReport {
            table,
            lambda_a_estimate,
            reached_cap,
            tail_exponent,
            minimal_sup,
            fold_sup,
        },
    ))
}

fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = sxy / sxx;
    (my - b * mx, b, 0.0, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum UniquenessVerdict {
    Unique,
    Falsified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub verdict: UniquenessVerdict,
    pub lambda: f64,
    pub c0: f64,
    pub seed: u64,
    /// Per start: sup distance to the minimal solution when converged
    /// inside the window, `None` when Newton left the admissible set.
    pub distances: Vec<Option<f64>>,
    pub tolerance: f64,
}

/// Largest `C₀` such that `t ↦ K t^{-δ} + f(t)` decreases on `(0, C₀]` at
/// every node.
pub fn decreasing_window(spec: &ProblemSpec, op: &NonlocalOperator) -> Result<f64> {
    let k_min = spec.k_field(op.grid())?.into_iter().fold(f64::INFINITY, f64::min);
    let slope = |t: f64| spec.df(t) - spec.delta * k_min * t.powf(-spec.delta - 1.0);
    if spec.delta == 0.0 {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    let mut guard = 0;
    while slope(hi) < 0.0 {
        hi *= 2.0;
        guard += 1;
        if guard > 200 {
            return Ok(f64::INFINITY);
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if slope(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Damped Newton on `F(·, λ)` from an arbitrary positive start, staying in
/// `0 < u`; `None` when it leaves that set or stalls.
pub fn newton_from(lambda: f64, start: &[f64], spec: &ProblemSpec, op: &NonlocalOperator, opts: &SolverOptions) -> Result<Option<SolutionField>> {
    let ext = Extended::new(op, spec, (1.0, 1.0), opts)?;
    Error::check_len(ext.n(), start.len())?;
    let mut u = start.to_vec();
    if u.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::invalid("Newton start must be positive"));
    }
    let mut f = ext.residual(&u, lambda);
    let mut res = sup_norm(&f);
    for _ in 0..opts.max_newton {
        let floor = opts.newton_tol.max(4e-14 * op.norm_inf() * sup_norm(&u));
        if res <= floor {
            let mut s = spec.clone();
            s.lambda = lambda;
            return Ok(Some(SolutionField {
                values: u,
                spec: s,
                residual: res,
                tolerance: floor,
                iterations: 0,
                report: None,
                subsolution_scale: None,
            }));
        }
        let neg: Vec<f64> = f.iter().map(|v| -v).collect();
        let Some(du) = LuFactor::new(ext.jacobian(&u, lambda)).solve(&neg) else {
            return Ok(None);
        };
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = u.iter().zip(&du).map(|(a, b)| a + t * b).collect();
            if trial.iter().all(|v| *v > 0.0) {
                let ft = ext.residual(&trial, lambda);
                let rt = sup_norm(&ft);
                if rt < res {
                    u = trial;
                    f = ft;
                    res = rt;
                    break;
                }
            }
            t *= 0.5;
            if t < 1e-10 {
                return Ok(None);
            }
        }
    }
    Ok(None)
}

/// Newton from `trials` seeded random starts in `(0, C₀]` at a small λ:
/// every start that converges inside the window must land on the minimal
/// solution.
pub fn uniqueness_probe(
    lambda: f64,
    spec: &ProblemSpec,
    op: &NonlocalOperator,
    trials: usize,
    seed: u64,
    opts: &SolverOptions,
) -> Result<UniquenessReport> {
    let c0 = decreasing_window(spec, op)?;
    let minimal = solve_min(lambda, spec, op, opts)?;
    if minimal.sup_norm() >= c0 {
        return Err(Error::invalid(format!(
            "lambda = {lambda} is not small: minimal solution reaches {} >= C0 = {c0}",
            minimal.sup_norm()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = op.len();
    let mut distances = Vec::with_capacity(trials);
    let mut tolerance: f64 = minimal.tolerance;
    let mut verdict = UniquenessVerdict::Unique;
    for _ in 0..trials {
        let start: Vec<f64> = (0..n).map(|_| c0 * rng.gen_range(0.01..1.0)).collect();
        match newton_from(lambda, &start, spec, op, opts)? {
            Some(sol) if sol.sup_norm() <= c0 => {
                let d = sup_distance(&sol.values, &minimal.values);
                let tol = sol.tolerance.max(minimal.tolerance);
                tolerance = tolerance.max(tol);
                if d > 10.0 * tol {
                    verdict = UniquenessVerdict::Falsified;
                }
                distances.push(Some(d));
            }
            _ => distances.push(None),
        }
    }
    Ok(UniquenessReport {
        verdict,
        lambda,
        c0,
        seed,
        distances,
        tolerance,
    })
}
