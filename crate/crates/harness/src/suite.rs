//! The verification battery: one suite per acceptance criterion. Module
//! errors become failed records instead of aborting the run.

use std::cell::OnceCell;
use std::collections::HashMap;

use fracfold::continuation::{
    asymptotic_bifurcation_probe, decreasing_window, fold_round, multiplicity_scan, newton_from, trace_minimal, Branch,
    StepPolicy, UniquenessVerdict,
};
use fracfold::linalg::{sup_distance, sup_norm};
use fracfold::linearization::{d2a_directional, sensitivity_bundle};
use fracfold::singular::{scale_pure_singular, solve_a, solve_min, solve_pure_singular};
use fracfold::weights::{
    classify_regime, fit_boundary_exponent, holder_seminorm, hs_membership_indicator, predicted_exponent, Regime,
};
use fracfold::{assemble_operator, build_grid, continuation, NonlocalOperator, ProblemSpec, SolutionField, SolverOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::error::{HarnessError, Result};
use crate::oracle::{getoor_by_quadrature, getoor_solution};
use crate::report::{CheckRecord, VerificationReport};

/// Fit window for the boundary-rate suite, as a fraction of `L`.
pub const RATES_WINDOW: f64 = 0.03;
/// Grid of the main branch (`s = 0.4, δ = 0.5, β = 0, p = 2, K = 1`).
pub const BRANCH_N: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Suite {
    Operator,
    Comparison,
    Scaling,
    Rates,
    Hs,
    Holder,
    Branch,
    Fold,
    Multiplicity,
    Asymptotic,
    Derivatives,
    Uniqueness,
}

impl Suite {
    pub const ALL: [Suite; 12] = [
        Suite::Operator,
        Suite::Comparison,
        Suite::Scaling,
        Suite::Rates,
        Suite::Hs,
        Suite::Holder,
        Suite::Branch,
        Suite::Fold,
        Suite::Multiplicity,
        Suite::Asymptotic,
        Suite::Derivatives,
        Suite::Uniqueness,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Operator => "operator",
            Suite::Comparison => "comparison",
            Suite::Scaling => "scaling",
            Suite::Rates => "rates",
            Suite::Hs => "hs",
            Suite::Holder => "holder",
            Suite::Branch => "branch",
            Suite::Fold => "fold",
            Suite::Multiplicity => "multiplicity",
            Suite::Asymptotic => "asymptotic",
            Suite::Derivatives => "derivatives",
            Suite::Uniqueness => "uniqueness",
        }
    }

    /// Acceptance criterion number, 1 to 12.
    pub fn criterion(self) -> usize {
        Suite::ALL.iter().position(|s| *s == self).unwrap() + 1
    }

    pub fn title(self) -> &'static str {
        match self {
            Suite::Operator => "discretization oracle (Getoor torsion)",
            Suite::Comparison => "M-matrix structure and discrete comparison",
            Suite::Scaling => "pure singular scaling identity",
            Suite::Rates => "boundary-rate regimes",
            Suite::Hs => "energy-space threshold",
            Suite::Holder => "Holder regimes",
            Suite::Branch => "minimal branch",
            Suite::Fold => "fold bending",
            Suite::Multiplicity => "multiplicity",
            Suite::Asymptotic => "asymptotic bifurcation at zero",
            Suite::Derivatives => "solution-map derivatives",
            Suite::Uniqueness => "small-lambda uniqueness",
        }
    }

    /// Parses a comma separated list; `all` selects every suite.
    pub fn parse_list(items: &[String]) -> Result<Vec<Suite>> {
        let mut out = Vec::new();
        for item in items.iter().flat_map(|i| i.split(',')).map(str::trim).filter(|i| !i.is_empty()) {
            if item == "all" {
                return Ok(Suite::ALL.to_vec());
            }
            let s = Suite::ALL
                .iter()
                .find(|s| s.name() == item)
                .ok_or_else(|| HarnessError::Usage(format!("unknown suite {item:?}")))?;
            if !out.contains(s) {
                out.push(*s);
            }
        }
        if out.is_empty() {
            return Err(HarnessError::Usage("no suite selected".into()));
        }
        Ok(out)
    }
}

type Key = (u64, u64, u64, usize);

struct MainBranch {
    op: NonlocalOperator,
    spec: ProblemSpec,
    traced: Branch,
    rounded: Branch,
}

impl MainBranch {
    fn lambda_estimate(&self) -> f64 {
        self.traced.lambda_estimate().unwrap_or(f64::NAN)
    }
}

struct Context<'a> {
    cfg: &'a RunConfig,
    opts: SolverOptions,
    pure: HashMap<Key, (NonlocalOperator, SolutionField)>,
    main: OnceCell<std::result::Result<MainBranch, String>>,
}

fn spec_of(s: f64, delta: f64, beta: f64) -> Result<ProblemSpec> {
    Ok(ProblemSpec::new(s, delta, beta, 1.0)?)
}

fn operator(s: f64, n: usize) -> Result<NonlocalOperator> {
    Ok(assemble_operator(&build_grid(1.0, n)?, s)?)
}

impl<'a> Context<'a> {
    fn new(cfg: &'a RunConfig) -> Self {
        Context {
            cfg,
            opts: cfg.solver(),
            pure: HashMap::new(),
            main: OnceCell::new(),
        }
    }

    /// Pure singular solution with `λ = 1`, cached per `(s, δ, β, n)`.
    fn pure(&mut self, s: f64, delta: f64, beta: f64, n: usize) -> Result<&(NonlocalOperator, SolutionField)> {
        let key = (s.to_bits(), delta.to_bits(), beta.to_bits(), n);
        if !self.pure.contains_key(&key) {
            let op = operator(s, n)?;
            let u = solve_pure_singular(&spec_of(s, delta, beta)?, &op, &self.opts)?;
            self.pure.insert(key, (op, u));
        }
        Ok(&self.pure[&key])
    }

    fn main(&self) -> std::result::Result<&MainBranch, String> {
        self.main
            .get_or_init(|| {
                let build = || -> Result<MainBranch> {
                    let op = operator(0.4, BRANCH_N)?;
                    let spec = spec_of(0.4, 0.5, 0.0)?.with_power(2.0, 1.0)?;
                    let policy = self.cfg.policy();
                    let traced = trace_minimal(&spec, &op, &policy, &self.opts)?;
                    let rounded = fold_round(&traced, &op, &spec, &policy, &self.opts)?;
                    Ok(MainBranch {
                        op,
                        spec,
                        traced,
                        rounded,
                    })
                };
                build().map_err(|e| e.to_string())
            })
            .as_ref()
            .map_err(Clone::clone)
    }
}

/// Runs the selected suites in order.
pub fn verify_suite(cfg: &RunConfig, suites: &[Suite]) -> VerificationReport {
    let mut ctx = Context::new(cfg);
    let mut records = Vec::new();
    for &suite in suites {
        let claim = claim_of(suite);
        let out = match suite {
            Suite::Operator => operator_suite(),
            Suite::Comparison => comparison_suite(cfg.seed),
            Suite::Scaling => scaling_suite(&ctx),
            Suite::Rates => rates_suite(&mut ctx),
            Suite::Hs => hs_suite(&ctx),
            Suite::Holder => holder_suite(&mut ctx),
            Suite::Branch => branch_suite(&ctx),
            Suite::Fold => fold_suite(&ctx),
            Suite::Multiplicity => multiplicity_suite(&ctx),
            Suite::Asymptotic => asymptotic_suite(&ctx),
            Suite::Derivatives => derivatives_suite(),
            Suite::Uniqueness => uniqueness_suite(&ctx),
        };
        match out {
            Ok(mut r) => records.append(&mut r),
            Err(e) => records.push(CheckRecord::failed(format!("{}/setup", suite.name()), claim, e)),
        }
    }
    VerificationReport {
        seed: cfg.seed,
        records,
    }
}

pub fn claim_of(suite: Suite) -> &'static str {
    match suite {
        Suite::Operator => "operator-normalization",
        Suite::Comparison => "comparison-principle",
        Suite::Scaling => "subsolution-scaling",
        Suite::Rates => "boundary-rates",
        Suite::Hs => "hs-threshold",
        Suite::Holder => "holder-regularity",
        Suite::Branch => "minimal-branch",
        Suite::Fold => "fold-bending",
        Suite::Multiplicity => "multiplicity",
        Suite::Asymptotic => "asymptotic-bifurcation",
        Suite::Derivatives => "operator-derivatives",
        Suite::Uniqueness => "small-lambda-uniqueness",
    }
}

/// Suite a record belongs to, from its name prefix.
pub fn suite_of(record: &CheckRecord) -> Option<Suite> {
    let prefix = record.name.split('/').next()?;
    Suite::ALL.iter().copied().find(|s| s.name() == prefix)
}

fn fmt_list(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.4e}")).collect();
    format!("[{}]", items.join(", "))
}

fn operator_suite() -> Result<Vec<CheckRecord>> {
    let claim = claim_of(Suite::Operator);
    let mut out = Vec::new();
    for s in [0.25, 0.5, 0.75] {
        // the closed-form constant is checked against the defining integral first
        let expected = statrs::function::gamma::gamma(2.0 * s + 1.0);
        let q: Vec<f64> = [0.0, 0.3, -0.6].iter().map(|x| getoor_by_quadrature(s, *x)).collect();
        let worst = q.iter().map(|v| (v - expected).abs() / expected).fold(0.0, f64::max);
        out.push(
            CheckRecord::new(format!("operator/getoor-constant s={s}"), claim)
                .params(format!("s={s}, x in {{0, 0.3, -0.6}}"))
                .expected(format!("Gamma(2s+1) = {expected:.10}"))
                .measured(format!("quadrature {}; rel err {worst:.2e}", fmt_list(&q)))
                .tolerance("1e-6 relative")
                .pass(worst <= 1e-6),
        );
        let mut errs = Vec::new();
        for n in [128, 256, 512, 1024] {
            let op = operator(s, n)?;
            let w = op.torsion()?;
            let exact: Vec<f64> = op.grid().nodes().iter().map(|x| getoor_solution(s, *x)).collect();
            errs.push(sup_distance(&w, &exact) / sup_norm(&exact));
        }
        let decreasing = errs.windows(2).all(|w| w[1] < w[0]);
        out.push(
            CheckRecord::new(format!("operator/torsion s={s}"), claim)
                .params(format!("s={s}, n in {{128, 256, 512, 1024}}, rhs = 1"))
                .expected("rel sup error <= 2e-2 at n=1024, decreasing in n")
                .measured(fmt_list(&errs))
                .tolerance("2e-2")
                .pass(errs[3] <= 2e-2 && decreasing),
        );
    }
    Ok(out)
}

fn comparison_suite(seed: u64) -> Result<Vec<CheckRecord>> {
    let claim = claim_of(Suite::Comparison);
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for s in [0.25, 0.5, 0.75] {
        for n in [64, 256] {
            let op = operator(s, n)?;
            let a = op.matrix();
            let mut pattern = 0usize;
            let mut asym = 0usize;
            for i in 0..n {
                if !(a[(i, i)] > 0.0) {
                    pattern += 1;
                }
                for j in 0..n {
                    if i != j && a[(i, j)] > 0.0 {
                        pattern += 1;
                    }
                    if a[(i, j)] != a[(j, i)] {
                        asym += 1;
                    }
                }
            }
            let mut order = 0usize;
            for _ in 0..100 {
                let f1: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let f2: Vec<f64> = f1
                    .iter()
                    .map(|v| if rng.gen_bool(0.5) { v + rng.gen_range(0.0..1.0) } else { *v })
                    .collect();
                let u1 = op.solve_dirichlet(&f1)?;
                let u2 = op.solve_dirichlet(&f2)?;
                let slack = 1e-12 * sup_norm(&u1).max(sup_norm(&u2));
                order += u1.iter().zip(&u2).filter(|(a, b)| **a > **b + slack).count();
            }
            out.push(
                CheckRecord::new(format!("comparison/s={s} n={n}"), claim)
                    .params(format!("s={s}, n={n}, 100 ordered rhs pairs, seed {seed}"))
                    .expected("0 sign, symmetry and ordering violations")
                    .measured(format!("sign {pattern}, symmetry {asym}, ordering {order}"))
                    .tolerance("0")
                    .pass(pattern == 0 && asym == 0 && order == 0),
            );
        }
    }
    Ok(out)
}

fn scaling_suite(ctx: &Context) -> Result<Vec<CheckRecord>> {
    let claim = claim_of(Suite::Scaling);
    let mut out = Vec::new();
    let op = operator(0.4, 256)?;
    let bound = 2.0 * ctx.opts.newton_tol;
    for delta in [0.5, 1.0, 3.0] {
        let spec = spec_of(0.4, delta, 0.0)?;
        let u1 = solve_pure_singular(&spec, &op, &ctx.opts)?;
        for lambda in [0.25, 4.0] {
            let scaled = scale_pure_singular(&u1, lambda, &op)?;
            let direct = solve_pure_singular(&spec.clone().with_lambda(lambda)?, &op, &ctx.opts)?;
            let gap = sup_distance(&scaled.values, &direct.values);
            out.push(
                CheckRecord::new(format!("scaling/delta={delta} lambda={lambda}"), claim)
                    .params(format!("s=0.4, beta=0, n=256, delta={delta}, lambda={lambda}"))
                    .expected("solve(lambda K) = lambda^(1/(delta+1)) solve(K)")
                    .measured(format!("sup gap {gap:.3e}"))
                    .tolerance(format!("{bound:.1e}"))
                    .pass(gap <= bound),
            );
        }
    }
    Ok(out)
}

fn rates_suite(ctx: &mut Context) -> Result<Vec<CheckRecord>> {
    let claim = claim_of(Suite::Rates);
    let mut out = Vec::new();
    for (label, s, delta) in [("sub", 0.4, 0.5), ("super", 0.4, 3.0), ("critical", 0.5, 1.0)] {
        let regime = classify_regime(s, delta, 0.0);
        let predicted = predicted_exponent(s, delta, 0.0);
        let record = CheckRecord::new(format!("rates/{label}"), claim)
            .params(format!("s={s}, delta={delta}, beta=0, n=1024, window {RATES_WINDOW}"));
        let (op, u) = match ctx.pure(s, delta, 0.0, 1024) {
            Ok(v) => v,
            Err(e) => {
                out.push(CheckRecord::failed(format!("rates/{label}"), claim, e));
                continue;
            }
        };
        let (alpha, r2) = fit_boundary_exponent(&u.values, op.grid(), RATES_WINDOW)?;
        let record = match regime {
            // the CRITICAL classification is the log-correction flag
            Regime::Critical => record
                .expected(format!("alpha in ({:.2}, {predicted:.2}), log flag raised", predicted - 0.1))
                .measured(format!("alpha {alpha:.4} (r2 {r2:.5}), regime {regime:?}"))
                .tolerance("open interval")
                .pass(alpha > predicted - 0.1 && alpha < predicted),
            _ => record
                .expected(format!("alpha = {predicted:.4} ({regime:?})"))
                .measured(format!("alpha {alpha:.4} (r2 {r2:.5})"))
                .tolerance("0.05")
                .pass((alpha - predicted).abs() <= 0.05),
        };
        out.push(record);
    }
    Ok(out)
}

fn hs_suite(ctx: &Context) -> Result<Vec<CheckRecord>> {
    let claim = claim_of(Suite::Hs);
    let mut out = Vec::new();
    let s = 0.75;
    for (delta, beta) in [(0.5, 0.0), (3.0, 0.0), (5.0, 0.5), (6.0, 0.3)] {
        let spec = spec_of(s, delta, beta)?;
        let mut fields = Vec::new();
        for n in [128, 256, 512] {
            let op = operator(s, n)?;
            let u = solve_pure_singular(&spec, &op, &ctx.opts)?;
            fields.push((op, u));
        }
        let levels: Vec<_> = fields.iter().map(|(o, u)| (o.grid(), u.values.as_slice())).collect();
        let ind = hs_membership_indicator(&levels, &spec)?;
        let finite = spec.hs_flag();
        let verdict_finite = ind.verdict == fracfold::weights::HsVerdict::Finite;
        out.push(
            CheckRecord::new(format!("hs/delta={delta} beta={beta}"), claim)
                .params(format!(
                    "s={s}, delta={delta}, beta={beta}, 2beta+delta(2s-1) = {:.2} vs 1+2s = {:.2}",
                    2.0 * beta + delta * (2.0 * s - 1.0),
                    1.0 + 2.0 * s
                ))
                .expected(if finite { "finite" } else { "diverging" })
                .measured(format!("{:?}, masses {}, increment ratio {:.3}", ind.verdict, fmt_list(&ind.masses), ind.increment_ratio))
                .tolerance("verdict match")
                .pass(finite == verdict_finite),
        );
    }
    Ok(out)
}

fn holder_suite(ctx: &mut Context) -> Result<Vec<CheckRecord>> {
    let claim = claim_of(Suite::Holder);
    let mut out = Vec::new();
    for (label, s, delta) in [("sub", 0.4, 0.5), ("super", 0.4, 3.0)] {
        let gamma = predicted_exponent(s, delta, 0.0);
        let mut at = Vec::new();
        let mut above = Vec::new();
        for n in [256, 512, 1024] {
            let (op, u) = ctx.pure(s, delta, 0.0, n)?;
            at.push(holder_seminorm(&u.values, op.grid(), gamma, n)?);
            above.push(holder_seminorm(&u.values, op.grid(), gamma + 0.1, n)?);
        }
        let spread = at.iter().cloned().fold(0.0, f64::max) / at.iter().cloned().fold(f64::INFINITY, f64::min);
        out.push(
            CheckRecord::new(format!("holder/{label} stable"), claim)
                .params(format!("s={s}, delta={delta}, gamma={gamma:.3}, n in {{256, 512, 1024}}"))
                .expected("max/min <= 1.5")
                .measured(format!("{} spread {spread:.3}", fmt_list(&at)))
                .tolerance("1.5")
                .pass(spread <= 1.5),
        );
        let growth: Vec<f64> = above.windows(2).map(|w| w[1] / w[0]).collect();
        out.push(
            CheckRecord::new(format!("holder/{label} growth"), claim)
                .params(format!("s={s}, delta={delta}, gamma={:.3}, n in {{256, 512, 1024}}", gamma + 0.1))
                .expected("growth >= 2 per refinement")
                .measured(format!("{} growth {}", fmt_list(&above), fmt_list(&growth)))
                .tolerance("2")
                .pass(growth.iter().all(|g| *g >= 2.0)),
        );
    }
    Ok(out)
}

fn branch_suite(ctx: &Context) -> Result<Vec<CheckRecord>> {
    let claim = claim_of(Suite::Branch);
    let main = ctx.main().map_err(HarnessError::Refused)?;
    let mut out = Vec::new();
    let l1: Vec<f64> = main.traced.points.iter().map(|p| p.lambda1).collect();
    out.push(
        CheckRecord::new("branch/lambda1 positive", claim)
            .params(format!("s=0.4, delta=0.5, beta=0, p=2, K=1, n={BRANCH_N}, {} samples", l1.len()))
            .expected("Lambda1 > 0 at every minimal sample")
            .measured(format!("min {:.4e}", l1.iter().cloned().fold(f64::INFINITY, f64::min)))
            .tolerance("strict")
            .pass(l1.iter().all(|v| *v > 0.0)),
    );
    let tail = &l1[l1.len().saturating_sub(5)..];
    out.push(
        CheckRecord::new("branch/lambda1 decreasing", claim)
            .params("last five minimal samples before the fold")
            .expected("strictly decreasing")
            .measured(fmt_list(tail))
            .tolerance("strict")
            .pass(tail.windows(2).all(|w| w[1] < w[0])),
    );
    let est = main.lambda_estimate();
    let fine_branch = {
        let op = operator(0.4, 1024)?;
        let policy = StepPolicy {
            diagnostics: false,
            ..ctx.cfg.policy()
        };
        trace_minimal(&main.spec, &op, &policy, &ctx.opts)?
    };
    let fine = fine_branch.lambda_estimate().unwrap_or(f64::NAN);
    let rel = (est - fine).abs() / fine;
    let bracket = |b: &Branch| b.bracket.map_or("none".to_string(), |(a, b)| format!("({a:.6}, {b:.6})"));
    out.push(
        CheckRecord::new("branch/lambda reproducible", claim)
            .params("bracket midpoints, n=512 against n=1024")
            .expected("relative difference <= 1e-2")
            .measured(format!(
                "{est:.6} {} vs {fine:.6} {}, rel {rel:.2e}",
                bracket(&main.traced),
                bracket(&fine_branch)
            ))
            .tolerance("1e-2")
            .pass(rel <= 1e-2),
    );
    let beyond = 1.05 * est;
    let res = solve_min(beyond, &main.spec, &main.op, &ctx.opts);
    out.push(
        CheckRecord::new("branch/nonexistence", claim)
            .params(format!("lambda = 1.05 Lambda = {beyond:.6}"))
            .expected("solve_min fails")
            .measured(match &res {
                Ok(u) => format!("returned a solution with sup {:.4}", u.sup_norm()),
                Err(e) => format!("failed: {e}"),
            })
            .tolerance("-")
            .pass(res.is_err()),
    );
    Ok(out)
}

fn fold_records(label: &str, params: &str, branch: &Branch) -> Vec<CheckRecord> {
    let claim = claim_of(Suite::Fold);
    let Some(f) = branch.fold.as_ref() else {
        return vec![CheckRecord::failed(format!("fold/{label}"), claim, "no fold on the branch")];
    };
    let width = f.bracket.1 - f.bracket.0;
    vec![
        CheckRecord::new(format!("fold/{label} slope"), claim)
            .params(params)
            .expected("|normalized lambda'| <= 1e-2")
            .measured(format!("{:.3e}", f.normalized_slope))
            .tolerance("1e-2")
            .pass(f.normalized_slope.abs() <= 1e-2),
        CheckRecord::new(format!("fold/{label} curvature"), claim)
            .params(params)
            .expected("lambda'' < 0")
            .measured(format!("{:.4e} (fit residual {:.2e} of curvature)", f.quadratic_coeff, f.fit_residual))
            .tolerance("strict")
            .pass(f.quadratic_coeff < 0.0),
        CheckRecord::new(format!("fold/{label} consistency"), claim)
            .params(params)
            .expected(format!("max lambda within bracket width {width:.2e} of {:.6}", f.lambda_estimate))
            .measured(format!("{:.6}", f.lambda_max))
            .tolerance(format!("{width:.2e}"))
            .pass((f.lambda_max - f.lambda_estimate).abs() <= width),
    ]
}

fn fold_suite(ctx: &Context) -> Result<Vec<CheckRecord>> {
    let main = ctx.main().map_err(HarnessError::Refused)?;
    let mut out = fold_records("set-a", &format!("s=0.4, delta=0.5, p=2, n={BRANCH_N}"), &main.rounded);
    let second = (|| -> Result<Branch> {
        let op = operator(0.25, 256)?;
        let spec = spec_of(0.25, 2.0, 0.0)?.with_power(2.0, 1.0)?;
        let policy = ctx.cfg.policy();
        let traced = trace_minimal(&spec, &op, &policy, &ctx.opts)?;
        Ok(fold_round(&traced, &op, &spec, &policy, &ctx.opts)?)
    })();
    match second {
        Ok(b) => out.extend(fold_records("set-b", "s=0.25, delta=2, p=2, n=256", &b)),
        Err(e) => out.push(CheckRecord::failed("fold/set-b", claim_of(Suite::Fold), e)),
    }
    Ok(out)
}

fn multiplicity_suite(ctx: &Context) -> Result<Vec<CheckRecord>> {
    let claim = claim_of(Suite::Multiplicity);
    let main = ctx.main().map_err(HarnessError::Refused)?;
    let est = main.lambda_estimate();
    let mut fractions = ctx.cfg.multiplicity_fractions.clone();
    if !fractions.contains(&0.5) {
        fractions.insert(0, 0.5);
    }
    fractions.sort_by(f64::total_cmp);
    let targets: Vec<f64> = fractions.iter().map(|f| f * est).collect();
    let rows = multiplicity_scan(&main.spec, &main.op, &main.rounded, &targets, &ctx.opts)?;
    let mut out = Vec::new();
    let half = &rows[fractions.iter().position(|f| *f == 0.5).unwrap()];
    let tol = half.second.as_ref().map_or(f64::NAN, |s| s.tolerance.max(half.minimal.tolerance));
    out.push(
        CheckRecord::new("multiplicity/half", claim)
            .params(format!("lambda = 0.5 Lambda = {:.6}, n={BRANCH_N}", half.lambda))
            .expected("two solutions, gap >= 10 tol")
            .measured(match half.gap {
                Some(g) => format!("gap {g:.4e}, tol {tol:.1e}"),
                None => "no upper-segment point at the target (incomplete)".into(),
            })
            .tolerance(format!("{:.1e}", 10.0 * tol))
            .pass(half.distinct),
    );
    let gaps: Vec<f64> = rows.iter().map(|r| r.gap.unwrap_or(f64::NAN)).collect();
    out.push(
        CheckRecord::new("multiplicity/shrinking gap", claim)
            .params(format!("lambda / Lambda in {}", fmt_list(&fractions)))
            .expected("gap strictly decreasing toward the fold")
            .measured(fmt_list(&gaps))
            .tolerance("strict")
            .pass(gaps.len() >= 3 && gaps.windows(2).all(|w| w[1] < w[0])),
    );
    Ok(out)
}

fn asymptotic_suite(ctx: &Context) -> Result<Vec<CheckRecord>> {
    let claim = claim_of(Suite::Asymptotic);
    let main = ctx.main().map_err(HarnessError::Refused)?;
    let policy = ctx.cfg.policy();
    let cap = ctx.cfg.growth_cap;
    let steps = ctx.cfg.max_arc_steps;
    let (_, short) = asymptotic_bifurcation_probe(&main.rounded, &main.op, &main.spec, cap / 10.0, steps, &policy, &ctx.opts)?;
    let (_, long) = asymptotic_bifurcation_probe(&main.rounded, &main.op, &main.spec, cap, steps, &policy, &ctx.opts)?;
    let fold_lambda = main.rounded.fold.as_ref().map_or(f64::NAN, |f| f.u_at_fold.spec.lambda);
    let (lam_end, sup_end) = long.table.last().copied().unwrap_or((f64::NAN, f64::NAN));
    let sup_growth = sup_end / long.fold_sup;
    let lam_shrink = fold_lambda / lam_end;
    let mut out = vec![
        CheckRecord::new("asymptotic/tail growth", claim)
            .params(format!("growth cap {cap:.0e} x fold sup, n={BRANCH_N}"))
            .expected("sup grows >= 10x while lambda shrinks >= 10x")
            .measured(format!("sup x{sup_growth:.1}, lambda /{lam_shrink:.1}"))
            .tolerance("10")
            .pass(sup_growth >= 10.0 && lam_shrink >= 10.0),
        CheckRecord::new("asymptotic/infimum decreases", claim)
            .params(format!("growth cap {:.0e} then {cap:.0e}", cap / 10.0))
            .expected("lambda infimum decreases with the budget")
            .measured(format!("{:.4e} -> {:.4e}", short.lambda_a_estimate, long.lambda_a_estimate))
            .tolerance("strict")
            .pass(long.lambda_a_estimate < short.lambda_a_estimate),
    ];
    let p = main.spec.power().unwrap_or(f64::NAN);
    let predicted = -1.0 / (p - 1.0);
    out.push(
        CheckRecord::new("asymptotic/power law", claim)
            .params("tail points with sup >= 10 x fold sup")
            .expected(format!("log-log slope {predicted:.3}"))
            .measured(format!("{:.4}", long.tail_exponent))
            .tolerance("0.05")
            .pass((long.tail_exponent - predicted).abs() <= 0.05),
    );
    out.push(
        CheckRecord::new("asymptotic/minimal bounded", claim)
            .params("minimal segment")
            .expected("sup bounded by the fold sup")
            .measured(format!("{:.4} <= {:.4}", long.minimal_sup, long.fold_sup))
            .tolerance("-")
            .pass(long.minimal_sup <= long.fold_sup),
    );
    Ok(out)
}

/// Central differences at steps `{1e-2, 1e-3}` times `1 + ‖h‖∞`.
fn derivatives_suite() -> Result<Vec<CheckRecord>> {
    let claim = claim_of(Suite::Derivatives);
    let n = 64;
    let op = operator(0.4, n)?;
    let spec = spec_of(0.4, 1.5, 0.2)?;
    let x = op.grid().nodes().to_vec();
    let h: Vec<f64> = x.iter().map(|x| 0.5 + 0.3 * (2.0 * x).cos()).collect();
    let phi: Vec<f64> = x.iter().map(|x| (3.0 * x).sin() + 0.5).collect();
    let psi: Vec<f64> = x.iter().map(|x| 1.0 - x * x).collect();
    let lambda = 1.2;
    let opts = SolverOptions {
        newton_tol: 1e-14,
        ..SolverOptions::default()
    };
    let a = |lam: f64, h: &[f64]| -> Result<Vec<f64>> { Ok(solve_a(lam, h, &spec, &op, &opts)?.values) };
    let shift = |dir: &[f64], t: f64| -> Vec<f64> { h.iter().zip(dir).map(|(a, b)| a + t * b).collect() };
    let diff = |p: &[f64], m: &[f64], scale: f64| -> Vec<f64> { p.iter().zip(m).map(|(a, b)| (a - b) * scale).collect() };
    let u = a(lambda, &h)?;
    let b = sensitivity_bundle(lambda, &u, &phi, &psi, &op, &spec)?;
    let base = sup_norm(&h) + 1.0;
    let steps = [1e-2 * base, 1e-3 * base];
    let mut err: HashMap<&str, [f64; 2]> = HashMap::new();
    for (k, t) in steps.into_iter().enumerate() {
        let up = a(lambda + t, &h)?;
        let dn = a(lambda - t, &h)?;
        err.entry("w1").or_default()[k] = sup_distance(&diff(&up, &dn, 0.5 / t), &b.w1);
        let second: Vec<f64> = (0..n).map(|i| (up[i] - 2.0 * u[i] + dn[i]) / (t * t)).collect();
        err.entry("w11").or_default()[k] = sup_distance(&second, &b.w11);
        let vu = d2a_directional(lambda + t, &up, &phi, &op, &spec)?;
        let vd = d2a_directional(lambda - t, &dn, &phi, &op, &spec)?;
        err.entry("w12").or_default()[k] = sup_distance(&diff(&vu, &vd, 0.5 / t), &b.w12);
        let hp = a(lambda, &shift(&phi, t))?;
        let hm = a(lambda, &shift(&phi, -t))?;
        err.entry("v").or_default()[k] = sup_distance(&diff(&hp, &hm, 0.5 / t), &b.v);
        let pp = a(lambda, &shift(&psi, t))?;
        let pm = a(lambda, &shift(&psi, -t))?;
        let vp = d2a_directional(lambda, &pp, &phi, &op, &spec)?;
        let vm = d2a_directional(lambda, &pm, &phi, &op, &spec)?;
        err.entry("w22").or_default()[k] = sup_distance(&diff(&vp, &vm, 0.5 / t), &b.w22);
    }
    let mut out = Vec::new();
    for (name, min_order) in [("w1", 1.0), ("v", 1.0), ("w11", 1.8), ("w12", 1.8), ("w22", 1.8)] {
        let e = err[name];
        let order = (e[0] / e[1]).ln() / 10f64.ln();
        out.push(
            CheckRecord::new(format!("derivatives/{name}"), claim)
                .params(format!("s=0.4, delta=1.5, beta=0.2, lambda={lambda}, n={n}, central steps {}", fmt_list(&steps)))
                .expected(format!("observed order >= {min_order}"))
                .measured(format!("errors {}, order {order:.3}", fmt_list(&e)))
                .tolerance(format!("{min_order}"))
                .pass(order >= min_order),
        );
    }
    Ok(out)
}

fn uniqueness_suite(ctx: &Context) -> Result<Vec<CheckRecord>> {
    let claim = claim_of(Suite::Uniqueness);
    let main = ctx.main().map_err(HarnessError::Refused)?;
    let lambda = 1e-3 * main.lambda_estimate();
    let rep = continuation::uniqueness_probe(lambda, &main.spec, &main.op, ctx.cfg.trials, ctx.cfg.seed, &ctx.opts)?;
    let converged = rep.distances.iter().flatten().count();
    let worst = rep.distances.iter().flatten().cloned().fold(0.0, f64::max);
    let mut out = vec![CheckRecord::new("uniqueness/probe", claim)
        .params(format!("lambda = 1e-3 Lambda = {lambda:.4e}, {} starts, seed {}, C0 = {:.4}", ctx.cfg.trials, ctx.cfg.seed, rep.c0))
        .expected("UNIQUE")
        .measured(format!("{:?}; {converged} converged, worst distance {worst:.2e}", rep.verdict))
        .tolerance(format!("10 x {:.1e}", rep.tolerance))
        .pass(rep.verdict == UniquenessVerdict::Unique)];
    let minimal = solve_min(lambda, &main.spec, &main.op, &ctx.opts)?;
    let c0 = decreasing_window(&main.spec, &main.op)?;
    let mut limits = Vec::new();
    for factor in [1.0, 0.5, 2.0] {
        let start: Vec<f64> = minimal.values.iter().map(|v| (factor * v).min(c0)).collect();
        let d = newton_from(lambda, &start, &main.spec, &main.op, &ctx.opts)?
            .map_or(f64::INFINITY, |s| sup_distance(&s.values, &minimal.values));
        limits.push(d);
    }
    let tol = 10.0 * minimal.tolerance;
    out.push(
        CheckRecord::new("uniqueness/multistart", claim)
            .params("starts 1x, 0.5x and 2x the minimal solution, clipped to C0")
            .expected("same limit")
            .measured(format!("distances {}", fmt_list(&limits)))
            .tolerance(format!("{tol:.1e}"))
            .pass(limits[0] == 0.0 && limits.iter().all(|d| *d <= tol)),
    );
    Ok(out)
}
