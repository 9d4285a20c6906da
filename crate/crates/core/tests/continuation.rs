mod common;

use std::sync::OnceLock;

use fracfold::continuation::{
    asymptotic_bifurcation_probe, decreasing_window, fold_round, multiplicity_scan, quadratic_fit, trace_minimal,
    uniqueness_probe, Branch, Segment, StepPolicy, UniquenessVerdict,
};
use fracfold::linearization::lambda1;
use fracfold::singular::{residual, solve_min};
use fracfold::{Error, NonlocalOperator, ProblemSpec, SolverOptions};
use proptest::prelude::*;

fn spec() -> ProblemSpec {
    ProblemSpec::new(0.4, 0.5, 0.0, 1.0).unwrap().with_power(2.0, 1.0).unwrap()
}

struct Fixture {
    op: NonlocalOperator,
    traced: Branch,
    rounded: Branch,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let op = common::operator(0.4, 256);
        let opts = SolverOptions::default();
        let pol = StepPolicy::default();
        let traced = trace_minimal(&spec(), &op, &pol, &opts).unwrap();
        let rounded = fold_round(&traced, &op, &spec(), &pol, &opts).unwrap();
        Fixture { op, traced, rounded }
    })
}

#[test]
fn minimal_trace_is_ordered_and_brackets_the_fold() {
    let f = fixture();
    let pts = &f.traced.points;
    assert!(pts.len() >= 5);
    for w in pts.windows(2) {
        assert!(w[1].lambda > w[0].lambda);
        assert!(w[1].solution.values.iter().zip(&w[0].solution.values).all(|(a, b)| a >= b));
        assert!(w[1].lambda1 < w[0].lambda1, "Λ₁ must decrease toward the fold");
        assert!(w[1].arclength > w[0].arclength);
    }
    assert!(pts.iter().all(|p| p.lambda1 > 0.0));
    let (lo, hi) = f.traced.bracket.unwrap();
    assert!(lo < hi && (hi - lo) / lo <= 1e-3);
    assert_eq!(lo, pts.last().unwrap().lambda);
    let opts = SolverOptions::default();
    assert!(solve_min(lo, &spec(), &f.op, &opts).is_ok());
    let est = f.traced.lambda_estimate().unwrap();
    assert!(solve_min(1.05 * est, &spec(), &f.op, &opts).is_err());
}

#[test]
fn fold_is_a_quadratic_turning_point() {
    let f = fixture();
    let fold = f.rounded.fold.as_ref().unwrap();
    let (lo, hi) = fold.bracket;
    assert!(lo < fold.lambda_estimate && fold.lambda_estimate <= hi);
    assert!(fold.quadratic_coeff < 0.0);
    assert!(fold.normalized_slope.abs() <= 1e-2, "slope {}", fold.normalized_slope);
    assert!((fold.lambda_max - fold.lambda_estimate).abs() <= hi - lo);
    let at: Vec<_> = f.rounded.points.iter().filter(|p| p.segment == Segment::Fold).collect();
    assert_eq!(at.len(), 1);
    assert!(at[0].monitor <= 1e-3);
    assert!(at[0].lambda1.abs() <= 1e-6);
    // the fold solution is a genuine solution at its own λ
    let res = residual(&f.op, &fold.u_at_fold.spec, &fold.u_at_fold.values).unwrap();
    assert!(res <= fold.u_at_fold.tolerance * 10.0);
}

#[test]
fn principal_eigenvalue_changes_sign_once_along_the_curve() {
    let f = fixture();
    let signs: Vec<bool> = f
        .rounded
        .points
        .iter()
        .filter(|p| p.segment != Segment::Fold)
        .map(|p| p.lambda1 > 0.0)
        .collect();
    let changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
    assert_eq!(changes, 1);
    assert!(f.rounded.upper().all(|p| p.lambda1 < 0.0));
    let fold_sup = f.rounded.fold.as_ref().unwrap().u_at_fold.values.iter().cloned().fold(0.0, f64::max);
    assert!(f.rounded.minimal().all(|p| p.sup_norm <= fold_sup));
    assert!(f.rounded.upper().all(|p| p.sup_norm >= fold_sup));
}

#[test]
fn second_solutions_are_distinct_and_unstable() {
    let f = fixture();
    let lam = f.rounded.fold.as_ref().unwrap().lambda_estimate;
    let opts = SolverOptions::default();
    let rows = multiplicity_scan(&spec(), &f.op, &f.rounded, &[0.5 * lam, 0.8 * lam, 0.95 * lam], &opts).unwrap();
    let mut prev = f64::INFINITY;
    for r in &rows {
        let second = r.second.as_ref().expect("upper segment covers the target");
        assert!(r.distinct);
        let res = residual(&f.op, &second.spec, &second.values).unwrap();
        assert!(res <= second.tolerance);
        assert!(second.values.iter().zip(&r.minimal.values).all(|(a, b)| a > b));
        let l1 = lambda1(r.lambda, &second.values, &f.op, &spec()).unwrap();
        assert!(l1.pair.value < 0.0);
        let gap = r.gap.unwrap();
        assert!(gap < prev);
        prev = gap;
    }
}

#[test]
fn multiplicity_requires_subcritical_power() {
    let f = fixture();
    let sup = ProblemSpec::new(0.4, 0.5, 0.0, 1.0).unwrap().with_power(10.0, 1.0).unwrap();
    let err = multiplicity_scan(&sup, &f.op, &f.rounded, &[0.1], &SolverOptions::default()).unwrap_err();
    assert!(matches!(err, Error::InvalidArgument(_)));
}

#[test]
fn upper_tail_blows_up_like_the_power_law() {
    let f = fixture();
    let pol = StepPolicy::default();
    let opts = SolverOptions::default();
    let (_, short) = asymptotic_bifurcation_probe(&f.rounded, &f.op, &spec(), 1e2, 200, &pol, &opts).unwrap();
    let (long, rep) = asymptotic_bifurcation_probe(&f.rounded, &f.op, &spec(), 1e3, 200, &pol, &opts).unwrap();
    assert!(short.reached_cap && rep.reached_cap);
    assert!(rep.lambda_a_estimate < short.lambda_a_estimate);
    // sup u ~ λ^{-1/(p-1)} along the tail
    assert!((rep.tail_exponent + 1.0).abs() < 0.05, "{}", rep.tail_exponent);
    assert!(rep.minimal_sup <= rep.fold_sup);
    let tail = long.points.last().unwrap();
    assert!(tail.sup_norm >= 1e3 * rep.fold_sup);
    let res = residual(&f.op, &tail.solution.spec, &tail.solution.values).unwrap();
    assert!(res <= tail.solution.tolerance);
}

#[test]
fn small_lambda_solution_is_unique_in_the_window() {
    let f = fixture();
    let lam = 1e-3 * f.rounded.fold.as_ref().unwrap().lambda_estimate;
    let opts = SolverOptions::default();
    let a = uniqueness_probe(lam, &spec(), &f.op, 10, 11, &opts).unwrap();
    assert_eq!(a.verdict, UniquenessVerdict::Unique);
    assert_eq!(a.distances.len(), 10);
    assert!(a.distances.iter().flatten().count() >= 1);
    let b = uniqueness_probe(lam, &spec(), &f.op, 10, 11, &opts).unwrap();
    assert_eq!(a, b);
    // C₀ for a pure power: (δ K / p)^{1/(p+δ)}
    let c0 = decreasing_window(&spec(), &f.op).unwrap();
    assert!((c0 - (0.25f64).powf(1.0 / 2.5)).abs() < 1e-12);
}

#[test]
fn uniqueness_probe_rejects_large_lambda() {
    let f = fixture();
    let lam = 0.9 * f.rounded.fold.as_ref().unwrap().lambda_estimate;
    let err = uniqueness_probe(lam, &spec(), &f.op, 2, 1, &SolverOptions::default()).unwrap_err();
    assert!(matches!(err, Error::InvalidArgument(_)));
}

#[test]
fn tracing_requires_a_nonlinearity() {
    let op = common::operator(0.4, 32);
    let bare = ProblemSpec::new(0.4, 0.5, 0.0, 1.0).unwrap();
    let err = trace_minimal(&bare, &op, &StepPolicy::default(), &SolverOptions::default()).unwrap_err();
    assert!(matches!(err, Error::InvalidArgument(_)));
}

#[test]
fn fold_estimate_is_stable_under_refinement() {
    let pol = StepPolicy {
        diagnostics: false,
        ..StepPolicy::default()
    };
    let opts = SolverOptions::default();
    let est: Vec<f64> = [128, 256]
        .iter()
        .map(|&n| {
            let op = common::operator(0.4, n);
            trace_minimal(&spec(), &op, &pol, &opts).unwrap().lambda_estimate().unwrap()
        })
        .collect();
    assert!((est[0] - est[1]).abs() / est[1] < 1e-2, "{est:?}");
}

proptest! {
    #[test]
    fn quadratic_fit_recovers_parabolas(a in -5.0..5.0f64, b in -5.0..5.0f64, c in -5.0..5.0f64, h in 0.01..1.0f64) {
        let x: Vec<f64> = (-3..=3).map(|j| j as f64 * h).collect();
        let y: Vec<f64> = x.iter().map(|t| a + b * t + c * t * t).collect();
        let (fa, fb, fc, rms) = quadratic_fit(&x, &y);
        prop_assert!((fa - a).abs() < 1e-9 && (fb - b).abs() < 1e-8 && (fc - c).abs() < 1e-7 / (h * h).min(1.0));
        prop_assert!(rms < 1e-9);
    }
}
