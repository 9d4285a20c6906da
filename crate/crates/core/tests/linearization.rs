mod common;

use common::operator;
use fracfold::linalg::{sup_distance, sup_norm};
use fracfold::linearization::{d2a_directional, sensitivity_bundle};
use fracfold::singular::solve_a;
use fracfold::{NonlocalOperator, ProblemSpec, SolverOptions};

const N: usize = 64;

struct Setup {
    op: NonlocalOperator,
    spec: ProblemSpec,
    h: Vec<f64>,
    phi: Vec<f64>,
    psi: Vec<f64>,
    lambda: f64,
}

fn setup() -> Setup {
    let op = operator(0.4, N);
    let spec = ProblemSpec::new(0.4, 1.5, 0.2, 1.0).unwrap();
    let x = op.grid().nodes().to_vec();
    Setup {
        h: x.iter().map(|x| 0.5 + 0.3 * (2.0 * x).cos()).collect(),
        phi: x.iter().map(|x| (3.0 * x).sin() + 0.5).collect(),
        psi: x.iter().map(|x| 1.0 - x * x).collect(),
        op,
        spec,
        lambda: 1.2,
    }
}

fn tight() -> SolverOptions {
    SolverOptions {
        newton_tol: 1e-14,
        ..SolverOptions::default()
    }
}

fn a_map(s: &Setup, lambda: f64, h: &[f64]) -> Vec<f64> {
    solve_a(lambda, h, &s.spec, &s.op, &tight()).unwrap().values
}

fn shifted(h: &[f64], dir: &[f64], t: f64) -> Vec<f64> {
    h.iter().zip(dir).map(|(a, b)| a + t * b).collect()
}

fn combine(a: &[f64], b: &[f64], scale: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| (x - y) * scale).collect()
}

/// Error at the two step sizes and the observed order between them.
fn order(errors: [f64; 2], ratio: f64) -> f64 {
    (errors[0] / errors[1]).ln() / ratio.ln()
}

/// Forward differences use steps `{1e-3, 1e-4}`; central ones use
/// `{1e-2, 1e-3}` because at `1e-4` their truncation error is already
/// below the roundoff left by the nonlinear solves.
fn steps(s: &Setup, central: bool) -> [f64; 2] {
    let base = sup_norm(&s.h) + 1.0;
    if central {
        [1e-2 * base, 1e-3 * base]
    } else {
        [1e-3 * base, 1e-4 * base]
    }
}

#[test]
fn first_derivatives_match_finite_differences() {
    let s = setup();
    let u = a_map(&s, s.lambda, &s.h);
    let b = sensitivity_bundle(s.lambda, &u, &s.phi, &s.psi, &s.op, &s.spec).unwrap();
    assert!(b.w1.iter().all(|v| *v > 0.0));
    assert!(b.residual <= 1e-9 * sup_norm(&b.w1).max(1.0));

    let mut e_w1 = [0.0; 2];
    let mut e_v = [0.0; 2];
    for (k, t) in steps(&s, false).into_iter().enumerate() {
        // forward differences: first order
        let up = a_map(&s, s.lambda + t, &s.h);
        e_w1[k] = sup_distance(&combine(&up, &u, 1.0 / t), &b.w1);
        let hp = shifted(&s.h, &s.phi, t);
        let vp = a_map(&s, s.lambda, &hp);
        e_v[k] = sup_distance(&combine(&vp, &u, 1.0 / t), &b.v);
    }
    assert!(order(e_w1, 10.0) >= 0.9, "{e_w1:?}");
    assert!(order(e_v, 10.0) >= 0.9, "{e_v:?}");
    assert!(e_w1[1] <= 1e-2 * sup_norm(&b.w1));
    assert!(e_v[1] <= 1e-2 * sup_norm(&b.v));
}

#[test]
fn central_differences_in_lambda() {
    let s = setup();
    let u = a_map(&s, s.lambda, &s.h);
    let b = sensitivity_bundle(s.lambda, &u, &s.phi, &s.psi, &s.op, &s.spec).unwrap();
    let mut e_w1 = [0.0; 2];
    let mut e_w11 = [0.0; 2];
    let mut e_w12 = [0.0; 2];
    for (k, t) in steps(&s, true).into_iter().enumerate() {
        let up = a_map(&s, s.lambda + t, &s.h);
        let dn = a_map(&s, s.lambda - t, &s.h);
        e_w1[k] = sup_distance(&combine(&up, &dn, 0.5 / t), &b.w1);
        let second: Vec<f64> = (0..N).map(|i| (up[i] - 2.0 * u[i] + dn[i]) / (t * t)).collect();
        e_w11[k] = sup_distance(&second, &b.w11);
        let vu = d2a_directional(s.lambda + t, &up, &s.phi, &s.op, &s.spec).unwrap();
        let vd = d2a_directional(s.lambda - t, &dn, &s.phi, &s.op, &s.spec).unwrap();
        e_w12[k] = sup_distance(&combine(&vu, &vd, 0.5 / t), &b.w12);
    }
    assert!(order(e_w1, 10.0) >= 1.8, "{e_w1:?}");
    assert!(order(e_w11, 10.0) >= 1.8, "{e_w11:?}");
    assert!(order(e_w12, 10.0) >= 1.8, "{e_w12:?}");
    assert!(e_w11[1] <= 1e-3 * sup_norm(&b.w11));
}

#[test]
fn central_differences_in_data() {
    let s = setup();
    let u = a_map(&s, s.lambda, &s.h);
    let b = sensitivity_bundle(s.lambda, &u, &s.phi, &s.psi, &s.op, &s.spec).unwrap();
    let mut e_w22 = [0.0; 2];
    for (k, t) in steps(&s, true).into_iter().enumerate() {
        let up = a_map(&s, s.lambda, &shifted(&s.h, &s.psi, t));
        let dn = a_map(&s, s.lambda, &shifted(&s.h, &s.psi, -t));
        let vu = d2a_directional(s.lambda, &up, &s.phi, &s.op, &s.spec).unwrap();
        let vd = d2a_directional(s.lambda, &dn, &s.phi, &s.op, &s.spec).unwrap();
        e_w22[k] = sup_distance(&combine(&vu, &vd, 0.5 / t), &b.w22);
    }
    assert!(order(e_w22, 10.0) >= 1.8, "{e_w22:?}");
    assert!(e_w22[1] <= 1e-3 * sup_norm(&b.w22));
}
