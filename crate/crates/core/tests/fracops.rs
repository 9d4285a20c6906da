mod common;

use common::{getoor_by_quadrature, getoor_solution, operator};
use fracfold::linalg::sup_norm;
use proptest::prelude::*;
use statrs::function::gamma::gamma;

#[test]
fn getoor_constant_confirmed_by_direct_quadrature() {
    for s in [0.25, 0.5, 0.75] {
        for x in [0.0, 0.3, -0.7] {
            let v = getoor_by_quadrature(s, x);
            let exact = gamma(2.0 * s + 1.0);
            assert!((v - exact).abs() < 1e-7 * exact, "s={s} x={x}: {v} vs {exact}");
        }
    }
}

fn applied_getoor_error(s: f64, n: usize) -> f64 {
    let op = operator(s, n);
    let x = op.grid().nodes().to_vec();
    let u: Vec<f64> = x.iter().map(|x| (1.0 - x * x).powf(s)).collect();
    let au = op.apply(&u).unwrap();
    let target = gamma(2.0 * s + 1.0);
    x.iter()
        .zip(&au)
        .filter(|(x, _)| x.abs() <= 0.5)
        .map(|(_, v)| (v - target).abs() / target)
        .fold(0.0, f64::max)
}

#[test]
fn applied_to_getoor_profile_half() {
    let e = applied_getoor_error(0.5, 1024);
    assert!(e <= 1e-2, "{e}");
}

#[test]
fn applied_to_getoor_profile_quarter() {
    let e = applied_getoor_error(0.25, 1024);
    assert!(e <= 1e-2, "{e}");
}

fn solve_error(s: f64, n: usize) -> f64 {
    let op = operator(s, n);
    let w = op.solve_dirichlet(&vec![1.0; n]).unwrap();
    let exact: Vec<f64> = op.grid().nodes().iter().map(|x| getoor_solution(s, *x)).collect();
    let diff: Vec<f64> = w.iter().zip(&exact).map(|(a, b)| a - b).collect();
    sup_norm(&diff) / sup_norm(&exact)
}

#[test]
fn torsion_matches_getoor_and_converges() {
    for s in [0.25, 0.5, 0.75] {
        let errs: Vec<f64> = [128, 256, 512, 1024].iter().map(|n| solve_error(s, *n)).collect();
        assert!(errs[3] <= 2e-2, "s={s}: {errs:?}");
        for w in errs.windows(2) {
            assert!(w[1] < w[0], "s={s}: {errs:?}");
        }
    }
}

#[test]
fn zero_rhs_and_zero_field() {
    let op = operator(0.4, 32);
    assert!(op.solve_dirichlet(&[0.0; 32]).unwrap().iter().all(|v| *v == 0.0));
    assert!(op.apply(&[0.0; 32]).unwrap().iter().all(|v| *v == 0.0));
    assert!(op.apply(&[1.0; 31]).is_err());
    let mut bad = vec![1.0; 32];
    bad[3] = f64::NAN;
    assert!(op.solve_dirichlet(&bad).is_err());
}

#[test]
fn principal_eigenpair() {
    let op = operator(0.5, 256);
    let pairs = op.eigen_smallest(2).unwrap();
    let (p1, p2) = (&pairs[0], &pairs[1]);
    assert!(p1.vector.iter().all(|v| *v > 0.0));
    assert!((sup_norm(&p1.vector) - 1.0).abs() < 1e-14);
    assert!(p1.residual <= 1e-8 && p2.residual <= 1e-8);
    assert!(p2.value > p1.value);
    assert!(p2.vector.iter().any(|v| *v > 0.0) && p2.vector.iter().any(|v| *v < 0.0));
    let av = op.apply(&p1.vector).unwrap();
    for (a, v) in av.iter().zip(&p1.vector) {
        assert!((a - p1.value * v).abs() <= 1e-8);
    }
}

#[test]
fn principal_eigenvalue_self_convergence() {
    let a = operator(0.5, 512).eigen_smallest(1).unwrap()[0].value;
    let b = operator(0.5, 1024).eigen_smallest(1).unwrap()[0].value;
    assert!((a - b).abs() <= 1e-2 * b, "{a} vs {b}");
}

#[test]
fn green_function_symmetric_positive() {
    let op = operator(0.3, 128);
    let cols: Vec<Vec<f64>> = (0..128).step_by(9).map(|j| op.green_column(j).unwrap()).collect();
    for (a, ja) in (0..128).step_by(9).enumerate() {
        for (b, jb) in (0..128).step_by(9).enumerate() {
            let (x, y) = (cols[a][jb], cols[b][ja]);
            assert!((x - y).abs() <= 1e-10 * x.abs().max(y.abs()));
        }
        assert!(cols[a].iter().all(|v| *v > 0.0));
    }
}

/// Smallest constant in the kernel bound over all off-diagonal pairs.
fn green_bound_constant(s: f64, n: usize) -> f64 {
    let op = operator(s, n);
    let g = op.green_matrix().unwrap();
    let x = op.grid().nodes();
    let d: Vec<f64> = (0..n).map(|i| op.grid().distance(i)).collect();
    let mut c: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let r = (x[i] - x[j]).abs();
            let bound = (d[i].powf(s) * d[j].powf(s)).min(r.powf(s) * d[i].powf(s)) / r;
            c = c.max(g[(i, j)] / bound);
        }
    }
    c
}

#[test]
fn green_bound_constant_stable_under_refinement() {
    for s in [0.25, 0.75] {
        let c: Vec<f64> = [128, 256, 512].iter().map(|n| green_bound_constant(s, *n)).collect();
        assert!(c.iter().all(|v| v.is_finite() && *v > 0.0));
        let spread = c.iter().cloned().fold(0.0, f64::max) / c.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(spread < 1.5, "s={s}: {c:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn structure_holds(s in 0.05f64..0.95, n in 8usize..160) {
        let op = operator(s, n);
        let a = op.matrix();
        let amax = a.amax();
        for i in 0..n {
            prop_assert!(a[(i, i)] > 0.0);
            for j in 0..n {
                if i != j {
                    prop_assert!(a[(i, j)] <= 1e-12 * amax);
                }
                prop_assert!((a[(i, j)] - a[(j, i)]).abs() <= 1e-12 * amax);
            }
        }
        prop_assert!(op.exterior_coefficients().iter().all(|r| *r > 0.0));
    }

    #[test]
    fn linear_and_round_trip(s in 0.1f64..0.9, seed in proptest::collection::vec(-1.0f64..1.0, 48)) {
        let op = operator(s, 48);
        let v: Vec<f64> = seed.iter().rev().cloned().collect();
        let au = op.apply(&seed).unwrap();
        let av = op.apply(&v).unwrap();
        let sum: Vec<f64> = seed.iter().zip(&v).map(|(a, b)| a + b).collect();
        let asum = op.apply(&sum).unwrap();
        let scale = sup_norm(&au).max(sup_norm(&av));
        for i in 0..48 {
            prop_assert!((asum[i] - au[i] - av[i]).abs() <= 1e-12 * scale);
        }
        let back = op.solve_dirichlet(&au).unwrap();
        let diff: Vec<f64> = back.iter().zip(&seed).map(|(a, b)| a - b).collect();
        prop_assert!(sup_norm(&diff) <= 1e-10 * sup_norm(&seed).max(1e-300));
    }

    #[test]
    fn discrete_comparison(s in 0.1f64..0.9, f in proptest::collection::vec(0.0f64..1.0, 64), g in proptest::collection::vec(0.0f64..1.0, 64)) {
        let op = operator(s, 64);
        // A u - A v = f >= 0 forces u >= v
        let v = op.solve_dirichlet(&g).unwrap();
        let rhs: Vec<f64> = f.iter().zip(&g).map(|(a, b)| a + b).collect();
        let u = op.solve_dirichlet(&rhs).unwrap();
        for i in 0..64 {
            prop_assert!(u[i] >= v[i] - 1e-13 * sup_norm(&u));
        }
    }
}
