//! Linearization of the problem around a solution: the principal
//! eigenvalue `Λ₁(λ)`, derivatives of the solution map `A(λ, h)` and the
//! invertibility monitor for `I - ∂₂A · λ f'(u)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fracops::NonlocalOperator;
use crate::linalg::{self, add_diagonal, EigenOptions, EigenPair, LuFactor, Matrix, SpdFactor};
use crate::problem::ProblemSpec;

/// `A + diag(λδK u^{-δ-1} - λ f'(u))`.
#[derive(Debug, Clone)]
pub struct LinearizedOperator {
    pub potential: Vec<f64>,
    pub matrix: Matrix,
}

fn check_field(op: &NonlocalOperator, u: &[f64]) -> Result<()> {
    Error::check_len(op.len(), u.len())?;
    if let Some(i) = u.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::invalid(format!("field not positive and finite at node {i}")));
    }
    Ok(())
}

/// `λδK u^{-δ-1}`: the singular part of the potential.
fn singular_potential(lambda: f64, u: &[f64], k: &[f64], delta: f64) -> Vec<f64> {
    u.iter()
        .zip(k)
        .map(|(u, k)| lambda * delta * k * u.powf(-delta - 1.0))
        .collect()
}

impl LinearizedOperator {
    pub fn new(lambda: f64, u: &[f64], op: &NonlocalOperator, spec: &ProblemSpec) -> Result<Self> {
        check_field(op, u)?;
        let k = spec.k_field(op.grid())?;
        let mut potential = singular_potential(lambda, u, &k, spec.delta);
        for (p, v) in potential.iter_mut().zip(u) {
            *p -= lambda * spec.df(*v);
        }
        if potential.iter().any(|p| !p.is_finite()) {
            return Err(Error::Invariant("linearized potential is not finite".into()));
        }
        let matrix = add_diagonal(op.matrix(), &potential);
        Ok(LinearizedOperator { potential, matrix })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrincipalEigen {
    pub pair: EigenPair,
    pub second: f64,
    /// `(μ₂ - μ₁) / |μ₁|`.
    pub relative_gap: f64,
}

/// Smallest eigenpair of the linearization and its gap to the second.
pub fn lambda1(lambda: f64, u: &[f64], op: &NonlocalOperator, spec: &ProblemSpec) -> Result<PrincipalEigen> {
    let lin = LinearizedOperator::new(lambda, u, op, spec)?;
    let mut pairs = linalg::smallest_eigenpairs(&lin.matrix, 2.min(op.len()), EigenOptions::default())?;
    let first = pairs.remove(0);
    if first.vector.iter().any(|v| *v <= 0.0) {
        return Err(Error::Invariant("principal eigenvector of the linearization is not positive".into()));
    }
    let second = pairs.first().map_or(f64::INFINITY, |p| p.value);
    let relative_gap = (second - first.value) / first.value.abs();
    Ok(PrincipalEigen {
        pair: first,
        second,
        relative_gap,
    })
}

/// Cholesky factor of `P = A + diag(λδK u^{-δ-1})`, the linearization of
/// the pure singular map.
fn singular_factor(lambda: f64, u: &[f64], op: &NonlocalOperator, spec: &ProblemSpec) -> Result<(SpdFactor, Vec<f64>)> {
    check_field(op, u)?;
    let k = spec.k_field(op.grid())?;
    let pot = singular_potential(lambda, u, &k, spec.delta);
    let f = SpdFactor::new(add_diagonal(op.matrix(), &pot))
        .ok_or_else(|| Error::Invariant("singular linearization failed to factor".into()))?;
    Ok((f, k))
}

/// `∂₂A(λ, h)(φ)`: solves `P v = φ` at `u = A(λ, h)`.
pub fn d2a_directional(lambda: f64, u: &[f64], phi: &[f64], op: &NonlocalOperator, spec: &ProblemSpec) -> Result<Vec<f64>> {
    Error::check_len(op.len(), phi.len())?;
    let (f, _) = singular_factor(lambda, u, op, spec)?;
    Ok(f.solve(phi))
}

/// First and second derivatives of `A(λ, h)` at `u = A(λ, h)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityBundle {
    /// `∂₁A`
    pub w1: Vec<f64>,
    /// `∂₁₁A`
    pub w11: Vec<f64>,
    /// `∂₁₂A (φ)`
    pub w12: Vec<f64>,
    /// `∂₂₂A (φ, ψ)`
    pub w22: Vec<f64>,
    /// `∂₂A (φ)`
    pub v: Vec<f64>,
    /// `∂₂A (ψ)`
    pub v_psi: Vec<f64>,
    /// Largest residual of the six linear solves.
    pub residual: f64,
}

/// Solves, with `P = A + diag(λδK u^{-δ-1})`,
///
/// ```text
/// P w1  = K u^{-δ}
/// P w11 = λδ(δ+1) K u^{-δ-2} w1² - 2δ K u^{-δ-1} w1
/// P w12 = λδ(δ+1) K u^{-δ-2} w1 v - δ K u^{-δ-1} v
/// P w22 = λδ(δ+1) K u^{-δ-2} v vψ
/// P v = φ,  P vψ = ψ
/// ```
pub fn sensitivity_bundle(
    lambda: f64,
    u: &[f64],
    phi: &[f64],
    psi: &[f64],
    op: &NonlocalOperator,
    spec: &ProblemSpec,
) -> Result<SensitivityBundle> {
    Error::check_len(op.len(), phi.len())?;
    Error::check_len(op.len(), psi.len())?;
    let (f, k) = singular_factor(lambda, u, op, spec)?;
    let d = spec.delta;
    let n = u.len();
    let a1: Vec<f64> = (0..n).map(|i| k[i] * u[i].powf(-d)).collect();
    let b1: Vec<f64> = (0..n).map(|i| d * k[i] * u[i].powf(-d - 1.0)).collect();
    let b2: Vec<f64> = (0..n).map(|i| lambda * d * (d + 1.0) * k[i] * u[i].powf(-d - 2.0)).collect();

    let w1 = f.solve(&a1);
    let v = f.solve(phi);
    let v_psi = f.solve(psi);
    let r11: Vec<f64> = (0..n).map(|i| b2[i] * w1[i] * w1[i] - 2.0 * b1[i] * w1[i]).collect();
    let r12: Vec<f64> = (0..n).map(|i| b2[i] * w1[i] * v[i] - b1[i] * v[i]).collect();
    let r22: Vec<f64> = (0..n).map(|i| b2[i] * v[i] * v_psi[i]).collect();
    let w11 = f.solve(&r11);
    let w12 = f.solve(&r12);
    let w22 = f.solve(&r22);

    let pot: Vec<f64> = (0..n).map(|i| lambda * b1[i]).collect();
    let p = add_diagonal(op.matrix(), &pot);
    let res = |x: &[f64], rhs: &[f64]| linalg::sup_distance(&linalg::matvec(&p, x), rhs);
    let residual = [
        res(&w1, &a1),
        res(&w11, &r11),
        res(&w12, &r12),
        res(&w22, &r22),
        res(&v, phi),
        res(&v_psi, psi),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    Ok(SensitivityBundle {
        w1,
        w11,
        w12,
        w22,
        v,
        v_psi,
        residual,
    })
}

/// Smallest singular value of `I - P^{-1} diag(λ f'(u))`.
///
/// With `J = P - diag(λ f'(u))` the matrix is `P^{-1} J`, whose inverse is
/// `J^{-1} P`; the largest eigenvalue of `J^{-1} P P J^{-1}` is found by
/// power iteration and returned as `μ^{-1/2}`.
pub fn fredholm_monitor(lambda: f64, u: &[f64], op: &NonlocalOperator, spec: &ProblemSpec) -> Result<f64> {
    check_field(op, u)?;
    let k = spec.k_field(op.grid())?;
    let pot = singular_potential(lambda, u, &k, spec.delta);
    let p = add_diagonal(op.matrix(), &pot);
    let df: Vec<f64> = u.iter().map(|v| -lambda * spec.df(*v)).collect();
    let j = add_diagonal(&p, &df);
    let lu = LuFactor::new(j);
    let n = u.len();

    let mut x: Vec<f64> = vec![1.0 / (n as f64).sqrt(); n];
    let mut mu = 0.0;
    for _ in 0..1000 {
        let Some(y) = lu.solve(&x) else {
            return Ok(0.0);
        };
        let py = linalg::matvec(&p, &y);
        let ppy = linalg::matvec(&p, &py);
        let Some(z) = lu.solve(&ppy) else {
            return Ok(0.0);
        };
        let next_mu: f64 = x.iter().zip(&z).map(|(a, b)| a * b).sum();
        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Ok(0.0);
        }
        x = z.into_iter().map(|v| v / norm).collect();
        let done = (next_mu - mu).abs() <= 1e-12 * next_mu.abs();
        mu = next_mu;
        if done {
            break;
        }
    }
    Ok(mu.max(f64::MIN_POSITIVE).powf(-0.5))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fracops::assemble_operator;
    use crate::grid::build_grid;

    fn setup(n: usize) -> (NonlocalOperator, ProblemSpec, Vec<f64>) {
        let op = assemble_operator(&build_grid(1.0, n).unwrap(), 0.4).unwrap();
        let spec = ProblemSpec::new(0.4, 0.5, 0.0, 1.0).unwrap().with_power(2.0, 1.0).unwrap();
        let u: Vec<f64> = op.torsion().unwrap().iter().map(|v| 0.2 + v).collect();
        (op, spec, u)
    }

    #[test]
    fn zero_direction() {
        let (op, spec, u) = setup(24);
        let v = d2a_directional(0.7, &u, &[0.0; 24], &op, &spec).unwrap();
        assert!(v.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn directional_is_linear() {
        let (op, spec, u) = setup(24);
        let a: Vec<f64> = (0..24).map(|i| (i as f64).sin()).collect();
        let b: Vec<f64> = (0..24).map(|i| (i as f64 * 0.3).cos()).collect();
        let ab: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 2.0 * x - 3.0 * y).collect();
        let va = d2a_directional(0.7, &u, &a, &op, &spec).unwrap();
        let vb = d2a_directional(0.7, &u, &b, &op, &spec).unwrap();
        let vab = d2a_directional(0.7, &u, &ab, &op, &spec).unwrap();
        for i in 0..24 {
            assert!((vab[i] - 2.0 * va[i] + 3.0 * vb[i]).abs() <= 1e-10 * vab[i].abs().max(1.0));
        }
    }

    #[test]
    fn monitor_matches_dense_svd() {
        let (op, spec, u) = setup(40);
        for lambda in [0.1, 0.6, 1.3] {
            let m = fredholm_monitor(lambda, &u, &op, &spec).unwrap();
            let k = spec.k_field(op.grid()).unwrap();
            let pot = singular_potential(lambda, &u, &k, spec.delta);
            let p = add_diagonal(op.matrix(), &pot);
            let pinv = p.try_inverse().unwrap();
            let d = Matrix::from_diagonal(&nalgebra::DVector::from_iterator(40, u.iter().map(|v| lambda * spec.df(*v))));
            let mtx = Matrix::identity(40, 40) - pinv * d;
            let svd = mtx.singular_values();
            let smin = svd.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!((m - smin).abs() <= 1e-8 * smin.max(1e-3), "{lambda}: {m} vs {smin}");
        }
    }

    #[test]
    fn singular_term_only_shifts_spectrum_up() {
        let (op, _, u) = setup(48);
        let spec = ProblemSpec::new(0.4, 1.5, 0.0, 1.0).unwrap();
        let base = op.principal().unwrap().value;
        let l = lambda1(2.0, &u, &op, &spec).unwrap();
        assert!(l.pair.value >= base);
        assert!(l.relative_gap > 0.0);
    }

    #[test]
    fn no_singular_term_gives_zero_second_derivatives() {
        let (op, _, u) = setup(24);
        let spec = ProblemSpec::new(0.4, 0.0, 0.0, 1.0).unwrap();
        let phi = vec![1.0; 24];
        let b = sensitivity_bundle(1.0, &u, &phi, &phi, &op, &spec).unwrap();
        assert!(b.w11.iter().chain(&b.w12).chain(&b.w22).all(|v| *v == 0.0));
        let direct = op.solve_dirichlet(&spec.k_field(op.grid()).unwrap()).unwrap();
        assert!(linalg::sup_distance(&b.w1, &direct) <= 1e-12);
    }
}
