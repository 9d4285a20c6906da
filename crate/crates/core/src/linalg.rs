//! Dense factorizations and the symmetric eigen solver shared by the
//! operator and its linearizations.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, LU};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;

pub fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

pub fn matvec(m: &Matrix, v: &[f64]) -> Vec<f64> {
    let x = DVector::from_column_slice(v);
    (m * x).as_slice().to_vec()
}

/// `m + diag(d)`
pub fn add_diagonal(m: &Matrix, d: &[f64]) -> Matrix {
    let mut out = m.clone();
    for (i, v) in d.iter().enumerate() {
        out[(i, i)] += v;
    }
    out
}

/// Row-sum norm.
pub fn inf_norm(m: &Matrix) -> f64 {
    (0..m.nrows())
        .map(|i| m.row(i).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct SpdFactor(Cholesky<f64, Dyn>);

impl SpdFactor {
    /// `None` when the matrix is not numerically positive definite.
    pub fn new(m: Matrix) -> Option<Self> {
        m.cholesky().map(SpdFactor)
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let b = DVector::from_column_slice(rhs);
        self.0.solve(&b).as_slice().to_vec()
    }

    pub fn solve_matrix(&self, rhs: &Matrix) -> Matrix {
        self.0.solve(rhs)
    }

    pub fn inverse(&self) -> Matrix {
        self.0.inverse()
    }
}

/// Partial-pivoting LU factor for indefinite systems.
#[derive(Debug, Clone)]
pub struct LuFactor(LU<f64, Dyn, Dyn>);

impl LuFactor {
    pub fn new(m: Matrix) -> Self {
        LuFactor(m.lu())
    }

    /// `None` when a zero pivot is met.
    pub fn solve(&self, rhs: &[f64]) -> Option<Vec<f64>> {
        let b = DVector::from_column_slice(rhs);
        let x = self.0.solve(&b)?;
        if x.iter().all(|v| v.is_finite()) {
            Some(x.as_slice().to_vec())
        } else {
            None
        }
    }
}

/// Eigenvalue with a sup-normalized eigenvector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
    /// `‖M v − value v‖∞` for the stored (sup-normalized) vector.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct EigenOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tol: 1e-8,
            max_iter: 500,
        }
    }
}

/// Lower bound on the spectrum of a symmetric matrix (Gershgorin discs).
pub fn gershgorin_lower(m: &Matrix) -> f64 {
    (0..m.nrows())
        .map(|i| {
            let off: f64 = m
                .row(i)
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, x)| x.abs())
                .sum();
            m[(i, i)] - off
        })
        .fold(f64::INFINITY, f64::min)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

fn deflate(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let c = dot(v, b);
        v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
    }
}

fn rayleigh(m: &Matrix, v: &[f64]) -> (f64, Vec<f64>) {
    let mv = matvec(m, v);
    let rho = dot(v, &mv);
    (rho, mv)
}

fn residual_2(mv: &[f64], v: &[f64], rho: f64) -> f64 {
    mv.iter()
        .zip(v)
        .map(|(a, b)| (a - rho * b).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn start_vector(n: usize, j: usize) -> Vec<f64> {
    if j == 0 {
        return vec![1.0; n];
    }
    // discrete sine mode with j sign changes
    (0..n)
        .map(|i| {
            let t = (i + 1) as f64 / (n + 1) as f64;
            ((j + 1) as f64 * std::f64::consts::PI * t).sin() + 1e-3 * (i as f64 * 0.7).cos()
        })
        .collect()
}

/// The `k` smallest eigenpairs of a symmetric matrix, increasing.
///
/// Inverse iteration with a shift strictly below the Gershgorin bound until
/// the Rayleigh quotient is resolved to a small fraction of its distance to
/// the shift, then Rayleigh-quotient iteration; converged vectors are
/// deflated by projection. Indefinite matrices are handled because the first
/// shift is always below the spectrum.
pub fn smallest_eigenpairs(m: &Matrix, k: usize, opts: EigenOptions) -> Result<Vec<EigenPair>> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: m.ncols(),
        });
    }
    if k == 0 || k > n {
        return Err(Error::invalid(format!(
            "requested {k} eigenpairs of a {n}x{n} matrix"
        )));
    }
    let scale = inf_norm(m).max(f64::MIN_POSITIVE);
    let lower = gershgorin_lower(m);
    let shift = lower - 1e-6 * scale;
    let factor = SpdFactor::new(add_diagonal(m, &vec![-shift; n])).ok_or_else(|| {
        Error::Invariant("shift below the Gershgorin bound is not positive definite".into())
    })?;

    let mut found: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut pairs = Vec::with_capacity(k);
    for j in 0..k {
        let mut x = start_vector(n, j);
        deflate(&mut x, &found);
        normalize(&mut x);
        let (mut rho, _) = rayleigh(m, &x);
        let mut mx;
        let mut iterations = 0;

        // phase 1: fixed shift below the spectrum
        loop {
            iterations += 1;
            let mut y = factor.solve(&x);
            deflate(&mut y, &found);
            normalize(&mut y);
            let (r, my) = rayleigh(m, &y);
            x = y;
            mx = my;
            let res = residual_2(&mx, &x, r);
            let settled = (r - rho).abs() <= 1e-10 * (r - shift).abs();
            rho = r;
            if res <= 1e-4 * (rho - shift).abs() || settled || iterations >= opts.max_iter {
                break;
            }
        }

        // phase 2: Rayleigh-quotient iteration
        let mut sup_res = sup_residual(&mx, &x, rho);
        while sup_res > opts.tol && iterations < opts.max_iter {
            iterations += 1;
            let lu = LuFactor::new(add_diagonal(m, &vec![-rho; n]));
            let Some(mut y) = lu.solve(&x) else {
                // rho is an eigenvalue to working precision
                break;
            };
            deflate(&mut y, &found);
            if normalize(&mut y) == 0.0 {
                break;
            }
            let (r, my) = rayleigh(m, &y);
            let res = sup_residual(&my, &y, r);
            if res >= sup_res && iterations > 5 && res <= opts.tol * 1e2 {
                break;
            }
            x = y;
            rho = r;
            sup_res = res;
        }
        if sup_res > opts.tol {
            return Err(Error::NotConverged {
                what: "eigen solver",
                iterations,
                residual: sup_res,
            });
        }
        found.push(x.clone());

        // sup-normalize with the dominant entry positive
        let (imax, _) = x
            .iter()
            .enumerate()
            .fold((0, 0.0), |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
        let scale = x[imax];
        let vector: Vec<f64> = x.iter().map(|v| v / scale).collect();
        let mv = matvec(m, &vector);
        let residual = sup_residual(&mv, &vector, rho);
        pairs.push(EigenPair {
            value: rho,
            vector,
            residual,
        });
    }
    pairs.sort_by(|a, b| a.value.total_cmp(&b.value));
    Ok(pairs)
}

/// Residual of the sup-normalized pair `(rho, v / ‖v‖∞)`.
fn sup_residual(mv: &[f64], v: &[f64], rho: f64) -> f64 {
    let s = sup_norm(v);
    mv.iter()
        .zip(v)
        .fold(0.0_f64, |acc, (a, b)| acc.max((a - rho * b).abs()))
        / s
}
