//! Discrete restricted fractional Laplacian on a uniform interval grid.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::OnceLock;

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linalg::{self, EigenOptions, EigenPair, Matrix, SpdFactor};
use crate::quadrature::{gauss_legendre, tanh_sinh};

/// Relative slack allowed in the sign-pattern and symmetry checks.
pub const PATTERN_SLACK: f64 = 1e-12;

const CELL_ORDER: usize = 20;

/// `C(N, s) = π^{-N/2} 2^{2s-1} s Γ((N+2s)/2) / Γ(1-s)` for `N = 1`.
pub fn normalization_constant(s: f64) -> f64 {
    PI.powf(-0.5) * 2f64.powf(2.0 * s - 1.0) * s * gamma(0.5 + s) / gamma(1.0 - s)
}

/// Dense operator with the exterior zero condition built in.
#[derive(Debug)]
pub struct NonlocalOperator {
    grid: Grid,
    s: f64,
    normalization: f64,
    matrix: Matrix,
    norm: f64,
    factor: OnceLock<SpdFactor>,
    principal: OnceLock<EigenPair>,
}

impl Clone for NonlocalOperator {
    fn clone(&self) -> Self {
        NonlocalOperator {
            grid: self.grid.clone(),
            s: self.s,
            normalization: self.normalization,
            matrix: self.matrix.clone(),
            norm: self.norm,
            factor: self.factor.clone(),
            principal: self.principal.clone(),
        }
    }
}

/// Kernel weights of the second differences `2u_i - u_{i+k} - u_{i-k}`,
/// in units of `h^{-2s}`; entry `k - 1` belongs to offset `k`.
///
/// The first cell uses the quadratic near-field model, every other cell
/// the linear interpolant of the second difference.
pub(crate) fn toeplitz_weights(s: f64, len: usize) -> Vec<f64> {
    let (gx, gw) = gauss_legendre(CELL_ORDER);
    let mut w = vec![0.0; len + 1];
    if len == 0 {
        return Vec::new();
    }
    w[0] = 1.0 / (2.0 - 2.0 * s);
    for k in 1..len {
        let kf = k as f64;
        let (mut lo, mut hi) = (0.0, 0.0);
        for (x, wt) in gx.iter().zip(&gw) {
            let theta = 0.5 * (x + 1.0);
            let rho = kf + theta;
            let kern = 0.5 * wt * rho.powf(-1.0 - 2.0 * s);
            lo += (1.0 - theta) * kern;
            hi += theta * kern;
        }
        w[k - 1] += lo;
        w[k] += hi;
    }
    w.truncate(len);
    w
}

/// Total kernel mass in units of `h^{-2s}`: the quadratic first cell plus
/// the full tail `∫_h^∞ r^{-1-2s} dr`.
fn total_weight(s: f64) -> f64 {
    1.0 / (2.0 - 2.0 * s) + 1.0 / (2.0 * s)
}

/// Correction for the boundary cell seen from `m` cells away, where the
/// linear profile is replaced by `u_bnd (d/h)^s`.
fn boundary_cell_correction(s: f64, m: usize) -> f64 {
    let mf = m as f64;
    tanh_sinh(
        |t, _, _| (t.powf(s) - t) * (mf - t).powf(-1.0 - 2.0 * s),
        0.0,
        1.0,
        1e-13,
    )
}

/// Assembles the operator and checks symmetry, the M-matrix sign pattern
/// and positivity of the row sums.
pub fn assemble_operator(grid: &Grid, s: f64) -> Result<NonlocalOperator> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::invalid(format!("order s must lie in (0, 1), got {s}")));
    }
    let n = grid.len();
    let h = grid.spacing();
    let normalization = normalization_constant(s);
    let scale = 2.0 * normalization * h.powf(-2.0 * s);

    let w = toeplitz_weights(s, n);
    let diag = scale * 2.0 * total_weight(s);
    let mut a = Matrix::from_fn(n, n, |i, j| {
        if i == j {
            diag
        } else {
            -scale * w[i.abs_diff(j) - 1]
        }
    });

    if n >= 3 {
        let beta: Vec<f64> = (0..=n).map(|m| if m >= 2 { boundary_cell_correction(s, m) } else { 0.0 }).collect();
        // E[i][n-1] = -scale beta(n-i), E[i][0] = -scale beta(i+1), then symmetrize
        let mut e = Matrix::zeros(n, n);
        for i in 0..n {
            if i != n - 1 {
                e[(i, n - 1)] -= scale * beta[n - i];
            }
            if i != 0 {
                e[(i, 0)] -= scale * beta[i + 1];
            }
        }
        a += (&e + e.transpose()) * 0.5;
    }

    let op = NonlocalOperator {
        grid: grid.clone(),
        s,
        normalization,
        norm: linalg::inf_norm(&a),
        matrix: a,
        factor: OnceLock::new(),
        principal: OnceLock::new(),
    };
    op.check_structure()?;
    Ok(op)
}

impl NonlocalOperator {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn order(&self) -> f64 {
        self.s
    }

    /// `C(1, s)`; the matrix carries the factor `2 C(1, s)`.
    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    fn check_structure(&self) -> Result<()> {
        let a = &self.matrix;
        let n = a.nrows();
        let amax = a.amax();
        let slack = PATTERN_SLACK * amax;
        for i in 0..n {
            if a[(i, i)] <= 0.0 {
                return Err(Error::Invariant(format!("diagonal entry {i} is not positive")));
            }
            for j in 0..n {
                if i != j && a[(i, j)] > slack {
                    return Err(Error::Invariant(format!(
                        "off-diagonal entry ({i}, {j}) = {} breaks the M-matrix sign pattern",
                        a[(i, j)]
                    )));
                }
                if (a[(i, j)] - a[(j, i)]).abs() > slack {
                    return Err(Error::Invariant(format!("asymmetry at ({i}, {j})")));
                }
            }
        }
        if let Some(i) = self.exterior_coefficients().iter().position(|r| *r <= 0.0) {
            return Err(Error::Invariant(format!("row sum {i} is not positive")));
        }
        Ok(())
    }

    fn factor(&self) -> Result<&SpdFactor> {
        if let Some(f) = self.factor.get() {
            return Ok(f);
        }
        let f = SpdFactor::new(self.matrix.clone())
            .ok_or_else(|| Error::Invariant("operator matrix failed to factor".into()))?;
        Ok(self.factor.get_or_init(|| f))
    }

    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        Error::check_len(self.len(), u.len())?;
        Ok(linalg::matvec(&self.matrix, u))
    }

    /// Solves `A w = rhs` by the cached Cholesky factor.
    pub fn solve_dirichlet(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        Error::check_len(self.len(), rhs.len())?;
        if let Some(i) = rhs.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("rhs is not finite at node {i}")));
        }
        Ok(self.factor()?.solve(rhs))
    }

    /// The `count` smallest eigenpairs, increasing, sup-normalized.
    pub fn eigen_smallest(&self, count: usize) -> Result<Vec<EigenPair>> {
        let mut pairs = linalg::smallest_eigenpairs(&self.matrix, count, EigenOptions::default())?;
        if let Some(first) = pairs.first_mut() {
            if first.vector.iter().any(|v| *v <= 0.0) {
                return Err(Error::Invariant("principal eigenvector is not positive".into()));
            }
            first.vector.iter_mut().for_each(|v| *v = v.max(f64::MIN_POSITIVE));
        }
        Ok(pairs)
    }

    /// Principal eigenpair, computed once.
    pub fn principal(&self) -> Result<&EigenPair> {
        if let Some(p) = self.principal.get() {
            return Ok(p);
        }
        let p = self.eigen_smallest(1)?.remove(0);
        Ok(self.principal.get_or_init(|| p))
    }

    /// Row-sum norm of the matrix.
    pub fn norm_inf(&self) -> f64 {
        self.norm
    }

    /// Torsion function `U = A^{-1} 1`.
    pub fn torsion(&self) -> Result<Vec<f64>> {
        self.solve_dirichlet(&vec![1.0; self.len()])
    }

    /// Discrete Green function `x_i ↦ G(x_i, x_j)`: column `j` of the
    /// inverse divided by `h`.
    pub fn green_column(&self, j: usize) -> Result<Vec<f64>> {
        let n = self.len();
        if j >= n {
            return Err(Error::invalid(format!("node index {j} out of range 0..{n}")));
        }
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let h = self.grid.spacing();
        let mut g = self.factor()?.solve(&e);
        g.iter_mut().for_each(|v| *v /= h);
        if let Some(i) = g.iter().position(|v| *v <= 0.0) {
            return Err(Error::Invariant(format!("Green column {j} not positive at node {i}")));
        }
        Ok(g)
    }

    /// Full discrete Green matrix `A^{-1} / h`.
    pub fn green_matrix(&self) -> Result<Matrix> {
        let h = self.grid.spacing();
        Ok(self.factor()?.inverse() / h)
    }

    /// Row sums, i.e. the operator applied to the constant one.
    pub fn exterior_coefficients(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.matrix.row(i).iter().sum())
            .collect()
    }

    /// Writes `i j value` per nonzero entry.
    pub fn dump_triplets<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for i in 0..self.len() {
            for j in 0..self.len() {
                let v = self.matrix[(i, j)];
                if v != 0.0 {
                    writeln!(out, "{i} {j} {v:.17e}")?;
                }
            }
        }
        Ok(())
    }
}
