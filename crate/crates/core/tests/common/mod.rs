#![allow(dead_code)]

use fracfold::{assemble_operator, build_grid, NonlocalOperator};

pub fn operator(s: f64, n: usize) -> NonlocalOperator {
    assemble_operator(&build_grid(1.0, n).unwrap(), s).unwrap()
}

/// Adaptive Simpson on `[a, b]`.
#[allow(clippy::too_many_arguments)]
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let diff = left + right - whole;
        if depth == 0 || (depth < 24 && (diff.abs() <= 15.0 * tol || diff.abs() <= 1e-14 * (left + right).abs())) {
            return left + right + diff / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 30)
}

/// Integral over `[a, b]` of a function with algebraic endpoint behaviour;
/// each half is mapped by a power substitution clustering at its endpoint.
pub fn endpoint_integral<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, power: f64, tol: f64) -> f64 {
    let half = 0.5 * (b - a);
    let left = |z: f64| {
        if z <= 0.0 {
            return 0.0;
        }
        power * half * z.powf(power - 1.0) * f(a + half * z.powf(power))
    };
    let right = |z: f64| {
        if z <= 0.0 {
            return 0.0;
        }
        power * half * z.powf(power - 1.0) * f(b - half * z.powf(power))
    };
    simpson(&left, 0.0, 1.0, tol) + simpson(&right, 0.0, 1.0, tol)
}

/// `(-Δ)^s (1 - y²)_+^s` at `x ∈ (-1, 1)` from the defining integral,
/// written as `2C ∫_0^∞ (2u(x) - u(x+r) - u(x-r)) r^{-1-2s} dr`.
pub fn getoor_by_quadrature(s: f64, x: f64) -> f64 {
    let c = fracfold::fracops::normalization_constant(s);
    let u = |y: f64| if y.abs() < 1.0 { (1.0 - y * y).powf(s) } else { 0.0 };
    let v = 1.0 - x * x;
    // second difference without cancellation while both points stay inside
    let second_difference = |r: f64| {
        if x.abs() + r < 1.0 {
            let up = s * ((-2.0 * x * r - r * r) / v).ln_1p();
            let dn = s * ((2.0 * x * r - r * r) / v).ln_1p();
            -v.powf(s) * (up.exp_m1() + dn.exp_m1())
        } else {
            2.0 * u(x) - u(x + r) - u(x - r)
        }
    };
    let g = |r: f64| second_difference(r) * r.powf(-1.0 - 2.0 * s);
    let p = (1.0 / s).max(1.0 / (1.0 - s));
    let (k1, k2) = (1.0 - x.abs(), 1.0 + x.abs());
    let near = endpoint_integral(&g, 0.0, k1, p, 1e-11);
    let mid = endpoint_integral(&g, k1, k2, p, 1e-11);
    let tail = 2.0 * u(x) * k2.powf(-2.0 * s) / (2.0 * s);
    2.0 * c * (near + mid + tail)
}

pub fn getoor_solution(s: f64, x: f64) -> f64 {
    (1.0 - x * x).powf(s) / statrs::function::gamma::gamma(2.0 * s + 1.0)
}
