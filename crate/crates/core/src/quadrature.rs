//! Fixed-rule and double-exponential quadrature used during operator assembly.

use std::f64::consts::{FRAC_PI_2, PI};

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let m = order.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_order
        let mut x = (PI * (i as f64 + 0.75) / (order as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(order, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(order, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(order: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=order {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let n = order as f64;
    let d = n * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Tanh–sinh quadrature of `f` over `[a, b]`, tolerant of integrable
/// endpoint singularities. `f` receives the abscissa together with its
/// distances to both endpoints so that singular factors can be evaluated
/// without cancellation.
pub fn tanh_sinh<F>(f: F, a: f64, b: f64, tol: f64) -> f64
where
    F: Fn(f64, f64, f64) -> f64,
{
    let half = 0.5 * (b - a);
    let eval = |t: f64| -> f64 {
        let u = FRAC_PI_2 * t.sinh();
        let ch = u.cosh();
        let w = FRAC_PI_2 * t.cosh() / (ch * ch);
        // distance to the nearer endpoint, computed without cancellation
        let near = half * (-u.abs()).exp() / ch;
        let far = 2.0 * half - near;
        let (x, da, db) = if t >= 0.0 {
            (b - near, far, near)
        } else {
            (a + near, near, far)
        };
        if near <= 0.0 || !w.is_finite() {
            return 0.0;
        }
        w * f(x, da, db)
    };

    let t_max = 4.5;
    let mut step = 0.5;
    let mut sum = eval(0.0);
    let mut k = 1;
    while (k as f64) * step <= t_max {
        let t = k as f64 * step;
        sum += eval(t) + eval(-t);
        k += 1;
    }
    let mut estimate = sum * step;
    for _level in 0..12 {
        step *= 0.5;
        let mut extra = 0.0;
        let mut k = 1;
        while (k as f64) * step <= t_max {
            let t = k as f64 * step;
            extra += eval(t) + eval(-t);
            k += 2;
        }
        sum += extra;
        let next = sum * step;
        let done = (next - estimate).abs() <= tol * next.abs().max(1e-300);
        estimate = next;
        if done {
            break;
        }
    }
    estimate * half
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(10);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        // degree 19 is the exactness limit for 10 points
        let v: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(18)).sum();
        assert!((v - 2.0 / 19.0).abs() < 1e-14);
    }

    #[test]
    fn tanh_sinh_endpoint_singularities() {
        // ∫_0^1 t^{-1/2} dt = 2
        let v = tanh_sinh(|_, da, _| da.powf(-0.5), 0.0, 1.0, 1e-14);
        assert!((v - 2.0).abs() < 1e-12, "{v}");
        // ∫_0^1 t^{0.3} (1 - t)^{-0.6} dt = B(1.3, 0.4)
        let exact = statrs::function::beta::beta(1.3, 0.4);
        let v = tanh_sinh(|_, da, db| da.powf(0.3) * db.powf(-0.6), 0.0, 1.0, 1e-14);
        assert!((v - exact).abs() < 1e-11 * exact, "{v} vs {exact}");
    }
}
