//! Gauss-type quadrature rules on the reference segment, square, cube,
//! triangle and tetrahedron.
//!
//! Reference domains: `[-1, 1]` (segment), `[-1, 1]^2` (square), `[-1, 1]^3`
//! (cube), the unit triangle `{s, t >= 0, s + t <= 1}` and the unit
//! tetrahedron `{x, y, z >= 0, x + y + z <= 1}`.

use crate::error::{Error, Result};

/// Points and weights of a 1D Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss-Legendre rule needs at least one point");
    let mut points = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Chebyshev-like initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        points[i] = -x;
        points[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        points[n / 2] = 0.0;
    }
    (points, weights)
}

/// Legendre polynomial `P_n(x)` and its derivative.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Tensor rule with `n x n` points on `[-1, 1]^2`.
pub fn square_rule(n: usize) -> Vec<([f64; 2], f64)> {
    let (x, w) = gauss_legendre(n);
    let mut out = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            out.push(([x[i], x[j]], w[i] * w[j]));
        }
    }
    out
}

/// Tensor rule with `n x n x n` points on `[-1, 1]^3`.
pub fn cube_rule(n: usize) -> Vec<([f64; 3], f64)> {
    let (x, w) = gauss_legendre(n);
    let mut out = Vec::with_capacity(n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                out.push(([x[i], x[j], x[k]], w[i] * w[j] * w[k]));
            }
        }
    }
    out
}

/// Rule on the unit triangle with `points` nodes.
///
/// 1, 3 and 6 select the symmetric rules of degree 1, 2 and 4; any perfect
/// square `k^2` selects a collapsed Gauss-Legendre product rule (exact to
/// degree `2k - 2`).
pub fn triangle_rule(points: usize) -> Result<Vec<([f64; 2], f64)>> {
    match points {
        1 => Ok(vec![([1.0 / 3.0, 1.0 / 3.0], 0.5)]),
        3 => {
            let w = 1.0 / 6.0;
            Ok(vec![
                ([1.0 / 6.0, 1.0 / 6.0], w),
                ([2.0 / 3.0, 1.0 / 6.0], w),
                ([1.0 / 6.0, 2.0 / 3.0], w),
            ])
        }
        6 => {
            let a = 0.445_948_490_915_965;
            let wa = 0.223_381_589_678_011 / 2.0;
            let b = 0.091_576_213_509_771;
            let wb = 0.109_951_743_655_322 / 2.0;
            Ok(vec![
                ([a, a], wa),
                ([1.0 - 2.0 * a, a], wa),
                ([a, 1.0 - 2.0 * a], wa),
                ([b, b], wb),
                ([1.0 - 2.0 * b, b], wb),
                ([b, 1.0 - 2.0 * b], wb),
            ])
        }
        n => {
            let k = perfect_root(n, 2).ok_or_else(|| {
                Error::InvalidQuadrature(format!("{n} points is not a triangle rule"))
            })?;
            let (x, w) = gauss_legendre(k);
            let mut out = Vec::with_capacity(n);
            for j in 0..k {
                for i in 0..k {
                    let u = 0.5 * (1.0 + x[i]);
                    let v = 0.5 * (1.0 + x[j]);
                    let s = u;
                    let t = (1.0 - u) * v;
                    out.push(([s, t], 0.25 * w[i] * w[j] * (1.0 - u)));
                }
            }
            Ok(out)
        }
    }
}

/// Rule on the unit tetrahedron with `points` nodes.
///
/// 1 and 4 select the symmetric rules of degree 1 and 2; any perfect cube
/// `k^3` selects a collapsed Gauss-Legendre product rule.
pub fn tetrahedron_rule(points: usize) -> Result<Vec<([f64; 3], f64)>> {
    match points {
        1 => Ok(vec![([0.25, 0.25, 0.25], 1.0 / 6.0)]),
        4 => {
            let a = 0.585_410_196_624_968_5;
            let b = 0.138_196_601_125_010_5;
            let w = 1.0 / 24.0;
            Ok(vec![
                ([b, b, b], w),
                ([a, b, b], w),
                ([b, a, b], w),
                ([b, b, a], w),
            ])
        }
        n => {
            let k = perfect_root(n, 3).ok_or_else(|| {
                Error::InvalidQuadrature(format!("{n} points is not a tetrahedron rule"))
            })?;
            let (x, w) = gauss_legendre(k);
            let mut out = Vec::with_capacity(n);
            for m in 0..k {
                for j in 0..k {
                    for i in 0..k {
                        let u = 0.5 * (1.0 + x[i]);
                        let v = 0.5 * (1.0 + x[j]);
                        let r = 0.5 * (1.0 + x[m]);
                        let p = [u, (1.0 - u) * v, (1.0 - u) * (1.0 - v) * r];
                        let jac = (1.0 - u) * (1.0 - u) * (1.0 - v);
                        out.push((p, 0.125 * w[i] * w[j] * w[m] * jac));
                    }
                }
            }
            Ok(out)
        }
    }
}

fn perfect_root(n: usize, power: u32) -> Option<usize> {
    (1..=n).find(|k| k.pow(power) == n)
}
