//! Small dense helpers shared by the synthesis and simulation modules.

use nalgebra::{DMatrix, Matrix2, Matrix3, Vector3};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Roots of `s^2 - trace*s + det`, returned as `(plus, minus)`.
///
/// The square root of the discriminant is the one with nonnegative imaginary
/// part, so for a complex pair `plus` carries the positive imaginary part.
pub fn quadratic_roots(trace: f64, det: f64) -> (Complex64, Complex64) {
    let half = 0.5 * trace;
    let disc = half * half - det;
    if disc >= 0.0 {
        let d = disc.sqrt();
        // avoid cancellation in the smaller root
        let big = if half >= 0.0 { half + d } else { half - d };
        let small = if big != 0.0 { det / big } else { 0.0 };
        let (hi, lo) = if big >= small {
            (big, small)
        } else {
            (small, big)
        };
        (Complex64::new(hi, 0.0), Complex64::new(lo, 0.0))
    } else {
        let w = (-disc).sqrt();
        (Complex64::new(half, w), Complex64::new(half, -w))
    }
}

/// Solves `A^T X + X A + C = 0` for symmetric `X` (2x2).
///
/// `C` is assumed symmetric; only its upper triangle is read.
pub fn lyapunov2(a: &Matrix2<f64>, c: &Matrix2<f64>) -> Result<Matrix2<f64>> {
    let (a11, a12, a21, a22) = (a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]);
    // unknowns (x11, x12, x22)
    let m = Matrix3::new(
        2.0 * a11,
        2.0 * a21,
        0.0,
        a12,
        a11 + a22,
        a21,
        0.0,
        2.0 * a12,
        2.0 * a22,
    );
    let rhs = Vector3::new(-c[(0, 0)], -c[(0, 1)], -c[(1, 1)]);
    let lu = m.full_piv_lu();
    let mut x = lu.solve(&rhs).ok_or(Error::IllConditioned { rcond: 0.0 })?;
    // iterative refinement; restores small entries that full pivoting can smear
    for _ in 0..2 {
        let r = rhs - m * x;
        if let Some(dx) = lu.solve(&r) {
            x += dx;
        }
    }
    Ok(Matrix2::new(x[0], x[1], x[1], x[2]))
}

/// `exp(A t)` for a real 2x2 matrix in closed form.
///
/// Uses `e^{mt} (C(t) I + S(t) (A - m I))` with `m = tr(A)/2`, where `C`/`S`
/// are the cosh/scaled-sinh (or cos/scaled-sin) of the half-discriminant.
/// The scaled-sinh is evaluated by series near zero, so the critically damped
/// (defective) case is handled without a division by zero.
pub fn expm2(a: &Matrix2<f64>, t: f64) -> Matrix2<f64> {
    let m = 0.5 * (a[(0, 0)] + a[(1, 1)]);
    let b = a - Matrix2::identity() * m;
    // b^2 = disc * I
    let disc = b[(0, 0)] * b[(0, 0)] + b[(0, 1)] * b[(1, 0)];
    let x = disc * t * t;
    let (c, s) = if x.abs() < 1e-4 {
        (
            1.0 + x / 2.0 + x * x / 24.0 + x * x * x / 720.0,
            t * (1.0 + x / 6.0 + x * x / 120.0 + x * x * x / 5040.0),
        )
    } else if disc > 0.0 {
        let d = disc.sqrt();
        (((d * t).cosh()), (d * t).sinh() / d)
    } else {
        let w = (-disc).sqrt();
        ((w * t).cos(), (w * t).sin() / w)
    };
    let scale = (m * t).exp();
    if !(scale * c).is_finite() && disc > 0.0 {
        // large overdamped horizon: only the slow exponential survives
        let d = disc.sqrt();
        let slow = ((m + d) * t).exp();
        return (Matrix2::identity() * 0.5 + b * (0.5 / d)) * slow;
    }
    (Matrix2::identity() * c + b * s) * scale
}

/// `exp(A t)` for a general square matrix.
///
/// Backed by nalgebra's scaling-and-squaring Pade implementation. Rejects
/// horizons where `||A t||_1` is large enough that the squaring phase
/// amplifies rounding beyond usefulness, and any non-finite result.
pub fn expm(a: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    let scaled = a * t;
    let norm = one_norm(&scaled);
    if !norm.is_finite() || norm > MAX_EXPM_NORM {
        return Err(Error::HorizonTooLong { norm });
    }
    let e = scaled.exp();
    if e.iter().any(|v| !v.is_finite()) {
        return Err(Error::HorizonTooLong { norm });
    }
    Ok(e)
}

const MAX_EXPM_NORM: f64 = 1e6;

pub fn one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Composite Simpson rule on uniformly spaced samples.
///
/// Requires an odd number of samples (even number of intervals); with an even
/// sample count the last interval is closed with the trapezoid rule.
pub fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    match n {
        0 | 1 => 0.0,
        2 => 0.5 * h * (values[0] + values[1]),
        _ => {
            let m = if n % 2 == 1 { n } else { n - 1 };
            let mut acc = values[0] + values[m - 1];
            for (i, v) in values.iter().enumerate().take(m - 1).skip(1) {
                acc += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
            }
            let mut total = acc * h / 3.0;
            if m < n {
                total += 0.5 * h * (values[n - 2] + values[n - 1]);
            }
            total
        }
    }
}

/// Least-squares line through `(ln x, ln y)`; returns `(slope, intercept)`.
///
/// Points with nonpositive `y` are skipped. Returns `None` with fewer than
/// two usable points.
pub fn fit_log_log(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0 && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn taylor_expm2(a: &Matrix2<f64>, t: f64) -> Matrix2<f64> {
        // brute force: scale, Taylor, square
        let s = 20;
        let h = t / f64::from(1u32 << s);
        let mut term = Matrix2::identity();
        let mut sum = Matrix2::identity();
        for k in 1..30 {
            term = term * a * (h / k as f64);
            sum += term;
        }
        for _ in 0..s {
            sum = sum * sum;
        }
        sum
    }

    #[test]
    fn expm2_matches_taylor_in_all_regimes() {
        let cases = [
            Matrix2::new(0.0, 1.0, -9.0, 0.0),
            Matrix2::new(0.0, 1.0, -4.0, -4.0), // critical
            Matrix2::new(0.0, 1.0, -1.0, -5.0), // overdamped
            Matrix2::new(0.3, -0.2, 0.7, -1.1),
        ];
        for a in cases {
            for t in [0.0, 0.01, 0.5, 2.0] {
                let e = expm2(&a, t);
                let r = taylor_expm2(&a, t);
                assert!((e - r).norm() <= 1e-9 * (1.0 + r.norm()), "{a} t={t}");
            }
        }
    }

    #[test]
    fn lyapunov2_residual() {
        let a = Matrix2::new(0.0, 1.0, -97.4, -3.1);
        let c = Matrix2::new(2.0, 0.3, 0.3, 1.0);
        let x = lyapunov2(&a, &c).unwrap();
        let res = a.transpose() * x + x * a + c;
        assert!(res.norm() < 1e-10);
    }

    #[test]
    fn quadratic_roots_conventions() {
        let (p, m) = quadratic_roots(0.0, 4.0);
        assert_eq!(p, Complex64::new(0.0, 2.0));
        assert_eq!(m, Complex64::new(0.0, -2.0));
        let (p, m) = quadratic_roots(-2.0, 1.0);
        assert_eq!((p.re, m.re), (-1.0, -1.0));
        let (p, m) = quadratic_roots(-1e8, 1.0);
        assert!((p.re + 1e-8).abs() < 1e-22);
        assert!((m.re + 1e8).abs() < 1e-6);
    }

    #[test]
    fn simpson_is_exact_for_cubics() {
        let h = 0.125;
        let v: Vec<f64> = (0..=8).map(|i| (i as f64 * h).powi(3)).collect();
        assert!((simpson(&v, h) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn fit_recovers_power() {
        let xs: Vec<f64> = (8..=64).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(-2.5)).collect();
        let (slope, icpt) = fit_log_log(&xs, &ys).unwrap();
        assert!((slope + 2.5).abs() < 1e-12);
        assert!((icpt - 3f64.ln()).abs() < 1e-10);
    }
}
