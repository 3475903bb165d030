//! Hamiltonian-eigenvector CARE solver for 2-state, 1-input problems.
//!
//! Solves `F^T P + P F - P G R^{-1} G^T P + Q = 0` without using any of the
//! modal closed forms: the stable invariant subspace of the 4x4 Hamiltonian
//! gives a first estimate, and Newton-Kleinman iterations (one 2x2 Lyapunov
//! solve each) polish it to working precision.

use nalgebra::{Matrix2, Matrix4, Vector2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::lyapunov2;

const MAX_NEWTON: usize = 12;

/// Stabilizing nonnegative definite solution of the CARE.
///
/// For `Q = 0` the minimal nonnegative solution `P = 0` is returned, which is
/// the optimal cost whether or not `F` is Hurwitz.
pub fn care_oracle(
    f: &Matrix2<f64>,
    g: &Vector2<f64>,
    q: &Matrix2<f64>,
    r: f64,
) -> Result<Matrix2<f64>> {
    if q.iter().all(|v| *v == 0.0) {
        return Ok(Matrix2::zeros());
    }

    check_stabilizable(f, g)?;

    // diagonal similarity that balances the off-diagonal entries of F
    let d = balancing(f);
    let dinv = Matrix2::new(1.0 / d[0], 0.0, 0.0, 1.0 / d[1]);
    let dm = Matrix2::new(d[0], 0.0, 0.0, d[1]);
    let fb = dm * f * dinv;
    let gb = dm * g;
    let qb = dinv * q * dinv;

    let s = gb * gb.transpose() / r;
    let mut h = Matrix4::zeros();
    h.fixed_view_mut::<2, 2>(0, 0).copy_from(&fb);
    h.fixed_view_mut::<2, 2>(0, 2).copy_from(&(-s));
    h.fixed_view_mut::<2, 2>(2, 0).copy_from(&(-qb));
    h.fixed_view_mut::<2, 2>(2, 2).copy_from(&(-fb.transpose()));

    let hnorm = h.norm();
    let eig = h.complex_eigenvalues();
    let tol = 1e-12 * hnorm;
    let stable: Vec<Complex64> = eig.iter().copied().filter(|z| z.re < -tol).collect();
    if stable.len() != 2 {
        return Err(Error::NotStabilizable {
            expected: 2,
            found: stable.len(),
        });
    }

    // real basis of the stable subspace
    let basis: [[f64; 4]; 2] = if stable[0].im.abs() > tol {
        let lam = if stable[0].im > 0.0 {
            stable[0]
        } else {
            stable[1]
        };
        let v = null_vector(&h, lam);
        [v.map(|z| z.re), v.map(|z| z.im)]
    } else {
        let v0 = null_vector(&h, Complex64::new(stable[0].re, 0.0));
        let v1 = null_vector(&h, Complex64::new(stable[1].re, 0.0));
        [v0.map(|z| z.re), v1.map(|z| z.re)]
    };
    let x1 = Matrix2::new(basis[0][0], basis[1][0], basis[0][1], basis[1][1]);
    let x2 = Matrix2::new(basis[0][2], basis[1][2], basis[0][3], basis[1][3]);

    let sv = x1.singular_values();
    let rcond = if sv.max() > 0.0 {
        sv.min() / sv.max()
    } else {
        0.0
    };
    if rcond < 1e-13 {
        return Err(Error::IllConditioned { rcond });
    }
    let x1inv = x1.try_inverse().ok_or(Error::IllConditioned { rcond })?;
    let mut p = x2 * x1inv;
    p = (p + p.transpose()) * 0.5;

    for _ in 0..MAX_NEWTON {
        let k = gb.transpose() * p / r;
        let ak = fb - gb * k;
        let c = qb + k.transpose() * k * r;
        let next = lyapunov2(&ak, &c)?;
        let next = (next + next.transpose()) * 0.5;
        let step = (next - p).norm();
        p = next;
        if step <= 4.0 * f64::EPSILON * p.norm() {
            break;
        }
    }

    Ok(dm * p * dm)
}

/// Frobenius norm of the CARE residual at `p`.
pub fn care_residual(
    f: &Matrix2<f64>,
    g: &Vector2<f64>,
    q: &Matrix2<f64>,
    r: f64,
    p: &Matrix2<f64>,
) -> f64 {
    (f.transpose() * p + p * f - p * g * g.transpose() * p / r + q).norm()
}

/// PBH test on the eigenvalues of `F` in the closed right half plane.
fn check_stabilizable(f: &Matrix2<f64>, g: &Vector2<f64>) -> Result<()> {
    let (l1, l2) = crate::linalg::quadratic_roots(f.trace(), f.determinant());
    let scale = f.norm() + 1.0;
    let unstable = [l1, l2]
        .into_iter()
        .filter(|l| l.re >= -1e-12 * scale)
        .count();
    for lam in [l1, l2] {
        if lam.re < -1e-12 * scale {
            continue;
        }
        let m = [
            [
                Complex64::new(f[(0, 0)], 0.0) - lam,
                Complex64::new(f[(0, 1)], 0.0),
            ],
            [
                Complex64::new(f[(1, 0)], 0.0),
                Complex64::new(f[(1, 1)], 0.0) - lam,
            ],
        ];
        // left null vector of F - lam I: orthogonal to its dominant column
        let c0 = m[0][0].norm() + m[1][0].norm();
        let c1 = m[0][1].norm() + m[1][1].norm();
        let (a, b) = if c0 >= c1 {
            (m[0][0], m[1][0])
        } else {
            (m[0][1], m[1][1])
        };
        let (w0, w1) = if c0.max(c1) > 0.0 {
            (-b, a)
        } else {
            (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))
        };
        let wg = w0 * g[0] + w1 * g[1];
        let wn = (w0.norm_sqr() + w1.norm_sqr()).sqrt();
        if c0.max(c1) == 0.0 || wg.norm() <= 1e-12 * wn * g.norm().max(f64::MIN_POSITIVE) {
            return Err(Error::NotStabilizable {
                expected: 2,
                found: 2 - unstable,
            });
        }
    }
    Ok(())
}

fn balancing(f: &Matrix2<f64>) -> [f64; 2] {
    let (a, b) = (f[(0, 1)].abs(), f[(1, 0)].abs());
    if a > 0.0 && b > 0.0 {
        let ratio = (b / a).sqrt();
        let s = ratio.sqrt();
        [s, 1.0 / s]
    } else {
        [1.0, 1.0]
    }
}

/// Null vector of `H - lam I` by Gaussian elimination with complete pivoting.
fn null_vector(h: &Matrix4<f64>, lam: Complex64) -> [Complex64; 4] {
    let mut m = [[Complex64::new(0.0, 0.0); 4]; 4];
    for (i, row) in m.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = Complex64::new(h[(i, j)], 0.0);
        }
        row[i] -= lam;
    }
    let mut cols = [0usize, 1, 2, 3];
    for k in 0..3 {
        let (mut pi, mut pj, mut best) = (k, k, -1.0);
        for (i, row) in m.iter().enumerate().skip(k) {
            for (j, v) in row.iter().enumerate().skip(k) {
                if v.norm() > best {
                    best = v.norm();
                    pi = i;
                    pj = j;
                }
            }
        }
        m.swap(k, pi);
        for row in m.iter_mut() {
            row.swap(k, pj);
        }
        cols.swap(k, pj);
        let piv = m[k][k];
        if piv.norm() == 0.0 {
            continue;
        }
        for i in k + 1..4 {
            let factor = m[i][k] / piv;
            for j in k..4 {
                let t = m[k][j];
                m[i][j] -= factor * t;
            }
        }
    }
    // last pivot is (numerically) zero: free variable = 1
    let mut y = [Complex64::new(0.0, 0.0); 4];
    y[3] = Complex64::new(1.0, 0.0);
    for k in (0..3).rev() {
        let mut acc = Complex64::new(0.0, 0.0);
        for j in k + 1..4 {
            acc += m[k][j] * y[j];
        }
        y[k] = if m[k][k].norm() > 0.0 {
            -acc / m[k][k]
        } else {
            Complex64::new(0.0, 0.0)
        };
    }
    let mut x = [Complex64::new(0.0, 0.0); 4];
    for (k, c) in cols.iter().enumerate() {
        x[*c] = y[k];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn beam_mode_one_identity_weight() {
        let f = Matrix2::new(0.0, 1.0, -PI.powi(4), 0.0);
        let g = Vector2::new(0.0, PI);
        let p = care_oracle(&f, &g, &Matrix2::identity(), 1.0).unwrap();
        assert!((p[(0, 1)] - 5.13165704e-03).abs() < 1e-11);
        assert!((p[(1, 1)] - 3.19939174e-01).abs() < 1e-9);
        assert!((p[(0, 0)] - 3.11811882e+01).abs() < 1e-7);
        assert!(care_residual(&f, &g, &Matrix2::identity(), 1.0, &p) < 1e-10 * 2.0);
    }

    #[test]
    fn zero_weight_cases() {
        let hurwitz = Matrix2::new(0.0, 1.0, -4.0, -1.0);
        let oscillator = Matrix2::new(0.0, 1.0, -4.0, 0.0);
        let g = Vector2::new(0.0, 1.0);
        for f in [hurwitz, oscillator] {
            let p = care_oracle(&f, &g, &Matrix2::zeros(), 1.0).unwrap();
            assert_eq!(p, Matrix2::zeros());
        }
    }

    #[test]
    fn uncontrollable_oscillator_is_not_stabilizable() {
        let f = Matrix2::new(0.0, 1.0, -4.0, 0.0);
        let g = Vector2::new(0.0, 0.0);
        let err = care_oracle(&f, &g, &Matrix2::identity(), 1.0).unwrap_err();
        assert!(matches!(err, Error::NotStabilizable { .. }));
    }

    #[test]
    fn real_stable_spectrum() {
        // overdamped plant: Hamiltonian has four real eigenvalues
        let f = Matrix2::new(0.0, 1.0, -1.0, -10.0);
        let g = Vector2::new(0.0, 1.0);
        let q = Matrix2::new(3.0, 1.0, 1.0, 2.0);
        let p = care_oracle(&f, &g, &q, 0.5).unwrap();
        assert!(care_residual(&f, &g, &q, 0.5, &p) < 1e-12);
        assert!(p.symmetric_eigenvalues().min() > 0.0);
    }
}
