//! CSV emitters. Every number is written with 17 significant digits in
//! `{:e}` form, so output does not depend on locale and round-trips exactly.

use std::io::{self, Write};

use crate::beam_sim::{reconstruct, Trajectory};
use crate::kernel_assembly::KernelSamples;
use crate::modal_riccati::ModeSynthesis;

/// `v` with 17 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn row(w: &mut impl Write, cells: &[f64]) -> io::Result<()> {
    let line: Vec<String> = cells.iter().map(|v| num(*v)).collect();
    writeln!(w, "{}", line.join(","))
}

/// `n,p11,p12,p22,k1,k2,res11,res12,res22,mu_re,mu_im`; `mu` is the branch
/// with the larger real part.
pub fn write_modes(w: &mut impl Write, modes: &[ModeSynthesis]) -> io::Result<()> {
    writeln!(w, "n,p11,p12,p22,k1,k2,res11,res12,res22,mu_re,mu_im")?;
    for s in modes {
        let p = &s.riccati;
        let r = p.residuals.relative();
        let mu = s.closed_loop.plus;
        write!(w, "{},", s.n.get())?;
        row(
            w,
            &[
                p.p11, p.p12, p.p22, s.gain.k1, s.gain.k2, r[0], r[1], r[3], mu.re, mu.im,
            ],
        )?;
    }
    Ok(())
}

pub fn write_spectrum(w: &mut impl Write, modes: &[ModeSynthesis]) -> io::Result<()> {
    writeln!(
        w,
        "n,lambda_plus_re,lambda_plus_im,lambda_minus_re,lambda_minus_im,mu_plus_re,mu_plus_im,mu_minus_re,mu_minus_im"
    )?;
    for s in modes {
        let (l, m) = (&s.open_loop, &s.closed_loop);
        write!(w, "{},", s.n.get())?;
        row(
            w,
            &[
                l.plus.re, l.plus.im, l.minus.re, l.minus.im, m.plus.re, m.plus.im, m.minus.re,
                m.minus.im,
            ],
        )?;
    }
    Ok(())
}

pub fn write_kernel_p(w: &mut impl Write, k: &KernelSamples) -> io::Result<()> {
    writeln!(w, "x1,x2,P11,P12,P22")?;
    for (i, x1) in k.grid.iter().enumerate() {
        for (j, x2) in k.grid.iter().enumerate() {
            let b = k.at(i, j);
            row(w, &[*x1, *x2, b[(0, 0)], b[(0, 1)], b[(1, 1)]])?;
        }
    }
    Ok(())
}

pub fn write_kernel_k(w: &mut impl Write, grid: &[f64], values: &[[f64; 2]]) -> io::Result<()> {
    writeln!(w, "x,K1,K2")?;
    for (x, v) in grid.iter().zip(values) {
        row(w, &[*x, v[0], v[1]])?;
    }
    Ok(())
}

fn strided(traj: &Trajectory, stride: usize) -> impl Iterator<Item = &crate::beam_sim::Sample> {
    let last = traj.samples.len() - 1;
    traj.samples
        .iter()
        .enumerate()
        .filter(move |(i, _)| i % stride.max(1) == 0 || *i == last)
        .map(|(_, s)| s)
}

/// `t,u,a1_pos,a1_vel,...`
pub fn write_trajectory_wide(
    w: &mut impl Write,
    traj: &Trajectory,
    stride: usize,
) -> io::Result<()> {
    let order = traj.first().order();
    let mut header = String::from("t,u");
    for n in 1..=order {
        header.push_str(&format!(",a{n}_pos,a{n}_vel"));
    }
    writeln!(w, "{header}")?;
    for s in strided(traj, stride) {
        let mut cells = vec![s.t(), s.u];
        cells.extend(s.state.coeffs.iter().flat_map(|a| a.iter().copied()));
        row(w, &cells)?;
    }
    Ok(())
}

/// `t,u,mode,a_pos,a_vel`
pub fn write_trajectory_long(
    w: &mut impl Write,
    traj: &Trajectory,
    stride: usize,
) -> io::Result<()> {
    writeln!(w, "t,u,mode,a_pos,a_vel")?;
    for s in strided(traj, stride) {
        let (t, u) = (num(s.t()), num(s.u));
        for (n, a) in s.state.modes() {
            writeln!(w, "{t},{u},{},{},{}", n.get(), num(a[0]), num(a[1]))?;
        }
    }
    Ok(())
}

/// `t,x,displacement,velocity`
pub fn write_field(
    w: &mut impl Write,
    traj: &Trajectory,
    xgrid: &[f64],
    stride: usize,
) -> io::Result<()> {
    writeln!(w, "t,x,displacement,velocity")?;
    for s in strided(traj, stride) {
        for (x, (d, v)) in xgrid.iter().zip(reconstruct(&s.state, xgrid)) {
            row(w, &[s.t(), *x, d, v])?;
        }
    }
    Ok(())
}

/// `t,value,energy`: `sum_n a_n^T P_n a_n` and `sum_n (n^4 pi^4 a_pos^2 + a_vel^2)`.
pub fn write_energy(
    w: &mut impl Write,
    traj: &Trajectory,
    modes: &[ModeSynthesis],
    stride: usize,
) -> io::Result<()> {
    writeln!(w, "t,value,energy")?;
    for s in strided(traj, stride) {
        let value: f64 = s
            .state
            .coeffs
            .iter()
            .zip(modes)
            .map(|(a, m)| m.riccati.quadratic_form(*a))
            .sum();
        row(w, &[s.t(), value, s.state.energy()])?;
    }
    Ok(())
}
