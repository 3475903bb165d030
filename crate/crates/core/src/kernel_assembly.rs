//! Sine-series kernels `Q(x1,x2)`, `P(x1,x2)`, `K(x)` and their tail behaviour.
//!
//! All kernels use equal-index expansions
//! `sum_n B_n sin(n pi x1) sin(n pi x2)` (or `sum_n k_n sin(n pi x)` for the
//! feedback), so the boundary conditions on the value kernel hold term by
//! term. The convergence report compares the decay of the computed modal
//! coefficients with the sufficient conditions on the weight decay exponent.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt;

use nalgebra::Matrix2;

use crate::error::{Error, Result};
use crate::linalg::fit_log_log;
use crate::modal_riccati::{
    mode_gain, synthesize_mode, BeamParams, ModalGain, ModalRiccati, ModalWeight, ModeIndex,
    ModeSynthesis,
};

/// `sin(pi t)` with exact zeros at integer `t`.
pub fn sin_pi(t: f64) -> f64 {
    // reduce to [-1, 1]
    let mut r = t - 2.0 * (t / 2.0).round();
    let sign = if r < 0.0 {
        r = -r;
        -1.0
    } else {
        1.0
    };
    if r > 0.5 {
        r = 1.0 - r;
    }
    sign * (PI * r).sin()
}

/// `cos(pi t)` with exact values at integer `t`.
pub fn cos_pi(t: f64) -> f64 {
    sin_pi(t + 0.5)
}

/// Which sign multiplies mode `n` when the feedback is expanded over `sin(n pi x)`.
///
/// `Paper` uses `+1` for every mode. `Derivative` uses `cos(n pi) = (-1)^n`,
/// the factor produced by differentiating `sin(n pi x1)` at `x1 = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SignConvention {
    #[default]
    Paper,
    Derivative,
}

impl SignConvention {
    pub fn sigma(self, n: ModeIndex) -> f64 {
        match self {
            SignConvention::Paper => 1.0,
            SignConvention::Derivative => n.parity(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SignConvention::Paper => "paper",
            SignConvention::Derivative => "derivative",
        }
    }
}

impl std::str::FromStr for SignConvention {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "paper" => Ok(Self::Paper),
            "derivative" => Ok(Self::Derivative),
            other => Err(format!(
                "unknown sign convention `{other}` (expected paper|derivative)"
            )),
        }
    }
}

/// Family of modal weights `Q_n = base * q / n^r` over the masked modes.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightProfile {
    pub amplitude: f64,
    pub decay: f64,
    pub order: u32,
    /// `None` means every mode `1..=order`.
    pub mask: Option<BTreeSet<u32>>,
    pub base: ModalWeight,
}

impl Default for WeightProfile {
    fn default() -> Self {
        Self {
            amplitude: 1.0,
            decay: 9.0,
            order: 32,
            mask: None,
            base: ModalWeight::identity(),
        }
    }
}

impl WeightProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude.is_finite() && self.amplitude >= 0.0) {
            return Err(Error::InvalidProfile(format!(
                "amplitude must be >= 0, got {}",
                self.amplitude
            )));
        }
        if !(self.decay.is_finite() && self.decay > 0.0) {
            return Err(Error::InvalidProfile(format!(
                "decay exponent must be > 0, got {}",
                self.decay
            )));
        }
        if self.order == 0 {
            return Err(Error::InvalidProfile(
                "truncation order must be >= 1".into(),
            ));
        }
        self.base
            .validate()
            .map_err(|e| Error::InvalidProfile(format!("base shape: {e}")))?;
        if self.base.max_abs() > 1.0 {
            return Err(Error::InvalidProfile(
                "base shape entries must not exceed 1 in magnitude".into(),
            ));
        }
        if let Some(mask) = &self.mask {
            if let Some(bad) = mask.iter().find(|n| **n == 0 || **n > self.order) {
                return Err(Error::InvalidProfile(format!(
                    "mask entry {bad} outside 1..={}",
                    self.order
                )));
            }
        }
        Ok(())
    }

    pub fn includes(&self, n: ModeIndex) -> bool {
        n.get() <= self.order && self.mask.as_ref().is_none_or(|m| m.contains(&n.get()))
    }

    /// `q / n^r`
    pub fn envelope(&self, n: ModeIndex) -> f64 {
        self.amplitude / f64::from(n.get()).powf(self.decay)
    }

    /// Weight of mode `n`, zero when masked out.
    pub fn weight(&self, n: ModeIndex) -> ModalWeight {
        if self.includes(n) {
            self.base.scaled(self.envelope(n))
        } else {
            ModalWeight::zero()
        }
    }

    pub fn modes(&self) -> impl Iterator<Item = ModeIndex> {
        (1..=self.order).map(|n| ModeIndex::new(n).expect("n >= 1"))
    }
}

/// Weights of the included modes; masked-out modes are omitted.
pub fn synthesize_modal_weights(profile: &WeightProfile) -> Result<Vec<(ModeIndex, ModalWeight)>> {
    profile.validate()?;
    Ok(profile
        .modes()
        .filter(|n| profile.includes(*n))
        .map(|n| (n, profile.weight(n)))
        .collect())
}

/// Per-mode synthesis for every mode `1..=order`, masked modes included with
/// zero weight.
pub fn synthesize_profile(
    profile: &WeightProfile,
    params: &BeamParams,
) -> Result<Vec<ModeSynthesis>> {
    profile.validate()?;
    profile
        .modes()
        .map(|n| synthesize_mode(n, &profile.weight(n), params))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    CostWeight,
    ValueKernel,
    GainKernel,
}

/// Truncated double sine series with 2x2 coefficient blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct SineKernel {
    pub kind: KernelKind,
    pub terms: Vec<(ModeIndex, Matrix2<f64>)>,
}

impl SineKernel {
    pub fn cost_weight(weights: &[(ModeIndex, ModalWeight)]) -> Self {
        Self {
            kind: KernelKind::CostWeight,
            terms: weights.iter().map(|(n, q)| (*n, q.matrix())).collect(),
        }
    }

    pub fn value(solutions: &[(ModeIndex, ModalRiccati)]) -> Self {
        Self {
            kind: KernelKind::ValueKernel,
            terms: solutions.iter().map(|(n, p)| (*n, p.matrix())).collect(),
        }
    }

    pub fn order(&self) -> u32 {
        self.terms.iter().map(|(n, _)| n.get()).max().unwrap_or(0)
    }
}

/// Kernel values on the tensor grid `grid x grid`, row-major in `x1`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSamples {
    pub grid: Vec<f64>,
    pub values: Vec<Matrix2<f64>>,
}

impl KernelSamples {
    pub fn at(&self, i: usize, j: usize) -> &Matrix2<f64> {
        &self.values[i * self.grid.len() + j]
    }

    /// Largest entry magnitude over grid points with `x1` or `x2` in `{0, 1}`.
    pub fn max_abs_on_boundary(&self) -> f64 {
        let m = self.grid.len();
        let edge = |x: f64| x == 0.0 || x == 1.0;
        let mut worst = 0.0f64;
        for i in 0..m {
            for j in 0..m {
                if edge(self.grid[i]) || edge(self.grid[j]) {
                    worst = worst.max(self.at(i, j).amax());
                }
            }
        }
        worst
    }
}

/// `m + 1` equally spaced points on `[0, 1]`, endpoints exact.
pub fn uniform_grid(points: usize) -> Vec<f64> {
    let m = points.max(2) - 1;
    (0..=m).map(|i| i as f64 / m as f64).collect()
}

fn sine_table(modes: impl Iterator<Item = ModeIndex>, grid: &[f64]) -> Vec<Vec<f64>> {
    modes
        .map(|n| {
            grid.iter()
                .map(|x| sin_pi(f64::from(n.get()) * x))
                .collect()
        })
        .collect()
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if let Some(x) = grid.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::InvalidSim(format!("grid point {x} outside [0, 1]")));
    }
    Ok(())
}

/// Exact partial sum `sum_n B_n sin(n pi x1) sin(n pi x2)` on `grid x grid`.
pub fn assemble_kernel(kernel: &SineKernel, grid: &[f64]) -> Result<KernelSamples> {
    check_grid(grid)?;
    let table = sine_table(kernel.terms.iter().map(|t| t.0), grid);
    let m = grid.len();
    let mut values = vec![Matrix2::zeros(); m * m];
    for ((_, block), s) in kernel.terms.iter().zip(&table) {
        for i in 0..m {
            if s[i] == 0.0 {
                continue;
            }
            for j in 0..m {
                values[i * m + j] += block * (s[i] * s[j]);
            }
        }
    }
    Ok(KernelSamples {
        grid: grid.to_vec(),
        values,
    })
}

/// Second derivative in `x1` of the kernel along the edges `x1 = 0` and
/// `x1 = 1`, sampled in `x2`; returns the largest entry magnitude.
pub fn boundary_curvature(kernel: &SineKernel, grid: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for edge in [0.0, 1.0] {
        for x2 in grid {
            let mut acc = Matrix2::zeros();
            for (n, block) in &kernel.terms {
                let k = n.wavenumber();
                let nf = f64::from(n.get());
                acc -= block * (k * k * sin_pi(nf * edge) * sin_pi(nf * x2));
            }
            worst = worst.max(acc.amax());
        }
    }
    worst
}

/// `K(x) = sum_n sigma_n K_n sin(n pi x)`.
pub fn assemble_feedback_kernel(
    gains: &[(ModeIndex, ModalGain)],
    grid: &[f64],
    convention: SignConvention,
) -> Result<Vec<[f64; 2]>> {
    check_grid(grid)?;
    let mut out = vec![[0.0; 2]; grid.len()];
    for (n, k) in gains {
        let sigma = convention.sigma(*n);
        let nf = f64::from(n.get());
        for (o, x) in out.iter_mut().zip(grid) {
            let s = sigma * sin_pi(nf * x);
            o[0] += k.k1 * s;
            o[1] += k.k2 * s;
        }
    }
    Ok(out)
}

/// Mode range used for fitting asymptotic decay exponents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitWindow {
    pub lo: u32,
    pub hi: u32,
}

impl Default for FitWindow {
    fn default() -> Self {
        Self { lo: 8, hi: 64 }
    }
}

impl FitWindow {
    /// Log-log slope of `values[n-1]` against `n` over the window.
    pub fn slope(&self, values: &[f64]) -> Option<f64> {
        let hi = (self.hi as usize).min(values.len());
        let lo = (self.lo as usize).max(1);
        if hi < lo + 2 {
            return None;
        }
        let xs: Vec<f64> = (lo..=hi).map(|n| n as f64).collect();
        let ys: Vec<f64> = values[lo - 1..hi].to_vec();
        fit_log_log(&xs, &ys).map(|(s, _)| s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Verdicts {
    pub gain_converges: bool,
    pub p12_converges: bool,
    pub p22_converges: bool,
    pub p11_converges: bool,
}

/// Tail behaviour of a modal family against the sufficient decay conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub decay: f64,
    pub alpha: f64,
    /// Bounds are checked for `n > first_checked - 1`.
    pub first_checked: u32,
    pub window: FitWindow,
    /// `q / (2 n^{3+r} pi^3)` per mode.
    pub p12_bound: Vec<f64>,
    pub p12_bound_violations: Vec<u32>,
    /// Expected asymptotic exponent of `p22`: `1 + r/2` undamped, `r` damped.
    pub p22_expected_exponent: f64,
    /// Smallest `c` with `p22_n <= c / n^{expected}` over the checked modes.
    pub p22_constant: f64,
    /// Sup-norm contribution of mode `n` to each kernel.
    pub increments_p11: Vec<f64>,
    pub increments_p12: Vec<f64>,
    pub increments_p22: Vec<f64>,
    pub increments_gain: Vec<f64>,
    /// Fitted decay exponents (positive = decaying) over the fit window.
    pub fitted_p11: Option<f64>,
    pub fitted_p12: Option<f64>,
    pub fitted_p22: Option<f64>,
    pub fitted_gain: Option<f64>,
    /// Fitted growth exponent of the slowest closed-loop damping `|Re mu_n|`.
    pub fitted_damping: Option<f64>,
    pub p11_threshold: f64,
    pub gain_threshold: f64,
    pub verdicts: Verdicts,
}

impl ConvergenceReport {
    pub fn bounds_hold(&self) -> bool {
        self.p12_bound_violations.is_empty() && self.p22_constant.is_finite()
    }
}

/// Builds the convergence report for a modal family.
///
/// `solutions` must cover every mode `1..=profile.order`.
pub fn tail_report(
    solutions: &[(ModeIndex, ModalRiccati)],
    profile: &WeightProfile,
    params: &BeamParams,
) -> Result<ConvergenceReport> {
    tail_report_with(solutions, profile, params, FitWindow::default(), 2)
}

pub fn tail_report_with(
    solutions: &[(ModeIndex, ModalRiccati)],
    profile: &WeightProfile,
    params: &BeamParams,
    window: FitWindow,
    first_checked: u32,
) -> Result<ConvergenceReport> {
    profile.validate()?;
    let order = profile.order;
    let mut by_mode: Vec<Option<ModalRiccati>> = vec![None; order as usize];
    for (n, p) in solutions {
        if n.get() <= order {
            by_mode[n.get() as usize - 1] = Some(*p);
        }
    }
    let mut sols = Vec::with_capacity(order as usize);
    for (i, p) in by_mode.into_iter().enumerate() {
        sols.push(p.ok_or(Error::MissingModes(i as u32 + 1))?);
    }

    let r = profile.decay;
    let alpha = params.alpha();
    let pi3 = PI * PI * PI;
    let modes: Vec<ModeIndex> = profile.modes().collect();

    let p12_bound: Vec<f64> = modes
        .iter()
        .map(|n| profile.amplitude / (2.0 * f64::from(n.get()).powf(3.0 + r) * pi3))
        .collect();
    let p12_bound_violations = modes
        .iter()
        .zip(&sols)
        .zip(&p12_bound)
        .filter(|((n, p), b)| n.get() >= first_checked && p.p12 > **b * (1.0 + 1e-12))
        .map(|((n, _), _)| n.get())
        .collect();

    let p22_expected_exponent = if alpha == 0.0 { 1.0 + r / 2.0 } else { r };
    let p22_constant = modes
        .iter()
        .zip(&sols)
        .filter(|(n, _)| n.get() >= first_checked)
        .map(|(n, p)| p.p22 * f64::from(n.get()).powf(p22_expected_exponent))
        .fold(0.0, f64::max);

    let increments_p11: Vec<f64> = sols.iter().map(|p| p.p11.abs()).collect();
    let increments_p12: Vec<f64> = sols.iter().map(|p| p.p12.abs()).collect();
    let increments_p22: Vec<f64> = sols.iter().map(|p| p.p22.abs()).collect();
    let increments_gain: Vec<f64> = modes
        .iter()
        .zip(&sols)
        .map(|(n, p)| {
            let k = mode_gain(p, *n, params);
            k.k1.abs().max(k.k2.abs())
        })
        .collect();
    let damping: Vec<f64> = modes
        .iter()
        .zip(&sols)
        .map(|(n, p)| -crate::modal_riccati::closed_loop_eigenvalues(*n, params, p).max_real())
        .collect();

    let decay_of = |v: &[f64]| window.slope(v).map(|s| -s);
    let p11_threshold = if alpha == 0.0 { 8.0 } else { 5.0 };
    let gain_threshold = 1.0;

    Ok(ConvergenceReport {
        decay: r,
        alpha,
        first_checked,
        window,
        p12_bound,
        p12_bound_violations,
        p22_expected_exponent,
        p22_constant,
        fitted_p11: decay_of(&increments_p11),
        fitted_p12: decay_of(&increments_p12),
        fitted_p22: decay_of(&increments_p22),
        fitted_gain: decay_of(&increments_gain),
        fitted_damping: window.slope(&damping),
        increments_p11,
        increments_p12,
        increments_p22,
        increments_gain,
        p11_threshold,
        gain_threshold,
        verdicts: Verdicts {
            gain_converges: r > gain_threshold,
            p12_converges: r > 1.0,
            p22_converges: r > 1.0,
            p11_converges: r > p11_threshold,
        },
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"))
}

impl fmt::Display for ConvergenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "decay exponent r = {}, alpha = {}",
            self.decay, self.alpha
        )?;
        writeln!(
            f,
            "p12 bound q/(2 n^(3+r) pi^3) for n >= {}: {} violations",
            self.first_checked,
            self.p12_bound_violations.len()
        )?;
        writeln!(
            f,
            "p22 <= c / n^{:.4} with c = {:e}",
            self.p22_expected_exponent, self.p22_constant
        )?;
        writeln!(
            f,
            "fitted decay exponents over n in [{}, {}]: p11 {}, p12 {}, p22 {}, gain {}",
            self.window.lo,
            self.window.hi,
            opt(self.fitted_p11),
            opt(self.fitted_p12),
            opt(self.fitted_p22),
            opt(self.fitted_gain)
        )?;
        writeln!(
            f,
            "fitted growth exponent of closed-loop damping: {}",
            opt(self.fitted_damping)
        )?;
        let v = &self.verdicts;
        write!(
            f,
            "gain_converges={} p12_converges={} p22_converges={} p11_converges={} (p11 needs r > {}, gain needs r > {})",
            v.gain_converges, v.p12_converges, v.p22_converges, v.p11_converges, self.p11_threshold, self.gain_threshold
        )
    }
}
