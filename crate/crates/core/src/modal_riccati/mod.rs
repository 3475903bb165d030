//! Per-mode LQR synthesis for the beam.
//!
//! Expanding states and weights in the sine basis `sin(n pi x)` turns the
//! boundary-controlled beam into a family of independent 2x2 systems
//!
//! ```text
//! F_n = [[0, 1], [-n^4 pi^4, -alpha]],   G_n = [0, n pi beta]^T,
//! ```
//!
//! each with its own weight `Q_n` and the shared scalar control weight `R`.
//! The Riccati equation of every such system has an explicit solution, which
//! is what [`solve_mode_riccati`] evaluates. [`care::care_oracle`] solves the
//! same problem through the Hamiltonian matrix and is used to cross-check it.

pub mod care;

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::quadratic_roots;

/// Spatial frequency index `n >= 1`.
///
/// The signed indices `+n` / `-n` of the two eigenvalue branches are carried
/// by [`EigenPair`] rather than by the index itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModeIndex(u32);

impl ModeIndex {
    pub fn new(n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidMode);
        }
        Ok(Self(n))
    }

    pub fn get(self) -> u32 {
        self.0
    }

    /// `n pi`
    pub fn wavenumber(self) -> f64 {
        f64::from(self.0) * PI
    }

    /// `n^4 pi^4`, the modal stiffness.
    pub fn stiffness(self) -> f64 {
        let k2 = self.wavenumber() * self.wavenumber();
        k2 * k2
    }

    /// `(-1)^n`
    pub fn parity(self) -> f64 {
        if self.0 % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

impl std::fmt::Display for ModeIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Damping, input scale and control weight shared by all modes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamParams {
    alpha: f64,
    beta: f64,
    r: f64,
}

impl BeamParams {
    pub fn new(alpha: f64, beta: f64, r: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "alpha must be >= 0, got {alpha}"
            )));
        }
        if !beta.is_finite() {
            return Err(Error::InvalidParams(format!(
                "beta must be finite, got {beta}"
            )));
        }
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::InvalidParams(format!("R must be > 0, got {r}")));
        }
        Ok(Self { alpha, beta, r })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn control_weight(&self) -> f64 {
        self.r
    }

    /// `gamma^2 = beta^2 / R`
    pub fn gamma_sq(&self) -> f64 {
        self.beta * self.beta / self.r
    }

    /// Design input coefficient `n pi beta` of mode `n`.
    pub fn input_coefficient(&self, n: ModeIndex) -> f64 {
        n.wavenumber() * self.beta
    }

    /// `n^2 pi^2 gamma^2`, the coefficient of the quadratic Riccati terms.
    pub fn quadratic_coefficient(&self, n: ModeIndex) -> f64 {
        let b = self.input_coefficient(n);
        b * b / self.r
    }

    /// Open-loop matrix `F_n`.
    pub fn open_loop_matrix(&self, n: ModeIndex) -> Matrix2<f64> {
        Matrix2::new(0.0, 1.0, -n.stiffness(), -self.alpha)
    }

    /// Input vector `G_n = [0, n pi beta]^T`.
    pub fn input_vector(&self, n: ModeIndex) -> Vector2<f64> {
        Vector2::new(0.0, self.input_coefficient(n))
    }
}

impl Default for BeamParams {
    fn default() -> Self {
        Self {
            alpha: 0.0,
            beta: 1.0,
            r: 1.0,
        }
    }
}

/// Symmetric nonnegative definite 2x2 weight of one spatial frequency.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ModalWeight {
    pub q11: f64,
    pub q12: f64,
    pub q22: f64,
}

impl ModalWeight {
    pub fn new(q11: f64, q12: f64, q22: f64) -> Result<Self> {
        let w = Self { q11, q12, q22 };
        w.validate()?;
        Ok(w)
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn identity() -> Self {
        Self {
            q11: 1.0,
            q12: 0.0,
            q22: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let Self { q11, q12, q22 } = *self;
        if ![q11, q12, q22].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidWeight("non-finite entry".into()));
        }
        let scale = q11.abs().max(q22.abs()).max(q12.abs());
        if q11 < 0.0 || q22 < 0.0 || q11 * q22 - q12 * q12 < -1e-12 * scale * scale {
            return Err(Error::InvalidWeight(format!(
                "[[{q11}, {q12}], [{q12}, {q22}]] has a negative eigenvalue"
            )));
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.q11 == 0.0 && self.q12 == 0.0 && self.q22 == 0.0
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            q11: self.q11 * s,
            q12: self.q12 * s,
            q22: self.q22 * s,
        }
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.matrix().norm()
    }

    pub fn max_abs(&self) -> f64 {
        self.q11.abs().max(self.q12.abs()).max(self.q22.abs())
    }

    pub fn matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.q11, self.q12, self.q12, self.q22)
    }

    /// `a^T Q a`
    pub fn quadratic_form(&self, a: [f64; 2]) -> f64 {
        self.q11 * a[0] * a[0] + 2.0 * self.q12 * a[0] * a[1] + self.q22 * a[1] * a[1]
    }
}

/// Residuals of the four modal Riccati equations, left minus right.
///
/// Each residual comes with the magnitude of the largest term entering its
/// equation, so that [`Residuals::relative`] is a backward-error style
/// measure: `|res| / (1 + ||Q|| + largest term)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Residuals {
    pub eq11: f64,
    pub eq12: f64,
    pub eq21: f64,
    pub eq22: f64,
    scale: [f64; 4],
}

impl Residuals {
    pub fn values(&self) -> [f64; 4] {
        [self.eq11, self.eq12, self.eq21, self.eq22]
    }

    pub fn scales(&self) -> [f64; 4] {
        self.scale
    }

    pub fn relative(&self) -> [f64; 4] {
        let v = self.values();
        std::array::from_fn(|i| v[i].abs() / self.scale[i])
    }

    pub fn max_relative(&self) -> f64 {
        self.relative().into_iter().fold(0.0, f64::max)
    }
}

/// Symmetric solution `P_n` of one modal Riccati equation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ModalRiccati {
    pub p11: f64,
    pub p12: f64,
    pub p22: f64,
    pub residuals: Residuals,
}

impl ModalRiccati {
    pub fn matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.p11, self.p12, self.p12, self.p22)
    }

    pub fn quadratic_form(&self, a: [f64; 2]) -> f64 {
        self.p11 * a[0] * a[0] + 2.0 * self.p12 * a[0] * a[1] + self.p22 * a[1] * a[1]
    }

    pub fn is_zero(&self) -> bool {
        self.p11 == 0.0 && self.p12 == 0.0 && self.p22 == 0.0
    }
}

/// Row gain `K_n` acting on a mode's (position, velocity) coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ModalGain {
    pub k1: f64,
    pub k2: f64,
}

impl ModalGain {
    pub fn apply(&self, a: [f64; 2]) -> f64 {
        self.k1 * a[0] + self.k2 * a[1]
    }

    pub fn is_zero(&self) -> bool {
        self.k1 == 0.0 && self.k2 == 0.0
    }
}

/// The two eigenvalue branches `+n` and `-n` of one mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenPair {
    pub plus: Complex64,
    pub minus: Complex64,
}

impl EigenPair {
    /// Largest real part of the two branches.
    pub fn max_real(&self) -> f64 {
        self.plus.re.max(self.minus.re)
    }
}

/// Open-loop eigenvalues `(-alpha +- sqrt(alpha^2 - 4 n^4 pi^4)) / 2`.
pub fn open_loop_eigenvalues(n: ModeIndex, alpha: f64) -> EigenPair {
    let (plus, minus) = quadratic_roots(-alpha, n.stiffness());
    EigenPair { plus, minus }
}

/// Explicit nonnegative definite solution of the mode-`n` Riccati equation.
///
/// Both square roots take the positive branch; the negative branches give an
/// indefinite `P`. The two roots are evaluated in their rationalized form
/// (`q / (w + sqrt(w^2 + g q))` instead of `(-w + sqrt(w^2 + g q)) / g`),
/// which is the same number without the cancellation that wipes out high
/// modes where `w = n^4 pi^4` dwarfs the weight.
pub fn solve_mode_riccati(
    n: ModeIndex,
    q: &ModalWeight,
    params: &BeamParams,
) -> Result<ModalRiccati> {
    if q.is_zero() {
        let mut zero = ModalRiccati::default();
        zero.residuals = riccati_residuals(&zero, n, q, params);
        return Ok(zero);
    }
    let g = params.quadratic_coefficient(n);
    if g == 0.0 {
        return Err(Error::BetaZero { n: n.get() });
    }
    let w = n.stiffness();
    let alpha = params.alpha();

    let arg12 = w * w + g * q.q11;
    if arg12 < 0.0 {
        return Err(Error::NegativeDiscriminant {
            n: n.get(),
            which: "p12",
            value: arg12,
        });
    }
    let p12 = q.q11 / (w + arg12.sqrt());

    let s = q.q22 + 2.0 * p12;
    let arg22 = alpha * alpha + g * s;
    if arg22 < 0.0 {
        return Err(Error::NegativeDiscriminant {
            n: n.get(),
            which: "p22",
            value: arg22,
        });
    }
    let den = alpha + arg22.sqrt();
    let p22 = if den > 0.0 { s / den } else { 0.0 };

    let p11 = alpha * p12 + w * p22 - q.q12 + g * p12 * p22;

    let mut sol = ModalRiccati {
        p11,
        p12,
        p22,
        residuals: Residuals::default(),
    };
    sol.residuals = riccati_residuals(&sol, n, q, params);
    Ok(sol)
}

/// Evaluates the four modal Riccati equations at `p`.
///
/// Uses the stored entries of `p` only; its `residuals` field is ignored.
pub fn riccati_residuals(
    p: &ModalRiccati,
    n: ModeIndex,
    q: &ModalWeight,
    params: &BeamParams,
) -> Residuals {
    let w = n.stiffness();
    let g = params.quadratic_coefficient(n);
    let a = params.alpha();
    let (p11, p12, p22) = (p.p11, p.p12, p.p22);
    let p21 = p12;
    let q21 = q.q12;
    let qn = q.norm();

    let t11 = [2.0 * w * p12, q.q11, g * p12 * p12];
    let t12 = [p11, w * p22, a * p12, q.q12, g * p12 * p22];
    let t21 = [p11, w * p22, a * p21, q21, g * p22 * p21];
    let t22 = [2.0 * p12, 2.0 * a * p22, q.q22, g * p22 * p22];
    let scale = |t: &[f64]| 1.0 + qn + t.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    Residuals {
        eq11: -2.0 * w * p12 + q.q11 - g * p12 * p12,
        eq12: p11 - w * p22 - a * p12 + q.q12 - g * p12 * p22,
        eq21: p11 - w * p22 - a * p21 + q21 - g * p22 * p21,
        eq22: 2.0 * p12 - 2.0 * a * p22 + q.q22 - g * p22 * p22,
        scale: [scale(&t11), scale(&t12), scale(&t21), scale(&t22)],
    }
}

/// `K_n = -R^{-1} G_n^T P_n`.
pub fn mode_gain(p: &ModalRiccati, n: ModeIndex, params: &BeamParams) -> ModalGain {
    let c = -params.input_coefficient(n) / params.control_weight();
    ModalGain {
        k1: c * p.p12,
        k2: c * p.p22,
    }
}

/// `F_n + G_n K_n`.
pub fn closed_loop_matrix(n: ModeIndex, params: &BeamParams, k: &ModalGain) -> Matrix2<f64> {
    let b = params.input_coefficient(n);
    Matrix2::new(
        0.0,
        1.0,
        -n.stiffness() + b * k.k1,
        -params.alpha() + b * k.k2,
    )
}

/// Exact eigenvalues of the closed-loop matrix built from `p`.
pub fn closed_loop_eigenvalues(n: ModeIndex, params: &BeamParams, p: &ModalRiccati) -> EigenPair {
    let k = mode_gain(p, n, params);
    let a = closed_loop_matrix(n, params, &k);
    let (plus, minus) = quadratic_roots(a.trace(), a.determinant());
    EigenPair { plus, minus }
}

/// Closed-loop eigenvalues from the explicit formula
/// `-(alpha + g p22)/2 +- sqrt((alpha + g p22)^2 - 4 (n^4 pi^4 + g p21)) / 2`
/// with `g = n^2 pi^2 gamma^2`. Only used as a cross-check of
/// [`closed_loop_eigenvalues`].
pub fn closed_loop_eigenvalues_formula(
    n: ModeIndex,
    params: &BeamParams,
    p: &ModalRiccati,
) -> EigenPair {
    let g = params.quadratic_coefficient(n);
    let damp = params.alpha() + g * p.p22;
    let disc = Complex64::new(damp * damp - 4.0 * (n.stiffness() + g * p.p12), 0.0);
    let root = disc.sqrt();
    EigenPair {
        plus: (-damp + root) / 2.0,
        minus: (-damp - root) / 2.0,
    }
}

/// Everything computed for one mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeSynthesis {
    pub n: ModeIndex,
    pub weight: ModalWeight,
    pub riccati: ModalRiccati,
    pub gain: ModalGain,
    pub closed_loop: EigenPair,
    pub open_loop: EigenPair,
}

pub fn synthesize_mode(
    n: ModeIndex,
    q: &ModalWeight,
    params: &BeamParams,
) -> Result<ModeSynthesis> {
    let riccati = solve_mode_riccati(n, q, params)?;
    Ok(ModeSynthesis {
        n,
        weight: *q,
        riccati,
        gain: mode_gain(&riccati, n, params),
        closed_loop: closed_loop_eigenvalues(n, params, &riccati),
        open_loop: open_loop_eigenvalues(n, params.alpha()),
    })
}
