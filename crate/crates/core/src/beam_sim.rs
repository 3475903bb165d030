//! Spectral Galerkin simulation of the beam in the sine basis.
//!
//! The state is the list of modal coefficient pairs `a_n = (position,
//! velocity)` with `z(x,t) = sum_n a_n sin(n pi x)`. Three closed loops are
//! available:
//!
//! * open loop (`u = 0`, or a constant forcing for steady-state checks),
//! * decoupled: every mode is driven by its own input `u_n = K_n a_n` through
//!   the design coefficient `n pi beta`, which is the idealized per-mode LQR,
//! * coupled: one scalar boundary input `u = sum_n sigma_n K_n a_n` enters
//!   every mode through its input coefficient `b_n`.
//!
//! The dynamics are LTI, so all stepping is done with exact matrix
//! exponentials.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::kernel_assembly::{sin_pi, SignConvention};
use crate::linalg::{expm, expm2, lyapunov2, simpson};
use crate::modal_riccati::{
    closed_loop_matrix, BeamParams, ModalGain, ModalWeight, ModeIndex, ModeSynthesis,
};

/// How the boundary moment enters the modal equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InputConvention {
    /// `b_n = n pi beta`, the input used for synthesis.
    #[default]
    PaperBeta,
    /// `b_n = 2 n pi (-1)^n`, from projecting `f_xx(1,t) = u` onto `sin(n pi x)`.
    Physical,
}

impl InputConvention {
    pub fn coefficient(self, n: ModeIndex, params: &BeamParams) -> f64 {
        match self {
            InputConvention::PaperBeta => params.input_coefficient(n),
            InputConvention::Physical => 2.0 * n.wavenumber() * n.parity(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            InputConvention::PaperBeta => "paper_beta",
            InputConvention::Physical => "physical",
        }
    }
}

impl std::str::FromStr for InputConvention {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "paper_beta" => Ok(Self::PaperBeta),
            "physical" => Ok(Self::Physical),
            other => Err(format!(
                "unknown input convention `{other}` (expected paper_beta|physical)"
            )),
        }
    }
}

/// True when the coupled loop reproduces the designed per-mode closed loop,
/// i.e. `b_n sigma_n = n pi beta` for every mode up to `order`.
pub fn conventions_matched(
    params: &BeamParams,
    input: InputConvention,
    sign: SignConvention,
    order: u32,
) -> bool {
    (1..=order).all(|n| {
        let n = ModeIndex::new(n).expect("n >= 1");
        let eff = input.coefficient(n, params) * sign.sigma(n);
        (eff - params.input_coefficient(n)).abs() <= 1e-14 * eff.abs().max(1.0)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SimMode {
    OpenLoop,
    #[default]
    Decoupled,
    Coupled,
}

impl SimMode {
    pub fn name(self) -> &'static str {
        match self {
            SimMode::OpenLoop => "open_loop",
            SimMode::Decoupled => "decoupled",
            SimMode::Coupled => "coupled",
        }
    }
}

impl std::str::FromStr for SimMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "open_loop" => Ok(Self::OpenLoop),
            "decoupled" => Ok(Self::Decoupled),
            "coupled" => Ok(Self::Coupled),
            other => Err(format!(
                "unknown simulation mode `{other}` (expected open_loop|decoupled|coupled)"
            )),
        }
    }
}

/// Modal coefficients `a_n = (position, velocity)`, stored at index `n - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalState {
    pub t: f64,
    pub coeffs: Vec<[f64; 2]>,
}

impl ModalState {
    pub fn zeros(order: u32) -> Self {
        Self {
            t: 0.0,
            coeffs: vec![[0.0; 2]; order as usize],
        }
    }

    pub fn single_mode(order: u32, n: ModeIndex, a: [f64; 2]) -> Self {
        let mut s = Self::zeros(order);
        s.coeffs[n.get() as usize - 1] = a;
        s
    }

    pub fn order(&self) -> u32 {
        self.coeffs.len() as u32
    }

    pub fn mode(&self, n: ModeIndex) -> [f64; 2] {
        self.coeffs[n.get() as usize - 1]
    }

    pub fn modes(&self) -> impl Iterator<Item = (ModeIndex, [f64; 2])> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, a)| (ModeIndex::new(i as u32 + 1).expect("n >= 1"), *a))
    }

    /// `n^4 pi^4 a_pos^2 + a_vel^2` for one mode.
    pub fn modal_energy(&self, n: ModeIndex) -> f64 {
        let a = self.mode(n);
        n.stiffness() * a[0] * a[0] + a[1] * a[1]
    }

    /// Sum of modal energies over the modes selected by `filter`.
    pub fn energy_where(&self, filter: impl Fn(ModeIndex) -> bool) -> f64 {
        self.modes()
            .filter(|(n, _)| filter(*n))
            .map(|(n, _)| self.modal_energy(n))
            .sum()
    }

    pub fn energy(&self) -> f64 {
        self.energy_where(|_| true)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|a| a[0] == 0.0 && a[1] == 0.0)
    }

    fn to_vector(&self) -> DVector<f64> {
        DVector::from_iterator(self.coeffs.len() * 2, self.coeffs.iter().flat_map(|a| *a))
    }

    fn from_vector(t: f64, v: &DVector<f64>) -> Self {
        Self {
            t,
            coeffs: v.as_slice().chunks(2).map(|c| [c[0], c[1]]).collect(),
        }
    }
}

/// Initial displacement `f1` and velocity `f2`.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    Zero,
    /// `f1 = amplitude * sin(k pi x)`, `f2 = 0`.
    SingleMode {
        k: u32,
        amplitude: f64,
    },
    /// `f1 = x (1 - x)`, `f2 = 0`.
    Parabola,
    /// Samples on a uniform grid over `[0, 1]` (even number of intervals).
    Samples {
        f1: Vec<f64>,
        f2: Vec<f64>,
    },
}

impl InitialData {
    fn sample(&self, points: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let grid: Vec<f64> = (0..points)
            .map(|i| i as f64 / (points - 1) as f64)
            .collect();
        Ok(match self {
            InitialData::Zero => (vec![0.0; points], vec![0.0; points]),
            InitialData::SingleMode { k, amplitude } => {
                if *k == 0 {
                    return Err(Error::InvalidMode);
                }
                let kf = f64::from(*k);
                (
                    grid.iter().map(|x| amplitude * sin_pi(kf * x)).collect(),
                    vec![0.0; points],
                )
            }
            InitialData::Parabola => (
                grid.iter().map(|x| x * (1.0 - x)).collect(),
                vec![0.0; points],
            ),
            InitialData::Samples { f1, f2 } => {
                if f1.len() != f2.len() || f1.len() < 3 || (f1.len() - 1) % 2 != 0 {
                    return Err(Error::InvalidSim(
                        "sampled initial data needs equal lengths and an even number of intervals"
                            .into(),
                    ));
                }
                (f1.clone(), f2.clone())
            }
        })
    }
}

/// Quadrature settings for [`project_initial`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    /// Grid points for built-in data (odd; `points - 1` divisible by 4).
    pub points: usize,
    /// Absolute tolerance on the Richardson estimate, scaled by `1 + max|f|`.
    pub tolerance: f64,
}

impl Default for Projection {
    fn default() -> Self {
        Self {
            points: 4097,
            tolerance: 1e-7,
        }
    }
}

/// `a_n = 2 int_0^1 f(x) sin(n pi x) dx` by composite Simpson.
pub fn project_initial(data: &InitialData, order: u32, quad: &Projection) -> Result<ModalState> {
    let (f1, f2) = data.sample(quad.points)?;
    let m = f1.len() - 1;
    let h = 1.0 / m as f64;
    let fmax = f1.iter().chain(&f2).fold(0.0f64, |a, v| a.max(v.abs()));
    let tol = quad.tolerance * (1.0 + fmax);
    if f1[0].abs() > tol || f1[m].abs() > tol {
        return Err(Error::BoundaryMismatch {
            left: f1[0],
            right: f1[m],
        });
    }
    let grid: Vec<f64> = (0..=m).map(|i| i as f64 * h).collect();
    let mut state = ModalState::zeros(order);
    let mut estimate = 0.0f64;
    let mut prod = vec![0.0; m + 1];
    for n in 1..=order {
        let nf = f64::from(n);
        let s: Vec<f64> = grid.iter().map(|x| sin_pi(nf * x)).collect();
        for (slot, f) in [&f1, &f2].into_iter().enumerate() {
            for i in 0..=m {
                prod[i] = f[i] * s[i];
            }
            let fine = 2.0 * simpson(&prod, h);
            if m % 4 == 0 {
                let coarse: Vec<f64> = prod.iter().step_by(2).copied().collect();
                let c = 2.0 * simpson(&coarse, 2.0 * h);
                estimate = estimate.max((fine - c).abs() / 15.0);
            }
            state.coeffs[n as usize - 1][slot] = fine;
        }
    }
    if estimate > tol {
        return Err(Error::GridTooCoarse {
            estimate,
            tolerance: tol,
        });
    }
    Ok(state)
}

/// Displacement and velocity fields at `xgrid`.
pub fn reconstruct(state: &ModalState, xgrid: &[f64]) -> Vec<(f64, f64)> {
    xgrid
        .iter()
        .map(|x| {
            state.modes().fold((0.0, 0.0), |(d, v), (n, a)| {
                let s = sin_pi(f64::from(n.get()) * x);
                (d + a[0] * s, v + a[1] * s)
            })
        })
        .collect()
}

/// `u = sum_n sigma_n K_n a_n`.
pub fn boundary_control_signal(
    state: &ModalState,
    gains: &[ModalGain],
    sign: SignConvention,
) -> f64 {
    state
        .modes()
        .zip(gains)
        .map(|((n, a), k)| sign.sigma(n) * k.apply(a))
        .sum()
}

fn check_gains(state: &ModalState, gains: &[ModalGain]) -> Result<()> {
    if gains.len() != state.coeffs.len() {
        return Err(Error::InvalidSim(format!(
            "{} gains for {} modes",
            gains.len(),
            state.coeffs.len()
        )));
    }
    Ok(())
}

/// Advances every mode by `exp((F_n + G_n K_n) t)`.
pub fn evolve_decoupled(
    state: &ModalState,
    gains: &[ModalGain],
    params: &BeamParams,
    t: f64,
) -> Result<ModalState> {
    check_gains(state, gains)?;
    let coeffs = state
        .modes()
        .zip(gains)
        .map(|((n, a), k)| {
            let e = expm2(&closed_loop_matrix(n, params, k), t);
            let v = e * Vector2::new(a[0], a[1]);
            [v[0], v[1]]
        })
        .collect();
    Ok(ModalState {
        t: state.t + t,
        coeffs,
    })
}

pub fn evolve_open_loop(state: &ModalState, params: &BeamParams, t: f64) -> Result<ModalState> {
    let zero = vec![ModalGain::default(); state.coeffs.len()];
    evolve_decoupled(state, &zero, params, t)
}

/// The `2N x 2N` closed loop with one scalar boundary input.
///
/// Internally works in the scaled coordinates `(n^2 pi^2 a_pos, a_vel)`,
/// in which each modal block is close to normal; this keeps the squaring
/// phase of the exponential well conditioned for high modes.
#[derive(Debug, Clone)]
pub struct CoupledSystem {
    order: u32,
    scaled: DMatrix<f64>,
    scale: Vec<f64>,
    forcing: Option<f64>,
}

impl CoupledSystem {
    pub fn new(
        params: &BeamParams,
        gains: &[ModalGain],
        input: InputConvention,
        sign: SignConvention,
    ) -> Result<Self> {
        Self::build(params, gains, input, sign, None)
    }

    /// Open loop driven by the constant boundary input `u0`.
    pub fn forced(
        params: &BeamParams,
        order: u32,
        input: InputConvention,
        u0: f64,
    ) -> Result<Self> {
        let zero = vec![ModalGain::default(); order as usize];
        Self::build(params, &zero, input, SignConvention::Paper, Some(u0))
    }

    fn build(
        params: &BeamParams,
        gains: &[ModalGain],
        input: InputConvention,
        sign: SignConvention,
        forcing: Option<f64>,
    ) -> Result<Self> {
        let order = gains.len() as u32;
        if order == 0 {
            return Err(Error::InvalidSim(
                "coupled system needs at least one mode".into(),
            ));
        }
        let dim = 2 * gains.len() + usize::from(forcing.is_some());
        let mut a = DMatrix::zeros(dim, dim);
        let modes: Vec<ModeIndex> = (1..=order)
            .map(|n| ModeIndex::new(n).expect("n >= 1"))
            .collect();
        let mut scale = vec![1.0; dim];
        for (i, n) in modes.iter().enumerate() {
            scale[2 * i] = n.wavenumber() * n.wavenumber();
        }
        for (i, n) in modes.iter().enumerate() {
            let (p, v) = (2 * i, 2 * i + 1);
            a[(p, v)] = 1.0;
            a[(v, p)] = -n.stiffness();
            a[(v, v)] = -params.alpha();
            let b = input.coefficient(*n, params);
            for (j, (m, k)) in modes.iter().zip(gains).enumerate() {
                let s = sign.sigma(*m);
                a[(v, 2 * j)] += b * s * k.k1;
                a[(v, 2 * j + 1)] += b * s * k.k2;
            }
            if let Some(u0) = forcing {
                a[(v, dim - 1)] = b * u0;
            }
        }
        // D A D^{-1}
        for i in 0..dim {
            for j in 0..dim {
                a[(i, j)] *= scale[i] / scale[j];
            }
        }
        Ok(Self {
            order,
            scaled: a,
            scale,
            forcing,
        })
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    /// Closed-loop matrix in the original coordinates (without forcing).
    pub fn matrix(&self) -> DMatrix<f64> {
        let dim = 2 * self.order as usize;
        DMatrix::from_fn(dim, dim, |i, j| {
            self.scaled[(i, j)] * self.scale[j] / self.scale[i]
        })
    }

    /// Propagator `exp(A t)` in scaled coordinates.
    pub fn propagator(&self, t: f64) -> Result<Propagator> {
        Ok(Propagator {
            scaled: expm(&self.scaled, t)?,
            t,
        })
    }

    pub fn evolve(&self, state: &ModalState, t: f64) -> Result<ModalState> {
        let p = self.propagator(t)?;
        Ok(self.apply(&p, state))
    }

    pub fn apply(&self, p: &Propagator, state: &ModalState) -> ModalState {
        let x = self.to_scaled(state);
        let y = &p.scaled * x;
        self.from_scaled(state.t + p.t, &y)
    }

    fn to_scaled(&self, state: &ModalState) -> DVector<f64> {
        let mut v = state.to_vector();
        if self.forcing.is_some() {
            v = v.push(1.0);
        }
        v.component_mul_assign(&DVector::from_column_slice(&self.scale));
        v
    }

    fn from_scaled(&self, t: f64, v: &DVector<f64>) -> ModalState {
        let dim = 2 * self.order as usize;
        let raw = DVector::from_fn(dim, |i, _| v[i] / self.scale[i]);
        ModalState::from_vector(t, &raw)
    }
}

pub struct Propagator {
    scaled: DMatrix<f64>,
    t: f64,
}

/// One output sample of a simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub state: ModalState,
    /// Boundary input.
    pub u: f64,
    /// Per-mode inputs of the decoupled loop; `None` for a single scalar input.
    pub mode_inputs: Option<Vec<f64>>,
}

impl Sample {
    pub fn t(&self) -> f64 {
        self.state.t
    }

    /// Control term `sum u_n^2` (decoupled) or `u^2`.
    pub fn input_energy(&self) -> f64 {
        match &self.mode_inputs {
            Some(v) => v.iter().map(|u| u * u).sum(),
            None => self.u * self.u,
        }
    }
}

/// Uniformly sampled simulation output.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub samples: Vec<Sample>,
}

impl Trajectory {
    pub fn first(&self) -> &ModalState {
        &self.samples[0].state
    }

    pub fn last(&self) -> &ModalState {
        &self.samples[self.samples.len() - 1].state
    }

    pub fn horizon(&self) -> f64 {
        self.last().t - self.first().t
    }
}

fn check_timing(dt: f64, horizon: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite() && horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidSim(format!(
            "need dt > 0 and T > 0 (dt={dt}, T={horizon})"
        )));
    }
    let steps = (horizon / dt).round().max(1.0);
    if steps > 5e7 {
        return Err(Error::InvalidSim(format!("{steps} steps requested")));
    }
    Ok(steps as usize)
}

/// Decoupled closed loop sampled every `dt` up to `horizon`.
///
/// Every sample is the exact modal exponential from the initial state, so
/// no stepping error accumulates.
pub fn simulate_decoupled(
    initial: &ModalState,
    gains: &[ModalGain],
    params: &BeamParams,
    dt: f64,
    horizon: f64,
) -> Result<Trajectory> {
    check_gains(initial, gains)?;
    let steps = check_timing(dt, horizon)?;
    let dt = horizon / steps as f64;
    let mats: Vec<Matrix2<f64>> = initial
        .modes()
        .zip(gains)
        .map(|((n, _), k)| closed_loop_matrix(n, params, k))
        .collect();
    let mut samples = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        let t = i as f64 * dt;
        let coeffs: Vec<[f64; 2]> = initial
            .coeffs
            .iter()
            .zip(&mats)
            .map(|(a, m)| {
                let v = expm2(m, t) * Vector2::new(a[0], a[1]);
                [v[0], v[1]]
            })
            .collect();
        let inputs: Vec<f64> = coeffs.iter().zip(gains).map(|(a, k)| k.apply(*a)).collect();
        samples.push(Sample {
            u: inputs.iter().sum(),
            mode_inputs: Some(inputs),
            state: ModalState {
                t: initial.t + t,
                coeffs,
            },
        });
    }
    Ok(Trajectory { dt, samples })
}

/// Coupled closed loop with a scalar boundary input, sampled every `dt`.
pub fn evolve_coupled(
    initial: &ModalState,
    gains: &[ModalGain],
    params: &BeamParams,
    input: InputConvention,
    sign: SignConvention,
    dt: f64,
    horizon: f64,
) -> Result<Trajectory> {
    check_gains(initial, gains)?;
    let steps = check_timing(dt, horizon)?;
    let dt = horizon / steps as f64;
    let sys = CoupledSystem::new(params, gains, input, sign)?;
    let prop = sys.propagator(dt)?;
    let mut samples = Vec::with_capacity(steps + 1);
    let mut state = initial.clone();
    for i in 0..=steps {
        if i > 0 {
            state = sys.apply(&prop, &state);
        }
        samples.push(Sample {
            u: boundary_control_signal(&state, gains, sign),
            mode_inputs: None,
            state: state.clone(),
        });
    }
    Ok(Trajectory { dt, samples })
}

/// Open loop driven by a constant boundary input, evaluated at time `t`.
pub fn evolve_forced(
    initial: &ModalState,
    params: &BeamParams,
    input: InputConvention,
    u0: f64,
    t: f64,
) -> Result<ModalState> {
    let sys = CoupledSystem::forced(params, initial.order(), input, u0)?;
    sys.evolve(initial, t)
}

/// `int_0^T [c_mode sum_n a_n^T Q_n a_n + R u^2] dt` by composite Simpson.
///
/// Only the modes with a nonzero weight are required to have decayed: their
/// energy at `T` must be below `decay_tol^2` times the initial one.
pub fn run_cost_quadrature(
    traj: &Trajectory,
    weights: &[ModalWeight],
    params: &BeamParams,
    c_mode: f64,
    decay_tol: f64,
) -> Result<f64> {
    let first = traj.first();
    if weights.len() != first.coeffs.len() {
        return Err(Error::InvalidSim(format!(
            "{} weights for {} modes",
            weights.len(),
            first.coeffs.len()
        )));
    }
    if first.is_zero() || weights.iter().all(|q| q.is_zero()) {
        return Ok(0.0);
    }
    let weighted = |n: ModeIndex| !weights[n.get() as usize - 1].is_zero();
    let e0 = first.energy_where(weighted);
    let e1 = traj.last().energy_where(weighted);
    let ratio = if e0 > 0.0 { (e1 / e0).sqrt() } else { 0.0 };
    if ratio > decay_tol {
        return Err(Error::NotDecayed {
            ratio,
            tolerance: decay_tol,
        });
    }
    let rw = params.control_weight();
    let integrand: Vec<f64> = traj
        .samples
        .iter()
        .map(|s| {
            let state_cost: f64 = s
                .state
                .coeffs
                .iter()
                .zip(weights)
                .map(|(a, q)| q.quadratic_form(*a))
                .sum();
            c_mode * state_cost + rw * s.input_energy()
        })
        .collect();
    Ok(simpson(&integrand, traj.dt))
}

/// Closed-loop cost matrix `X` with `A^T X + X A + Q + K^T R K = 0`.
///
/// `a(0)^T X a(0)` is the cost of running the per-mode closed loop forever.
pub fn closed_loop_cost_matrix(
    n: ModeIndex,
    params: &BeamParams,
    q: &ModalWeight,
    k: &ModalGain,
) -> Result<Matrix2<f64>> {
    let a = closed_loop_matrix(n, params, k);
    let kv = Vector2::new(k.k1, k.k2);
    let c = q.matrix() + kv * kv.transpose() * params.control_weight();
    lyapunov2(&a, &c)
}

/// Time step and horizon that resolve the given closed-loop eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timing {
    pub dt: f64,
    pub horizon: f64,
}

/// Horizon `horizon_factor / |Re mu_slow|` and a step resolving `|mu_fast|`.
pub fn auto_timing(
    slowest_decay: f64,
    fastest_rate: f64,
    horizon_factor: f64,
    points_per_radian: f64,
) -> Result<Timing> {
    if !(slowest_decay > 0.0) {
        return Err(Error::InvalidSim(
            "closed loop is not asymptotically stable".into(),
        ));
    }
    let horizon = horizon_factor / slowest_decay;
    let dt = (1.0 / (points_per_radian * fastest_rate.max(1e-12))).min(horizon / 200.0);
    Ok(Timing { dt, horizon })
}

/// Outcome of comparing simulated costs with the initial value-kernel form.
#[derive(Debug, Clone, PartialEq)]
pub struct CostIdentityReport {
    pub mode: SimMode,
    pub c_mode: f64,
    /// `(n, simulated, predicted, relative error)` per weighted mode with
    /// nonzero initial data.
    pub per_mode: Vec<(u32, f64, f64, f64)>,
    pub simulated: f64,
    pub predicted: f64,
    pub relative_error: f64,
}

/// Options for [`verify_cost_identity`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostCheck {
    pub input: InputConvention,
    pub sign: SignConvention,
    pub decay_tol: f64,
    /// Relative change allowed when halving `dt`.
    pub refine_tol: f64,
}

impl Default for CostCheck {
    fn default() -> Self {
        Self {
            input: InputConvention::PaperBeta,
            sign: SignConvention::Paper,
            decay_tol: 1e-6,
            refine_tol: 1e-3,
        }
    }
}

fn rel_err(sim: f64, pred: f64) -> f64 {
    if pred == 0.0 {
        sim.abs()
    } else {
        (sim - pred).abs() / pred.abs()
    }
}

/// Compares quadrature costs with `c_mode sum_n a_n(0)^T P_n a_n(0)`.
///
/// Decoupled mode checks the per-mode identity (`c_mode = 1`) mode by mode.
/// Coupled mode runs the scalar-input loop once and compares with the
/// kernel-level prediction (`c_mode = 1/4`); it is a measurement only.
pub fn verify_cost_identity(
    initial: &ModalState,
    synthesis: &[ModeSynthesis],
    params: &BeamParams,
    mode: SimMode,
    check: &CostCheck,
) -> Result<CostIdentityReport> {
    if synthesis.len() != initial.coeffs.len() {
        return Err(Error::InvalidSim(
            "synthesis does not cover the state".into(),
        ));
    }
    let horizon_factor = (1.0 / check.decay_tol).ln() * 1.25;
    match mode {
        SimMode::Decoupled | SimMode::OpenLoop => {
            let c_mode = 1.0;
            let mut per_mode = Vec::new();
            for s in synthesis {
                let a0 = initial.mode(s.n);
                if s.weight.is_zero() || (a0[0] == 0.0 && a0[1] == 0.0) {
                    continue;
                }
                let single = ModalState::single_mode(1, ModeIndex::new(1).expect("1"), a0);
                let mu = s.closed_loop;
                let timing = auto_timing(-mu.max_real(), mu.plus.norm(), horizon_factor, 40.0)?;
                let sim = refined_cost(check.refine_tol, timing, |dt| {
                    // one-mode trajectory carrying mode n's dynamics
                    let traj =
                        simulate_one_mode(&single, s.n, &s.gain, params, dt, timing.horizon)?;
                    run_cost_quadrature(&traj, &[s.weight], params, c_mode, check.decay_tol)
                })?;
                let pred = s.riccati.quadratic_form(a0);
                per_mode.push((s.n.get(), sim, pred, rel_err(sim, pred)));
            }
            let simulated: f64 = per_mode.iter().map(|m| m.1).sum();
            let predicted: f64 = per_mode.iter().map(|m| m.2).sum();
            Ok(CostIdentityReport {
                mode: SimMode::Decoupled,
                c_mode,
                per_mode,
                simulated,
                predicted,
                relative_error: rel_err(simulated, predicted),
            })
        }
        SimMode::Coupled => {
            let c_mode = 0.25;
            let gains: Vec<ModalGain> = synthesis.iter().map(|s| s.gain).collect();
            let weights: Vec<ModalWeight> = synthesis.iter().map(|s| s.weight).collect();
            let sys = CoupledSystem::new(params, &gains, check.input, check.sign)?;
            let eig = sys.matrix().complex_eigenvalues();
            let weighted_modes: Vec<&ModeSynthesis> =
                synthesis.iter().filter(|s| !s.weight.is_zero()).collect();
            let slow = weighted_modes
                .iter()
                .map(|s| -s.closed_loop.max_real())
                .fold(f64::INFINITY, f64::min);
            let fast = eig.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let timing = auto_timing(slow, fast, horizon_factor, 40.0)?;
            let simulated = refined_cost(check.refine_tol, timing, |dt| {
                let traj = evolve_coupled(
                    initial,
                    &gains,
                    params,
                    check.input,
                    check.sign,
                    dt,
                    timing.horizon,
                )?;
                run_cost_quadrature(&traj, &weights, params, c_mode, check.decay_tol)
            })?;
            let per_mode: Vec<(u32, f64, f64, f64)> = weighted_modes
                .iter()
                .map(|s| {
                    let pred = c_mode * s.riccati.quadratic_form(initial.mode(s.n));
                    (s.n.get(), f64::NAN, pred, f64::NAN)
                })
                .collect();
            let predicted: f64 = per_mode.iter().map(|m| m.2).sum();
            Ok(CostIdentityReport {
                mode,
                c_mode,
                per_mode,
                simulated,
                predicted,
                relative_error: rel_err(simulated, predicted),
            })
        }
    }
}

fn simulate_one_mode(
    single: &ModalState,
    n: ModeIndex,
    gain: &ModalGain,
    params: &BeamParams,
    dt: f64,
    horizon: f64,
) -> Result<Trajectory> {
    let steps = check_timing(dt, horizon)?;
    let dt = horizon / steps as f64;
    let m = closed_loop_matrix(n, params, gain);
    let a0 = single.coeffs[0];
    let e = expm2(&m, dt);
    let mut v = Vector2::new(a0[0], a0[1]);
    let mut samples = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        if i > 0 {
            v = e * v;
        }
        let a = [v[0], v[1]];
        let u = gain.apply(a);
        samples.push(Sample {
            u,
            mode_inputs: Some(vec![u]),
            state: ModalState {
                t: i as f64 * dt,
                coeffs: vec![a],
            },
        });
    }
    Ok(Trajectory { dt, samples })
}

fn refined_cost(
    refine_tol: f64,
    timing: Timing,
    mut run: impl FnMut(f64) -> Result<f64>,
) -> Result<f64> {
    let mut dt = timing.dt;
    let mut prev = run(dt)?;
    for _ in 0..6 {
        dt *= 0.5;
        let next = run(dt)?;
        let change = rel_err(prev, next);
        prev = next;
        if change < refine_tol {
            break;
        }
    }
    Ok(prev)
}

/// Mode-by-mode difference between a coupled and a decoupled trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct SpilloverReport {
    /// Largest coefficient deviation per mode over the horizon, relative to the
    /// largest initial coefficient magnitude.
    pub deviation: Vec<f64>,
    /// Largest coefficient magnitude per mode in the coupled run.
    pub coupled_peak: Vec<f64>,
    pub horizon: f64,
}

/// Runs both loops from the same state and records the per-mode gap.
pub fn spillover_report(
    initial: &ModalState,
    gains: &[ModalGain],
    params: &BeamParams,
    input: InputConvention,
    sign: SignConvention,
    dt: f64,
    horizon: f64,
) -> Result<SpilloverReport> {
    let coupled = evolve_coupled(initial, gains, params, input, sign, dt, horizon)?;
    let decoupled = simulate_decoupled(initial, gains, params, coupled.dt, coupled.horizon())?;
    let order = initial.coeffs.len();
    let scale = initial
        .coeffs
        .iter()
        .flat_map(|a| a.iter().map(|v| v.abs()))
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut deviation = vec![0.0f64; order];
    let mut coupled_peak = vec![0.0f64; order];
    for (c, d) in coupled.samples.iter().zip(&decoupled.samples) {
        for i in 0..order {
            let (ca, da) = (c.state.coeffs[i], d.state.coeffs[i]);
            let dev = (ca[0] - da[0]).abs().max((ca[1] - da[1]).abs());
            deviation[i] = deviation[i].max(dev / scale);
            coupled_peak[i] = coupled_peak[i].max(ca[0].abs().max(ca[1].abs()));
        }
    }
    Ok(SpilloverReport {
        deviation,
        coupled_peak,
        horizon: coupled.horizon(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modal_riccati::{mode_gain, solve_mode_riccati};
    use std::f64::consts::PI;

    fn mode(n: u32) -> ModeIndex {
        ModeIndex::new(n).unwrap()
    }

    #[test]
    fn projection_of_single_sine() {
        let s = project_initial(
            &InitialData::SingleMode {
                k: 2,
                amplitude: 1.0,
            },
            6,
            &Projection::default(),
        )
        .unwrap();
        for (n, a) in s.modes() {
            let expect = if n.get() == 2 { 1.0 } else { 0.0 };
            assert!((a[0] - expect).abs() < 1e-10, "{n}: {a:?}");
            assert_eq!(a[1], 0.0);
        }
    }

    #[test]
    fn projection_of_parabola() {
        let s = project_initial(&InitialData::Parabola, 16, &Projection::default()).unwrap();
        for (n, a) in s.modes() {
            let nf = f64::from(n.get());
            let expect = if n.get() % 2 == 1 {
                8.0 / (nf * PI).powi(3)
            } else {
                0.0
            };
            assert!((a[0] - expect).abs() < 1e-10, "{n}: {} vs {expect}", a[0]);
        }
    }

    #[test]
    fn projection_errors() {
        let zero = project_initial(&InitialData::Zero, 4, &Projection::default()).unwrap();
        assert!(zero.is_zero());
        let f1 = vec![1.0, 0.5, 0.0];
        let bad = InitialData::Samples {
            f1,
            f2: vec![0.0; 3],
        };
        assert!(matches!(
            project_initial(&bad, 2, &Projection::default()),
            Err(Error::BoundaryMismatch { .. })
        ));
        let coarse = InitialData::SingleMode {
            k: 40,
            amplitude: 1.0,
        };
        let quad = Projection {
            points: 65,
            tolerance: 1e-9,
        };
        assert!(matches!(
            project_initial(&coarse, 40, &quad),
            Err(Error::GridTooCoarse { .. })
        ));
    }

    #[test]
    fn reconstruct_single_mode_and_round_trip() {
        let s = ModalState::single_mode(3, mode(1), [1.0, 0.0]);
        let grid = [0.0, 0.25, 0.5, 1.0];
        let f = reconstruct(&s, &grid);
        for (x, (d, v)) in grid.iter().zip(&f) {
            assert!((d - (PI * x).sin()).abs() < 1e-15);
            assert_eq!(*v, 0.0);
        }
        let s = ModalState {
            t: 0.0,
            coeffs: (1..=12)
                .map(|n| [1.0 / f64::from(n), (-1.0f64).powi(n as i32) * 0.3])
                .collect(),
        };
        let m = 4096;
        let fine: Vec<f64> = (0..=m).map(|i| i as f64 / m as f64).collect();
        let f = reconstruct(&s, &fine);
        let data = InitialData::Samples {
            f1: f.iter().map(|p| p.0).collect(),
            f2: f.iter().map(|p| p.1).collect(),
        };
        let back = project_initial(&data, 12, &Projection::default()).unwrap();
        for (a, b) in s.coeffs.iter().zip(&back.coeffs) {
            assert!((a[0] - b[0]).abs() < 1e-9 && (a[1] - b[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_gain_signal_and_conventions() {
        let s = ModalState::single_mode(2, mode(2), [0.4, -1.0]);
        assert_eq!(
            boundary_control_signal(&s, &[ModalGain::default(); 2], SignConvention::Paper),
            0.0
        );
        let mut gains = vec![ModalGain::default(); 2];
        gains[1] = ModalGain { k1: 2.0, k2: 3.0 };
        let u = boundary_control_signal(&s, &gains, SignConvention::Paper);
        assert_eq!(u, 2.0 * 0.4 - 3.0);
        assert_eq!(
            boundary_control_signal(&s, &gains, SignConvention::Derivative),
            u
        );
        let s3 = ModalState::single_mode(3, mode(3), [0.4, -1.0]);
        let mut g3 = vec![ModalGain::default(); 3];
        g3[2] = ModalGain { k1: 2.0, k2: 3.0 };
        assert_eq!(
            boundary_control_signal(&s3, &g3, SignConvention::Derivative),
            -boundary_control_signal(&s3, &g3, SignConvention::Paper)
        );
    }

    #[test]
    fn decoupled_identity_at_zero_time_and_energy_conservation() {
        let params = BeamParams::default();
        let s = ModalState {
            t: 0.0,
            coeffs: vec![[0.1, 0.2], [0.0, 1.0], [-0.3, 0.0]],
        };
        let same = evolve_open_loop(&s, &params, 0.0).unwrap();
        assert_eq!(same.coeffs, s.coeffs);
        for n in 1..=3 {
            let n = mode(n);
            let t = 2.0 / (f64::from(n.get()).powi(2) * PI);
            let later = evolve_open_loop(&s, &params, t).unwrap();
            let (e0, e1) = (s.modal_energy(n), later.modal_energy(n));
            assert!((e0 - e1).abs() <= 1e-9 * e0.max(1e-300), "{n}");
        }
    }

    #[test]
    fn decoupled_decay_rate_matches_eigenvalue() {
        let params = BeamParams::default();
        let q = ModalWeight::identity();
        let p = solve_mode_riccati(mode(1), &q, &params).unwrap();
        let k = mode_gain(&p, mode(1), &params);
        let s = ModalState::single_mode(1, mode(1), [1.0, 0.0]);
        // energy-like envelope decays like exp(2 Re mu t) on average
        let x = lyapunov2(
            &closed_loop_matrix(mode(1), &params, &k),
            &Matrix2::identity(),
        )
        .unwrap();
        let v = |st: &ModalState| {
            let a = st.coeffs[0];
            x[(0, 0)] * a[0] * a[0] + 2.0 * x[(0, 1)] * a[0] * a[1] + x[(1, 1)] * a[1] * a[1]
        };
        let (t1, t2) = (2.0, 4.0);
        let s1 = evolve_decoupled(&s, &[k], &params, t1).unwrap();
        let s2 = evolve_decoupled(&s, &[k], &params, t2).unwrap();
        let rate = (v(&s2) / v(&s1)).ln() / (2.0 * (t2 - t1));
        assert!((rate + 1.578_836_54).abs() < 0.05, "{rate}");
    }

    #[test]
    fn zero_gain_coupled_equals_open_loop() {
        let params = BeamParams::new(0.3, 1.0, 1.0).unwrap();
        let s = ModalState {
            t: 0.0,
            coeffs: vec![[0.1, 0.2], [0.0, 1.0], [-0.3, 0.0], [0.01, 0.0]],
        };
        let gains = vec![ModalGain::default(); 4];
        let sys = CoupledSystem::new(
            &params,
            &gains,
            InputConvention::Physical,
            SignConvention::Paper,
        )
        .unwrap();
        let a = sys.evolve(&s, 0.37).unwrap();
        let b = evolve_open_loop(&s, &params, 0.37).unwrap();
        for (x, y) in a.coeffs.iter().zip(&b.coeffs) {
            assert!(
                (x[0] - y[0]).abs() < 1e-12 && (x[1] - y[1]).abs() < 1e-10,
                "{x:?} {y:?}"
            );
        }
    }

    #[test]
    fn matched_conventions() {
        let p1 = BeamParams::default();
        assert!(conventions_matched(
            &p1,
            InputConvention::PaperBeta,
            SignConvention::Paper,
            8
        ));
        assert!(!conventions_matched(
            &p1,
            InputConvention::Physical,
            SignConvention::Derivative,
            8
        ));
        let p2 = BeamParams::new(0.0, 2.0, 1.0).unwrap();
        assert!(conventions_matched(
            &p2,
            InputConvention::Physical,
            SignConvention::Derivative,
            8
        ));
    }

    #[test]
    fn zero_cost_cases() {
        let params = BeamParams::default();
        let zero = ModalState::zeros(2);
        let gains = vec![ModalGain::default(); 2];
        let traj = simulate_decoupled(&zero, &gains, &params, 0.01, 1.0).unwrap();
        let w = vec![ModalWeight::identity(); 2];
        assert_eq!(
            run_cost_quadrature(&traj, &w, &params, 0.25, 1e-6).unwrap(),
            0.0
        );
        let s = ModalState::single_mode(2, mode(1), [1.0, 0.0]);
        let traj = simulate_decoupled(&s, &gains, &params, 0.01, 1.0).unwrap();
        let zw = vec![ModalWeight::zero(); 2];
        assert_eq!(
            run_cost_quadrature(&traj, &zw, &params, 0.25, 1e-6).unwrap(),
            0.0
        );
        assert!(matches!(
            run_cost_quadrature(&traj, &w, &params, 0.25, 1e-6),
            Err(Error::NotDecayed { .. })
        ));
    }

    #[test]
    fn invalid_timing_rejected() {
        let s = ModalState::zeros(1);
        let g = [ModalGain::default()];
        assert!(simulate_decoupled(&s, &g, &BeamParams::default(), 0.0, 1.0).is_err());
        assert!(simulate_decoupled(&s, &g, &BeamParams::default(), 0.1, -1.0).is_err());
        assert!(simulate_decoupled(&s, &[], &BeamParams::default(), 0.1, 1.0).is_err());
    }
}
