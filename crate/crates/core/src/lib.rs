//! LQR boundary control of the Euler-Bernoulli beam, one spatial frequency at a time.
//!
//! * [`modal_riccati`]: explicit per-mode Riccati solutions, gains and
//!   closed-loop spectra, plus an independent Hamiltonian CARE solver.
//! * [`kernel_assembly`]: sine-series kernels and their convergence report.
//! * [`beam_sim`]: open, decoupled and coupled closed-loop simulation and
//!   the optimal-cost identity check.
//! * [`config`], [`output`], [`verify`]: run configuration, CSV writers and
//!   the verification suite driven by the command-line tool.

pub mod beam_sim;
pub mod config;
pub mod error;
pub mod kernel_assembly;
pub mod linalg;
pub mod modal_riccati;
pub mod output;
pub mod verify;

pub use error::{Error, Result};
