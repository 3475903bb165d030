//! `beam-lqr`: modal LQR synthesis, spectra, simulation and verification for
//! the boundary-controlled Euler-Bernoulli beam.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use beam_lqr::beam_sim::{
    auto_timing, evolve_coupled, project_initial, simulate_decoupled, ModalState, Projection,
    SimMode, Trajectory,
};
use beam_lqr::config::{ConfigError, Horizon, OutputFormat, RunConfig};
use beam_lqr::kernel_assembly::{
    assemble_feedback_kernel, assemble_kernel, synthesize_profile, uniform_grid, SineKernel,
};
use beam_lqr::modal_riccati::{ModalGain, ModeSynthesis};
use beam_lqr::{output, verify};

const EXIT_CHECK: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

/// File name of the effective-configuration echo written next to the outputs.
const ECHO_FILE: &str = "run.cfg";

#[derive(Parser)]
#[command(
    name = "beam-lqr",
    version,
    about = "Modal LQR boundary control of the Euler-Bernoulli beam"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-mode Riccati solutions and gains, plus the P and K kernels.
    Synthesize(Common),
    /// Open- and closed-loop eigenvalues per mode.
    Spectrum(Common),
    /// Simulate the configured loop and write trajectory and field samples.
    Simulate(Common),
    /// Run the verification suite and write verify.txt.
    Verify(Common),
}

#[derive(Args)]
struct Common {
    /// Configuration file (`section.key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Number of modes (overrides `weights.N`).
    #[arg(long)]
    modes: Option<u32>,
    /// Trajectory layout (overrides `output.format`).
    #[arg(long, value_parser = parse_format)]
    format: Option<OutputFormat>,
}

fn parse_format(s: &str) -> Result<OutputFormat, String> {
    s.parse()
}

enum Failure {
    Config(String),
    Numeric(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<beam_lqr::Error> for Failure {
    fn from(e: beam_lqr::Error) -> Self {
        Failure::Numeric(e.to_string())
    }
}

fn load(common: &Common) -> Result<RunConfig, ConfigError> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(dir) = &common.out_dir {
        cfg.out_dir = dir.clone();
    }
    if let Some(n) = common.modes {
        cfg.order = n;
    }
    if let Some(f) = common.format {
        cfg.format = f;
    }
    cfg.validate()?;
    Ok(cfg)
}

type Files = Vec<(&'static str, Vec<u8>)>;

fn csv(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Vec<u8> {
    let mut buf = Vec::new();
    f(&mut buf).expect("writing to memory cannot fail");
    buf
}

fn synthesis(cfg: &RunConfig) -> Result<Vec<ModeSynthesis>, Failure> {
    Ok(synthesize_profile(&cfg.profile(), &cfg.params()?)?)
}

fn synthesize(cfg: &RunConfig) -> Result<Files, Failure> {
    let modes = synthesis(cfg)?;
    let grid = uniform_grid(cfg.kernel_points);
    let value = SineKernel::value(&modes.iter().map(|m| (m.n, m.riccati)).collect::<Vec<_>>());
    let samples = assemble_kernel(&value, &grid)?;
    let gains: Vec<_> = modes.iter().map(|m| (m.n, m.gain)).collect();
    let k = assemble_feedback_kernel(&gains, &grid, cfg.sign)?;
    Ok(vec![
        ("modes.csv", csv(|w| output::write_modes(w, &modes))),
        ("kernel_P.csv", csv(|w| output::write_kernel_p(w, &samples))),
        (
            "kernel_K.csv",
            csv(|w| output::write_kernel_k(w, &grid, &k)),
        ),
    ])
}

fn spectrum(cfg: &RunConfig) -> Result<Files, Failure> {
    let modes = synthesis(cfg)?;
    Ok(vec![(
        "spectrum.csv",
        csv(|w| output::write_spectrum(w, &modes)),
    )])
}

fn horizon(cfg: &RunConfig, modes: &[ModeSynthesis]) -> Result<f64, Failure> {
    match cfg.horizon {
        Horizon::Fixed(t) => Ok(t),
        Horizon::Auto if cfg.sim_mode == SimMode::OpenLoop => {
            // ten periods of the fundamental
            let w1 = modes[0].open_loop.plus.im.abs().max(1e-12);
            Ok(10.0 * 2.0 * std::f64::consts::PI / w1)
        }
        Horizon::Auto => {
            let slow = modes
                .iter()
                .filter(|m| !m.weight.is_zero())
                .map(|m| -m.closed_loop.max_real())
                .fold(f64::INFINITY, f64::min);
            if !slow.is_finite() {
                return Err(Failure::Config(
                    "sim.T = auto needs at least one weighted mode".into(),
                ));
            }
            let factor = (1e6f64).ln() * 1.25;
            Ok(auto_timing(slow, 1.0, factor, 1.0)?.horizon)
        }
    }
}

fn simulate(cfg: &RunConfig) -> Result<Files, Failure> {
    let params = cfg.params()?;
    let modes = synthesis(cfg)?;
    let data = cfg.initial.load()?;
    let initial: ModalState = project_initial(&data, cfg.order, &Projection::default())?;
    let t = horizon(cfg, &modes)?;
    let gains: Vec<ModalGain> = modes.iter().map(|m| m.gain).collect();
    let traj: Trajectory = match cfg.sim_mode {
        SimMode::OpenLoop => {
            let zero = vec![ModalGain::default(); gains.len()];
            simulate_decoupled(&initial, &zero, &params, cfg.dt, t)?
        }
        SimMode::Decoupled => simulate_decoupled(&initial, &gains, &params, cfg.dt, t)?,
        SimMode::Coupled => {
            evolve_coupled(&initial, &gains, &params, cfg.input, cfg.sign, cfg.dt, t)?
        }
    };
    let xgrid = uniform_grid(cfg.field_points);
    let stride = cfg.stride;
    let trajectory = match cfg.format {
        OutputFormat::Wide => csv(|w| output::write_trajectory_wide(w, &traj, stride)),
        OutputFormat::Long => csv(|w| output::write_trajectory_long(w, &traj, stride)),
    };
    Ok(vec![
        ("trajectory.csv", trajectory),
        (
            "field.csv",
            csv(|w| output::write_field(w, &traj, &xgrid, stride)),
        ),
        (
            "energy.csv",
            csv(|w| output::write_energy(w, &traj, &modes, stride)),
        ),
    ])
}

fn write_all(dir: &Path, cfg: &RunConfig, files: &Files) -> Result<(), Failure> {
    let io =
        |e: std::io::Error| Failure::Numeric(format!("cannot write to {}: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(io)?;
    for (name, bytes) in files {
        fs::write(dir.join(name), bytes).map_err(io)?;
    }
    fs::write(dir.join(ECHO_FILE), cfg.to_text()).map_err(io)?;
    Ok(())
}

fn run(command: &Command) -> Result<bool, Failure> {
    let common = match command {
        Command::Synthesize(c)
        | Command::Spectrum(c)
        | Command::Simulate(c)
        | Command::Verify(c) => c,
    };
    let cfg = load(common)?;
    let (files, ok) = match command {
        Command::Synthesize(_) => (synthesize(&cfg)?, true),
        Command::Spectrum(_) => (spectrum(&cfg)?, true),
        Command::Simulate(_) => (simulate(&cfg)?, true),
        Command::Verify(_) => {
            let report = verify::run(&cfg);
            let text = report.render();
            print!("{text}");
            (vec![("verify.txt", text.into_bytes())], report.all_passed())
        }
    };
    write_all(&cfg.out_dir, &cfg, &files)?;
    for (name, _) in &files {
        eprintln!("wrote {}", cfg.out_dir.join(name).display());
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_CHECK),
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Numeric(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_NUMERIC)
        }
    }
}
