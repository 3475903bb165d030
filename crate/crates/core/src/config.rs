//! Flat `section.key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Every key must be
//! known and may appear once. [`RunConfig::to_text`] writes every key back
//! out, and the result parses to an equal configuration.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::beam_sim::{InitialData, InputConvention, SimMode};
use crate::kernel_assembly::{SignConvention, WeightProfile};
use crate::modal_riccati::{BeamParams, ModalWeight};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    Duplicate { line: usize, key: String },
    #[error("`{key}`: {message}")]
    Value { key: String, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Wide,
    Long,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "wide" => Ok(Self::Wide),
            "long" => Ok(Self::Long),
            other => Err(format!("unknown format `{other}` (expected wide|long)")),
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Wide => "wide",
            OutputFormat::Long => "long",
        })
    }
}

/// Named initial condition for `simulate`.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum InitialSpec {
    Zero,
    #[default]
    Parabola,
    SingleMode(u32),
    /// CSV file with columns `x,f1,f2` on a uniform grid.
    Samples(PathBuf),
}

impl FromStr for InitialSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zero" => Ok(Self::Zero),
            "parabola" => Ok(Self::Parabola),
            _ => {
                if let Some(k) = s.strip_prefix("single_mode:") {
                    let k: u32 = k.parse().map_err(|_| format!("bad mode index in `{s}`"))?;
                    if k == 0 {
                        return Err("single_mode index must be >= 1".into());
                    }
                    Ok(Self::SingleMode(k))
                } else if let Some(p) = s.strip_prefix("samples:") {
                    Ok(Self::Samples(PathBuf::from(p)))
                } else {
                    Err(format!(
                        "unknown initial data `{s}` (expected zero|parabola|single_mode:<k>|samples:<path>)"
                    ))
                }
            }
        }
    }
}

impl fmt::Display for InitialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialSpec::Zero => f.write_str("zero"),
            InitialSpec::Parabola => f.write_str("parabola"),
            InitialSpec::SingleMode(k) => write!(f, "single_mode:{k}"),
            InitialSpec::Samples(p) => write!(f, "samples:{}", p.display()),
        }
    }
}

impl InitialSpec {
    pub fn load(&self) -> Result<InitialData, ConfigError> {
        Ok(match self {
            InitialSpec::Zero => InitialData::Zero,
            InitialSpec::Parabola => InitialData::Parabola,
            InitialSpec::SingleMode(k) => InitialData::SingleMode {
                k: *k,
                amplitude: 1.0,
            },
            InitialSpec::Samples(path) => read_samples(path)?,
        })
    }
}

fn read_samples(path: &Path) -> Result<InitialData, ConfigError> {
    let io = |e: std::io::Error| ConfigError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let text = std::fs::read_to_string(path).map_err(io)?;
    let (mut f1, mut f2) = (Vec::new(), Vec::new());
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with('x')) {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let parse = |s: &str| {
            s.parse::<f64>().map_err(|_| ConfigError::Value {
                key: "sim.initial".into(),
                message: format!("{}: line {}: bad number `{s}`", path.display(), i + 1),
            })
        };
        if cols.len() != 3 {
            return Err(ConfigError::Value {
                key: "sim.initial".into(),
                message: format!("{}: line {}: expected x,f1,f2", path.display(), i + 1),
            });
        }
        parse(cols[0])?;
        f1.push(parse(cols[1])?);
        f2.push(parse(cols[2])?);
    }
    Ok(InitialData::Samples { f1, f2 })
}

/// Simulation horizon: explicit or derived from the slowest weighted mode.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Horizon {
    #[default]
    Auto,
    Fixed(f64),
}

/// Effective settings of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub alpha: f64,
    pub beta: f64,
    pub r_weight: f64,
    pub amplitude: f64,
    pub decay: f64,
    pub order: u32,
    pub mask: Option<BTreeSet<u32>>,
    pub base: ModalWeight,
    pub sim_mode: SimMode,
    pub dt: f64,
    pub horizon: Horizon,
    pub input: InputConvention,
    pub sign: SignConvention,
    pub c_mode: f64,
    pub initial: InitialSpec,
    pub stride: usize,
    pub field_points: usize,
    pub kernel_points: usize,
    pub out_dir: PathBuf,
    pub format: OutputFormat,
    pub verify_samples: usize,
    pub verify_max_mode: u32,
    pub verify_seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            alpha: 0.0,
            beta: 1.0,
            r_weight: 1.0,
            amplitude: 1.0,
            decay: 9.0,
            order: 32,
            mask: None,
            base: ModalWeight::identity(),
            sim_mode: SimMode::Decoupled,
            dt: 1e-3,
            horizon: Horizon::Fixed(5.0),
            input: InputConvention::PaperBeta,
            sign: SignConvention::Paper,
            c_mode: 0.25,
            initial: InitialSpec::Parabola,
            stride: 10,
            field_points: 65,
            kernel_points: 257,
            out_dir: PathBuf::from("out"),
            format: OutputFormat::Wide,
            verify_samples: 200,
            verify_max_mode: 64,
            verify_seed: 20_240_601,
        }
    }
}

const KEYS: &[&str] = &[
    "beam.alpha",
    "beam.beta",
    "beam.R",
    "weights.q",
    "weights.r",
    "weights.N",
    "weights.mask",
    "weights.base",
    "sim.mode",
    "sim.dt",
    "sim.T",
    "sim.input",
    "sim.sign",
    "sim.c_mode",
    "sim.initial",
    "sim.stride",
    "sim.field_points",
    "grid.points",
    "output.dir",
    "output.format",
    "verify.samples",
    "verify.max_mode",
    "verify.seed",
];

fn value_err(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Value {
        key: key.to_string(),
        message: message.into(),
    }
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
    v.parse::<T>()
        .map_err(|_| value_err(key, format!("cannot parse `{v}`")))
}

fn parsed<T: FromStr<Err = String>>(key: &str, v: &str) -> Result<T, ConfigError> {
    v.parse::<T>().map_err(|e| value_err(key, e))
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut seen = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                text: line.to_string(),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(ConfigError::UnknownKey {
                    line: i + 1,
                    key: key.to_string(),
                });
            }
            if !seen.insert(key.to_string()) {
                return Err(ConfigError::Duplicate {
                    line: i + 1,
                    key: key.to_string(),
                });
            }
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<(), ConfigError> {
        match key {
            "beam.alpha" => self.alpha = num(key, v)?,
            "beam.beta" => self.beta = num(key, v)?,
            "beam.R" => self.r_weight = num(key, v)?,
            "weights.q" => self.amplitude = num(key, v)?,
            "weights.r" => self.decay = num(key, v)?,
            "weights.N" => self.order = num(key, v)?,
            "weights.mask" => {
                self.mask = if v == "all" {
                    None
                } else {
                    let set = v
                        .split(',')
                        .map(|s| num::<u32>(key, s.trim()))
                        .collect::<Result<BTreeSet<u32>, _>>()?;
                    Some(set)
                }
            }
            "weights.base" => {
                let parts: Vec<f64> = v
                    .split(',')
                    .map(|s| num(key, s.trim()))
                    .collect::<Result<_, _>>()?;
                if parts.len() != 3 {
                    return Err(value_err(key, "expected q11,q12,q22"));
                }
                self.base = ModalWeight {
                    q11: parts[0],
                    q12: parts[1],
                    q22: parts[2],
                };
            }
            "sim.mode" => self.sim_mode = parsed(key, v)?,
            "sim.dt" => self.dt = num(key, v)?,
            "sim.T" => {
                self.horizon = if v == "auto" {
                    Horizon::Auto
                } else {
                    Horizon::Fixed(num(key, v)?)
                }
            }
            "sim.input" => self.input = parsed(key, v)?,
            "sim.sign" => self.sign = parsed(key, v)?,
            "sim.c_mode" => self.c_mode = num(key, v)?,
            "sim.initial" => self.initial = parsed(key, v)?,
            "sim.stride" => self.stride = num(key, v)?,
            "sim.field_points" => self.field_points = num(key, v)?,
            "grid.points" => self.kernel_points = num(key, v)?,
            "output.dir" => self.out_dir = PathBuf::from(v),
            "output.format" => self.format = parsed(key, v)?,
            "verify.samples" => self.verify_samples = num(key, v)?,
            "verify.max_mode" => self.verify_max_mode = num(key, v)?,
            "verify.seed" => self.verify_seed = num(key, v)?,
            _ => unreachable!("key list checked by caller"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.params()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.profile()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(value_err("sim.dt", "must be > 0"));
        }
        if let Horizon::Fixed(t) = self.horizon {
            if !(t > 0.0 && t.is_finite()) {
                return Err(value_err("sim.T", "must be > 0 or `auto`"));
            }
        }
        if !(self.c_mode > 0.0 && self.c_mode.is_finite()) {
            return Err(value_err("sim.c_mode", "must be > 0"));
        }
        if self.stride == 0 {
            return Err(value_err("sim.stride", "must be >= 1"));
        }
        if self.field_points < 2 || self.kernel_points < 2 {
            return Err(ConfigError::Invalid("grids need at least 2 points".into()));
        }
        if self.verify_max_mode == 0 || self.verify_samples == 0 {
            return Err(ConfigError::Invalid(
                "verify.samples and verify.max_mode must be >= 1".into(),
            ));
        }
        Ok(())
    }

    pub fn params(&self) -> crate::Result<BeamParams> {
        BeamParams::new(self.alpha, self.beta, self.r_weight)
    }

    pub fn profile(&self) -> WeightProfile {
        WeightProfile {
            amplitude: self.amplitude,
            decay: self.decay,
            order: self.order,
            mask: self.mask.clone(),
            base: self.base,
        }
    }

    /// Every key with its effective value, in the input format.
    pub fn to_text(&self) -> String {
        let mask = match &self.mask {
            None => "all".to_string(),
            Some(m) => m.iter().map(u32::to_string).collect::<Vec<_>>().join(","),
        };
        let horizon = match self.horizon {
            Horizon::Auto => "auto".to_string(),
            Horizon::Fixed(t) => format!("{t:?}"),
        };
        let lines = [
            ("beam.alpha", format!("{:?}", self.alpha)),
            ("beam.beta", format!("{:?}", self.beta)),
            ("beam.R", format!("{:?}", self.r_weight)),
            ("weights.q", format!("{:?}", self.amplitude)),
            ("weights.r", format!("{:?}", self.decay)),
            ("weights.N", self.order.to_string()),
            ("weights.mask", mask),
            (
                "weights.base",
                format!(
                    "{:?},{:?},{:?}",
                    self.base.q11, self.base.q12, self.base.q22
                ),
            ),
            ("sim.mode", self.sim_mode.name().to_string()),
            ("sim.dt", format!("{:?}", self.dt)),
            ("sim.T", horizon),
            ("sim.input", self.input.name().to_string()),
            ("sim.sign", self.sign.name().to_string()),
            ("sim.c_mode", format!("{:?}", self.c_mode)),
            ("sim.initial", self.initial.to_string()),
            ("sim.stride", self.stride.to_string()),
            ("sim.field_points", self.field_points.to_string()),
            ("grid.points", self.kernel_points.to_string()),
            ("output.dir", self.out_dir.display().to_string()),
            ("output.format", self.format.to_string()),
            ("verify.samples", self.verify_samples.to_string()),
            ("verify.max_mode", self.verify_max_mode.to_string()),
            ("verify.seed", self.verify_seed.to_string()),
        ];
        let mut out = String::new();
        for (k, v) in lines {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_from_empty_text() {
        let cfg = RunConfig::parse("# nothing\n\n").unwrap();
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn parses_sections() {
        let cfg = RunConfig::parse(
            "beam.alpha = 0.5\nbeam.R=10\nweights.mask = 2, 3\nweights.base = 1,0.5,1\nsim.mode = coupled\nsim.T = auto\nsim.initial = single_mode:3\nsim.sign = derivative\n",
        )
        .unwrap();
        assert_eq!(cfg.alpha, 0.5);
        assert_eq!(cfg.r_weight, 10.0);
        assert_eq!(cfg.mask, Some([2, 3].into_iter().collect()));
        assert_eq!(cfg.base.q12, 0.5);
        assert_eq!(cfg.sim_mode, SimMode::Coupled);
        assert_eq!(cfg.horizon, Horizon::Auto);
        assert_eq!(cfg.initial, InitialSpec::SingleMode(3));
        assert_eq!(cfg.sign, SignConvention::Derivative);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            RunConfig::parse("beam.gamma = 1"),
            Err(ConfigError::UnknownKey { .. })
        ));
        assert!(matches!(
            RunConfig::parse("beam.alpha"),
            Err(ConfigError::Syntax { .. })
        ));
        assert!(matches!(
            RunConfig::parse("beam.alpha = 1\nbeam.alpha = 2"),
            Err(ConfigError::Duplicate { .. })
        ));
        assert!(matches!(
            RunConfig::parse("beam.alpha = -1"),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(
            RunConfig::parse("beam.R = x"),
            Err(ConfigError::Value { .. })
        ));
        assert!(matches!(
            RunConfig::parse("weights.mask = 40"),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(
            RunConfig::parse("sim.mode = fast"),
            Err(ConfigError::Value { .. })
        ));
    }

    #[test]
    fn echo_round_trip() {
        let cfg = RunConfig::parse(
            "beam.alpha = 0.1\nweights.r = 1.5\nweights.mask = 1,4\nsim.T = 2.5\nsim.initial = samples:/tmp/x.csv\noutput.format = long\n",
        )
        .unwrap();
        let back = RunConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(cfg, back);
    }
}
