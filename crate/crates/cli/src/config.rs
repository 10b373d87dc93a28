//! Run configuration: defaults, the flat `key = value` file format, and validation.
//!
//! ```text
//! # comment
//! command = dos
//! dims = [16]
//! gamma = 1e-3
//! E = 1.1
//! delta_grid = [0.05, 0.1, 0.2]
//! ```
//!
//! Lists accept `[a, b]` or `a,b`. Flags given on the command line override
//! values read from the file.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Spectrum,
    Multiscale,
    Follow,
    Dos,
    Spacing,
    Correlator,
    Percolation,
    ProbeDet,
    ProbeDisc,
    Certify,
}

impl Command {
    pub const ALL: [Command; 10] = [
        Command::Spectrum,
        Command::Multiscale,
        Command::Follow,
        Command::Dos,
        Command::Spacing,
        Command::Correlator,
        Command::Percolation,
        Command::ProbeDet,
        Command::ProbeDisc,
        Command::Certify,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Multiscale => "multiscale",
            Command::Follow => "follow",
            Command::Dos => "dos",
            Command::Spacing => "spacing",
            Command::Correlator => "correlator",
            Command::Percolation => "percolation",
            Command::ProbeDet => "probe-det",
            Command::ProbeDisc => "probe-disc",
            Command::Certify => "certify",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Command::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| format!("unknown command `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub dims: Vec<usize>,
    pub gamma: f64,
    pub phi: f64,
    #[serde(rename = "E")]
    pub energy: f64,
    pub delta: f64,
    pub delta_grid: Vec<f64>,
    pub k_max: usize,
    pub samples: u64,
    pub seed: u64,
    /// Disorder trial used by single-instance commands.
    pub trial: u64,
    pub out: PathBuf,
    /// Explicit disorder values, overriding sampling.
    pub u: Option<Vec<f64>>,
    /// Disorder JSON document, overriding sampling.
    pub disorder: Option<PathBuf>,
    pub x: Option<Vec<i64>>,
    pub y: Option<Vec<i64>>,
    pub z: Option<Vec<i64>>,
    pub block_n: usize,
    pub residual_tol: f64,
    /// Scale for `percolation`.
    pub k: usize,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            dims: vec![16],
            gamma: 1e-3,
            phi: 0.25,
            energy: 1.1,
            delta: 0.1,
            delta_grid: vec![0.01, 0.05, 0.1, 0.3],
            k_max: 20,
            samples: 1000,
            seed: 42,
            trial: 0,
            out: PathBuf::from("out"),
            u: None,
            disorder: None,
            x: None,
            y: None,
            z: None,
            block_n: 1,
            residual_tol: 1e-8,
            k: 1,
        }
    }

    /// Set one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let v = value.trim();
        match key {
            "command" => self.command = v.parse()?,
            "dims" => self.dims = parse_list(v)?,
            "gamma" => self.gamma = parse(v)?,
            "phi" => self.phi = parse(v)?,
            "E" => self.energy = parse(v)?,
            "delta" => self.delta = parse(v)?,
            "delta_grid" | "delta-grid" => self.delta_grid = parse_list(v)?,
            "k_max" | "k-max" => self.k_max = parse(v)?,
            "samples" => self.samples = parse(v)?,
            "seed" => self.seed = parse(v)?,
            "trial" => self.trial = parse(v)?,
            "out" => self.out = PathBuf::from(v),
            "u" => self.u = Some(parse_list(v)?),
            "disorder" => self.disorder = Some(PathBuf::from(v)),
            "x" => self.x = Some(parse_list(v)?),
            "y" => self.y = Some(parse_list(v)?),
            "z" => self.z = Some(parse_list(v)?),
            "block_n" | "block-n" => self.block_n = parse(v)?,
            "residual_tol" | "residual-tol" => self.residual_tol = parse(v)?,
            "k" => self.k = parse(v)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let range = |name: &str, reason: String| Err(CliError::Usage(format!("{name}: {reason}")));
        if self.dims.is_empty() || self.dims.contains(&0) {
            return range("dims", format!("every side must be positive, got {:?}", self.dims));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return range("gamma", format!("must be finite and >= 0, got {}", self.gamma));
        }
        if !(self.phi.is_finite() && self.phi > 0.0) {
            return range("phi", format!("must be > 0, got {}", self.phi));
        }
        if !self.energy.is_finite() {
            return range("E", "must be finite".into());
        }
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return range("delta", format!("must be > 0, got {}", self.delta));
        }
        if self.delta_grid.is_empty()
            || self.delta_grid.iter().any(|d| !(d.is_finite() && *d >= 0.0))
            || self.delta_grid.windows(2).any(|w| w[1] <= w[0])
        {
            return range("delta_grid", "must be nonempty, nonnegative and strictly ascending".into());
        }
        if self.k_max == 0 || self.k == 0 {
            return range("k_max/k", "scales start at 1".into());
        }
        if self.samples == 0 {
            return range("samples", "must be >= 1".into());
        }
        if !(1..=3).contains(&self.block_n) {
            return range("block_n", format!("must be in 1..=3, got {}", self.block_n));
        }
        if !(self.residual_tol > 0.0) {
            return range("residual_tol", "must be > 0".into());
        }
        if let Some(u) = &self.u {
            let n: usize = self.dims.iter().product();
            if u.len() != n || u.iter().any(|v| !v.is_finite()) {
                return range("u", format!("needs {n} finite values, got {}", u.len()));
            }
        }
        for (name, pos) in [("x", &self.x), ("y", &self.y), ("z", &self.z)] {
            if let Some(p) = pos {
                let inside = p.len() == self.dims.len() && p.iter().zip(&self.dims).all(|(&c, &d)| c >= 0 && (c as usize) < d);
                if !inside {
                    return range(name, format!("{p:?} is not a position of lattice {:?}", self.dims));
                }
            }
        }
        Ok(())
    }
}

fn parse<T: FromStr>(v: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    v.parse::<T>().map_err(|e| format!("cannot parse `{v}`: {e}"))
}

fn parse_list<T: FromStr>(v: &str) -> Result<Vec<T>, String>
where
    T::Err: fmt::Display,
{
    let inner = v.trim().trim_start_matches('[').trim_end_matches(']');
    if inner.trim().is_empty() {
        return Ok(Vec::new());
    }
    inner.split(',').map(|s| parse(s.trim())).collect()
}

/// Apply a flat config document on top of `base`.
pub fn apply_config_text(base: &mut RunConfig, text: &str, origin: &str) -> Result<(), CliError> {
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("{origin}:{}: expected `key = value`", i + 1)))?;
        base.set(key.trim(), value).map_err(|e| CliError::Usage(format!("{origin}:{}: {e}", i + 1)))?;
    }
    Ok(())
}

/// Read a config file. The `command` key is required.
pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let command_line = text
        .lines()
        .enumerate()
        .find_map(|(i, l)| {
            let l = l.split('#').next().unwrap_or("").trim();
            l.split_once('=').filter(|(k, _)| k.trim() == "command").map(|(_, v)| (i, v.trim().to_string()))
        })
        .ok_or_else(|| CliError::Usage(format!("{}: missing `command`", path.display())))?;
    let command = command_line
        .1
        .parse()
        .map_err(|e| CliError::Usage(format!("{}:{}: {e}", path.display(), command_line.0 + 1)))?;
    let mut cfg = RunConfig::new(command);
    apply_config_text(&mut cfg, &text, &path.display().to_string())?;
    cfg.validate()?;
    Ok(cfg)
}
