//! Flat `key = value` experiment configuration.
//!
//! Lines are `key = value`; `#` starts a comment; list values are comma separated.
//! Recognised keys:
//!
//! | key | meaning |
//! |-----|---------|
//! | `variety` | catalogue name (`cusp` for the curve solvers) |
//! | `eps` | list of regularization parameters |
//! | `h` | list of mesh widths |
//! | `scheme` | `implicit` or `explicit` |
//! | `mu` | reaction coefficient |
//! | `t_final` | list of final times |
//! | `theta_samples` | size of the uniform theta lattice |
//! | `alpha_samples` | size of the alpha lattice (surface demo) |
//! | `band_radius` | band seed radius in units of `h` |
//! | `cp_samples` | sample count for `cp-check` |
//! | `exclude_first` | largest-eps points left out of the eps-study fit |
//! | `tail_tol` | Fourier truncation tolerance |
//! | `seed` | RNG seed for randomized sampling |
//! | `output` | output directory |

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use cuspcpm::cpm::Scheme;
use cuspcpm::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Converge,
    EpsStudy,
    CpCheck,
    Solve,
    SurfaceDemo,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Converge => "converge",
            Command::EpsStudy => "eps-study",
            Command::CpCheck => "cp-check",
            Command::Solve => "solve",
            Command::SurfaceDemo => "surface-demo",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub variety: String,
    pub eps: Vec<f64>,
    pub h: Vec<f64>,
    pub scheme: Scheme,
    pub mu: f64,
    pub t_final: Vec<f64>,
    pub theta_samples: usize,
    pub alpha_samples: usize,
    pub band_radius: f64,
    pub cp_samples: usize,
    pub exclude_first: usize,
    pub tail_tol: f64,
    pub seed: u64,
    pub output: PathBuf,
}

impl ExperimentConfig {
    /// Defaults reproducing the reference experiment of each command.
    pub fn defaults(cmd: Command) -> Self {
        let base = Self {
            variety: "cusp".into(),
            eps: vec![0.5],
            h: vec![0.1],
            scheme: Scheme::Implicit,
            mu: 1.0,
            t_final: vec![0.1],
            theta_samples: 2048,
            alpha_samples: 32,
            band_radius: 2.0,
            cp_samples: 128,
            exclude_first: 6,
            tail_tol: 1e-14,
            seed: 0,
            output: PathBuf::from("out").join(cmd.name()),
        };
        match cmd {
            Command::Converge => Self { eps: vec![0.5, 0.05], h: vec![0.1, 0.05, 0.025, 0.0125], ..base },
            Command::EpsStudy => Self {
                eps: (1..=14).map(|j| 2f64.powi(-j)).collect(),
                t_final: vec![0.1, 0.01, 0.001, 0.0001],
                ..base
            },
            Command::CpCheck | Command::Solve => base,
            Command::SurfaceDemo => Self {
                variety: "revolution".into(),
                h: vec![0.075],
                scheme: Scheme::Explicit,
                t_final: vec![0.001],
                theta_samples: 64,
                band_radius: 3.0,
                ..base
            },
        }
    }

    /// Defaults, then the file at `path` (if any), then `overrides` of the form `key=value`.
    pub fn load(cmd: Command, path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut cfg = Self::defaults(cmd);
        if let Some(p) = path {
            cfg.apply_text(&std::fs::read_to_string(p)?)?;
        }
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("override `{o}` is not of the form key=value")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected `key = value`, got `{line}`", n + 1)))?;
            self.set(k.trim(), v.trim()).map_err(|e| Error::Parse(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "variety" => self.variety = value.to_string(),
            "eps" => self.eps = parse_list(key, value)?,
            "h" => self.h = parse_list(key, value)?,
            "scheme" => self.scheme = value.parse()?,
            "mu" => self.mu = parse_one(key, value)?,
            "t_final" => self.t_final = parse_list(key, value)?,
            "theta_samples" => self.theta_samples = parse_one(key, value)?,
            "alpha_samples" => self.alpha_samples = parse_one(key, value)?,
            "band_radius" => self.band_radius = parse_one(key, value)?,
            "cp_samples" => self.cp_samples = parse_one(key, value)?,
            "exclude_first" => self.exclude_first = parse_one(key, value)?,
            "tail_tol" => self.tail_tol = parse_one(key, value)?,
            "seed" => self.seed = parse_one(key, value)?,
            "output" => self.output = PathBuf::from(value),
            _ => return Err(Error::Parse(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        for (name, list) in [("eps", &self.eps), ("h", &self.h), ("t_final", &self.t_final)] {
            if list.is_empty() {
                return Err(Error::Config(format!("`{name}` must not be empty")));
            }
        }
        if self.h.iter().any(|&h| !(h > 0.0)) {
            return Err(Error::Config("mesh widths must be positive".into()));
        }
        if self.eps.iter().any(|&e| !(e >= 0.0)) || self.t_final.iter().any(|&t| !(t >= 0.0)) {
            return Err(Error::Config("eps and t_final must be non-negative".into()));
        }
        if self.theta_samples == 0 || self.alpha_samples == 0 || self.cp_samples == 0 {
            return Err(Error::Config("sample counts must be positive".into()));
        }
        if !(self.band_radius > 0.0) {
            return Err(Error::Config("band_radius must be positive".into()));
        }
        Ok(())
    }
}

impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(", ");
        writeln!(f, "variety = {}", self.variety)?;
        writeln!(f, "eps = {}", list(&self.eps))?;
        writeln!(f, "h = {}", list(&self.h))?;
        writeln!(f, "scheme = {}", self.scheme.name())?;
        writeln!(f, "mu = {:e}", self.mu)?;
        writeln!(f, "t_final = {}", list(&self.t_final))?;
        writeln!(f, "theta_samples = {}", self.theta_samples)?;
        writeln!(f, "alpha_samples = {}", self.alpha_samples)?;
        writeln!(f, "band_radius = {:e}", self.band_radius)?;
        writeln!(f, "cp_samples = {}", self.cp_samples)?;
        writeln!(f, "exclude_first = {}", self.exclude_first)?;
        writeln!(f, "tail_tol = {:e}", self.tail_tol)?;
        writeln!(f, "seed = {}", self.seed)?;
        writeln!(f, "output = {}", self.output.display())
    }
}

fn parse_one<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Parse(format!("bad value `{value}` for `{key}`")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value.split(',').map(|s| parse_one(key, s.trim())).collect()
}
