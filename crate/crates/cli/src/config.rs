//! TOML run configuration.
//!
//! Every key is optional and kebab-case; unknown keys are rejected. Command-line
//! flags are merged on top, so a flag always wins over the file.
//!
//! ```toml
//! command = "phase-diagram"
//! c = [1.0]
//! gamma = "0.01:4:200"
//! eta = [0.5, 1, 2]
//! output-dir = "runs/k1"
//! format = "csv"
//! ```

use crate::error::CliError;
use crate::range::parse_values;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// A parameter given as a number, an array, or a range string `a:b:n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Values {
    One(f64),
    Many(Vec<f64>),
    Text(String),
}

impl Values {
    pub fn resolve(&self) -> Result<Vec<f64>, CliError> {
        let v = match self {
            Values::One(x) => vec![*x],
            Values::Many(v) => v.clone(),
            Values::Text(s) => parse_values(s)?,
        };
        if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
            return Err(CliError::Config(format!("bad value list {self:?}")));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Reverse,
    Forward,
    #[default]
    Both,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Params {
    pub command: Option<String>,
    pub k: Option<usize>,
    pub c: Option<Values>,
    pub gamma: Option<Values>,
    pub eta: Option<Values>,
    pub nu: Option<f64>,
    pub omega: Option<Values>,
    pub s0: Option<Values>,
    pub t_max: Option<f64>,
    pub dt: Option<f64>,
    pub n: Option<usize>,
    pub seeds: Option<usize>,
    pub seed: Option<u64>,
    pub record_every: Option<usize>,
    pub eig_every: Option<usize>,
    pub beta: Option<bool>,
    pub direction: Option<Direction>,
    pub only: Option<Values>,
    pub output_dir: Option<PathBuf>,
    pub format: Option<Format>,
}

macro_rules! overlay {
    ($base:expr, $top:expr, $($f:ident),*) => {
        Params { $($f: $top.$f.or($base.$f)),* }
    };
}

impl Params {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Parses TOML; errors carry the line, column and offending key.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string().trim_end().to_string()))
    }

    /// Field-wise merge in which `top` wins.
    pub fn overlay(self, top: Params) -> Params {
        overlay!(
            self, top, command, k, c, gamma, eta, nu, omega, s0, t_max, dt, n, seeds, seed,
            record_every, eig_every, beta, direction, only, output_dir, format
        )
    }
}
