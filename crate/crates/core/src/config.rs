//! Run configuration: defaults, an optional `key = value` file, and
//! command-line overrides, merged in that order.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "INDUCING_ENTROPY_OUT";

/// Every tunable, all optional. Used both for the config file and for the
/// flag layer so the two merge field by field.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
    pub alpha0: Option<f64>,
    pub alpha1: Option<f64>,
    pub p0: Option<f64>,
    pub lambda: Option<f64>,
    pub n_max: Option<u64>,
    pub n_max_list: Option<Vec<u64>>,
    pub n_orbits: Option<usize>,
    pub n_iters: Option<usize>,
    pub burn_in: Option<usize>,
    pub bins: Option<usize>,
    pub block_n: Option<usize>,
    pub n_pairs: Option<usize>,
    pub seed: Option<u64>,
    pub implicit_tol: Option<f64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
}

impl Overrides {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidParameter(format!("config file: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidParameter(format!("config file {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Field-wise `self` if set, else `base`.
    pub fn or(self, base: Overrides) -> Overrides {
        Overrides {
            alpha: self.alpha.or(base.alpha),
            gamma: self.gamma.or(base.gamma),
            alpha0: self.alpha0.or(base.alpha0),
            alpha1: self.alpha1.or(base.alpha1),
            p0: self.p0.or(base.p0),
            lambda: self.lambda.or(base.lambda),
            n_max: self.n_max.or(base.n_max),
            n_max_list: self.n_max_list.or(base.n_max_list),
            n_orbits: self.n_orbits.or(base.n_orbits),
            n_iters: self.n_iters.or(base.n_iters),
            burn_in: self.burn_in.or(base.burn_in),
            bins: self.bins.or(base.bins),
            block_n: self.block_n.or(base.block_n),
            n_pairs: self.n_pairs.or(base.n_pairs),
            seed: self.seed.or(base.seed),
            implicit_tol: self.implicit_tol.or(base.implicit_tol),
            threads: self.threads.or(base.threads),
            out: self.out.or(base.out),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Verify,
    Counterexample,
    Skew,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MapName {
    Doubling,
    Lorenz,
    Lsv,
    Singular,
    Skewprod,
}

impl MapName {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "doubling" => Ok(MapName::Doubling),
            "lorenz" => Ok(MapName::Lorenz),
            "lsv" => Ok(MapName::Lsv),
            "singular" => Ok(MapName::Singular),
            "skewprod" => Ok(MapName::Skewprod),
            other => Err(Error::InvalidParameter(format!("unknown map '{other}'"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MapName::Doubling => "doubling",
            MapName::Lorenz => "lorenz",
            MapName::Lsv => "lsv",
            MapName::Singular => "singular",
            MapName::Skewprod => "skewprod",
        }
    }
}

/// Fully resolved configuration, embedded in every report. Parameters the
/// command does not read stay `None` and are not serialized; the thread
/// count and output directory never change results and are left out.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map: Option<MapName>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_max: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_max_list: Option<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_orbits: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_iters: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub block_n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_pairs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub implicit_tol: Option<f64>,
    #[serde(skip)]
    pub threads: Option<usize>,
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

pub const DEFAULT_N_MAX_LIST: [u64; 4] = [1_000, 10_000, 100_000, 1_000_000];

impl RunConfig {
    /// Resolves `layer` (flags over file) against the per-command defaults.
    /// `env_out` is the value of [`OUT_DIR_ENV`], consulted last.
    pub fn resolve(command: Command, map: Option<MapName>, layer: Overrides, env_out: Option<PathBuf>) -> Self {
        let o = layer;
        let mut c = RunConfig {
            command,
            map,
            alpha: None,
            gamma: None,
            alpha0: None,
            alpha1: None,
            p0: None,
            lambda: None,
            n_max: None,
            n_max_list: None,
            n_orbits: None,
            n_iters: None,
            burn_in: None,
            bins: None,
            block_n: None,
            n_pairs: None,
            seed: None,
            implicit_tol: None,
            threads: o.threads,
            out: o.out.or(env_out),
        };
        if command != Command::Counterexample {
            c.n_orbits = Some(o.n_orbits.unwrap_or(64));
            c.n_iters = Some(o.n_iters.unwrap_or(1_000_000));
            c.burn_in = Some(o.burn_in.unwrap_or(if command == Command::Skew { 1_000 } else { 10_000 }));
            c.seed = Some(o.seed.unwrap_or(1));
        }
        if command == Command::Verify {
            c.bins = Some(o.bins.unwrap_or(4096));
            c.block_n = Some(o.block_n.unwrap_or(12));
        }
        match (command, map) {
            (Command::Verify, Some(MapName::Lorenz)) => c.alpha = Some(o.alpha.unwrap_or(0.25)),
            (Command::Verify, Some(MapName::Lsv)) => {
                c.alpha = Some(o.alpha.unwrap_or(0.5));
                c.n_max = Some(o.n_max.unwrap_or(400));
            }
            (Command::Verify, Some(MapName::Singular)) => {
                c.gamma = Some(o.gamma.unwrap_or(2.0));
                c.implicit_tol = Some(o.implicit_tol.unwrap_or(crate::maps1d::DEFAULT_IMPLICIT_TOL));
            }
            (Command::Verify, Some(MapName::Skewprod)) => {
                c.alpha0 = Some(o.alpha0.unwrap_or(0.3));
                c.alpha1 = Some(o.alpha1.unwrap_or(0.8));
                c.p0 = Some(o.p0.unwrap_or(0.5));
            }
            (Command::Counterexample, _) => {
                c.n_max_list = Some(o.n_max_list.unwrap_or_else(|| DEFAULT_N_MAX_LIST.to_vec()));
            }
            (Command::Skew, _) => {
                c.lambda = Some(o.lambda.unwrap_or(0.5));
                c.n_max = Some(o.n_max.unwrap_or(100_000));
                c.n_pairs = Some(o.n_pairs.unwrap_or(1_000_000));
            }
            _ => {}
        }
        c
    }
}
