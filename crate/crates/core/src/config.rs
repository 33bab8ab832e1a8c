//! Experiment configuration: one JSON document per run.
//!
//! Precedence, highest first: command-line flags, config file fields,
//! built-in defaults. The positional command overrides `command` in the file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::belief::FiniteBelief;
use crate::envelopes::DEFAULT_RESOLUTION;
use crate::error::{Error, Result};
use crate::games::{BookieParams, CrowdfundParams, ElectionParams, FiniteGame, QuadraticCsParams};

/// Seed used when neither the config nor `--seed` provides one.
pub const DEFAULT_SEED: u64 = 20_240_917;

/// Trials used when neither the config nor `--trials` provides a count.
pub const DEFAULT_TRIALS: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Attainable,
    Values,
    Figure,
    Simulate,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Attainable => "attainable",
            Command::Values => "values",
            Command::Figure => "figure",
            Command::Simulate => "simulate",
            Command::Verify => "verify",
        }
    }
}

fn default_election_n() -> usize {
    100
}

fn default_bookie_n() -> usize {
    10
}

fn default_bookie_n0() -> usize {
    1
}

/// Game section: a single key naming the game. Parameter objects default
/// field by field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GameConfig {
    Election {
        #[serde(default)]
        params: ElectionParams,
        #[serde(default = "default_election_n")]
        n: usize,
    },
    Bookie {
        #[serde(default)]
        params: BookieParams,
        #[serde(default = "default_bookie_n")]
        n: usize,
        #[serde(default = "default_bookie_n0")]
        n0: usize,
    },
    Crowdfund {
        #[serde(default)]
        params: CrowdfundParams,
    },
    QuadraticCs {
        #[serde(default)]
        params: QuadraticCsParams,
    },
    Finite {
        game: FiniteGame,
        n: usize,
        n0: usize,
    },
}

impl GameConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            GameConfig::Election { .. } => "election",
            GameConfig::Bookie { .. } => "bookie",
            GameConfig::Crowdfund { .. } => "crowdfund",
            GameConfig::QuadraticCs { .. } => "quadratic_cs",
            GameConfig::Finite { .. } => "finite",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedPrior {
    /// Uniform density on `[0, 1]`.
    Uniform,
}

/// A prior: a number `p` for the binary belief `(p, 1−p)`, a probability
/// vector, or `"uniform"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PriorConfig {
    Binary(f64),
    Finite(Vec<f64>),
    Named(NamedPrior),
}

impl PriorConfig {
    /// The finite belief, or `None` for a continuous prior.
    pub fn finite(&self) -> Result<Option<FiniteBelief>> {
        match self {
            PriorConfig::Binary(p) => FiniteBelief::binary(*p).map(Some),
            PriorConfig::Finite(v) => FiniteBelief::new(v.clone()).map(Some),
            PriorConfig::Named(NamedPrior::Uniform) => Ok(None),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub game: Option<GameConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<PriorConfig>,
    /// Pivotal fraction for `attainable`, `values` and `figure`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma0: Option<f64>,
    /// Pivotal fractions of the `figure` bundle; `[gamma0]` when absent.
    /// `--gamma0` clears this list.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gammas: Option<Vec<f64>>,
    /// Posterior targeted with the persuasive message.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<PriorConfig>,
    /// Belief held after an off-path message; defaults to the prior.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offpath: Option<Vec<f64>>,
    /// Crowdfunding trials cycle through the midpoints of this many cells.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_grid: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
}

/// Values given on the command line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub command: Option<Command>,
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub resolution: Option<usize>,
    pub gamma0: Option<f64>,
}

impl ExperimentConfig {
    /// Parses a config document; syntax and schema errors carry line and
    /// column.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn apply(mut self, o: Overrides) -> Self {
        self.command = o.command.or(self.command);
        self.output = o.output.or(self.output);
        self.seed = o.seed.or(self.seed);
        self.trials = o.trials.or(self.trials);
        self.resolution = o.resolution.or(self.resolution);
        if o.gamma0.is_some() {
            self.gamma0 = o.gamma0;
            self.gammas = None;
        }
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn trials(&self) -> u64 {
        self.trials.unwrap_or(DEFAULT_TRIALS)
    }

    pub fn resolution(&self) -> usize {
        self.resolution.unwrap_or(DEFAULT_RESOLUTION)
    }

    /// Checks that the fields the command needs are present.
    pub fn validate(&self) -> Result<Command> {
        let command = self
            .command
            .ok_or_else(|| Error::Config("missing field `command`".into()))?;
        let need = |present: bool, field: &str| {
            if present {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "command `{}` requires field `{field}`",
                    command.name()
                )))
            }
        };
        match command {
            Command::Attainable => {
                need(self.prior.is_some(), "prior")?;
                need(self.gamma0.is_some(), "gamma0")?;
            }
            Command::Values | Command::Figure | Command::Simulate | Command::Verify => {
                need(self.game.is_some(), "game")?;
            }
        }
        if self.resolution == Some(0) {
            return Err(Error::Config("`resolution` must be positive".into()));
        }
        if self.trials == Some(0) {
            return Err(Error::Config("`trials` must be positive".into()));
        }
        Ok(command)
    }
}
