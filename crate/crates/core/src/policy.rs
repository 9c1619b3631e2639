//! Schedulers behind one decision contract.
//!
//! A policy looks at the network, the learner's state and the probed channel
//! state of the current slot, and returns a feasible schedule. Policies never
//! mutate the learning state; the simulation engine owns updates.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::env::{ChannelState, RngStream};
use crate::error::{Error, Result};
use crate::net::{
    max_weight_schedule, max_weight_schedule_random_ties, FeasibleSet, NetworkConfig, Schedule,
};
use crate::state::LearningState;

/// Which scheduler to run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PolicySpec {
    /// Max-weight on `age + eta * ucb`.
    Laes { eta: f64 },
    /// Max-weight on the UCB estimates alone.
    #[serde(rename = "ucb")]
    UcbOnly,
    /// Max-weight on ages alone (`Laes` with `eta = 0`).
    AgeBased,
    /// Max-weight on the true mean rewards.
    Genie,
    /// Serves links in turn; single-link schedules only.
    RoundRobin,
}

impl PolicySpec {
    pub fn laes(eta: f64) -> Self {
        PolicySpec::Laes { eta }
    }

    /// Short file-name friendly identifier, e.g. `laes-eta50`.
    pub fn label(&self) -> String {
        match self {
            PolicySpec::Laes { eta } => format!("laes-eta{eta}"),
            PolicySpec::UcbOnly => "ucb".into(),
            PolicySpec::AgeBased => "age-based".into(),
            PolicySpec::Genie => "genie".into(),
            PolicySpec::RoundRobin => "round-robin".into(),
        }
    }

    /// The age/UCB trade-off parameter, when the policy has one.
    pub fn eta(&self) -> Option<f64> {
        match self {
            PolicySpec::Laes { eta } => Some(*eta),
            PolicySpec::AgeBased => Some(0.0),
            _ => None,
        }
    }

    pub fn validate(&self, config: &NetworkConfig) -> Result<()> {
        match self {
            PolicySpec::Laes { eta } if !(eta.is_finite() && *eta >= 0.0) => Err(Error::Config(
                format!("eta must be finite and nonnegative, got {eta}"),
            )),
            PolicySpec::RoundRobin if config.feasible() != &FeasibleSet::AtMostK(1) => Err(
                Error::UnsupportedPolicy("round-robin requires an at-most-1 feasible set".into()),
            ),
            _ => Ok(()),
        }
    }

    pub fn decide(
        &self,
        config: &NetworkConfig,
        state: &LearningState,
        channels: &ChannelState,
        ties: &mut TieBreaker,
    ) -> Result<Schedule> {
        let weights = match self {
            PolicySpec::Laes { eta } => laes_weights(state, *eta),
            PolicySpec::UcbOnly => state.ucb_estimates(),
            PolicySpec::AgeBased => age_weights(state),
            PolicySpec::Genie => config.mean_rewards(),
            PolicySpec::RoundRobin => return round_robin_decide(config, state, channels),
        };
        ties.solve(config, &weights, channels)
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicySpec::Laes { eta } => write!(f, "LAES (eta = {eta})"),
            PolicySpec::UcbOnly => f.write_str("UCB"),
            PolicySpec::AgeBased => f.write_str("age-based"),
            PolicySpec::Genie => f.write_str("genie"),
            PolicySpec::RoundRobin => f.write_str("round-robin"),
        }
    }
}

/// How ties among optimal schedules are resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreakMode {
    #[default]
    LowestIndex,
    Random,
}

impl TieBreakMode {
    pub fn name(self) -> &'static str {
        match self {
            TieBreakMode::LowestIndex => "lowest-index",
            TieBreakMode::Random => "random",
        }
    }
}

impl std::str::FromStr for TieBreakMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lowest-index" => Ok(Self::LowestIndex),
            "random" => Ok(Self::Random),
            other => Err(format!(
                "unknown tie-break mode `{other}` (expected lowest-index or random)"
            )),
        }
    }
}

/// Tie resolution state handed to the solver.
#[derive(Debug, Clone)]
pub enum TieBreaker {
    LowestIndex,
    Random(RngStream),
}

impl TieBreaker {
    pub fn solve(
        &mut self,
        config: &NetworkConfig,
        weights: &[f64],
        channels: &ChannelState,
    ) -> Result<Schedule> {
        match self {
            TieBreaker::LowestIndex => max_weight_schedule(config, weights, channels.as_slice()),
            TieBreaker::Random(rng) => {
                max_weight_schedule_random_ties(config, weights, channels.as_slice(), rng)
            }
        }
    }
}

/// `Z_n(t) + eta * w_n(t)` for every link.
pub fn laes_weights(state: &LearningState, eta: f64) -> Vec<f64> {
    state
        .ages()
        .zip(state.ucb_estimates())
        .map(|(age, w)| age as f64 + eta * w)
        .collect()
}

fn age_weights(state: &LearningState) -> Vec<f64> {
    state.ages().map(|a| a as f64).collect()
}

pub fn laes_decide(
    config: &NetworkConfig,
    state: &LearningState,
    channels: &ChannelState,
    eta: f64,
) -> Result<Schedule> {
    let spec = PolicySpec::laes(eta);
    spec.validate(config)?;
    spec.decide(config, state, channels, &mut TieBreaker::LowestIndex)
}

pub fn ucb_only_decide(
    config: &NetworkConfig,
    state: &LearningState,
    channels: &ChannelState,
) -> Result<Schedule> {
    max_weight_schedule(config, &state.ucb_estimates(), channels.as_slice())
}

pub fn age_based_decide(
    config: &NetworkConfig,
    state: &LearningState,
    channels: &ChannelState,
) -> Result<Schedule> {
    max_weight_schedule(config, &age_weights(state), channels.as_slice())
}

/// Best schedule for the realized channels when the mean rewards are known.
pub fn genie_decide(config: &NetworkConfig, channels: &ChannelState) -> Result<Schedule> {
    max_weight_schedule(config, &config.mean_rewards(), channels.as_slice())
}

/// Serves link `t mod N`, or the next ON link after it in cyclic order.
pub fn round_robin_decide(
    config: &NetworkConfig,
    state: &LearningState,
    channels: &ChannelState,
) -> Result<Schedule> {
    PolicySpec::RoundRobin.validate(config)?;
    let n = config.num_links();
    if channels.len() != n {
        return Err(Error::LengthMismatch {
            what: "channel state",
            expected: n,
            got: channels.len(),
        });
    }
    let head = (state.slot() % n as u64) as usize;
    Ok((0..n)
        .map(|i| (head + i) % n)
        .find(|&l| channels.is_on(l))
        .map(Schedule::single)
        .unwrap_or_default())
}
