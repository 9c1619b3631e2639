//! Experiment configuration files.
//!
//! A configuration is a TOML document:
//!
//! ```toml
//! seed = 1
//! horizon = 30000
//! replications = 100
//! # stride = 10                   # optional; default 1 (100 above 10^5 slots)
//! # reward_model = "bernoulli"    # bernoulli | uniform | pointmass
//! # tie_break = "lowest-index"    # lowest-index | random
//! # delivery_ratio = "delivered"  # delivered | scheduled
//!
//! [network]
//! mean_rewards = [0.9, 0.8, 0.5, 0.7, 0.2]
//! # channel_on_probs = [...]      # optional; default: every channel always ON
//! feasible = { at_most = 1 }      # or { schedules = [[1], [2, 3]] }, links numbered from 1
//!
//! [[policy]]
//! kind = "ucb"
//!
//! [[policy]]
//! kind = "laes"
//! eta = 10.0
//! ```
//!
//! Validation errors point at the line of the offending entry. The digest of
//! a configuration is the SHA-256 of its canonical serialization, which omits
//! the output directory.

use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use toml::Spanned;

use crate::engine::{DeliveryRatio, SimOptions};
use crate::env::RewardFamily;
use crate::net::{FeasibleSet, LinkParams, NetworkConfig, Schedule};
use crate::policy::{PolicySpec, TieBreakMode};

/// A configuration problem, with the 1-based line it was found on when known.
#[derive(Debug, Clone, PartialEq, Error)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl ConfigError {
    fn unanchored(message: impl Into<String>) -> Self {
        Self {
            line: None,
            message: message.into(),
        }
    }
}

/// Feasible-schedule constraint as written in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeasibleSpec {
    /// Any set of at most this many links.
    AtMost(usize),
    /// The listed schedules, links numbered from 1.
    Schedules(Vec<Vec<usize>>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkSpec {
    pub mean_rewards: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channel_on_probs: Option<Vec<f64>>,
    pub feasible: FeasibleSpec,
}

impl NetworkSpec {
    pub fn build(&self) -> crate::error::Result<NetworkConfig> {
        let n = self.mean_rewards.len();
        let probs = self
            .channel_on_probs
            .clone()
            .unwrap_or_else(|| vec![1.0; n]);
        let feasible = match &self.feasible {
            FeasibleSpec::AtMost(k) => FeasibleSet::AtMostK(*k),
            FeasibleSpec::Schedules(list) => {
                if list.iter().flatten().any(|&l| l == 0) {
                    return Err(crate::error::Error::Config(
                        "schedules number links from 1; found link 0".into(),
                    ));
                }
                FeasibleSet::ExplicitList(
                    list.iter()
                        .map(|s| Schedule::from_indices(s.iter().map(|l| l - 1)))
                        .collect(),
                )
            }
        };
        NetworkConfig::from_vectors(&self.mean_rewards, &probs, feasible)
    }

    pub fn from_network(config: &NetworkConfig) -> Self {
        let probs = config.on_probs();
        Self {
            mean_rewards: config.mean_rewards(),
            channel_on_probs: (!probs.iter().all(|&p| p == 1.0)).then_some(probs),
            feasible: match config.feasible() {
                FeasibleSet::AtMostK(k) => FeasibleSpec::AtMost(*k),
                FeasibleSet::ExplicitList(list) => FeasibleSpec::Schedules(
                    list.iter()
                        .map(|s| s.iter().map(|l| l + 1).collect())
                        .collect(),
                ),
            },
        }
    }
}

/// A validated experiment description.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub horizon: u64,
    pub replications: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stride: Option<u64>,
    pub reward_model: RewardFamily,
    pub tie_break: TieBreakMode,
    pub delivery_ratio: DeliveryRatio,
    /// Where tables are written; not part of the digest.
    #[serde(skip)]
    pub out_dir: Option<PathBuf>,
    pub network: NetworkSpec,
    #[serde(rename = "policy")]
    pub policies: Vec<PolicySpec>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Spanned<u64>,
    horizon: Spanned<u64>,
    replications: Spanned<u64>,
    #[serde(default)]
    stride: Option<Spanned<u64>>,
    #[serde(default)]
    reward_model: RewardFamily,
    #[serde(default)]
    tie_break: TieBreakMode,
    #[serde(default)]
    delivery_ratio: DeliveryRatio,
    #[serde(default)]
    out_dir: Option<PathBuf>,
    network: Spanned<RawNetwork>,
    #[serde(default)]
    policy: Vec<Spanned<PolicySpec>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNetwork {
    mean_rewards: Spanned<Vec<Spanned<f64>>>,
    #[serde(default)]
    channel_on_probs: Option<Spanned<Vec<Spanned<f64>>>>,
    feasible: Spanned<FeasibleSpec>,
}

struct Anchor<'a> {
    source: &'a str,
}

impl Anchor<'_> {
    fn line(&self, span: Range<usize>) -> usize {
        let end = span.start.min(self.source.len());
        self.source[..end].bytes().filter(|&b| b == b'\n').count() + 1
    }

    fn err<T>(&self, span: Range<usize>, message: impl Into<String>) -> Result<T, ConfigError> {
        Err(ConfigError {
            line: Some(self.line(span)),
            message: message.into(),
        })
    }
}

impl ExperimentConfig {
    /// Parses and validates a configuration document.
    pub fn from_toml_str(source: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(source).map_err(|e| ConfigError {
            line: e.span().map(|s| Anchor { source }.line(s)),
            message: e.message().trim().to_string(),
        })?;
        let at = Anchor { source };

        if *raw.horizon.get_ref() == 0 {
            return at.err(raw.horizon.span(), "horizon must be at least 1 slot");
        }
        if *raw.replications.get_ref() == 0 {
            return at.err(raw.replications.span(), "replications must be at least 1");
        }
        if let Some(stride) = &raw.stride {
            if *stride.get_ref() == 0 {
                return at.err(stride.span(), "stride must be at least 1");
            }
        }

        let net = raw.network.get_ref();
        let means = net.mean_rewards.get_ref();
        if means.is_empty() {
            return at.err(
                net.mean_rewards.span(),
                "mean_rewards must list at least one link",
            );
        }
        for (i, m) in means.iter().enumerate() {
            if !(0.0..=1.0).contains(m.get_ref()) {
                return at.err(
                    m.span(),
                    format!(
                        "mean reward of link {} is {}, expected a value in [0, 1]",
                        i + 1,
                        m.get_ref()
                    ),
                );
            }
        }
        if let Some(probs) = &net.channel_on_probs {
            if probs.get_ref().len() != means.len() {
                return at.err(
                    probs.span(),
                    format!(
                        "channel_on_probs has {} entries but mean_rewards has {}",
                        probs.get_ref().len(),
                        means.len()
                    ),
                );
            }
            for (i, p) in probs.get_ref().iter().enumerate() {
                let v = *p.get_ref();
                if !(v > 0.0 && v <= 1.0) {
                    return at.err(
                        p.span(),
                        format!(
                            "channel ON probability of link {} is {v}, expected a value in (0, 1]",
                            i + 1
                        ),
                    );
                }
            }
        }
        let n = means.len();
        match net.feasible.get_ref() {
            FeasibleSpec::AtMost(k) => {
                if *k == 0 || *k > n {
                    return at.err(
                        net.feasible.span(),
                        format!("at_most must be between 1 and the number of links ({n}), got {k}"),
                    );
                }
            }
            FeasibleSpec::Schedules(list) => {
                if list.is_empty() {
                    return at.err(
                        net.feasible.span(),
                        "schedules must list at least one schedule",
                    );
                }
                if let Some(bad) = list.iter().flatten().find(|&&l| l == 0 || l > n) {
                    return at.err(
                        net.feasible.span(),
                        format!("schedules name link {bad}, but links are numbered 1..={n}"),
                    );
                }
            }
        }

        let network_spec = NetworkSpec {
            mean_rewards: means.iter().map(|m| *m.get_ref()).collect(),
            channel_on_probs: net
                .channel_on_probs
                .as_ref()
                .map(|p| p.get_ref().iter().map(|x| *x.get_ref()).collect()),
            feasible: net.feasible.get_ref().clone(),
        };
        let network = network_spec.build().map_err(|e| ConfigError {
            line: Some(at.line(raw.network.span())),
            message: e.to_string(),
        })?;

        if raw.policy.is_empty() {
            return Err(ConfigError::unanchored(
                "at least one [[policy]] table is required",
            ));
        }
        for policy in &raw.policy {
            if let Err(e) = policy.get_ref().validate(&network) {
                return at.err(policy.span(), e.to_string());
            }
        }

        Ok(Self {
            seed: raw.seed.into_inner(),
            horizon: raw.horizon.into_inner(),
            replications: raw.replications.into_inner(),
            stride: raw.stride.map(Spanned::into_inner),
            reward_model: raw.reward_model,
            tie_break: raw.tie_break,
            delivery_ratio: raw.delivery_ratio,
            out_dir: raw.out_dir,
            network: network_spec,
            policies: raw.policy.into_iter().map(Spanned::into_inner).collect(),
        })
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let source = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::unanchored(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&source)
    }

    /// Re-runs validation, e.g. after command-line overrides.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let reparsed = Self::from_toml_str(&self.to_canonical_toml())?;
        debug_assert_eq!(reparsed.policies, self.policies);
        Ok(())
    }

    /// Canonical TOML form; this is what [`Self::digest`] hashes.
    pub fn to_canonical_toml(&self) -> String {
        toml::to_string(self).expect("experiment config is always representable as TOML")
    }

    /// `sha256:<hex>` of the canonical form.
    pub fn digest(&self) -> String {
        digest_of(self.to_canonical_toml().as_bytes())
    }

    pub fn network(&self) -> NetworkConfig {
        self.network
            .build()
            .expect("network was validated when the config was parsed")
    }

    pub fn sim_options(&self) -> SimOptions {
        SimOptions {
            reward_family: self.reward_model,
            tie_break: self.tie_break,
            stride: self.stride,
            delivery_ratio: self.delivery_ratio,
            retain_replications: false,
        }
    }

    /// Links from a network plus explicit experiment parameters.
    pub fn for_network(network: &NetworkConfig, policies: Vec<PolicySpec>) -> Self {
        Self {
            seed: 1,
            horizon: DEFAULT_HORIZON,
            replications: DEFAULT_REPLICATIONS,
            stride: None,
            reward_model: RewardFamily::default(),
            tie_break: TieBreakMode::default(),
            delivery_ratio: DeliveryRatio::default(),
            out_dir: None,
            network: NetworkSpec::from_network(network),
            policies,
        }
    }
}

/// `sha256:<hex>` of arbitrary bytes.
pub fn digest_of(bytes: &[u8]) -> String {
    let hash = Sha256::digest(bytes);
    let hex: String = hash.iter().map(|b| format!("{b:02x}")).collect();
    format!("sha256:{hex}")
}

pub const DEFAULT_HORIZON: u64 = 30_000;
pub const DEFAULT_REPLICATIONS: u64 = 100;
/// Trade-off values compared in the reference experiments.
pub const REFERENCE_ETAS: [f64; 5] = [0.0, 10.0, 50.0, 100.0, 200.0];

/// Fully-connected, non-fading five-link network.
pub fn five_link_network() -> NetworkConfig {
    NetworkConfig::non_fading(&[0.9, 0.8, 0.5, 0.7, 0.2], FeasibleSet::AtMostK(1))
        .expect("preset is valid")
}

/// Ten-link ON-OFF fading network, at most two links per slot.
pub fn ten_link_network() -> NetworkConfig {
    NetworkConfig::new(
        [0.9, 0.8, 0.4, 0.7, 0.5, 0.6, 0.75, 0.65, 0.5, 0.4]
            .iter()
            .zip([0.8, 0.7, 0.6, 0.9, 0.2, 0.5, 0.8, 0.9, 0.7, 0.85])
            .map(|(&mean_reward, channel_on_prob)| LinkParams {
                mean_reward,
                channel_on_prob,
            })
            .collect(),
        FeasibleSet::AtMostK(2),
    )
    .expect("preset is valid")
}

/// UCB plus the age/UCB policy at every reference `eta`.
pub fn reference_policies() -> Vec<PolicySpec> {
    std::iter::once(PolicySpec::UcbOnly)
        .chain(REFERENCE_ETAS.iter().map(|&eta| PolicySpec::laes(eta)))
        .collect()
}

/// Named reference setups: `paper-1` (five links) and `paper-2` (ten links).
pub fn preset(name: &str) -> Result<ExperimentConfig, ConfigError> {
    let network = match name {
        "paper-1" => five_link_network(),
        "paper-2" => ten_link_network(),
        other => {
            return Err(ConfigError::unanchored(format!(
                "unknown setup `{other}` (expected paper-1 or paper-2)"
            )))
        }
    };
    Ok(ExperimentConfig::for_network(
        &network,
        reference_policies(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
seed = 7
horizon = 500
replications = 3
reward_model = "uniform"

[network]
mean_rewards = [0.9, 0.8, 0.4]
channel_on_probs = [0.8, 0.7, 0.6]
feasible = { schedules = [[1], [2, 3]] }

[[policy]]
kind = "ucb"

[[policy]]
kind = "laes"
eta = 10.0
"#;

    #[test]
    fn parses_example() {
        let cfg = ExperimentConfig::from_toml_str(EXAMPLE).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.reward_model, RewardFamily::Uniform);
        assert_eq!(cfg.tie_break, TieBreakMode::LowestIndex);
        assert_eq!(
            cfg.policies,
            vec![PolicySpec::UcbOnly, PolicySpec::laes(10.0)]
        );
        let net = cfg.network();
        assert_eq!(net.num_links(), 3);
        assert_eq!(net.max_schedule_size(), 2);
        assert!(net.is_feasible(&Schedule::from_indices([1, 2])));
    }

    #[test]
    fn canonical_form_round_trips() {
        for cfg in [
            ExperimentConfig::from_toml_str(EXAMPLE).unwrap(),
            preset("paper-1").unwrap(),
            preset("paper-2").unwrap(),
        ] {
            let text = cfg.to_canonical_toml();
            let back = ExperimentConfig::from_toml_str(&text).unwrap();
            assert_eq!(back, cfg, "{text}");
            assert_eq!(back.digest(), cfg.digest());
        }
    }

    #[test]
    fn out_dir_is_not_part_of_the_digest() {
        let mut cfg = preset("paper-1").unwrap();
        let before = cfg.digest();
        cfg.out_dir = Some("elsewhere".into());
        assert_eq!(cfg.digest(), before);
        cfg.seed += 1;
        assert_ne!(cfg.digest(), before);
    }

    fn error_of(src: &str) -> ConfigError {
        ExperimentConfig::from_toml_str(src).unwrap_err()
    }

    #[test]
    fn errors_are_line_anchored() {
        let bad_mean = EXAMPLE.replace("[0.9, 0.8, 0.4]", "[0.9, 1.8, 0.4]");
        let e = error_of(&bad_mean);
        assert_eq!(e.line, Some(8), "{e}");
        assert!(e.message.contains("link 2"));

        let bad_link = EXAMPLE.replace("[[1], [2, 3]]", "[[1], [2, 4]]");
        assert_eq!(error_of(&bad_link).line, Some(10));

        let bad_eta = EXAMPLE.replace("eta = 10.0", "eta = -1.0");
        assert_eq!(error_of(&bad_eta).line, Some(15));

        let zero_h = EXAMPLE.replace("horizon = 500", "horizon = 0");
        assert_eq!(error_of(&zero_h).line, Some(3));

        let unknown = EXAMPLE.replace("seed = 7", "seed = 7\ncolour = 3");
        let e = error_of(&unknown);
        assert_eq!(e.line, Some(3), "{e}");
        assert!(e.message.contains("colour"), "{e}");

        let typo = EXAMPLE.replace("kind = \"ucb\"", "kind = \"ucb2\"");
        assert!(error_of(&typo).line.is_some());

        let mismatch = EXAMPLE.replace("[0.8, 0.7, 0.6]", "[0.8, 0.7]");
        assert_eq!(error_of(&mismatch).line, Some(9));
    }

    #[test]
    fn round_robin_needs_single_link_schedules() {
        let src = EXAMPLE.replace("kind = \"ucb\"", "kind = \"round-robin\"");
        let e = error_of(&src);
        assert!(e.message.contains("round-robin"), "{e}");
    }

    #[test]
    fn presets() {
        let one = preset("paper-1").unwrap();
        assert_eq!(one.policies.len(), 6);
        assert_eq!(one.network().num_links(), 5);
        let two = preset("paper-2").unwrap();
        assert_eq!(two.network().p_min(), 0.2);
        assert_eq!(two.network().max_schedule_size(), 2);
        assert!(preset("paper-3").is_err());
    }
}
