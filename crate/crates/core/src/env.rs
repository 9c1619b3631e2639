//! Channel and reward sampling on seeded, splittable random streams.
//!
//! Streams are ChaCha8 keyed by the master seed; each replication owns a fixed
//! block of stream ids, so adding replications never perturbs earlier ones.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::net::NetworkConfig;

/// Name of the generator, recorded in output metadata.
pub const GENERATOR_NAME: &str = "ChaCha8 (rand_chacha 0.9), one stream per (replication, purpose)";

/// What a random stream is used for inside one replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamPurpose {
    Channels = 0,
    Rewards = 1,
    TieBreak = 2,
}

const STREAMS_PER_REPLICATION: u64 = 4;

/// A reproducible random stream.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    /// Substream of `master_seed` for one purpose of replication `replication`.
    pub fn for_replication(master_seed: u64, replication: u64, purpose: StreamPurpose) -> Self {
        Self::new(
            master_seed,
            replication * STREAMS_PER_REPLICATION + purpose as u64,
        )
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random()
    }

    /// `true` with probability `p`; exact for `p = 0` and `p = 1`.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// ON/OFF state of every link in one slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelState {
    on: Vec<bool>,
}

impl ChannelState {
    pub fn new(on: Vec<bool>) -> Self {
        Self { on }
    }

    pub fn all_on(n: usize) -> Self {
        Self { on: vec![true; n] }
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.on
    }

    pub fn is_on(&self, link: usize) -> bool {
        self.on[link]
    }

    pub fn len(&self) -> usize {
        self.on.len()
    }

    pub fn is_empty(&self) -> bool {
        self.on.is_empty()
    }

    pub fn num_on(&self) -> usize {
        self.on.iter().filter(|&&c| c).count()
    }
}

/// Draws an independent Bernoulli(p_n) channel state for every link.
pub fn sample_channels(config: &NetworkConfig, rng: &mut RngStream) -> ChannelState {
    let mut state = ChannelState::all_on(config.num_links());
    sample_channels_into(config, rng, &mut state);
    state
}

/// In-place variant of [`sample_channels`] that reuses the buffer.
pub fn sample_channels_into(config: &NetworkConfig, rng: &mut RngStream, state: &mut ChannelState) {
    state.on.clear();
    state.on.extend(
        config
            .links()
            .iter()
            .map(|l| rng.bernoulli(l.channel_on_prob)),
    );
}

/// Family of per-slot reward laws, each parameterized by the link mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardFamily {
    /// Reward 1 with probability mu, else 0.
    #[default]
    Bernoulli,
    /// Uniform on `[max(0, 2mu - 1), min(1, 2mu)]`.
    Uniform,
    /// Always exactly mu.
    #[serde(rename = "pointmass")]
    PointMass,
}

impl RewardFamily {
    pub fn name(self) -> &'static str {
        match self {
            RewardFamily::Bernoulli => "bernoulli",
            RewardFamily::Uniform => "uniform",
            RewardFamily::PointMass => "pointmass",
        }
    }
}

impl std::str::FromStr for RewardFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bernoulli" => Ok(Self::Bernoulli),
            "uniform" => Ok(Self::Uniform),
            "pointmass" => Ok(Self::PointMass),
            other => Err(format!(
                "unknown reward model `{other}` (expected bernoulli, uniform or pointmass)"
            )),
        }
    }
}

/// Reward law of a single link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RewardLaw {
    Bernoulli(f64),
    Uniform { low: f64, high: f64 },
    PointMass(f64),
}

impl RewardLaw {
    pub fn from_family(family: RewardFamily, mean: f64) -> Self {
        match family {
            RewardFamily::Bernoulli => RewardLaw::Bernoulli(mean),
            RewardFamily::Uniform => RewardLaw::Uniform {
                low: (2.0 * mean - 1.0).max(0.0),
                high: (2.0 * mean).min(1.0),
            },
            RewardFamily::PointMass => RewardLaw::PointMass(mean),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            RewardLaw::Bernoulli(mu) | RewardLaw::PointMass(mu) => mu,
            RewardLaw::Uniform { low, high } => 0.5 * (low + high),
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        match *self {
            RewardLaw::Bernoulli(mu) => {
                if rng.bernoulli(mu) {
                    1.0
                } else {
                    0.0
                }
            }
            RewardLaw::Uniform { low, high } => low + (high - low) * rng.uniform(),
            RewardLaw::PointMass(mu) => mu,
        }
    }
}

/// Per-link reward laws of a network.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardModel {
    laws: Vec<RewardLaw>,
}

impl RewardModel {
    pub fn new(laws: Vec<RewardLaw>) -> Self {
        Self { laws }
    }

    /// Same family on every link, with the link's configured mean.
    pub fn uniform_family(config: &NetworkConfig, family: RewardFamily) -> Self {
        Self {
            laws: config
                .links()
                .iter()
                .map(|l| RewardLaw::from_family(family, l.mean_reward))
                .collect(),
        }
    }

    pub fn law(&self, link: usize) -> &RewardLaw {
        &self.laws[link]
    }

    pub fn len(&self) -> usize {
        self.laws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.laws.is_empty()
    }
}

/// One reward draw for `link`.
pub fn sample_reward(model: &RewardModel, link: usize, rng: &mut RngStream) -> f64 {
    model.law(link).sample(rng)
}
