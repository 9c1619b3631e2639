//! Per-link learning statistics and ages of information.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::Schedule;

/// What a scheduler knows about one link.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LinkStats {
    /// Number of successful deliveries so far.
    pub deliveries: u64,
    /// Sum of the rewards of those deliveries.
    pub reward_sum: f64,
    /// Slots since the last delivery; zero only before the first slot.
    pub age: u64,
}

/// Empirical mean reward, or 1 for a link that has never delivered.
pub fn sample_mean(stats: &LinkStats) -> f64 {
    if stats.deliveries == 0 {
        1.0
    } else {
        stats.reward_sum / stats.deliveries as f64
    }
}

/// Truncated upper confidence bound `min(mean + sqrt(3 ln t / 2H), 1)`.
///
/// `slot` is the global slot index `t`. Unexplored links score 1. The
/// exploration radius is zero for `t <= 1`.
pub fn ucb_estimate(stats: &LinkStats, slot: u64) -> f64 {
    if stats.deliveries == 0 {
        return 1.0;
    }
    let radius = if slot <= 1 {
        0.0
    } else {
        (3.0 * (slot as f64).ln() / (2.0 * stats.deliveries as f64)).sqrt()
    };
    (sample_mean(stats) + radius).min(1.0)
}

/// Bookkeeping produced by [`LearningState::update_after_slot`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotUpdate {
    /// Total age before the update.
    pub total_age_before: u64,
    /// Total age after the update.
    pub total_age_after: u64,
    /// Sum of pre-update ages over the links that delivered.
    pub served_age: u64,
    /// Number of links that delivered.
    pub delivered: usize,
}

/// Learning statistics of every link plus the slot counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningState {
    links: Vec<LinkStats>,
    slot: u64,
}

impl LearningState {
    /// State before slot 0: no deliveries, all ages zero.
    pub fn new(num_links: usize) -> Self {
        Self {
            links: vec![LinkStats::default(); num_links],
            slot: 0,
        }
    }

    /// Builds a state from explicit statistics, e.g. to evaluate a policy on a
    /// hand-made situation.
    pub fn from_parts(links: Vec<LinkStats>, slot: u64) -> Self {
        Self { links, slot }
    }

    pub fn num_links(&self) -> usize {
        self.links.len()
    }

    /// Index of the slot about to be played.
    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn links(&self) -> &[LinkStats] {
        &self.links
    }

    pub fn link(&self, n: usize) -> &LinkStats {
        &self.links[n]
    }

    pub fn ages(&self) -> impl Iterator<Item = u64> + '_ {
        self.links.iter().map(|l| l.age)
    }

    pub fn total_age(&self) -> u64 {
        self.ages().sum()
    }

    pub fn total_deliveries(&self) -> u64 {
        self.links.iter().map(|l| l.deliveries).sum()
    }

    /// UCB estimates of all links at the current slot.
    pub fn ucb_estimates(&self) -> Vec<f64> {
        self.links
            .iter()
            .map(|l| ucb_estimate(l, self.slot))
            .collect()
    }

    /// Applies one slot outcome.
    ///
    /// `rewards[n]` must be `Some(x)` exactly for the links that were both
    /// scheduled and ON. Delivering links reset their age to 1 and record the
    /// reward; every other link ages by one.
    pub fn update_after_slot(
        &mut self,
        schedule: &Schedule,
        channels: &[bool],
        rewards: &[Option<f64>],
    ) -> Result<SlotUpdate> {
        let n = self.links.len();
        if channels.len() != n {
            return Err(Error::LengthMismatch {
                what: "channel state",
                expected: n,
                got: channels.len(),
            });
        }
        if rewards.len() != n {
            return Err(Error::LengthMismatch {
                what: "rewards",
                expected: n,
                got: rewards.len(),
            });
        }
        if let Some(bad) = schedule.iter().find(|&l| l >= n) {
            return Err(Error::Consistency(format!(
                "schedule names link {} in a {n}-link network",
                bad + 1
            )));
        }
        for (link, reward) in rewards.iter().enumerate() {
            let delivered = channels[link] && schedule.contains(link);
            match (delivered, reward) {
                (true, None) => {
                    return Err(Error::Consistency(format!(
                        "link {} delivered but no reward was supplied",
                        link + 1
                    )))
                }
                (false, Some(_)) => {
                    return Err(Error::Consistency(format!(
                        "reward supplied for link {}, which did not deliver",
                        link + 1
                    )))
                }
                (true, Some(x)) if !(0.0..=1.0).contains(x) => {
                    return Err(Error::Consistency(format!(
                        "reward {x} of link {} is outside [0, 1]",
                        link + 1
                    )))
                }
                _ => {}
            }
        }

        let mut update = SlotUpdate {
            total_age_before: 0,
            total_age_after: 0,
            served_age: 0,
            delivered: 0,
        };
        for (stats, reward) in self.links.iter_mut().zip(rewards) {
            update.total_age_before += stats.age;
            match reward {
                Some(x) => {
                    update.served_age += stats.age;
                    update.delivered += 1;
                    stats.deliveries += 1;
                    stats.reward_sum += x;
                    stats.age = 1;
                }
                None => stats.age += 1,
            }
            update.total_age_after += stats.age;
        }
        self.slot += 1;
        Ok(update)
    }
}
