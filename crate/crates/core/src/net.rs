//! Static network description and the per-slot max-weight selection problem.
//!
//! Links are indexed from zero inside the library. Human-facing surfaces (the
//! config file, `Display` output) number links from one.
//!
//! Every solver in this module shares one tie order among schedules that
//! attain the same objective value:
//!
//! 1. prefer the schedule whose set of *ON* links, read as an indicator vector
//!    `(S_1 C_1, S_2 C_2, ...)`, is lexicographically greatest, i.e. the one
//!    that serves the lowest-indexed link at the first position where the
//!    candidates differ;
//! 2. among schedules with the same ON part, prefer the one whose OFF part is
//!    lexicographically smallest (no OFF links at all when possible).
//!
//! For equal-size schedules this is the lexicographically smallest sorted
//! index list. It also makes an all-zero weight vector select links rather
//! than the empty schedule.

use std::cmp::Ordering;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest network [`brute_force_schedule`] will enumerate.
pub const MAX_ENUMERATION_LINKS: usize = 20;

/// Reward mean and channel availability of one link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkParams {
    pub mean_reward: f64,
    pub channel_on_prob: f64,
}

impl LinkParams {
    pub fn new(mean_reward: f64, channel_on_prob: f64) -> Result<Self> {
        let params = Self {
            mean_reward,
            channel_on_prob,
        };
        params.validate(0)?;
        Ok(params)
    }

    fn validate(&self, index: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.mean_reward) {
            return Err(Error::Config(format!(
                "link {}: mean reward {} is outside [0, 1]",
                index + 1,
                self.mean_reward
            )));
        }
        if !(self.channel_on_prob > 0.0 && self.channel_on_prob <= 1.0) {
            return Err(Error::Config(format!(
                "link {}: channel ON probability {} is outside (0, 1]",
                index + 1,
                self.channel_on_prob
            )));
        }
        Ok(())
    }
}

/// A set of links activated together in one slot.
///
/// Indices are kept sorted and free of duplicates.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Schedule {
    active: Vec<usize>,
}

impl Schedule {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Self {
        let mut active: Vec<usize> = indices.into_iter().collect();
        active.sort_unstable();
        active.dedup();
        Self { active }
    }

    pub fn single(link: usize) -> Self {
        Self { active: vec![link] }
    }

    pub fn contains(&self, link: usize) -> bool {
        self.active.binary_search(&link).is_ok()
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn links(&self) -> &[usize] {
        &self.active
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.active.iter().copied()
    }

    /// Links that are both scheduled and ON.
    pub fn delivered<'a>(&'a self, channels: &'a [bool]) -> impl Iterator<Item = usize> + 'a {
        self.iter().filter(move |&n| channels[n])
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, n) in self.active.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", n + 1)?;
        }
        f.write_str("}")
    }
}

/// The collection of schedules allowed in a slot.
///
/// The empty schedule is always feasible in addition to what is listed here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeasibleSet {
    /// Any set of at most `k` links.
    AtMostK(usize),
    /// Exactly the listed schedules.
    ExplicitList(Vec<Schedule>),
}

/// Links plus the feasible-schedule constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    links: Vec<LinkParams>,
    feasible: FeasibleSet,
}

impl NetworkConfig {
    pub fn new(links: Vec<LinkParams>, feasible: FeasibleSet) -> Result<Self> {
        if links.is_empty() {
            return Err(Error::Config("a network needs at least one link".into()));
        }
        for (i, link) in links.iter().enumerate() {
            link.validate(i)?;
        }
        let n = links.len();
        match &feasible {
            FeasibleSet::AtMostK(k) => {
                if *k == 0 || *k > n {
                    return Err(Error::Config(format!(
                        "at-most-k constraint needs 1 <= k <= {n}, got k = {k}"
                    )));
                }
            }
            FeasibleSet::ExplicitList(list) => {
                if list.is_empty() {
                    return Err(Error::Config(
                        "explicit feasible list must contain at least one schedule".into(),
                    ));
                }
                for schedule in list {
                    if let Some(bad) = schedule.iter().find(|&l| l >= n) {
                        return Err(Error::Config(format!(
                            "feasible schedule {schedule} names link {} but the network has {n} links",
                            bad + 1
                        )));
                    }
                }
            }
        }
        Ok(Self { links, feasible })
    }

    /// Builds a network from parallel mean and ON-probability vectors.
    pub fn from_vectors(means: &[f64], on_probs: &[f64], feasible: FeasibleSet) -> Result<Self> {
        if means.len() != on_probs.len() {
            return Err(Error::LengthMismatch {
                what: "channel ON probabilities",
                expected: means.len(),
                got: on_probs.len(),
            });
        }
        let links = means
            .iter()
            .zip(on_probs)
            .map(|(&m, &p)| LinkParams {
                mean_reward: m,
                channel_on_prob: p,
            })
            .collect();
        Self::new(links, feasible)
    }

    /// Links that are never in fading: every channel is always ON.
    pub fn non_fading(means: &[f64], feasible: FeasibleSet) -> Result<Self> {
        Self::from_vectors(means, &vec![1.0; means.len()], feasible)
    }

    pub fn num_links(&self) -> usize {
        self.links.len()
    }

    pub fn links(&self) -> &[LinkParams] {
        &self.links
    }

    pub fn feasible(&self) -> &FeasibleSet {
        &self.feasible
    }

    pub fn mean_rewards(&self) -> Vec<f64> {
        self.links.iter().map(|l| l.mean_reward).collect()
    }

    pub fn on_probs(&self) -> Vec<f64> {
        self.links.iter().map(|l| l.channel_on_prob).collect()
    }

    /// Smallest channel ON-probability across links.
    pub fn p_min(&self) -> f64 {
        self.links
            .iter()
            .map(|l| l.channel_on_prob)
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest number of links any feasible schedule activates.
    pub fn max_schedule_size(&self) -> usize {
        match &self.feasible {
            FeasibleSet::AtMostK(k) => *k,
            FeasibleSet::ExplicitList(list) => list.iter().map(Schedule::len).max().unwrap_or(0),
        }
    }

    pub fn is_feasible(&self, schedule: &Schedule) -> bool {
        if schedule.is_empty() {
            return true;
        }
        if schedule.iter().any(|n| n >= self.num_links()) {
            return false;
        }
        match &self.feasible {
            FeasibleSet::AtMostK(k) => schedule.len() <= *k,
            FeasibleSet::ExplicitList(list) => list.contains(schedule),
        }
    }

    fn check_inputs(&self, weights: &[f64], channels: &[bool]) -> Result<()> {
        let n = self.num_links();
        if weights.len() != n {
            return Err(Error::LengthMismatch {
                what: "weights",
                expected: n,
                got: weights.len(),
            });
        }
        if channels.len() != n {
            return Err(Error::LengthMismatch {
                what: "channel state",
                expected: n,
                got: channels.len(),
            });
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w >= 0.0))
        {
            return Err(Error::Config(format!(
                "weight of link {} must be finite and nonnegative, got {w}",
                i + 1
            )));
        }
        Ok(())
    }
}

/// `sum of weights[n] * channels[n]` over the active links, summed in index order.
pub fn objective(weights: &[f64], channels: &[bool], schedule: &Schedule) -> f64 {
    schedule
        .delivered(channels)
        .map(|n| weights[n])
        .fold(0.0, |acc, w| acc + w)
}

/// Tie order between two schedules of equal objective; `Less` means `a` wins.
pub fn tie_order(a: &Schedule, b: &Schedule, channels: &[bool]) -> Ordering {
    let on = |s: &Schedule, n: usize| s.contains(n) && channels[n];
    let off = |s: &Schedule, n: usize| s.contains(n) && !channels[n];
    let limit = a.links().last().max(b.links().last()).map_or(0, |m| m + 1);
    for n in 0..limit {
        match (on(a, n), on(b, n)) {
            (true, false) => return Ordering::Less,
            (false, true) => return Ordering::Greater,
            _ => {}
        }
    }
    for n in 0..limit {
        match (off(a, n), off(b, n)) {
            (false, true) => return Ordering::Less,
            (true, false) => return Ordering::Greater,
            _ => {}
        }
    }
    Ordering::Equal
}

/// Feasible schedule maximizing `sum weights[n] * channels[n]`, ties broken by
/// [`tie_order`].
///
/// At-most-k sets are solved greedily: the `min(k, #ON)` heaviest ON links,
/// lower index first among equal weights. Explicit lists are scanned.
pub fn max_weight_schedule(
    config: &NetworkConfig,
    weights: &[f64],
    channels: &[bool],
) -> Result<Schedule> {
    config.check_inputs(weights, channels)?;
    Ok(match config.feasible() {
        FeasibleSet::AtMostK(k) => {
            let mut on: Vec<usize> = (0..weights.len()).filter(|&n| channels[n]).collect();
            // stable: equal weights keep ascending index order
            on.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]));
            on.truncate(*k);
            Schedule::from_indices(on)
        }
        FeasibleSet::ExplicitList(list) => {
            let mut best = Schedule::empty();
            let mut best_value = 0.0;
            for candidate in list {
                let value = objective(weights, channels, candidate);
                if value > best_value
                    || (value == best_value && tie_order(candidate, &best, channels).is_lt())
                {
                    best = candidate.clone();
                    best_value = value;
                }
            }
            best
        }
    })
}

/// Like [`max_weight_schedule`], but ties among optimal schedules are broken
/// at random.
///
/// For at-most-k sets the ON links are ranked by weight with a random priority
/// among equal weights. For explicit lists one optimal schedule is drawn
/// uniformly.
pub fn max_weight_schedule_random_ties<R: Rng + ?Sized>(
    config: &NetworkConfig,
    weights: &[f64],
    channels: &[bool],
    rng: &mut R,
) -> Result<Schedule> {
    config.check_inputs(weights, channels)?;
    Ok(match config.feasible() {
        FeasibleSet::AtMostK(k) => {
            let mut on: Vec<(usize, u64)> = (0..weights.len())
                .filter(|&n| channels[n])
                .map(|n| (n, rng.random()))
                .collect();
            on.sort_by(|a, b| weights[b.0].total_cmp(&weights[a.0]).then(a.1.cmp(&b.1)));
            on.truncate(*k);
            Schedule::from_indices(on.into_iter().map(|(n, _)| n))
        }
        FeasibleSet::ExplicitList(list) => {
            // `None` stands for the implicit empty schedule.
            let mut best: Vec<Option<&Schedule>> = vec![None];
            let mut best_value = 0.0;
            for candidate in list {
                let value = objective(weights, channels, candidate);
                if value > best_value {
                    best.clear();
                    best_value = value;
                }
                if value == best_value {
                    best.push(Some(candidate));
                }
            }
            let pick = best[rng.random_range(0..best.len())];
            pick.cloned().unwrap_or_default()
        }
    })
}

/// Exhaustive reference solver.
///
/// Enumerates every subset of links, keeps the feasible ones and returns an
/// optimum under the same tie order as [`max_weight_schedule`]. Intended as a
/// test oracle; refuses networks above [`MAX_ENUMERATION_LINKS`] links.
pub fn brute_force_schedule(
    config: &NetworkConfig,
    weights: &[f64],
    channels: &[bool],
) -> Result<Schedule> {
    let n = config.num_links();
    if n > MAX_ENUMERATION_LINKS {
        return Err(Error::OracleScope {
            links: n,
            max: MAX_ENUMERATION_LINKS,
        });
    }
    config.check_inputs(weights, channels)?;

    let to_mask = |s: &Schedule| s.iter().fold(0u32, |m, l| m | (1 << l));
    let listed: Vec<u32> = match config.feasible() {
        FeasibleSet::ExplicitList(list) => list.iter().map(to_mask).collect(),
        FeasibleSet::AtMostK(_) => Vec::new(),
    };
    let feasible = |mask: u32| match config.feasible() {
        FeasibleSet::AtMostK(k) => mask.count_ones() as usize <= *k,
        FeasibleSet::ExplicitList(_) => mask == 0 || listed.contains(&mask),
    };
    let on_mask = (0..n)
        .filter(|&l| channels[l])
        .fold(0u32, |m, l| m | (1 << l));
    let value = |mask: u32| {
        (0..n)
            .filter(|&l| mask & (1 << l) != 0 && channels[l])
            .fold(0.0, |acc, l| acc + weights[l])
    };
    // `a` beats `b` at the lowest bit where they differ: an ON bit wins when
    // held, an OFF bit wins when absent.
    let precedes = |a: u32, b: u32| {
        let on_diff = (a ^ b) & on_mask;
        if on_diff != 0 {
            let low = on_diff & on_diff.wrapping_neg();
            return a & low != 0;
        }
        let off_diff = (a ^ b) & !on_mask;
        if off_diff != 0 {
            let low = off_diff & off_diff.wrapping_neg();
            return a & low == 0;
        }
        false
    };

    let mut best_mask = 0u32;
    let mut best_value = 0.0;
    for mask in 1u32..(1u32 << n) {
        if !feasible(mask) {
            continue;
        }
        let v = value(mask);
        if v > best_value || (v == best_value && precedes(mask, best_mask)) {
            best_mask = mask;
            best_value = v;
        }
    }
    Ok(Schedule::from_indices(
        (0..n).filter(|&l| best_mask & (1 << l) != 0),
    ))
}
