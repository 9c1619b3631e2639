//! Closed-form performance guarantees of the age/UCB max-weight scheduler.
//!
//! * [`age_bound`]: running average total age is at most `(eta + 1) N^2 / p_min`.
//! * [`regret_bound`]: cumulative regret is at most
//!   `N T / eta + 2 sqrt(6 N |S|max T ln T) + N (1 + 5 pi^2 / 12)`.
//! * [`fading_age_bound`]: when every channel can be OFF, the mean total age
//!   per slot is at most `N nu / (1 - nu)` whatever `eta` is, where `1 - nu`
//!   is the smallest probability that a given link is the only one ON.
//! * [`two_link_prediction`]: steady-state service pattern of two always-ON
//!   interfering links.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{FeasibleSet, NetworkConfig};

/// Upper bound on the running average total age for trade-off parameter `eta`.
pub fn age_bound(eta: f64, num_links: usize, p_min: f64) -> Result<f64> {
    if !(eta.is_finite() && eta >= 0.0) {
        return Err(Error::Domain(format!(
            "age bound needs eta >= 0, got {eta}"
        )));
    }
    if num_links == 0 {
        return Err(Error::Domain("age bound needs at least one link".into()));
    }
    if !(p_min > 0.0 && p_min <= 1.0) {
        return Err(Error::Domain(format!(
            "age bound needs 0 < p_min <= 1, got {p_min}"
        )));
    }
    let n = num_links as f64;
    Ok((eta + 1.0) * n * n / p_min)
}

/// The `eta`-independent part of [`regret_bound`]:
/// `2 sqrt(6 N |S|max T ln T) + N (1 + 5 pi^2 / 12)`.
pub fn learning_regret_term(num_links: usize, horizon: u64, max_schedule: usize) -> Result<f64> {
    if horizon < 2 {
        return Err(Error::Domain(format!(
            "regret bound needs T >= 2, got {horizon}"
        )));
    }
    if num_links == 0 || max_schedule == 0 {
        return Err(Error::Domain(
            "regret bound needs N >= 1 and |S|max >= 1".into(),
        ));
    }
    let n = num_links as f64;
    let t = horizon as f64;
    let s = max_schedule as f64;
    Ok(2.0 * (6.0 * n * s * t * t.ln()).sqrt() + n * (1.0 + 5.0 * PI * PI / 12.0))
}

/// Upper bound on the cumulative regret over `horizon` slots.
///
/// Undefined for `eta = 0`, which is reported as a domain error.
pub fn regret_bound(eta: f64, num_links: usize, horizon: u64, max_schedule: usize) -> Result<f64> {
    if eta == 0.0 {
        return Err(Error::Domain(
            "regret bound is undefined for eta = 0 (the N T / eta term diverges)".into(),
        ));
    }
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::Domain(format!(
            "regret bound needs eta > 0, got {eta}"
        )));
    }
    let learning = learning_regret_term(num_links, horizon, max_schedule)?;
    Ok(num_links as f64 * horizon as f64 / eta + learning)
}

/// Probability that link `n` is the only ON link, for every `n`.
pub fn sole_on_probabilities(on_probs: &[f64]) -> Vec<f64> {
    (0..on_probs.len())
        .map(|n| {
            on_probs
                .iter()
                .enumerate()
                .map(|(m, &p)| if m == n { p } else { 1.0 - p })
                .product()
        })
        .collect()
}

/// `N nu / (1 - nu)` with `nu = max_n (1 - p_n prod_{m != n} (1 - p_m))`.
///
/// Requires every `p_n` in `(0, 1)`.
pub fn fading_age_bound(on_probs: &[f64]) -> Result<f64> {
    if on_probs.is_empty() {
        return Err(Error::Domain(
            "fading age bound needs at least one link".into(),
        ));
    }
    if let Some((i, p)) = on_probs.iter().enumerate().find(|(_, &p)| p >= 1.0) {
        return Err(Error::Domain(format!(
            "fading age bound requires p_n < 1 for every link; link {} has p = {p}",
            i + 1
        )));
    }
    if let Some((i, p)) = on_probs.iter().enumerate().find(|(_, &p)| !(p > 0.0)) {
        return Err(Error::Domain(format!(
            "fading age bound requires p_n > 0; link {} has p = {p}",
            i + 1
        )));
    }
    // 1 - nu, computed directly to avoid cancellation when nu is close to 1
    let gap = sole_on_probabilities(on_probs)
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let nu = 1.0 - gap;
    Ok(on_probs.len() as f64 * nu / gap)
}

/// Predicted service pattern of two always-ON links sharing one slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoLinkPrediction {
    /// The weaker link is served once every `period` slots.
    pub period: u64,
    pub weak_link_avg_age: f64,
    pub strong_link_avg_age: f64,
}

/// Steady state of two always-ON links under at-most-one scheduling once the
/// UCB estimates have converged to the means.
///
/// Period `P = ceil(eta (mu_strong - mu_weak))`; the weak link's age sweeps
/// `1..=P` (average `(1 + P) / 2`), the strong link's age is 1 except for a 2
/// after each weak-link slot (average `1 + 1 / P`). Products within `1e-9` of
/// an integer are rounded to it before taking the ceiling.
pub fn two_link_prediction(eta: f64, mu_strong: f64, mu_weak: f64) -> Result<TwoLinkPrediction> {
    let x = eta * (mu_strong - mu_weak);
    if !(x.is_finite() && x > 0.0) {
        return Err(Error::Domain(format!(
            "two-link prediction needs eta (mu1 - mu2) > 0, got {x}"
        )));
    }
    let rounded = x.round();
    let x = if (x - rounded).abs() <= 1e-9 * rounded.max(1.0) {
        rounded
    } else {
        x
    };
    let period = x.ceil() as u64;
    let p = period as f64;
    Ok(TwoLinkPrediction {
        period,
        weak_link_avg_age: (1.0 + p) / 2.0,
        strong_link_avg_age: 1.0 + 1.0 / p,
    })
}

/// `eta` minimizing `regret_bound(eta) + age_weight * age_bound(eta)`.
///
/// The regret bound alone decreases in `eta` without a finite minimizer; the
/// weighted sum balances it against the age bound. Found by golden-section
/// search on `ln eta`.
pub fn balanced_eta(
    num_links: usize,
    horizon: u64,
    max_schedule: usize,
    p_min: f64,
    age_weight: f64,
) -> Result<f64> {
    if !(age_weight > 0.0 && age_weight.is_finite()) {
        return Err(Error::Domain(format!(
            "age weight must be positive, got {age_weight}"
        )));
    }
    let cost = |log_eta: f64| -> Result<f64> {
        let eta = log_eta.exp();
        Ok(regret_bound(eta, num_links, horizon, max_schedule)?
            + age_weight * age_bound(eta, num_links, p_min)?)
    };
    cost(0.0)?;

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (-30.0f64, 60.0f64);
    let mut a = hi - inv_phi * (hi - lo);
    let mut b = lo + inv_phi * (hi - lo);
    let (mut fa, mut fb) = (cost(a)?, cost(b)?);
    for _ in 0..200 {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - inv_phi * (hi - lo);
            fa = cost(a)?;
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + inv_phi * (hi - lo);
            fb = cost(b)?;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

/// Every bound that applies to a network and `eta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub eta: f64,
    pub age_bound: f64,
    /// `None` when `eta = 0`.
    pub regret_bound: Option<f64>,
    /// Present iff every channel ON-probability is below 1.
    pub fading_age_bound: Option<f64>,
    /// Present for two always-ON links under at-most-one scheduling.
    pub two_link_prediction: Option<TwoLinkPrediction>,
}

pub fn bound_report(config: &NetworkConfig, eta: f64, horizon: u64) -> Result<BoundReport> {
    let n = config.num_links();
    let probs = config.on_probs();
    let regret = if eta == 0.0 {
        None
    } else {
        Some(regret_bound(eta, n, horizon, config.max_schedule_size())?)
    };
    let fading = if probs.iter().all(|&p| p < 1.0) {
        Some(fading_age_bound(&probs)?)
    } else {
        None
    };
    let two_link = match (n, config.feasible()) {
        (2, FeasibleSet::AtMostK(1)) if probs.iter().all(|&p| p == 1.0) => {
            let mu = config.mean_rewards();
            let (strong, weak) = (mu[0].max(mu[1]), mu[0].min(mu[1]));
            two_link_prediction(eta, strong, weak).ok()
        }
        _ => None,
    };
    Ok(BoundReport {
        eta,
        age_bound: age_bound(eta, n, config.p_min())?,
        regret_bound: regret,
        fading_age_bound: fading,
        two_link_prediction: two_link,
    })
}
