//! Slotted simulation of one replication and Monte-Carlo aggregation.
//!
//! Each slot runs in a fixed order: probe channels, let the policy and the
//! genie decide on the same channel draw, record the pseudo-regret, draw
//! rewards for the links that delivered, update the learner.
//!
//! Metrics are recorded after slot `t - 1` completes and reported under the
//! row index `t` (`1..=T`):
//!
//! * cumulative regret `Reg(t)`, summed over slots `0..t`;
//! * running average total age `(1/t) * sum_{tau < t} sum_n Z_n(tau)`;
//! * total age `sum_n Z_n(t)`;
//! * delivery ratio of every link, `H_n(t) / t` by default.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc;
use std::thread;

use serde::{Deserialize, Serialize};

use crate::bounds;
use crate::env::{
    sample_channels_into, ChannelState, RewardFamily, RewardModel, RngStream, StreamPurpose,
    GENERATOR_NAME,
};
use crate::error::{Error, Result};
use crate::net::{objective, NetworkConfig, Schedule};
use crate::policy::{genie_decide, PolicySpec, TieBreakMode, TieBreaker};
use crate::state::LearningState;

/// Horizons up to this length keep every slot unless a stride is configured.
pub const FULL_SERIES_LIMIT: u64 = 100_000;
/// Recording stride used above [`FULL_SERIES_LIMIT`].
pub const DEFAULT_LONG_STRIDE: u64 = 100;

/// Which per-link fraction the delivery-ratio columns report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeliveryRatio {
    /// Successful deliveries per slot, `H_n(t) / t`.
    #[default]
    Delivered,
    /// Scheduled slots per slot, regardless of channel state.
    Scheduled,
}

/// Knobs that do not change the model, only how it is simulated and recorded.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SimOptions {
    pub reward_family: RewardFamily,
    pub tie_break: TieBreakMode,
    /// Recording stride; `None` picks 1 up to [`FULL_SERIES_LIMIT`] slots and
    /// [`DEFAULT_LONG_STRIDE`] above.
    pub stride: Option<u64>,
    pub delivery_ratio: DeliveryRatio,
    /// Keep every replication's series in the experiment result.
    pub retain_replications: bool,
}

impl SimOptions {
    pub fn effective_stride(&self, horizon: u64) -> u64 {
        match self.stride {
            Some(s) => s.max(1),
            None if horizon <= FULL_SERIES_LIMIT => 1,
            None => DEFAULT_LONG_STRIDE,
        }
    }
}

/// Number of rows recorded for a horizon: `ceil(T / stride)`.
pub fn recorded_rows(horizon: u64, stride: u64) -> usize {
    horizon.div_ceil(stride) as usize
}

fn is_recorded(t: u64, horizon: u64, stride: u64) -> bool {
    t.is_multiple_of(stride) || t == horizon
}

/// Everything that happened in one slot, as seen by an observer.
///
/// `state` is the learner after the slot's update.
#[derive(Debug, Clone, Copy)]
pub struct SlotRecord<'a> {
    pub slot: u64,
    pub channels: &'a ChannelState,
    pub chosen: &'a Schedule,
    pub genie: &'a Schedule,
    /// Pseudo-regret increment of this slot.
    pub regret: f64,
    /// `sum_n Z_n(t)` before the update.
    pub total_age: u64,
    /// `sum_n Z_n(t + 1)` after the update.
    pub next_total_age: u64,
    /// `sum_n Z_n(t) C_n(t) S_n(t)`.
    pub served_age: u64,
    pub delivered: usize,
    pub state: &'a LearningState,
}

/// `sum_n mu_n C_n (genie_n - chosen_n)` with the true means.
pub fn per_slot_regret(
    config: &NetworkConfig,
    channels: &ChannelState,
    genie: &Schedule,
    chosen: &Schedule,
) -> f64 {
    let mu = config.mean_rewards();
    objective(&mu, channels.as_slice(), genie) - objective(&mu, channels.as_slice(), chosen)
}

/// End-of-run figures of one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationSummary {
    pub replication: u64,
    pub final_regret: f64,
    pub final_running_avg_age: f64,
    /// `H_n(T)` per link.
    pub deliveries: Vec<u64>,
    /// Slots in which each link was scheduled.
    pub scheduled: Vec<u64>,
    /// Scheduled-and-ON link-slots, counted by the engine itself.
    pub delivered_link_slots: u64,
    /// Largest running average total age over all prefixes.
    pub peak_running_avg_age: f64,
    /// `(eta + 1) N^2 / p_min` for age/UCB max-weight policies.
    pub age_bound: Option<f64>,
    /// Prefixes whose running average total age exceeded `age_bound`.
    pub age_bound_violations: u64,
    /// Slots on which the drift identity of the total age was verified.
    pub lyapunov_checks: u64,
}

/// Recorded metrics of one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationSeries {
    pub slots: Vec<u64>,
    pub cumulative_regret: Vec<f64>,
    pub running_avg_age: Vec<f64>,
    pub total_age: Vec<f64>,
    /// `delivery_ratio[row][link]`.
    pub delivery_ratio: Vec<Vec<f64>>,
    pub summary: ReplicationSummary,
}

impl ReplicationSeries {
    fn with_capacity(rows: usize) -> Self {
        Self {
            slots: Vec::with_capacity(rows),
            cumulative_regret: Vec::with_capacity(rows),
            running_avg_age: Vec::with_capacity(rows),
            total_age: Vec::with_capacity(rows),
            delivery_ratio: Vec::with_capacity(rows),
            summary: ReplicationSummary {
                replication: 0,
                final_regret: 0.0,
                final_running_avg_age: 0.0,
                deliveries: Vec::new(),
                scheduled: Vec::new(),
                delivered_link_slots: 0,
                peak_running_avg_age: 0.0,
                age_bound: None,
                age_bound_violations: 0,
                lyapunov_checks: 0,
            },
        }
    }

    fn columns(&self) -> usize {
        3 + self.delivery_ratio.first().map_or(0, Vec::len)
    }

    fn flat_row(&self, row: usize, out: &mut Vec<f64>) {
        out.push(self.cumulative_regret[row]);
        out.push(self.running_avg_age[row]);
        out.push(self.total_age[row]);
        out.extend_from_slice(&self.delivery_ratio[row]);
    }
}

/// Age bound that applies to a policy, if any.
fn policy_age_bound(config: &NetworkConfig, policy: &PolicySpec) -> Option<f64> {
    policy
        .eta()
        .and_then(|eta| bounds::age_bound(eta, config.num_links(), config.p_min()).ok())
}

/// Runs replication 0 of `seed`.
pub fn run_replication(
    config: &NetworkConfig,
    policy: &PolicySpec,
    horizon: u64,
    seed: u64,
    opts: &SimOptions,
) -> Result<ReplicationSeries> {
    run_replication_observed(config, policy, horizon, seed, 0, opts, |_| {})
}

/// Runs replication `replication` of `master_seed`, calling `observe` after
/// every slot.
pub fn run_replication_observed<F>(
    config: &NetworkConfig,
    policy: &PolicySpec,
    horizon: u64,
    master_seed: u64,
    replication: u64,
    opts: &SimOptions,
    mut observe: F,
) -> Result<ReplicationSeries>
where
    F: FnMut(&SlotRecord<'_>),
{
    if horizon == 0 {
        return Err(Error::Config("horizon must be at least one slot".into()));
    }
    policy.validate(config)?;

    let n = config.num_links();
    let stride = opts.effective_stride(horizon);
    let rewards_model = RewardModel::uniform_family(config, opts.reward_family);
    let mut channel_rng =
        RngStream::for_replication(master_seed, replication, StreamPurpose::Channels);
    let mut reward_rng =
        RngStream::for_replication(master_seed, replication, StreamPurpose::Rewards);
    let mut ties = match opts.tie_break {
        TieBreakMode::LowestIndex => TieBreaker::LowestIndex,
        TieBreakMode::Random => TieBreaker::Random(RngStream::for_replication(
            master_seed,
            replication,
            StreamPurpose::TieBreak,
        )),
    };
    let age_bound = policy_age_bound(config, policy);

    let mut series = ReplicationSeries::with_capacity(recorded_rows(horizon, stride));
    let mut state = LearningState::new(n);
    let mut channels = ChannelState::all_on(n);
    let mut rewards: Vec<Option<f64>> = vec![None; n];
    let mut scheduled = vec![0u64; n];
    let mut cumulative_regret = 0.0;
    let mut age_sum: u64 = 0;
    let summary = &mut series.summary;
    summary.replication = replication;
    summary.age_bound = age_bound;

    for t in 0..horizon {
        sample_channels_into(config, &mut channel_rng, &mut channels);
        let chosen = policy.decide(config, &state, &channels, &mut ties)?;
        if !config.is_feasible(&chosen) {
            return Err(Error::Invariant {
                slot: t,
                message: format!("{policy} chose infeasible schedule {chosen}"),
            });
        }
        let genie = genie_decide(config, &channels)?;
        let regret = per_slot_regret(config, &channels, &genie, &chosen);
        if regret < -1e-9 {
            return Err(Error::Invariant {
                slot: t,
                message: format!("negative regret {regret}"),
            });
        }
        let regret = regret.max(0.0);

        rewards.iter_mut().for_each(|r| *r = None);
        for link in chosen.iter() {
            scheduled[link] += 1;
            if channels.is_on(link) {
                rewards[link] = Some(rewards_model.law(link).sample(&mut reward_rng));
                summary.delivered_link_slots += 1;
            }
        }
        let update = state.update_after_slot(&chosen, channels.as_slice(), &rewards)?;

        if update.total_age_after + update.served_age != update.total_age_before + n as u64 {
            return Err(Error::Invariant {
                slot: t,
                message: format!(
                    "total age drift: V(t+1) = {} but V(t) - served + N = {} - {} + {n}",
                    update.total_age_after, update.total_age_before, update.served_age
                ),
            });
        }
        summary.lyapunov_checks += 1;
        if let Some(max_age) = state.ages().max() {
            if max_age > t + 1 {
                return Err(Error::Invariant {
                    slot: t,
                    message: format!("age {max_age} exceeds elapsed slots {}", t + 1),
                });
            }
        }

        cumulative_regret += regret;
        age_sum += update.total_age_before;
        let elapsed = t + 1;
        let running_avg_age = age_sum as f64 / elapsed as f64;
        summary.peak_running_avg_age = summary.peak_running_avg_age.max(running_avg_age);
        if age_bound.is_some_and(|b| running_avg_age > b) {
            summary.age_bound_violations += 1;
        }

        observe(&SlotRecord {
            slot: t,
            channels: &channels,
            chosen: &chosen,
            genie: &genie,
            regret,
            total_age: update.total_age_before,
            next_total_age: update.total_age_after,
            served_age: update.served_age,
            delivered: update.delivered,
            state: &state,
        });

        if is_recorded(elapsed, horizon, stride) {
            series.slots.push(elapsed);
            series.cumulative_regret.push(cumulative_regret);
            series.running_avg_age.push(running_avg_age);
            series.total_age.push(update.total_age_after as f64);
            let ratios = (0..n)
                .map(|l| {
                    let count = match opts.delivery_ratio {
                        DeliveryRatio::Delivered => state.link(l).deliveries,
                        DeliveryRatio::Scheduled => scheduled[l],
                    };
                    count as f64 / elapsed as f64
                })
                .collect();
            series.delivery_ratio.push(ratios);
        }
    }

    let summary = &mut series.summary;
    summary.final_regret = cumulative_regret;
    summary.final_running_avg_age = age_sum as f64 / horizon as f64;
    summary.deliveries = state.links().iter().map(|l| l.deliveries).collect();
    summary.scheduled = scheduled;
    Ok(series)
}

/// Mean and standard error of one metric over replications, per recorded row.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricStats {
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl MetricStats {
    pub fn last_mean(&self) -> f64 {
        *self.mean.last().expect("experiment has at least one row")
    }

    pub fn last_stderr(&self) -> f64 {
        *self.stderr.last().expect("experiment has at least one row")
    }
}

/// Provenance of an experiment result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultMetadata {
    pub policy: PolicySpec,
    pub eta: Option<f64>,
    pub master_seed: u64,
    pub replications: u64,
    pub horizon: u64,
    pub stride: u64,
    pub generator: String,
    pub reward_model: RewardFamily,
    pub tie_break: TieBreakMode,
    pub delivery_ratio: DeliveryRatio,
    pub config_digest: Option<String>,
}

/// Replication-averaged metric series of one policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub metadata: ResultMetadata,
    pub slots: Vec<u64>,
    pub cumulative_regret: MetricStats,
    pub running_avg_age: MetricStats,
    pub total_age: MetricStats,
    /// One entry per link.
    pub delivery_ratio: Vec<MetricStats>,
    /// Per-replication end-of-run figures, in replication order.
    pub summaries: Vec<ReplicationSummary>,
    /// Full per-replication series when [`SimOptions::retain_replications`] is set.
    pub replications: Option<Vec<ReplicationSeries>>,
}

/// Running mean and sum of squared deviations, element-wise (Welford).
struct Accumulator {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
    row: Vec<f64>,
}

impl Accumulator {
    fn new() -> Self {
        Self {
            count: 0,
            mean: Vec::new(),
            m2: Vec::new(),
            row: Vec::new(),
        }
    }

    fn push(&mut self, series: &ReplicationSeries) {
        let cols = series.columns();
        if self.count == 0 {
            self.mean = vec![0.0; series.slots.len() * cols];
            self.m2 = vec![0.0; series.slots.len() * cols];
        }
        self.count += 1;
        let k = self.count as f64;
        for r in 0..series.slots.len() {
            self.row.clear();
            series.flat_row(r, &mut self.row);
            for (c, &x) in self.row.iter().enumerate() {
                let i = r * cols + c;
                let delta = x - self.mean[i];
                self.mean[i] += delta / k;
                self.m2[i] += delta * (x - self.mean[i]);
            }
        }
    }

    fn column(&self, col: usize, cols: usize) -> MetricStats {
        let rows = self.mean.len() / cols;
        let mut stats = MetricStats {
            mean: Vec::with_capacity(rows),
            stderr: Vec::with_capacity(rows),
        };
        for r in 0..rows {
            let i = r * cols + col;
            stats.mean.push(self.mean[i]);
            stats.stderr.push(if self.count > 1 {
                let var = self.m2[i] / (self.count - 1) as f64;
                (var / self.count as f64).sqrt()
            } else {
                0.0
            });
        }
        stats
    }
}

/// Runs `replications` independent replications and averages them.
///
/// Replication `r` draws from substreams of `(master_seed, r)`. Results are
/// folded in replication order, so the output does not depend on `workers`.
#[allow(clippy::too_many_arguments)]
pub fn run_experiment(
    config: &NetworkConfig,
    policy: &PolicySpec,
    horizon: u64,
    replications: u64,
    master_seed: u64,
    opts: &SimOptions,
    workers: usize,
    config_digest: Option<String>,
) -> Result<ExperimentResult> {
    if replications == 0 {
        return Err(Error::Config("at least one replication is required".into()));
    }
    if horizon == 0 {
        return Err(Error::Config("horizon must be at least one slot".into()));
    }
    policy.validate(config)?;
    let stride = opts.effective_stride(horizon);

    let mut acc = Accumulator::new();
    let mut summaries = Vec::with_capacity(replications as usize);
    let mut retained = opts.retain_replications.then(Vec::new);
    let mut fold = |series: ReplicationSeries| {
        acc.push(&series);
        summaries.push(series.summary.clone());
        if let Some(kept) = retained.as_mut() {
            kept.push(series);
        }
    };

    let workers = workers.clamp(1, replications as usize);
    let run_one =
        |r: u64| run_replication_observed(config, policy, horizon, master_seed, r, opts, |_| {});
    if workers == 1 {
        for r in 0..replications {
            fold(run_one(r)?);
        }
    } else {
        let next = AtomicU64::new(0);
        let stop = AtomicBool::new(false);
        let (tx, rx) = mpsc::channel::<(u64, Result<ReplicationSeries>)>();
        let outcome = thread::scope(|scope| {
            for _ in 0..workers {
                let tx = tx.clone();
                let (next, stop, run_one) = (&next, &stop, &run_one);
                scope.spawn(move || loop {
                    if stop.load(Ordering::Relaxed) {
                        break;
                    }
                    let r = next.fetch_add(1, Ordering::Relaxed);
                    if r >= replications {
                        break;
                    }
                    if tx.send((r, run_one(r))).is_err() {
                        break;
                    }
                });
            }
            drop(tx);

            let mut pending = BTreeMap::new();
            let mut expected = 0u64;
            for (r, result) in rx {
                pending.insert(r, result);
                while let Some(result) = pending.remove(&expected) {
                    match result {
                        Ok(series) => fold(series),
                        Err(e) => {
                            stop.store(true, Ordering::Relaxed);
                            return Err(e);
                        }
                    }
                    expected += 1;
                }
            }
            Ok(())
        });
        outcome?;
    }

    let n = config.num_links();
    let cols = 3 + n;
    Ok(ExperimentResult {
        metadata: ResultMetadata {
            policy: *policy,
            eta: policy.eta(),
            master_seed,
            replications,
            horizon,
            stride,
            generator: GENERATOR_NAME.to_string(),
            reward_model: opts.reward_family,
            tie_break: opts.tie_break,
            delivery_ratio: opts.delivery_ratio,
            config_digest,
        },
        slots: (1..=horizon)
            .filter(|&t| is_recorded(t, horizon, stride))
            .collect(),
        cumulative_regret: acc.column(0, cols),
        running_avg_age: acc.column(1, cols),
        total_age: acc.column(2, cols),
        delivery_ratio: (0..n).map(|l| acc.column(3 + l, cols)).collect(),
        summaries,
        replications: retained,
    })
}
