//! Age-efficient wireless link scheduling with online reward learning.
//!
//! A network of `N` links shares the medium in slotted time. Each slot, every
//! link's channel is ON or OFF, the scheduler activates a feasible set of
//! links, and every activated ON link delivers a packet whose value is drawn
//! from an unknown per-link distribution. The scheduler wants both a large
//! accumulated value (small regret against a genie that knows the means) and
//! fresh information (small age).
//!
//! The central policy weighs each link by `Z_n(t) + eta * w_n(t)`: its age
//! plus `eta` times its truncated UCB estimate, then picks the max-weight
//! feasible schedule among ON links. `eta` trades regret against age.
//!
//! ```
//! use agesched::prelude::*;
//!
//! let network = NetworkConfig::non_fading(&[0.9, 0.8, 0.5, 0.7, 0.2], FeasibleSet::AtMostK(1))?;
//! let run = run_replication(&network, &PolicySpec::laes(50.0), 2_000, 7, &SimOptions::default())?;
//! let age_cap = bounds::age_bound(50.0, 5, network.p_min())?;
//! assert!(run.running_avg_age.iter().all(|&a| a <= age_cap));
//! # Ok::<(), agesched::Error>(())
//! ```
//!
//! Modules:
//!
//! * [`net`]: links, feasible schedules, max-weight solver and its brute-force oracle
//! * [`env`]: seeded channel and reward sampling
//! * [`state`]: per-link learning statistics, UCB estimates, age dynamics
//! * [`policy`]: the schedulers
//! * [`engine`]: slot loop, regret and age metrics, replication averaging
//! * [`bounds`]: closed-form guarantees
//! * [`config`], [`report`], [`commands`]: experiment files and the CLI back end

pub mod bounds;
pub mod commands;
pub mod config;
pub mod engine;
pub mod env;
mod error;
pub mod net;
pub mod policy;
pub mod report;
pub mod state;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::bounds;
    pub use crate::engine::{
        per_slot_regret, run_experiment, run_replication, run_replication_observed, DeliveryRatio,
        ExperimentResult, ReplicationSeries, SimOptions, SlotRecord,
    };
    pub use crate::env::{
        sample_channels, sample_reward, ChannelState, RewardFamily, RewardModel, RngStream,
    };
    pub use crate::net::{
        brute_force_schedule, max_weight_schedule, objective, FeasibleSet, LinkParams,
        NetworkConfig, Schedule,
    };
    pub use crate::policy::{PolicySpec, TieBreakMode, TieBreaker};
    pub use crate::state::{sample_mean, ucb_estimate, LearningState, LinkStats};
    pub use crate::Error;
}

// The guide's code listings run as doctests.
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/learning.md")]
    mod learning {}
    #[doc = include_str!("../../../book/src/policies.md")]
    mod policies {}
    #[doc = include_str!("../../../book/src/bounds.md")]
    mod bounds {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
