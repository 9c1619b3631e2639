//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Run with `cargo test --release --test acceptance`.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use agesched::bounds::{age_bound, fading_age_bound, regret_bound};
use agesched::config::{five_link_network, ten_link_network, REFERENCE_ETAS};
use agesched::net::{
    brute_force_schedule, max_weight_schedule, objective, FeasibleSet, NetworkConfig, Schedule,
};
use agesched::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn sim_err(e: agesched::Error) -> String {
    format!("simulation error: {e}")
}

/// Setup (i), age-based policy: total age settles at 15 from slot 7 on and the
/// running average never exceeds 25.
fn round_robin_steady_state() -> Outcome {
    let net = five_link_network();
    let run = run_replication(
        &net,
        &PolicySpec::AgeBased,
        1_000,
        1,
        &SimOptions::default(),
    )
    .map_err(sim_err)?;
    let bad_age: Vec<u64> = run
        .slots
        .iter()
        .zip(&run.total_age)
        .filter(|(&t, &z)| t >= 7 && z != 15.0)
        .map(|(&t, _)| t)
        .collect();
    let bound = age_bound(0.0, 5, 1.0).map_err(sim_err)?;
    let peak = run.running_avg_age.iter().cloned().fold(0.0, f64::max);
    check(
        bad_age.is_empty() && peak <= bound && run.slots.len() == 1_000,
        format!(
            "slots t>=7 with total age != 15: {}; peak running average age {peak} (bound {bound})",
            bad_age.len()
        ),
    )
}

/// Every replication's running average total age stays under
/// `(eta + 1) N^2 / p_min` at every slot.
fn age_bound_holds() -> Outcome {
    let opts = SimOptions {
        retain_replications: true,
        ..Default::default()
    };
    let mut worst_ratio: f64 = 0.0;
    let mut violations = 0u64;
    let mut checked = 0u64;
    for net in [five_link_network(), ten_link_network()] {
        for &eta in &REFERENCE_ETAS {
            let bound = age_bound(eta, net.num_links(), net.p_min()).map_err(sim_err)?;
            let exp = run_experiment(
                &net,
                &PolicySpec::laes(eta),
                10_000,
                20,
                2024,
                &opts,
                1,
                None,
            )
            .map_err(sim_err)?;
            for rep in exp.replications.as_ref().expect("retained") {
                for &a in &rep.running_avg_age {
                    checked += 1;
                    if a > bound {
                        violations += 1;
                    }
                    worst_ratio = worst_ratio.max(a / bound);
                }
                violations += rep.summary.age_bound_violations;
            }
        }
    }
    check(
        violations == 0,
        format!("{checked} (replication, slot) points, {violations} violations, max avg/bound = {worst_ratio:.4}"),
    )
}

struct Final {
    label: String,
    regret: (f64, f64),
    age: (f64, f64),
}

fn final_values(
    net: &NetworkConfig,
    policy: PolicySpec,
    reps: u64,
    seed: u64,
) -> Result<Final, String> {
    let exp = run_experiment(
        net,
        &policy,
        30_000,
        reps,
        seed,
        &SimOptions::default(),
        1,
        None,
    )
    .map_err(sim_err)?;
    Ok(Final {
        label: policy.label(),
        regret: (
            exp.cumulative_regret.last_mean(),
            exp.cumulative_regret.last_stderr(),
        ),
        age: (
            exp.running_avg_age.last_mean(),
            exp.running_avg_age.last_stderr(),
        ),
    })
}

/// `a` is below `b` by more than twice the standard error of the difference.
fn below(a: (f64, f64), b: (f64, f64)) -> bool {
    b.0 - a.0 > 2.0 * (a.1 * a.1 + b.1 * b.1).sqrt()
}

/// Setup (i): regret UCB < 200 < 50 < 10 < 0 and average age in the reverse
/// order among the LAES variants, each gap above two standard errors.
fn tradeoff_ordering() -> Outcome {
    let net = five_link_network();
    let chain = [
        PolicySpec::UcbOnly,
        PolicySpec::laes(200.0),
        PolicySpec::laes(50.0),
        PolicySpec::laes(10.0),
        PolicySpec::laes(0.0),
    ];
    let finals = chain
        .iter()
        .map(|&p| final_values(&net, p, 100, 7))
        .collect::<Result<Vec<_>, _>>()?;
    let regret_ok = finals.windows(2).all(|w| below(w[0].regret, w[1].regret));
    let laes = &finals[1..];
    let age_ok = laes.windows(2).all(|w| below(w[1].age, w[0].age));
    let detail = finals
        .iter()
        .map(|f| {
            format!(
                "{}: regret {:.1}±{:.1}, age {:.2}±{:.2}",
                f.label, f.regret.0, f.regret.1, f.age.0, f.age.1
            )
        })
        .collect::<Vec<_>>()
        .join("; ");
    check(
        regret_ok && age_ok,
        format!("regret order {regret_ok}, age order {age_ok}: {detail}"),
    )
}

/// Setup (i): UCB's running average age exceeds 1000 at T while LAES(200)
/// stays within 5025.
fn ucb_age_divergence() -> Outcome {
    let net = five_link_network();
    let ucb = final_values(&net, PolicySpec::UcbOnly, 20, 11)?;
    let laes = final_values(&net, PolicySpec::laes(200.0), 20, 11)?;
    let cap = age_bound(200.0, 5, 1.0).map_err(sim_err)?;
    check(
        ucb.age.0 > 1000.0 && laes.age.0 <= cap,
        format!(
            "UCB avg age {:.1}; LAES(200) avg age {:.2} (cap {cap})",
            ucb.age.0, laes.age.0
        ),
    )
}

/// Two always-ON links, mu = (0.9, 0.5), eta = 50: weak link period 20 +- 1,
/// weak mean age within 20% of 10.5, strong within 10% of 1.05.
fn two_link_prediction() -> Outcome {
    let net = NetworkConfig::non_fading(&[0.9, 0.5], FeasibleSet::AtMostK(1)).map_err(sim_err)?;
    let policy = PolicySpec::laes(50.0);
    let predicted = bounds::two_link_prediction(50.0, 0.9, 0.5).map_err(sim_err)?;
    let burn_in = 1_000u64;
    let (mut gap_sum, mut gaps) = (0u64, 0u64);
    let (mut weak_age, mut strong_age, mut samples) = (0u64, 0u64, 0u64);
    for rep in 0..20 {
        let mut last = None;
        run_replication_observed(&net, &policy, 30_000, 5, rep, &SimOptions::default(), |r| {
            if r.slot < burn_in {
                return;
            }
            if r.chosen.contains(1) {
                if let Some(prev) = last {
                    gap_sum += r.slot - prev;
                    gaps += 1;
                }
                last = Some(r.slot);
            }
            // ages after the slot's update
            weak_age += r.state.link(1).age;
            strong_age += r.state.link(0).age;
            samples += 1;
        })
        .map_err(sim_err)?;
    }
    let period = gap_sum as f64 / gaps as f64;
    let weak = weak_age as f64 / samples as f64;
    let strong = strong_age as f64 / samples as f64;
    let p = predicted.period as f64;
    let ok_period = (period - p).abs() <= 1.0;
    let ok_weak = (weak - predicted.weak_link_avg_age).abs() <= 0.2 * predicted.weak_link_avg_age;
    let ok_strong =
        (strong - predicted.strong_link_avg_age).abs() <= 0.1 * predicted.strong_link_avg_age;
    check(
        ok_period && ok_weak && ok_strong,
        format!(
            "period {period:.2} vs {p} (ok {ok_period}); weak age {weak:.3} vs {} (ok {ok_weak}); strong age {strong:.4} vs {} (ok {ok_strong})",
            predicted.weak_link_avg_age, predicted.strong_link_avg_age
        ),
    )
}

fn bound_calculators() -> Outcome {
    let age = age_bound(0.0, 5, 1.0).map_err(sim_err)?;
    let fading =
        fading_age_bound(&[0.8, 0.7, 0.6, 0.9, 0.2, 0.5, 0.8, 0.9, 0.7, 0.85]).map_err(sim_err)?;
    let regret = regret_bound(100.0, 5, 30_000, 1).map_err(sim_err)?;
    let fading_rel = (fading - 4.6e7).abs() / 4.6e7;
    let regret_rel = (regret - 7617.7).abs() / 7617.7;
    check(
        age == 25.0 && fading_rel <= 0.05 && regret_rel <= 0.001,
        format!(
            "age bound {age}; fading bound {fading:.4e} (rel err {fading_rel:.4}); regret bound {regret:.3} (rel err {regret_rel:.2e})"
        ),
    )
}

/// 1000 random instances: the fast solver matches enumeration in objective and
/// in the schedule picked by the tie order.
fn solver_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let (mut value_mismatch, mut choice_mismatch, mut tied) = (0, 0, 0);
    for i in 0..1_000 {
        let n = rng.random_range(1..=12usize);
        let feasible = if i % 2 == 0 {
            FeasibleSet::AtMostK(rng.random_range(1..=n.min(3)))
        } else {
            let count = rng.random_range(1..=6);
            FeasibleSet::ExplicitList(
                (0..count)
                    .map(|_| {
                        let size = rng.random_range(1..=n.min(4));
                        Schedule::from_indices((0..size).map(|_| rng.random_range(0..n)))
                    })
                    .collect(),
            )
        };
        let net = NetworkConfig::non_fading(&vec![0.5; n], feasible).map_err(sim_err)?;
        // every fourth instance uses small integers to force ties
        let weights: Vec<f64> = (0..n)
            .map(|_| {
                if i % 4 >= 2 {
                    f64::from(rng.random_range(0..3u8))
                } else {
                    rng.random_range(0.0..=10.0)
                }
            })
            .collect();
        let channels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.7)).collect();
        let fast = max_weight_schedule(&net, &weights, &channels).map_err(sim_err)?;
        let slow = brute_force_schedule(&net, &weights, &channels).map_err(sim_err)?;
        let (vf, vs) = (
            objective(&weights, &channels, &fast),
            objective(&weights, &channels, &slow),
        );
        if vf != vs {
            value_mismatch += 1;
        }
        if fast != slow {
            choice_mismatch += 1;
        }
        if i % 4 >= 2 {
            tied += 1;
        }
    }
    check(
        value_mismatch == 0 && choice_mismatch == 0,
        format!("1000 instances ({tied} with integer weights): {value_mismatch} objective and {choice_mismatch} tie-order mismatches"),
    )
}

/// The total-age drift identity, checked by an observer that keeps its own
/// copy of the ages, on every slot of a spread of runs.
fn lyapunov_identity() -> Outcome {
    let mut slots = 0u64;
    let mut failures = 0u64;
    let runs: Vec<(NetworkConfig, PolicySpec)> = vec![
        (five_link_network(), PolicySpec::AgeBased),
        (five_link_network(), PolicySpec::UcbOnly),
        (five_link_network(), PolicySpec::RoundRobin),
        (ten_link_network(), PolicySpec::laes(10.0)),
        (ten_link_network(), PolicySpec::laes(200.0)),
        (ten_link_network(), PolicySpec::Genie),
    ];
    for (net, policy) in &runs {
        for rep in 0..5 {
            let n = net.num_links() as u64;
            let mut ages = vec![0u64; net.num_links()];
            let out =
                run_replication_observed(net, policy, 5_000, 3, rep, &SimOptions::default(), |r| {
                    let v: u64 = ages.iter().sum();
                    let served: u64 = r
                        .chosen
                        .delivered(r.channels.as_slice())
                        .map(|l| ages[l])
                        .sum();
                    let next: Vec<u64> = r.state.ages().collect();
                    let v_next: u64 = next.iter().sum();
                    slots += 1;
                    if v_next != v - served + n || v != r.total_age {
                        failures += 1;
                    }
                    ages = next;
                })
                .map_err(sim_err)?;
            if out.summary.lyapunov_checks != 5_000 {
                failures += 1;
            }
        }
    }
    check(
        failures == 0,
        format!("{slots} slots checked, {failures} failures"),
    )
}

fn read_tables(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut tables: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    tables.sort();
    tables
}

/// `reproduce paper-1` with 1 and 4 workers writes byte-identical tables.
fn determinism_across_workers() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let bin = env!("CARGO_BIN_EXE_agesched");
    let mut outputs = Vec::new();
    for workers in ["1", "4"] {
        let dir = tmp.path().join(format!("w{workers}"));
        let status = Command::new(bin)
            .args([
                "reproduce",
                "paper-1",
                "--seed",
                "99",
                "--replications",
                "12",
                "--workers",
                workers,
            ])
            .arg("--out-dir")
            .arg(&dir)
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(String::from_utf8_lossy(&status.stderr).into_owned());
        }
        outputs.push(read_tables(&dir));
    }
    let same = outputs[0] == outputs[1];
    check(
        same && outputs[0].len() == 6,
        format!("{} tables per run, identical: {same}", outputs[0].len()),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("1 round-robin steady state", round_robin_steady_state),
        ("2 age bound holds universally", age_bound_holds),
        ("3 regret/age trade-off ordering", tradeoff_ordering),
        ("4 UCB age divergence vs bounded LAES", ucb_age_divergence),
        ("5 two-link period prediction", two_link_prediction),
        ("6 bound calculators", bound_calculators),
        ("7 solver oracle equivalence", solver_oracle),
        ("8 Lyapunov identity", lyapunov_identity),
        (
            "9 determinism across worker counts",
            determinism_across_workers,
        ),
    ];
    let mut failed = 0;
    for (name, criterion) in criteria {
        let start = Instant::now();
        let outcome = criterion();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {name} ({secs:.1}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name} ({secs:.1}s): {detail}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
