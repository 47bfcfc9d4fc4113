//! Self-validation: closed forms against the brute-force oracles.
//!
//! Each check re-derives the analytic results and compares them to an
//! independent minimizer with the shipped tolerances. The env var
//! `RRM_VALIDATE_PERTURB` (a float) injects that much error into the
//! closed-form outputs before comparison — a mutation hook proving the
//! checks can actually fail.

use crate::{verbose, CliError};
use feel_rrm::bandwidth::{self, kkt_stationarity_residual};
use feel_rrm::joint::{self, JointConfig};
use feel_rrm::model::{Device, SystemParams};
use feel_rrm::oracle::{
    bandwidth_grid_search, exhaustive_schedule_search, priority_scan, GridSpec,
};
use feel_rrm::scheduling;
use feel_rrm::sim::{generate_population, ScenarioConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Fast,
    Full,
}

struct CheckOutcome {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn perturbation() -> f64 {
    std::env::var("RRM_VALIDATE_PERTURB")
        .ok()
        .and_then(|v| v.parse::<f64>().ok())
        .unwrap_or(0.0)
}

fn population(seed: u64, num_devices: usize) -> Vec<Device> {
    let cfg = ScenarioConfig {
        num_devices,
        rng_seed: seed,
        ..ScenarioConfig::default()
    };
    generate_population(&cfg, 0)
}

/// Closed-form allocation against the simplex grid, on K in {2, 3}.
fn check_bandwidth(instances: u64, seed: u64, delta: f64) -> CheckOutcome {
    let params = SystemParams::default();
    let tol = 1e-4;
    let mut max_rel = 0.0f64;
    for i in 0..instances {
        let k = 2 + (i % 2) as usize;
        let devices = population(seed + i, k);
        let beta = vec![1.0; k];
        let result = bandwidth::solve(&devices, &params, &beta);
        let (mut alloc, _) = match result {
            Ok(v) => v,
            Err(e) => {
                return CheckOutcome {
                    name: "bandwidth-vs-grid",
                    pass: false,
                    detail: format!("solver error: {e}"),
                }
            }
        };
        if delta != 0.0 {
            // Shift mass between two devices; stays on the simplex but off
            // the optimum.
            alloc.gamma[0] += delta;
            alloc.gamma[1] -= delta;
            alloc = match feel_rrm::model::Allocation::assemble(
                &devices,
                &params,
                alloc.gamma,
                alloc.upload_time,
                alloc.beta,
            ) {
                Ok(a) => a,
                Err(e) => {
                    return CheckOutcome {
                        name: "bandwidth-vs-grid",
                        pass: false,
                        detail: format!("perturbed allocation invalid: {e}"),
                    }
                }
            };
        }
        let (_, oracle_energy) =
            match bandwidth_grid_search(&devices, &params, &beta, GridSpec::for_simplex(k)) {
                Ok(v) => v,
                Err(e) => {
                    return CheckOutcome {
                        name: "bandwidth-vs-grid",
                        pass: false,
                        detail: format!("oracle error: {e}"),
                    }
                }
            };
        let rel = (alloc.total_upload_energy() - oracle_energy).abs() / oracle_energy;
        max_rel = max_rel.max(rel);
    }
    CheckOutcome {
        name: "bandwidth-vs-grid",
        pass: max_rel <= tol,
        detail: format!(
            "max relative energy error {max_rel:.3e} over {instances} instances (tol {tol:.0e})"
        ),
    }
}

/// Priority closed form against the 1-D scan.
fn check_priority(tuples: u64, seed: u64, delta: f64) -> CheckOutcome {
    let tol = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = GridSpec::new(2000, 4).expect("grid");
    let mut max_abs = 0.0f64;
    for _ in 0..tuples {
        let power_gain = (1e-4 * -(1.0 - rng.gen::<f64>()).ln()).max(1e-9);
        let dev = Device::from_power_gain(0, power_gain, 0.0).expect("device");
        let gamma = 0.005 + 0.995 * rng.gen::<f64>();
        let t_allowed = 0.005 + 0.095 * rng.gen::<f64>();
        let tradeoff = 10f64.powf(rng.gen_range(-2.0..5.0));
        let params = SystemParams {
            round_time: t_allowed,
            tradeoff,
            ..SystemParams::default()
        };
        let closed = match scheduling::priority(&dev, &params, gamma, t_allowed) {
            Ok(v) => (v + delta).clamp(0.0, 1.0),
            Err(e) => {
                return CheckOutcome {
                    name: "priority-vs-scan",
                    pass: false,
                    detail: format!("closed form error: {e}"),
                }
            }
        };
        let (scanned, _) = match priority_scan(&dev, &params, gamma, t_allowed, tradeoff, grid) {
            Ok(v) => v,
            Err(e) => {
                return CheckOutcome {
                    name: "priority-vs-scan",
                    pass: false,
                    detail: format!("oracle error: {e}"),
                }
            }
        };
        max_abs = max_abs.max((closed - scanned).abs());
    }
    CheckOutcome {
        name: "priority-vs-scan",
        pass: max_abs <= tol,
        detail: format!("max |beta difference| {max_abs:.3e} over {tuples} tuples (tol {tol:.0e})"),
    }
}

/// Stationarity and budget residuals of the dual solution.
fn check_kkt(instances: u64, seed: u64, delta: f64) -> CheckOutcome {
    let params = SystemParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_stationarity = 0.0f64;
    let mut max_budget = 0.0f64;
    for i in 0..instances {
        let k = 1 + (rng.gen::<u64>() % 50) as usize;
        let devices = population(seed + 100 + i, k);
        let beta = vec![1.0; k];
        let (alloc, dual) = match bandwidth::solve(&devices, &params, &beta) {
            Ok(v) => v,
            Err(e) => {
                return CheckOutcome {
                    name: "kkt-residuals",
                    pass: false,
                    detail: format!("solver error: {e}"),
                }
            }
        };
        // A perturbed multiplier breaks stationarity by exactly |delta|.
        let nu = dual.nu_star * (1.0 + delta);
        let sum: f64 = alloc.gamma.iter().sum();
        max_budget = max_budget.max((sum - 1.0).abs());
        for (j, dev) in devices.iter().enumerate() {
            if alloc.gamma[j] > 0.0 && alloc.gamma[j] < 1.0 {
                let r = kkt_stationarity_residual(dev, &params, 1.0, alloc.gamma[j], nu)
                    .expect("residual");
                max_stationarity = max_stationarity.max(r.abs() / dual.nu_star);
            }
        }
    }
    CheckOutcome {
        name: "kkt-residuals",
        pass: max_stationarity < 1e-6 && max_budget < 1e-9,
        detail: format!(
            "max relative stationarity {max_stationarity:.3e} (tol 1e-6), \
             max |sum gamma - 1| = {max_budget:.3e} (tol 1e-9) over {instances} instances"
        ),
    }
}

/// Joint rounding quality against exhaustive enumeration.
fn check_joint(instances: u64, k: usize, seed: u64, delta: f64) -> CheckOutcome {
    let tol = 0.05;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_gap = 0.0f64;
    for i in 0..instances {
        let devices = population(seed + 200 + i, k);
        let tradeoff = 10f64.powf(rng.gen_range(-0.3..1.5));
        let params = SystemParams {
            tradeoff,
            ..SystemParams::default()
        };
        let cfg = JointConfig {
            rng_seed: seed + i,
            record_trajectory: false,
            ..JointConfig::default()
        };
        let result = match joint::solve(&devices, &params, &cfg) {
            Ok(v) => v,
            Err(e) => {
                return CheckOutcome {
                    name: "joint-vs-exhaustive",
                    pass: false,
                    detail: format!("joint solver error: {e}"),
                }
            }
        };
        let (_, best) = match exhaustive_schedule_search(&devices, &params, tradeoff) {
            Ok(v) => v,
            Err(e) => {
                return CheckOutcome {
                    name: "joint-vs-exhaustive",
                    pass: false,
                    detail: format!("oracle error: {e}"),
                }
            }
        };
        let objective = result.objective + delta.abs() * result.objective.abs().max(1.0);
        let gap = (objective - best) / best.abs().max(1e-12);
        max_gap = max_gap.max(gap);
    }
    CheckOutcome {
        name: "joint-vs-exhaustive",
        pass: max_gap <= tol,
        detail: format!(
            "max relative gap {max_gap:.3e} over {instances} instances, K = {k} (tol {tol})"
        ),
    }
}

/// Runs the validation table. Returns `Ok(())` only if every check passes.
pub fn run(level: Level, seed: u64) -> Result<(), CliError> {
    let delta = perturbation();
    if delta != 0.0 {
        eprintln!("warning: RRM_VALIDATE_PERTURB = {delta}; closed forms are being perturbed");
    }
    let outcomes = match level {
        Level::Fast => vec![
            check_bandwidth(20, seed, delta),
            check_priority(200, seed + 1, delta),
            check_kkt(200, seed + 2, delta),
            check_joint(10, 6, seed + 3, delta),
        ],
        Level::Full => vec![
            check_bandwidth(100, seed, delta),
            check_priority(1000, seed + 1, delta),
            check_kkt(1000, seed + 2, delta),
            check_joint(50, 8, seed + 3, delta),
        ],
    };

    println!("{:<22} {:<6} detail", "check", "result");
    let mut all_pass = true;
    for outcome in &outcomes {
        println!(
            "{:<22} {:<6} {}",
            outcome.name,
            if outcome.pass { "PASS" } else { "FAIL" },
            outcome.detail
        );
        all_pass &= outcome.pass;
    }
    println!(
        "validation: {} ({}/{} checks)",
        if all_pass { "PASS" } else { "FAIL" },
        outcomes.iter().filter(|o| o.pass).count(),
        outcomes.len()
    );
    if verbose() {
        eprintln!("validate: level {level:?}, seed {seed}");
    }
    if all_pass {
        Ok(())
    } else {
        Err(CliError::Validation)
    }
}
