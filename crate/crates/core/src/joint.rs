//! Joint bandwidth allocation and scheduling by alternating minimization.
//!
//! The binary selection problem is relaxed to `beta in [0, 1]`, making the
//! whole problem convex, and solved by alternating two exact block updates:
//! bandwidth fractions for the current priorities ([`crate::bandwidth::solve`])
//! and priorities for the current fractions
//! ([`crate::scheduling::schedule_all`]). Each half-step minimizes its block
//! exactly, so the relaxed objective never increases. On convergence the
//! priorities are thresholded to a binary schedule and the bandwidth is
//! re-solved for it.

use crate::bandwidth;
use crate::error::{Error, Result};
use crate::model::{allowed_upload_time, total_objective, Allocation, Device, SystemParams};
use crate::scheduling;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// How the relaxed priorities are initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitMode {
    /// Independent uniform draws in (0, 1], seeded by `rng_seed`.
    RandomUniform,
    /// Every feasible device starts fully selected.
    AllOnes,
}

/// Knobs of the alternating optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JointConfig {
    pub max_iters: usize,
    /// Convergence threshold on the max-norm change of the priorities.
    pub convergence_tol: f64,
    /// Priorities at or above this round to 1, below to 0.
    pub rounding_threshold: f64,
    pub init_mode: InitMode,
    pub rng_seed: u64,
    /// Keep the per-iteration priority vectors in the result.
    pub record_trajectory: bool,
}

impl Default for JointConfig {
    fn default() -> Self {
        Self {
            max_iters: 200,
            convergence_tol: 1e-6,
            rounding_threshold: 0.5,
            init_mode: InitMode::RandomUniform,
            rng_seed: 0,
            record_trajectory: true,
        }
    }
}

/// Priorities below this are snapped to exactly zero between iterations.
/// A priority this small shrinks geometrically (the bandwidth it buys shrinks
/// with it), so zero is its limit; snapping keeps the shares from
/// underflowing first.
const PRIORITY_FLOOR: f64 = 1e-12;

impl JointConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if !(self.rounding_threshold > 0.0 && self.rounding_threshold < 1.0) {
            return Err(Error::Config(format!(
                "rounding threshold must lie strictly inside (0, 1), got {}",
                self.rounding_threshold
            )));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(Error::Config(format!(
                "convergence tolerance must be positive, got {}",
                self.convergence_tol
            )));
        }
        Ok(())
    }
}

/// Outcome of a joint run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointResult {
    /// Binary schedule with its re-solved bandwidth and energies.
    pub final_alloc: Allocation,
    /// Priority vectors per iteration (entry 0 is the initialization), when
    /// recording was requested.
    pub relaxed_trajectory: Option<Vec<Vec<f64>>>,
    /// Relaxed objective after each iteration; non-increasing.
    pub relaxed_objectives: Vec<f64>,
    pub iterations_used: usize,
    pub converged: bool,
    /// `sum E_up - tradeoff * sum beta` of the rounded schedule.
    pub objective: f64,
}

impl JointResult {
    /// Number of scheduled devices in the rounded schedule.
    pub fn scheduled_count(&self) -> usize {
        self.final_alloc.beta.iter().filter(|&&b| b > 0.0).count()
    }
}

fn empty_result(
    num_devices: usize,
    trajectory: Option<Vec<Vec<f64>>>,
    relaxed_objectives: Vec<f64>,
    iterations_used: usize,
    converged: bool,
) -> JointResult {
    JointResult {
        final_alloc: Allocation::empty(num_devices),
        relaxed_trajectory: trajectory,
        relaxed_objectives,
        iterations_used,
        converged,
        objective: 0.0,
    }
}

/// Runs the alternating optimizer and rounds the result to a binary schedule.
///
/// Devices that cannot meet the deadline (or have a dead channel) are frozen
/// at `beta = 0` throughout. Non-convergence within `max_iters` is reported
/// through the `converged` flag, not an error. Deterministic for a given
/// `rng_seed`.
pub fn solve(devices: &[Device], params: &SystemParams, cfg: &JointConfig) -> Result<JointResult> {
    params.validate()?;
    cfg.validate()?;
    if devices.is_empty() {
        return Err(Error::Config("no devices".into()));
    }
    if !(params.tradeoff > 0.0) {
        return Err(Error::Domain(format!(
            "joint optimization needs a positive tradeoff, got {}",
            params.tradeoff
        )));
    }

    let k = devices.len();
    let feasible: Vec<bool> = devices
        .iter()
        .map(|d| allowed_upload_time(d, params) > 0.0 && d.power_gain() > 0.0)
        .collect();
    let t_allowed: Vec<f64> = devices
        .iter()
        .map(|d| allowed_upload_time(d, params))
        .collect();

    let mut beta: Vec<f64> = match cfg.init_mode {
        InitMode::RandomUniform => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
            // Draw for every device so the stream is independent of
            // feasibility, then freeze the infeasible ones.
            (0..k)
                .map(|i| {
                    let draw = 1.0 - rng.gen::<f64>(); // (0, 1]
                    if feasible[i] {
                        draw
                    } else {
                        0.0
                    }
                })
                .collect()
        }
        InitMode::AllOnes => feasible
            .iter()
            .map(|&ok| if ok { 1.0 } else { 0.0 })
            .collect(),
    };

    let mut trajectory = cfg.record_trajectory.then(|| vec![beta.clone()]);
    let mut relaxed_objectives = Vec::new();

    if beta.iter().all(|&b| b == 0.0) {
        // Nothing can be scheduled at all.
        return Ok(empty_result(k, trajectory, relaxed_objectives, 0, true));
    }

    let mut iterations_used = 0;
    let mut converged = false;
    for _ in 0..cfg.max_iters {
        iterations_used += 1;

        // Bandwidth block: exact minimizer for the current priorities.
        let (alloc, _) = bandwidth::solve(devices, params, &beta)?;

        // Scheduling block: exact minimizer for the current fractions.
        let mut next = scheduling::schedule_all(devices, params, &alloc.gamma, &t_allowed)?;
        for b in &mut next.beta {
            if *b < PRIORITY_FLOOR {
                *b = 0.0;
            }
        }

        let trial = Allocation::assemble(
            devices,
            params,
            alloc.gamma.clone(),
            alloc.upload_time.clone(),
            next.beta.clone(),
        )?;
        relaxed_objectives.push(total_objective(devices, params, &trial)?);

        let delta = beta
            .iter()
            .zip(&next.beta)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        beta = next.beta;
        if let Some(t) = trajectory.as_mut() {
            t.push(beta.clone());
        }

        if beta.iter().all(|&b| b == 0.0) {
            // The incentive keeps every device out; this is a fixed point.
            converged = true;
            return Ok(empty_result(
                k,
                trajectory,
                relaxed_objectives,
                iterations_used,
                converged,
            ));
        }
        if delta <= cfg.convergence_tol {
            converged = true;
            break;
        }
    }

    // Threshold to a binary schedule (ties round up) and re-solve bandwidth.
    let rounded: Vec<f64> = beta
        .iter()
        .map(|&b| {
            if b >= cfg.rounding_threshold {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    if rounded.iter().all(|&b| b == 0.0) {
        return Ok(empty_result(
            k,
            trajectory,
            relaxed_objectives,
            iterations_used,
            converged,
        ));
    }
    let (final_alloc, _) = bandwidth::solve(devices, params, &rounded)?;
    let objective = total_objective(devices, params, &final_alloc)?;

    Ok(JointResult {
        final_alloc,
        relaxed_trajectory: trajectory,
        relaxed_objectives,
        iterations_used,
        converged,
        objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(tradeoff: f64) -> SystemParams {
        SystemParams {
            bandwidth: 1e6,
            noise: 1e-8,
            model_size: 1e4,
            round_time: 0.1,
            tradeoff,
            compute_energy: 0.0,
        }
    }

    fn population(seed: u64, k: usize) -> Vec<Device> {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..k)
            .map(|i| {
                let h2 = 1e-4 * -(1.0 - rng.gen::<f64>()).ln();
                Device::from_power_gain(i, h2.max(1e-9), 0.010 * rng.gen::<f64>()).unwrap()
            })
            .collect()
    }

    #[test]
    fn negligible_reward_schedules_nobody() {
        let devices = population(11, 6);
        let p = params(1e-12);
        let result = solve(&devices, &p, &JointConfig::default()).unwrap();
        assert_eq!(result.scheduled_count(), 0);
        assert_eq!(result.objective, 0.0);
        assert!(result.final_alloc.beta.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn huge_reward_schedules_every_feasible_device() {
        let devices = population(12, 6);
        let p = params(1e9);
        let result = solve(&devices, &p, &JointConfig::default()).unwrap();
        assert_eq!(result.scheduled_count(), 6);
        assert!(result.converged);
        // Identical to solving bandwidth directly on the full set.
        let (full, _) = bandwidth::solve(&devices, &p, &[1.0; 6]).unwrap();
        for (got, want) in result.final_alloc.gamma.iter().zip(&full.gamma) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn relaxed_objective_descends_and_converges_to_a_fixed_point() {
        let devices = population(13, 10);
        let p = params(2.0);
        let result = solve(&devices, &p, &JointConfig::default()).unwrap();
        assert!(result.converged);
        for pair in result.relaxed_objectives.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-9, "objective rose: {pair:?}");
        }

        // Re-applying either block update at convergence changes nothing.
        let trajectory = result.relaxed_trajectory.as_ref().unwrap();
        let last = trajectory.last().unwrap();
        let (alloc, _) = bandwidth::solve(&devices, &p, last).unwrap();
        let t_allowed: Vec<f64> = devices.iter().map(|d| allowed_upload_time(d, &p)).collect();
        let re = scheduling::schedule_all(&devices, &p, &alloc.gamma, &t_allowed).unwrap();
        for (a, b) in last.iter().zip(&re.beta) {
            assert!((a - b).abs() <= 2e-6);
        }
    }

    #[test]
    fn infeasible_devices_stay_frozen() {
        let mut devices = population(14, 5);
        devices[2].compute_time = 0.5; // cannot meet the 0.1 s round
        let p = params(5.0);
        let result = solve(&devices, &p, &JointConfig::default()).unwrap();
        assert_eq!(result.final_alloc.beta[2], 0.0);
        assert_eq!(result.final_alloc.per_device_energy[2], 0.0);
        // Scheduled devices all fit their deadline and hold real bandwidth.
        for (i, dev) in devices.iter().enumerate() {
            if result.final_alloc.beta[i] > 0.0 {
                assert!(result.final_alloc.gamma[i] > 0.0);
                assert!(result.final_alloc.upload_time[i] <= allowed_upload_time(dev, &p));
            }
        }
    }

    #[test]
    fn runs_are_deterministic_per_seed() {
        let devices = population(15, 8);
        let p = params(1.5);
        let cfg = JointConfig {
            rng_seed: 99,
            ..JointConfig::default()
        };
        let a = solve(&devices, &p, &cfg).unwrap();
        let b = solve(&devices, &p, &cfg).unwrap();
        assert_eq!(a, b);
        let other = solve(
            &devices,
            &p,
            &JointConfig {
                rng_seed: 100,
                ..cfg
            },
        )
        .unwrap();
        // Different initialization may or may not change the outcome, but the
        // trajectory must differ at the start.
        assert_ne!(
            other.relaxed_trajectory.as_ref().unwrap()[0],
            a.relaxed_trajectory.as_ref().unwrap()[0]
        );
    }

    #[test]
    fn scheduled_count_matches_indicator_sum() {
        let devices = population(16, 12);
        let p = params(1.0);
        let result = solve(&devices, &p, &JointConfig::default()).unwrap();
        let weight = result.final_alloc.scheduled_weight();
        assert_eq!(result.scheduled_count() as f64, weight);
    }

    #[test]
    fn all_ones_init_is_supported() {
        let devices = population(17, 6);
        let p = params(2.0);
        let cfg = JointConfig {
            init_mode: InitMode::AllOnes,
            ..JointConfig::default()
        };
        let result = solve(&devices, &p, &cfg).unwrap();
        assert_eq!(result.relaxed_trajectory.as_ref().unwrap()[0], vec![1.0; 6]);
        assert!(result.converged);
    }

    #[test]
    fn bad_config_is_rejected() {
        let devices = population(18, 3);
        let p = params(1.0);
        let cfg = JointConfig {
            rounding_threshold: 1.0,
            ..JointConfig::default()
        };
        assert!(matches!(solve(&devices, &p, &cfg), Err(Error::Config(_))));
        let cfg = JointConfig {
            max_iters: 0,
            ..JointConfig::default()
        };
        assert!(matches!(solve(&devices, &p, &cfg), Err(Error::Config(_))));
    }
}
