//! Closed-form selection priorities for a fixed bandwidth allocation.
//!
//! With `(gamma, t)` held fixed, the scheduling-aware objective separates per
//! device and each term is convex in its indicator; the stationary point
//!
//! ```text
//! beta_hat = (gamma * B * T_k / L) * log2(tradeoff * h^2 / (N0 * L * ln2))
//! ```
//!
//! projected onto `[0, 1]` is the exact minimizer. The base-2 logarithm pairs
//! with the `2^x` rate law so the stationarity identity is exact. Priorities
//! grow linearly with the allowed time and only logarithmically with the
//! channel, so computation capacity dominates selection.

use crate::error::{Error, Result};
use crate::model::{Device, SystemParams};
use serde::Serialize;
use std::f64::consts::LN_2;

/// Priorities for a device population.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriorityResult {
    /// Clamped priorities in [0, 1].
    pub beta: Vec<f64>,
    /// Pre-clamp stationary points, kept for diagnostics.
    pub unclamped: Vec<f64>,
}

fn priority_parts(
    dev: &Device,
    params: &SystemParams,
    gamma: f64,
    t_allowed: f64,
) -> Result<(f64, f64)> {
    if !(params.tradeoff > 0.0) {
        return Err(Error::Domain(format!(
            "scheduling needs a positive tradeoff, got {}",
            params.tradeoff
        )));
    }
    // No bandwidth or no time to upload: never selected. The closed form is
    // indeterminate here; zero is its limit.
    let h2 = dev.power_gain();
    if gamma <= 0.0 || t_allowed <= 0.0 || h2 <= 0.0 {
        return Ok((0.0, 0.0));
    }
    let log_arg = params.tradeoff * h2 / (params.noise * params.model_size * LN_2);
    let unclamped = gamma * params.bandwidth * t_allowed / params.model_size * log_arg.log2();
    Ok((unclamped, unclamped.clamp(0.0, 1.0)))
}

/// Optimal selection priority of one device given its bandwidth share and
/// allowed upload time. Clamped to [0, 1].
pub fn priority(dev: &Device, params: &SystemParams, gamma: f64, t_allowed: f64) -> Result<f64> {
    priority_parts(dev, params, gamma, t_allowed).map(|(_, clamped)| clamped)
}

/// Applies [`priority`] across a population.
pub fn schedule_all(
    devices: &[Device],
    params: &SystemParams,
    gammas: &[f64],
    t_allowed: &[f64],
) -> Result<PriorityResult> {
    if gammas.len() != devices.len() || t_allowed.len() != devices.len() {
        return Err(Error::Dimension(format!(
            "gamma/time vectors must match {} devices",
            devices.len()
        )));
    }
    let mut beta = Vec::with_capacity(devices.len());
    let mut unclamped = Vec::with_capacity(devices.len());
    for (i, dev) in devices.iter().enumerate() {
        let (raw, clamped) = priority_parts(dev, params, gammas[i], t_allowed[i])?;
        unclamped.push(raw);
        beta.push(clamped);
    }
    Ok(PriorityResult { beta, unclamped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::upload_energy;
    use proptest::prelude::*;

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

    fn device(power_gain: f64) -> Device {
        Device::from_power_gain(0, power_gain, 0.005).unwrap()
    }

    /// Tradeoff making `tradeoff * h^2 / (N0 L ln2)` equal `ratio`.
    fn tradeoff_for_ratio(power_gain: f64, ratio: f64) -> f64 {
        ratio * 1e-8 * 1e4 * LN_2 / power_gain
    }

    #[test]
    fn unit_log_argument_sits_exactly_at_zero() {
        let h2 = 1e-4;
        let p = params(tradeoff_for_ratio(h2, 1.0));
        assert_eq!(priority(&device(h2), &p, 0.02, 0.095).unwrap(), 0.0);
    }

    #[test]
    fn sub_unit_log_argument_clamps_to_zero() {
        let h2 = 1e-4;
        let p = params(tradeoff_for_ratio(h2, 0.5));
        assert_eq!(priority(&device(h2), &p, 0.02, 0.095).unwrap(), 0.0);
    }

    #[test]
    fn strong_incentive_clamps_to_one() {
        // log2 term = 8 makes the stationary point 0.02 * 1e6 * 0.095 / 1e4 * 8 = 1.52.
        let h2 = 1e-4;
        let p = params(tradeoff_for_ratio(h2, 256.0));
        assert!((p.tradeoff - 177.445678223346).abs() < 1e-9);
        let dev = device(h2);
        let result = schedule_all(&[dev], &p, &[0.02], &[0.095]).unwrap();
        assert!((result.unclamped[0] - 1.52).abs() < 1e-12);
        assert_eq!(result.beta[0], 1.0);
    }

    #[test]
    fn nonpositive_tradeoff_is_a_domain_error() {
        let p = params(0.0);
        assert!(matches!(
            priority(&device(1e-4), &p, 0.02, 0.095),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn no_bandwidth_or_no_time_means_zero_priority() {
        let p = params(100.0);
        let dev = device(1e-4);
        assert_eq!(priority(&dev, &p, 0.0, 0.095).unwrap(), 0.0);
        assert_eq!(priority(&dev, &p, 0.02, 0.0).unwrap(), 0.0);
        assert_eq!(priority(&dev, &p, 0.02, -0.01).unwrap(), 0.0);
    }

    #[test]
    fn identical_devices_share_a_priority() {
        let p = params(50.0);
        let devices = vec![device(1e-4); 4];
        let result = schedule_all(&devices, &p, &[0.25; 4], &[0.095; 4]).unwrap();
        assert!(result.beta.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn longer_allowed_time_never_lowers_priority() {
        let h2 = 1e-4;
        // Interior regime: ratio 4 -> log2 = 2.
        let p = params(tradeoff_for_ratio(h2, 4.0));
        let devices = [device(h2), device(h2)];
        let result = schedule_all(&devices, &p, &[0.04, 0.04], &[0.09, 0.05]).unwrap();
        assert!(result.beta[0] >= result.beta[1]);
        assert!(result.beta[0] > 0.0 && result.beta[0] < 1.0);
        assert!(result.beta[1] > 0.0 && result.beta[1] < 1.0);
    }

    proptest! {
        // The clamp is the projection of the stationary point, and nudging
        // beta inside [0, 1] never improves the per-device objective.
        #[test]
        fn clamp_is_locally_optimal(
            h2 in 1e-6f64..1e-2,
            gamma in 0.005f64..1.0,
            t_allowed in 0.005f64..0.1,
            tradeoff in 1e-2f64..1e4,
        ) {
            let p = SystemParams { round_time: t_allowed, ..params(tradeoff) };
            let dev = Device::from_power_gain(0, h2, 0.0).unwrap();
            let result = schedule_all(&[dev], &p, &[gamma], &[t_allowed]).unwrap();
            let beta = result.beta[0];
            prop_assert_eq!(beta, result.unclamped[0].clamp(0.0, 1.0));

            let objective = |b: f64| {
                upload_energy(&dev, &p, gamma, t_allowed, b).unwrap() - tradeoff * b
            };
            let eps = 1e-7;
            let here = objective(beta);
            if beta + eps <= 1.0 {
                prop_assert!(here <= objective(beta + eps) + 1e-12);
            }
            if beta - eps >= 0.0 {
                prop_assert!(here <= objective(beta - eps) + 1e-12);
            }
        }

        // Weak monotonicity in allowed time and channel power.
        #[test]
        fn priority_monotone_in_time_and_channel(
            h2 in 1e-6f64..1e-2,
            gamma in 0.005f64..1.0,
            t_allowed in 0.005f64..0.09,
            tradeoff in 1e-2f64..1e4,
            bump in 1.01f64..2.0,
        ) {
            let p = params(tradeoff);
            let dev = Device::from_power_gain(0, h2, 0.0).unwrap();
            let base = priority(&dev, &p, gamma, t_allowed).unwrap();
            let longer = priority(&dev, &p, gamma, t_allowed * bump).unwrap();
            prop_assert!(longer >= base - 1e-12);
            let stronger = Device::from_power_gain(0, h2 * bump, 0.0).unwrap();
            let better = priority(&stronger, &p, gamma, t_allowed).unwrap();
            prop_assert!(better >= base - 1e-12);
        }
    }
}
