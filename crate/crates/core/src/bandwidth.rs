//! Optimal bandwidth partitioning for a fixed (possibly relaxed) schedule.
//!
//! With upload times pinned at their deadlines (`t_k = T_k`, which never
//! hurts because energy is non-increasing in time), minimizing total upload
//! energy over the fractions `gamma` subject to `sum gamma = 1` has the
//! closed-form stationarity inverse
//!
//! ```text
//! gamma_k(nu) = beta_k * L * ln2 / (B * T_k * [1 + W((h_k^2 nu - B T_k N0) / (B T_k N0 e))])
//! ```
//!
//! where `W` is the principal Lambert W branch and `nu` prices the shared
//! bandwidth. `sum_k gamma_k(nu)` decreases strictly from infinity to zero on
//! `nu > 0`, so the unique market-clearing `nu*` with `sum gamma = 1` is
//! found by bisection. Weaker channels and tighter deadlines receive larger
//! fractions — the opposite of rate-centric water-filling.

use crate::error::{Error, Result};
use crate::model::{allowed_upload_time, Allocation, Device, SystemParams};
use crate::numerics::{bisect_decreasing, lambert_w0, RootBracket};
use serde::Serialize;
use std::cell::Cell;
use std::f64::consts::{E, LN_2};

/// Sentinel returned by [`gamma_of_nu`] when the multiplier is too small to
/// bound the demand (the W argument sits at its branch point).
pub const GAMMA_UNBOUNDED: f64 = f64::INFINITY;

/// Residual tolerance driven by the dual bisection.
const DUAL_TOL: f64 = 1e-12;
/// Contractual bound on `|sum gamma - 1|` for a returned allocation.
const SUM_GAMMA_TOL: f64 = 1e-9;
/// Cap on geometric bracket expansion for the dual variable.
const MAX_BRACKET_DOUBLINGS: usize = 200;

/// Outcome of the dual solve behind an optimal allocation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualSolveReport {
    /// Market-clearing multiplier of the `sum gamma = 1` constraint.
    pub nu_star: f64,
    /// Number of demand evaluations spent by bracketing plus bisection.
    pub iterations: u32,
    /// `|sum gamma(nu_star) - 1|`.
    pub residual: f64,
}

/// Closed-form bandwidth fraction of one device at multiplier `nu`.
///
/// Returns 0 exactly when `beta == 0`. At `nu = 0` the demand is unbounded
/// and [`GAMMA_UNBOUNDED`] is returned; the dual solver reads it as "price
/// too low".
pub fn gamma_of_nu(dev: &Device, params: &SystemParams, beta: f64, nu: f64) -> Result<f64> {
    if beta == 0.0 {
        return Ok(0.0);
    }
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::Domain(format!(
            "device {}: selection indicator must lie in [0, 1], got {beta}",
            dev.id
        )));
    }
    if !(nu >= 0.0) {
        return Err(Error::Domain(format!("negative multiplier {nu}")));
    }
    let t_allowed = allowed_upload_time(dev, params);
    if t_allowed <= 0.0 {
        return Err(Error::Domain(format!(
            "device {} cannot meet the deadline (allowed time {t_allowed} s) yet is scheduled",
            dev.id
        )));
    }
    let h2 = dev.power_gain();
    if h2 <= 0.0 {
        return Err(Error::Domain(format!(
            "device {}: zero channel gain with positive selection",
            dev.id
        )));
    }
    let btn = params.bandwidth * t_allowed * params.noise;
    // Written as a shifted ratio so the argument can never round below the
    // branch point.
    let arg = h2 * nu / (btn * E) - 1.0 / E;
    let w = lambert_w0(arg)?;
    let denom = 1.0 + w;
    if denom <= 0.0 {
        return Ok(GAMMA_UNBOUNDED);
    }
    Ok(beta * params.model_size * LN_2 / (params.bandwidth * t_allowed * denom))
}

/// Per-device constants reused across demand evaluations.
struct DemandTerm {
    /// `beta * L * ln2 / (B * T_k)`.
    coef: f64,
    /// `h^2 / (B * T_k * N0 * e)`.
    arg_scale: f64,
}

impl DemandTerm {
    fn new(dev: &Device, params: &SystemParams, beta: f64) -> Self {
        let t_allowed = allowed_upload_time(dev, params);
        let btn = params.bandwidth * t_allowed * params.noise;
        Self {
            coef: beta * params.model_size * LN_2 / (params.bandwidth * t_allowed),
            arg_scale: dev.power_gain() / (btn * E),
        }
    }

    fn gamma(&self, nu: f64) -> f64 {
        let arg = self.arg_scale * nu - 1.0 / E;
        // The argument is >= -1/e by construction.
        let w = lambert_w0(arg).expect("demand argument within the W domain");
        let denom = 1.0 + w;
        if denom <= 0.0 {
            GAMMA_UNBOUNDED
        } else {
            self.coef / denom
        }
    }
}

/// Multiplier satisfying interior stationarity at a given `gamma`; used for
/// the single-device shortcut and exposed for residual checks.
fn stationary_nu(dev: &Device, params: &SystemParams, beta: f64, gamma: f64) -> f64 {
    let t_allowed = allowed_upload_time(dev, params);
    let c = params.bandwidth * t_allowed * params.noise / dev.power_gain();
    let x = beta * params.model_size / (gamma * params.bandwidth * t_allowed);
    c * (1.0 + (x * LN_2 - 1.0) * (x * LN_2).exp())
}

/// Stationarity residual of the energy objective at `(gamma, nu)` for one
/// device: `dE/dgamma + nu`, which vanishes at an interior optimum. Callers
/// normalize by `nu` for a relative check.
pub fn kkt_stationarity_residual(
    dev: &Device,
    params: &SystemParams,
    beta: f64,
    gamma: f64,
    nu: f64,
) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::Domain(format!(
            "device {}: stationarity needs an interior gamma, got {gamma}",
            dev.id
        )));
    }
    let t_allowed = allowed_upload_time(dev, params);
    if t_allowed <= 0.0 {
        return Err(Error::Domain(format!(
            "device {}: nonpositive allowed time {t_allowed}",
            dev.id
        )));
    }
    let h2 = dev.power_gain();
    let c = params.bandwidth * t_allowed * params.noise / h2;
    let x = beta * params.model_size / (gamma * params.bandwidth * t_allowed);
    let two_x = (x * LN_2).exp();
    Ok(c * (two_x - x * LN_2 * two_x - 1.0) + nu)
}

fn validate_schedule(
    devices: &[Device],
    params: &SystemParams,
    beta: &[f64],
) -> Result<Vec<usize>> {
    params.validate()?;
    if beta.len() != devices.len() {
        return Err(Error::Dimension(format!(
            "{} selection indicators for {} devices",
            beta.len(),
            devices.len()
        )));
    }
    let mut scheduled = Vec::new();
    for (i, (&b, dev)) in beta.iter().zip(devices).enumerate() {
        if b == 0.0 {
            continue;
        }
        if !(b > 0.0 && b <= 1.0) {
            return Err(Error::Domain(format!(
                "device {}: selection indicator must lie in [0, 1], got {b}",
                dev.id
            )));
        }
        if allowed_upload_time(dev, params) <= 0.0 {
            return Err(Error::Domain(format!(
                "device {} cannot meet the deadline yet is scheduled",
                dev.id
            )));
        }
        if dev.power_gain() <= 0.0 {
            return Err(Error::Domain(format!(
                "device {}: zero channel gain with positive selection",
                dev.id
            )));
        }
        scheduled.push(i);
    }
    if scheduled.is_empty() {
        return Err(Error::InfeasibleSchedule(
            "no device has a positive selection indicator".into(),
        ));
    }
    Ok(scheduled)
}

/// Upload times pinned at the deadline for scheduled devices, clamped to zero
/// for the rest (their value is irrelevant; they transmit nothing).
fn pinned_upload_times(devices: &[Device], params: &SystemParams, beta: &[f64]) -> Vec<f64> {
    devices
        .iter()
        .zip(beta)
        .map(|(dev, &b)| {
            let t_allowed = allowed_upload_time(dev, params);
            if b > 0.0 {
                t_allowed
            } else {
                t_allowed.max(0.0)
            }
        })
        .collect()
}

/// Minimum-energy bandwidth allocation for a fixed schedule.
///
/// Pins every upload time at its deadline, prices bandwidth by bisection so
/// the closed-form fractions sum to one, and derives per-device energies and
/// power densities. Rejects schedules that select nobody, or select a device
/// that cannot meet the deadline.
pub fn solve(
    devices: &[Device],
    params: &SystemParams,
    beta: &[f64],
) -> Result<(Allocation, DualSolveReport)> {
    let scheduled = validate_schedule(devices, params, beta)?;
    let upload_time = pinned_upload_times(devices, params, beta);

    // A single scheduled device owns the whole band; no dual solve needed.
    if scheduled.len() == 1 {
        let i = scheduled[0];
        let mut gamma = vec![0.0; devices.len()];
        gamma[i] = 1.0;
        let report = DualSolveReport {
            nu_star: stationary_nu(&devices[i], params, beta[i], 1.0),
            iterations: 0,
            residual: 0.0,
        };
        let alloc = Allocation::assemble(devices, params, gamma, upload_time, beta.to_vec())?;
        return Ok((alloc, report));
    }

    let terms: Vec<DemandTerm> = scheduled
        .iter()
        .map(|&i| DemandTerm::new(&devices[i], params, beta[i]))
        .collect();
    let evals = Cell::new(0u32);
    let excess_demand = |nu: f64| -> f64 {
        evals.set(evals.get() + 1);
        let mut sum = 0.0;
        for term in &terms {
            let g = term.gamma(nu);
            if g == GAMMA_UNBOUNDED {
                return f64::INFINITY;
            }
            sum += g;
        }
        sum - 1.0
    };

    // Price scale where each W argument is order one; grow until demand
    // drops below the budget.
    let mut hi = scheduled
        .iter()
        .map(|&i| {
            let t_allowed = allowed_upload_time(&devices[i], params);
            params.bandwidth * t_allowed * params.noise / devices[i].power_gain()
        })
        .fold(0.0f64, f64::max);
    let mut doublings = 0;
    while excess_demand(hi) >= 0.0 {
        doublings += 1;
        if doublings > MAX_BRACKET_DOUBLINGS {
            return Err(Error::Bracket(format!(
                "demand still exceeds the budget at multiplier {hi}"
            )));
        }
        hi *= 2.0;
    }

    let bracket = RootBracket::new(0.0, hi, DUAL_TOL)?;
    let nu_star = bisect_decreasing(excess_demand, bracket)?;
    let residual = excess_demand(nu_star).abs();
    if !(residual <= SUM_GAMMA_TOL) {
        return Err(Error::Bracket(format!(
            "dual solve stalled: |sum gamma - 1| = {residual} at nu = {nu_star}"
        )));
    }

    let mut gamma = vec![0.0; devices.len()];
    for (&i, term) in scheduled.iter().zip(&terms) {
        gamma[i] = term.gamma(nu_star);
    }
    let report = DualSolveReport {
        nu_star,
        iterations: evals.get(),
        residual,
    };
    let alloc = Allocation::assemble(devices, params, gamma, upload_time, beta.to_vec())?;
    Ok((alloc, report))
}

/// Equal-split baseline: every device gets `1/K` of the band regardless of
/// its schedule, channel or deadline.
pub fn uniform_baseline(
    devices: &[Device],
    params: &SystemParams,
    beta: &[f64],
) -> Result<Allocation> {
    validate_schedule(devices, params, beta)?;
    let share = 1.0 / devices.len() as f64;
    let gamma = vec![share; devices.len()];
    let upload_time = pinned_upload_times(devices, params, beta);
    Allocation::assemble(devices, params, gamma, upload_time, beta.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params() -> SystemParams {
        SystemParams {
            bandwidth: 1e6,
            noise: 1e-8,
            model_size: 1e4,
            round_time: 0.1,
            tradeoff: 1.0,
            compute_energy: 0.0,
        }
    }

    fn device(id: usize, power_gain: f64, compute_time: f64) -> Device {
        Device::from_power_gain(id, power_gain, compute_time).unwrap()
    }

    #[test]
    fn zero_selection_gets_zero_bandwidth() {
        let dev = device(0, 1e-4, 0.005);
        assert_eq!(gamma_of_nu(&dev, &params(), 0.0, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn free_bandwidth_means_unbounded_demand() {
        let dev = device(0, 1e-4, 0.005);
        assert_eq!(
            gamma_of_nu(&dev, &params(), 1.0, 0.0).unwrap(),
            GAMMA_UNBOUNDED
        );
    }

    #[test]
    fn single_device_clears_at_its_stationary_price() {
        // With one scheduled device the constraint forces gamma = 1; the
        // closed form must hand back exactly that at the reported price.
        let dev = device(0, 1e-4, 0.005);
        let p = params();
        let (alloc, report) = solve(&[dev], &p, &[1.0]).unwrap();
        assert_eq!(alloc.gamma[0], 1.0);
        assert_eq!(alloc.upload_time[0], 0.095);
        assert!((report.nu_star - 0.026551327901660734).abs() < 1e-15);
        let gamma = gamma_of_nu(&dev, &p, 1.0, report.nu_star).unwrap();
        assert!((gamma - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_devices_split_evenly() {
        let p = params();
        for k in [2usize, 3, 7] {
            let devices: Vec<Device> = (0..k).map(|i| device(i, 1e-4, 0.005)).collect();
            let beta = vec![1.0; k];
            let (alloc, report) = solve(&devices, &p, &beta).unwrap();
            for &g in &alloc.gamma {
                assert!((g - 1.0 / k as f64).abs() < 1e-12, "k = {k}: gamma = {g}");
            }
            assert!(report.residual <= 1e-9);
        }
    }

    #[test]
    fn weaker_channel_receives_more_bandwidth() {
        // Two devices, equal deadlines, one channel twice as strong.
        let p = params();
        let devices = [device(0, 1e-4, 0.005), device(1, 2e-4, 0.005)];
        let (alloc, report) = solve(&devices, &p, &[1.0, 1.0]).unwrap();
        assert!(alloc.gamma[0] > alloc.gamma[1]);
        // Reference solution computed independently at high precision.
        assert!((report.nu_star - 0.08126466209337257).abs() < 1e-10);
        assert!((alloc.gamma[0] - 0.5817655508988722).abs() < 1e-10);
        assert!((alloc.gamma[1] - 0.4182344491011278).abs() < 1e-10);
        assert!((alloc.total_upload_energy() - 1.1171303172948142).abs() < 1e-9);
    }

    #[test]
    fn empty_schedule_is_rejected() {
        let devices = [device(0, 1e-4, 0.005)];
        assert!(matches!(
            solve(&devices, &params(), &[0.0]),
            Err(Error::InfeasibleSchedule(_))
        ));
    }

    #[test]
    fn scheduling_a_late_device_is_a_hard_error() {
        let p = params();
        let devices = [device(0, 1e-4, 0.005), device(1, 1e-4, 0.2)];
        assert!(matches!(
            solve(&devices, &p, &[1.0, 1.0]),
            Err(Error::Domain(_))
        ));
        // Left unscheduled it is fine.
        let (alloc, _) = solve(&devices, &p, &[1.0, 0.0]).unwrap();
        assert_eq!(alloc.gamma[1], 0.0);
        assert_eq!(alloc.per_device_energy[1], 0.0);
        assert_eq!(alloc.upload_time[1], 0.0);
    }

    #[test]
    fn uniform_baseline_splits_evenly_and_never_beats_the_solver() {
        let p = params();
        let devices = [device(0, 1e-4, 0.001), device(1, 3e-4, 0.008)];
        let beta = [1.0, 1.0];
        let uniform = uniform_baseline(&devices, &p, &beta).unwrap();
        assert_eq!(uniform.gamma, vec![0.5, 0.5]);
        let (opt, _) = solve(&devices, &p, &beta).unwrap();
        assert!(opt.total_upload_energy() <= uniform.total_upload_energy());

        // Four devices: quarter shares.
        let four: Vec<Device> = (0..4).map(|i| device(i, 1e-4, 0.002)).collect();
        let uniform = uniform_baseline(&four, &p, &[1.0; 4]).unwrap();
        assert!(uniform.gamma.iter().all(|&g| g == 0.25));
        // Identical devices: uniform IS optimal.
        let (opt, _) = solve(&four, &p, &[1.0; 4]).unwrap();
        assert!((opt.total_upload_energy() - uniform.total_upload_energy()).abs() < 1e-12);
    }

    #[test]
    fn kkt_residual_vanishes_at_the_solution() {
        let p = params();
        let devices = [
            device(0, 1e-4, 0.002),
            device(1, 5e-4, 0.007),
            device(2, 2.5e-4, 0.004),
        ];
        let beta = [1.0, 0.6, 1.0];
        let (alloc, report) = solve(&devices, &p, &beta).unwrap();
        for (i, dev) in devices.iter().enumerate() {
            let r = kkt_stationarity_residual(dev, &p, beta[i], alloc.gamma[i], report.nu_star)
                .unwrap();
            assert!(
                r.abs() <= 1e-6 * report.nu_star,
                "device {i}: relative residual {}",
                r.abs() / report.nu_star
            );
        }
    }

    fn random_instance(seed: u64, k: usize) -> (Vec<Device>, SystemParams) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let devices = (0..k)
            .map(|i| {
                let h2 = 1e-4 * -(1.0 - rng.gen::<f64>()).ln();
                let t_comp = 0.010 * rng.gen::<f64>();
                device(i, h2.max(1e-9), t_comp)
            })
            .collect();
        (devices, params())
    }

    proptest! {
        // Raising one device's deadline or channel never raises its share.
        #[test]
        fn share_non_increasing_in_deadline_and_channel(
            seed in 0u64..1_000,
            k in 2usize..8,
            target in 0usize..8,
            factor in 1.01f64..3.0,
        ) {
            let (mut devices, p) = random_instance(seed, k);
            let target = target % k;
            let beta = vec![1.0; k];
            let (base, _) = solve(&devices, &p, &beta).unwrap();

            let saved = devices[target];
            devices[target].compute_time = saved.compute_time / factor; // larger T_k
            let (longer, _) = solve(&devices, &p, &beta).unwrap();
            prop_assert!(longer.gamma[target] <= base.gamma[target] + 1e-12);

            devices[target] = saved;
            devices[target].channel_gain = saved.channel_gain * factor.sqrt(); // larger h^2
            let (stronger, _) = solve(&devices, &p, &beta).unwrap();
            prop_assert!(stronger.gamma[target] <= base.gamma[target] + 1e-12);
        }

        // Among equal deadlines, the weaker channel gets the weakly larger share.
        #[test]
        fn weaker_channels_rank_first(seed in 0u64..1_000, k in 2usize..8) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let devices: Vec<Device> = (0..k)
                .map(|i| device(i, 1e-4 * (0.1 + rng.gen::<f64>() * 5.0), 0.004))
                .collect();
            let (alloc, _) = solve(&devices, &params(), &vec![1.0; k]).unwrap();
            for i in 0..k {
                for j in 0..k {
                    if devices[i].power_gain() <= devices[j].power_gain() {
                        prop_assert!(alloc.gamma[i] >= alloc.gamma[j] - 1e-12);
                    }
                }
            }
        }

        #[test]
        fn shares_sum_to_one_and_kkt_holds(seed in 0u64..2_000, k in 2usize..12) {
            let (devices, p) = random_instance(seed, k);
            let beta = vec![1.0; k];
            let (alloc, report) = solve(&devices, &p, &beta).unwrap();
            let sum: f64 = alloc.gamma.iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-9);
            for (i, dev) in devices.iter().enumerate() {
                let r = kkt_stationarity_residual(dev, &p, 1.0, alloc.gamma[i], report.nu_star)
                    .unwrap();
                prop_assert!(r.abs() <= 1e-6 * report.nu_star.max(1e-300));
            }
        }
    }
}
