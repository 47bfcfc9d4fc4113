//! Independent brute-force minimizers used to validate the closed forms.
//!
//! Nothing here calls into the closed-form expressions: the bandwidth oracle
//! scans the probability simplex directly, the priority oracle scans the unit
//! interval, and the schedule oracle enumerates every binary schedule. They
//! are deliberately slow and deliberately simple; agreement with them is the
//! acceptance bar for the analytic solvers.

use crate::bandwidth;
use crate::error::{Error, Result};
use crate::model::{allowed_upload_time, upload_energy, Device, SystemParams};

/// Resolution of a refining grid search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Points per free dimension.
    pub resolution: usize,
    /// Zoom-in passes after the initial scan; each shrinks the window
    /// tenfold around the incumbent.
    pub refine_passes: usize,
}

impl GridSpec {
    pub fn new(resolution: usize, refine_passes: usize) -> Result<Self> {
        if resolution < 10 {
            return Err(Error::Config(format!(
                "grid resolution must be at least 10, got {resolution}"
            )));
        }
        Ok(Self {
            resolution,
            refine_passes,
        })
    }

    /// Default for one-dimensional scans.
    pub fn for_line() -> Self {
        Self {
            resolution: 2000,
            refine_passes: 2,
        }
    }

    /// Default resolution per free dimension of a `k`-device simplex scan.
    pub fn for_simplex(k: usize) -> Self {
        let resolution = match k {
            0..=2 => 2000,
            3 => 400,
            _ => 60,
        };
        Self {
            resolution,
            refine_passes: 2,
        }
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self::for_line()
    }
}

/// Total upload energy of a schedule at fractions `gamma` with upload times
/// pinned at the deadlines. Infeasible grid points (vanishing fractions)
/// evaluate to infinity.
fn energy_at(devices: &[Device], params: &SystemParams, beta: &[f64], gamma: &[f64]) -> f64 {
    let mut total = 0.0;
    for (i, dev) in devices.iter().enumerate() {
        if beta[i] == 0.0 {
            continue;
        }
        let t_allowed = allowed_upload_time(dev, params);
        match upload_energy(dev, params, gamma[i], t_allowed, beta[i]) {
            Ok(e) => total += e,
            Err(_) => return f64::INFINITY,
        }
    }
    total
}

/// Grid search over the bandwidth simplex for a fixed schedule.
///
/// Scans the scheduled devices' fractions (the last one takes the remainder),
/// then refines around the incumbent. Supports at most four devices; the
/// grid is exponential in the simplex dimension.
pub fn bandwidth_grid_search(
    devices: &[Device],
    params: &SystemParams,
    beta: &[f64],
    grid: GridSpec,
) -> Result<(Vec<f64>, f64)> {
    if devices.len() > 4 {
        return Err(Error::Dimension(format!(
            "simplex grid search supports at most 4 devices, got {}",
            devices.len()
        )));
    }
    params.validate()?;
    if beta.len() != devices.len() {
        return Err(Error::Dimension("selection vector length mismatch".into()));
    }
    let scheduled: Vec<usize> = (0..devices.len()).filter(|&i| beta[i] > 0.0).collect();
    if scheduled.is_empty() {
        return Err(Error::InfeasibleSchedule(
            "no device has a positive selection indicator".into(),
        ));
    }
    for &i in &scheduled {
        if allowed_upload_time(&devices[i], params) <= 0.0 || devices[i].power_gain() <= 0.0 {
            return Err(Error::Domain(format!(
                "device {} cannot upload yet is scheduled",
                devices[i].id
            )));
        }
    }

    let full_gamma = |free: &[f64]| -> Vec<f64> {
        let mut gamma = vec![0.0; devices.len()];
        let mut used = 0.0;
        for (slot, &value) in scheduled[..scheduled.len() - 1].iter().zip(free) {
            gamma[*slot] = value;
            used += value;
        }
        gamma[*scheduled.last().unwrap()] = 1.0 - used;
        gamma
    };

    if scheduled.len() == 1 {
        let gamma = full_gamma(&[]);
        let objective = energy_at(devices, params, beta, &gamma);
        return Ok((gamma, objective));
    }

    let dims = scheduled.len() - 1;
    let mut center = vec![1.0 / scheduled.len() as f64; dims];
    let mut half_width = 0.5; // window [center - hw, center + hw] per dim
    let mut best_free = center.clone();
    let mut best_objective = f64::INFINITY;

    for pass in 0..=grid.refine_passes {
        let lo: Vec<f64> = center.iter().map(|c| (c - half_width).max(0.0)).collect();
        let hi: Vec<f64> = center.iter().map(|c| (c + half_width).min(1.0)).collect();
        let steps = grid.resolution - 1;
        let mut index = vec![0usize; dims];
        loop {
            let free: Vec<f64> = index
                .iter()
                .zip(lo.iter().zip(&hi))
                .map(|(&ix, (&l, &h))| l + (h - l) * ix as f64 / steps as f64)
                .collect();
            let remainder = 1.0 - free.iter().sum::<f64>();
            // Skip points with any nonpositive fraction.
            if remainder > 0.0 && free.iter().all(|&g| g > 0.0) {
                let gamma = full_gamma(&free);
                let objective = energy_at(devices, params, beta, &gamma);
                if objective < best_objective {
                    best_objective = objective;
                    best_free = free;
                }
            }
            // Odometer increment over the per-dimension indices.
            let mut d = 0;
            loop {
                index[d] += 1;
                if index[d] <= steps {
                    break;
                }
                index[d] = 0;
                d += 1;
                if d == dims {
                    break;
                }
            }
            if d == dims {
                break;
            }
        }
        if pass < grid.refine_passes {
            center = best_free.clone();
            half_width /= 10.0;
        }
    }

    Ok((full_gamma(&best_free), best_objective))
}

/// One-dimensional scan of the per-device scheduling objective
/// `E_up(beta) - tradeoff * beta` over `beta in [0, 1]`.
pub fn priority_scan(
    dev: &Device,
    params: &SystemParams,
    gamma: f64,
    t_allowed: f64,
    tradeoff: f64,
    grid: GridSpec,
) -> Result<(f64, f64)> {
    if !(gamma > 0.0) || !(t_allowed > 0.0) {
        return Err(Error::Domain(format!(
            "priority scan needs gamma > 0 and t_allowed > 0 (gamma = {gamma}, t = {t_allowed})"
        )));
    }
    if !(tradeoff > 0.0) {
        return Err(Error::Domain(format!(
            "tradeoff must be positive, got {tradeoff}"
        )));
    }
    let objective = |b: f64| -> Result<f64> {
        Ok(upload_energy(dev, params, gamma, t_allowed, b)? - tradeoff * b)
    };

    let steps = grid.resolution - 1;
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    let mut best_beta = 0.0;
    let mut best_objective = f64::INFINITY;
    for pass in 0..=grid.refine_passes {
        for ix in 0..=steps {
            let b = lo + (hi - lo) * ix as f64 / steps as f64;
            let value = objective(b)?;
            if value < best_objective {
                best_objective = value;
                best_beta = b;
            }
        }
        if pass < grid.refine_passes {
            let half = (hi - lo) / 20.0;
            lo = (best_beta - half).max(0.0);
            hi = (best_beta + half).min(1.0);
        }
    }
    Ok((best_beta, best_objective))
}

/// Exhaustive minimizer of the scheduling-aware objective over all binary
/// schedules, each evaluated with its own optimal bandwidth allocation.
///
/// The empty schedule scores zero. Schedules selecting a device that cannot
/// upload are skipped. Ties keep the lowest bitmask. At most 12 devices.
pub fn exhaustive_schedule_search(
    devices: &[Device],
    params: &SystemParams,
    tradeoff: f64,
) -> Result<(Vec<f64>, f64)> {
    if devices.len() > 12 {
        return Err(Error::Dimension(format!(
            "exhaustive schedule search supports at most 12 devices, got {}",
            devices.len()
        )));
    }
    if !(tradeoff > 0.0) {
        return Err(Error::Domain(format!(
            "tradeoff must be positive, got {tradeoff}"
        )));
    }
    let k = devices.len();
    let usable: Vec<bool> = devices
        .iter()
        .map(|d| allowed_upload_time(d, params) > 0.0 && d.power_gain() > 0.0)
        .collect();

    let mut best_beta = vec![0.0; k];
    let mut best_objective = 0.0f64; // the empty schedule
    for mask in 1u32..(1 << k) {
        let beta: Vec<f64> = (0..k)
            .map(|i| if mask & (1 << i) != 0 { 1.0 } else { 0.0 })
            .collect();
        if (0..k).any(|i| beta[i] > 0.0 && !usable[i]) {
            continue;
        }
        let (alloc, _) = bandwidth::solve(devices, params, &beta)?;
        let objective = alloc.total_upload_energy() - tradeoff * mask.count_ones() as f64;
        if objective < best_objective {
            best_objective = objective;
            best_beta = beta;
        }
    }
    Ok((best_beta, best_objective))
}
