//! System model: devices, shared round parameters, and the uplink
//! time/rate/energy relations every optimizer builds on.
//!
//! A round gives each device a deadline `T`; after local training for
//! `compute_time` seconds, device `k` has `T_k = T - compute_time` seconds
//! left to upload `model_size` bits over its bandwidth share `gamma * B`.
//! Inverting the Shannon rate for the required data rate yields the uploading
//! energy
//!
//! ```text
//! E_up = (gamma * B * t * N0 / h^2) * (2^(beta * L / (gamma * B * t)) - 1)
//! ```
//!
//! with `beta` the (possibly relaxed) selection indicator. Everything here is
//! an immutable value type or a pure function.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;

/// Cap on the rate exponent `beta * L / (gamma * B * t)`, in bits. Above this
/// the energy expression overflows f64; the library reports it rather than
/// silently saturating.
pub const MAX_RATE_EXPONENT: f64 = 1024.0;

/// One edge device participating in a round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Device {
    pub id: usize,
    /// Channel amplitude gain; the power gain is `channel_gain^2`.
    pub channel_gain: f64,
    /// Local training time in seconds.
    pub compute_time: f64,
}

impl Device {
    pub fn new(id: usize, channel_gain: f64, compute_time: f64) -> Result<Self> {
        if !(channel_gain >= 0.0) {
            return Err(Error::Config(format!(
                "device {id}: channel gain must be nonnegative, got {channel_gain}"
            )));
        }
        if !(compute_time >= 0.0) {
            return Err(Error::Config(format!(
                "device {id}: compute time must be nonnegative, got {compute_time}"
            )));
        }
        Ok(Self {
            id,
            channel_gain,
            compute_time,
        })
    }

    /// Convenience constructor from the channel power gain `h^2`.
    pub fn from_power_gain(id: usize, power_gain: f64, compute_time: f64) -> Result<Self> {
        if !(power_gain >= 0.0) {
            return Err(Error::Config(format!(
                "device {id}: power gain must be nonnegative, got {power_gain}"
            )));
        }
        Self::new(id, power_gain.sqrt(), compute_time)
    }

    /// Channel power gain `h^2`.
    pub fn power_gain(&self) -> f64 {
        self.channel_gain * self.channel_gain
    }
}

/// Round parameters shared by all devices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Total uplink bandwidth `B` in Hz.
    pub bandwidth: f64,
    /// Noise variance `N0` in W.
    pub noise: f64,
    /// Model update size `L` in bits.
    pub model_size: f64,
    /// Round deadline `T` in seconds.
    pub round_time: f64,
    /// Scheduling reward per selected device, in joules. Larger values favor
    /// scheduling more devices.
    pub tradeoff: f64,
    /// Per-device local-training energy in joules. Identical across devices;
    /// added to reported totals but never part of an optimization objective.
    pub compute_energy: f64,
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("bandwidth", self.bandwidth),
            ("noise", self.noise),
            ("model_size", self.model_size),
            ("round_time", self.round_time),
            ("tradeoff", self.tradeoff),
        ];
        for (name, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::Config(format!(
                    "{name} must be finite and positive, got {value}"
                )));
            }
        }
        if !(self.compute_energy >= 0.0) {
            return Err(Error::Config(format!(
                "compute_energy must be nonnegative, got {}",
                self.compute_energy
            )));
        }
        Ok(())
    }
}

impl Default for SystemParams {
    /// 1 MHz uplink, -80 dBW noise, 10 kbit updates, 100 ms rounds.
    fn default() -> Self {
        Self {
            bandwidth: 1e6,
            noise: 1e-8,
            model_size: 1e4,
            round_time: 0.1,
            tradeoff: crate::sim::DEFAULT_TRADEOFF,
            compute_energy: 0.0,
        }
    }
}

/// Time left for uploading after local training, `T_k = T - compute_time`.
///
/// May be zero or negative: such a device cannot finish within the round and
/// the scheduling layer must leave it out.
pub fn allowed_upload_time(dev: &Device, params: &SystemParams) -> f64 {
    params.round_time - dev.compute_time
}

/// Uploading energy of one device in joules.
///
/// Exactly zero when `beta == 0` (nothing is sent). Otherwise requires
/// `gamma > 0`, `t > 0` and a nonzero channel; the rate exponent is evaluated
/// first and capped at [`MAX_RATE_EXPONENT`] so that vanishing
/// bandwidth-time products surface as errors instead of infinities.
pub fn upload_energy(
    dev: &Device,
    params: &SystemParams,
    gamma: f64,
    t: f64,
    beta: f64,
) -> Result<f64> {
    if beta == 0.0 {
        return Ok(0.0);
    }
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::Domain(format!(
            "device {}: selection indicator must lie in [0, 1], got {beta}",
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
    if !(gamma > 0.0) || !(t > 0.0) {
        return Err(Error::Domain(format!(
            "device {}: positive selection needs gamma > 0 and t > 0 (gamma = {gamma}, t = {t})",
            dev.id
        )));
    }
    let exponent = beta * params.model_size / (gamma * params.bandwidth * t);
    if exponent > MAX_RATE_EXPONENT {
        return Err(Error::Overflow {
            exponent,
            cap: MAX_RATE_EXPONENT,
        });
    }
    // 2^x - 1 via exp_m1 keeps precision for small exponents.
    Ok(gamma * params.bandwidth * t * params.noise / h2 * (exponent * LN_2).exp_m1())
}

/// Transmission power spectral density in W/Hz needed to hit the required
/// rate, `p = (N0 / h^2) * (2^(beta L / (gamma B t)) - 1)`. Zero for
/// unscheduled devices.
pub fn upload_power_density(
    dev: &Device,
    params: &SystemParams,
    gamma: f64,
    t: f64,
    beta: f64,
) -> Result<f64> {
    let energy = upload_energy(dev, params, gamma, t, beta)?;
    if energy == 0.0 {
        return Ok(0.0);
    }
    Ok(energy / (gamma * params.bandwidth * t))
}

/// A complete per-round resource assignment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Allocation {
    /// Bandwidth fractions, summing to 1 whenever anything is scheduled.
    pub gamma: Vec<f64>,
    /// Upload durations in seconds.
    pub upload_time: Vec<f64>,
    /// Selection indicators in [0, 1]; binary after rounding.
    pub beta: Vec<f64>,
    /// Uploading energy per device in joules.
    pub per_device_energy: Vec<f64>,
    /// Transmission power spectral density per device in W/Hz.
    pub per_device_power: Vec<f64>,
}

impl Allocation {
    /// The all-zero assignment (nothing scheduled, nothing transmitted).
    pub fn empty(num_devices: usize) -> Self {
        Self {
            gamma: vec![0.0; num_devices],
            upload_time: vec![0.0; num_devices],
            beta: vec![0.0; num_devices],
            per_device_energy: vec![0.0; num_devices],
            per_device_power: vec![0.0; num_devices],
        }
    }

    /// Builds an allocation from raw `(gamma, t, beta)` vectors, deriving
    /// energies and power densities.
    pub fn assemble(
        devices: &[Device],
        params: &SystemParams,
        gamma: Vec<f64>,
        upload_time: Vec<f64>,
        beta: Vec<f64>,
    ) -> Result<Self> {
        let k = devices.len();
        if gamma.len() != k || upload_time.len() != k || beta.len() != k {
            return Err(Error::Dimension(format!(
                "allocation vectors must match {k} devices"
            )));
        }
        let mut per_device_energy = Vec::with_capacity(k);
        let mut per_device_power = Vec::with_capacity(k);
        for (i, dev) in devices.iter().enumerate() {
            per_device_energy.push(upload_energy(
                dev,
                params,
                gamma[i],
                upload_time[i],
                beta[i],
            )?);
            per_device_power.push(upload_power_density(
                dev,
                params,
                gamma[i],
                upload_time[i],
                beta[i],
            )?);
        }
        Ok(Self {
            gamma,
            upload_time,
            beta,
            per_device_energy,
            per_device_power,
        })
    }

    pub fn num_devices(&self) -> usize {
        self.beta.len()
    }

    /// Total uploading energy in joules.
    pub fn total_upload_energy(&self) -> f64 {
        self.per_device_energy.iter().sum()
    }

    /// Sum of selection indicators; the count of scheduled devices once beta
    /// is binary, and the learning-speed proxy in general.
    pub fn scheduled_weight(&self) -> f64 {
        self.beta.iter().sum()
    }

    /// Uploading energy plus local-training energy of the scheduled devices.
    /// This is the quantity experiments report; optimizers never see it.
    pub fn reported_total_energy(&self, params: &SystemParams) -> f64 {
        self.total_upload_energy() + params.compute_energy * self.scheduled_weight()
    }
}

/// The scheduling-aware objective `sum_k E_up_k - tradeoff * sum_k beta_k`,
/// re-derived from the allocation's `(gamma, t, beta)`. With `tradeoff = 0`
/// this is plain total uploading energy.
pub fn total_objective(
    devices: &[Device],
    params: &SystemParams,
    alloc: &Allocation,
) -> Result<f64> {
    if alloc.num_devices() != devices.len() {
        return Err(Error::Dimension(format!(
            "allocation covers {} devices, expected {}",
            alloc.num_devices(),
            devices.len()
        )));
    }
    let mut total = 0.0;
    for (i, dev) in devices.iter().enumerate() {
        total += upload_energy(
            dev,
            params,
            alloc.gamma[i],
            alloc.upload_time[i],
            alloc.beta[i],
        )?;
        total -= params.tradeoff * alloc.beta[i];
    }
    Ok(total)
}
