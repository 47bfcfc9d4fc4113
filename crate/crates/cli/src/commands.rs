//! Subcommand bodies: allocate, schedule, joint, sweep.

use crate::config::Resolved;
use crate::report::{emit_csv, emit_json, sweep_csv, RunManifest};
use crate::{verbose, CliError, SweepMode};
use feel_rrm::bandwidth;
use feel_rrm::joint;
use feel_rrm::model::{allowed_upload_time, Allocation, Device, SystemParams};
use feel_rrm::scheduling;
use feel_rrm::sim;
use serde::Serialize;
use std::path::Path;

#[derive(Serialize)]
struct DeviceRow {
    id: usize,
    power_gain: f64,
    allowed_time_s: f64,
    gamma: f64,
    upload_time_s: f64,
    power_psd_w_per_hz: f64,
    upload_energy_j: f64,
}

#[derive(Serialize)]
struct Totals {
    upload_energy_j: f64,
    reported_energy_j: f64,
    scheduled_weight: f64,
}

impl Totals {
    fn of(alloc: &Allocation, params: &SystemParams) -> Self {
        Self {
            upload_energy_j: alloc.total_upload_energy(),
            reported_energy_j: alloc.reported_total_energy(params),
            scheduled_weight: alloc.scheduled_weight(),
        }
    }
}

fn device_rows(devices: &[Device], params: &SystemParams, alloc: &Allocation) -> Vec<DeviceRow> {
    devices
        .iter()
        .enumerate()
        .map(|(i, dev)| DeviceRow {
            id: dev.id,
            power_gain: dev.power_gain(),
            allowed_time_s: allowed_upload_time(dev, params),
            gamma: alloc.gamma[i],
            upload_time_s: alloc.upload_time[i],
            power_psd_w_per_hz: alloc.per_device_power[i],
            upload_energy_j: alloc.per_device_energy[i],
        })
        .collect()
}

#[derive(Serialize)]
struct AllocateOutput {
    manifest: RunManifest,
    nu_star: f64,
    dual_iterations: u32,
    dual_residual: f64,
    totals: Totals,
    devices: Vec<DeviceRow>,
}

/// Optimal bandwidth for the whole configured population.
pub fn allocate(resolved: &Resolved, out: Option<&Path>) -> Result<(), CliError> {
    let devices = resolved.population(0);
    let beta = vec![1.0; devices.len()];
    let (alloc, dual) = bandwidth::solve(&devices, &resolved.params, &beta)?;
    if verbose() {
        eprintln!(
            "allocate: {} devices, nu* = {}, {} demand evaluations, residual {}",
            devices.len(),
            dual.nu_star,
            dual.iterations,
            dual.residual
        );
    }
    let output = AllocateOutput {
        manifest: RunManifest::new("allocate", resolved),
        nu_star: dual.nu_star,
        dual_iterations: dual.iterations,
        dual_residual: dual.residual,
        totals: Totals::of(&alloc, &resolved.params),
        devices: device_rows(&devices, &resolved.params, &alloc),
    };
    emit_json(&output, out)
}

#[derive(Serialize)]
struct ScheduleRow {
    id: usize,
    power_gain: f64,
    allowed_time_s: f64,
    gamma: f64,
    priority_unclamped: f64,
    priority: f64,
}

#[derive(Serialize)]
struct ScheduleOutput {
    manifest: RunManifest,
    devices: Vec<ScheduleRow>,
}

/// Selection priorities on top of the optimal allocation of every feasible
/// device.
pub fn schedule(resolved: &Resolved, out: Option<&Path>) -> Result<(), CliError> {
    let devices = resolved.population(0);
    let params = &resolved.params;
    let feasible: Vec<f64> = devices
        .iter()
        .map(|d| {
            if allowed_upload_time(d, params) > 0.0 && d.power_gain() > 0.0 {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let (alloc, _) = bandwidth::solve(&devices, params, &feasible)?;
    let t_allowed: Vec<f64> = devices
        .iter()
        .map(|d| allowed_upload_time(d, params))
        .collect();
    let priorities = scheduling::schedule_all(&devices, params, &alloc.gamma, &t_allowed)?;
    let rows = devices
        .iter()
        .enumerate()
        .map(|(i, dev)| ScheduleRow {
            id: dev.id,
            power_gain: dev.power_gain(),
            allowed_time_s: t_allowed[i],
            gamma: alloc.gamma[i],
            priority_unclamped: priorities.unclamped[i],
            priority: priorities.beta[i],
        })
        .collect();
    let output = ScheduleOutput {
        manifest: RunManifest::new("schedule", resolved),
        devices: rows,
    };
    emit_json(&output, out)
}

#[derive(Serialize)]
struct JointDeviceRow {
    id: usize,
    power_gain: f64,
    allowed_time_s: f64,
    relaxed_beta: f64,
    beta: f64,
    gamma: f64,
    upload_time_s: f64,
    upload_energy_j: f64,
}

#[derive(Serialize)]
struct JointOutput {
    manifest: RunManifest,
    converged: bool,
    iterations_used: usize,
    objective: f64,
    scheduled_count: usize,
    totals: Totals,
    relaxed_objectives: Vec<f64>,
    devices: Vec<JointDeviceRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    relaxed_trajectory: Option<Vec<Vec<f64>>>,
}

/// The alternating optimizer end to end.
pub fn joint_cmd(resolved: &Resolved, out: Option<&Path>) -> Result<(), CliError> {
    let devices = resolved.population(0);
    let params = &resolved.params;
    let result = joint::solve(&devices, params, &resolved.joint)?;
    if verbose() {
        eprintln!(
            "joint: converged = {}, iterations = {}, scheduled {}/{}",
            result.converged,
            result.iterations_used,
            result.scheduled_count(),
            devices.len()
        );
    }
    let relaxed_final: Vec<f64> = result
        .relaxed_trajectory
        .as_ref()
        .and_then(|t| t.last().cloned())
        .unwrap_or_else(|| result.final_alloc.beta.clone());
    let rows = devices
        .iter()
        .enumerate()
        .map(|(i, dev)| JointDeviceRow {
            id: dev.id,
            power_gain: dev.power_gain(),
            allowed_time_s: allowed_upload_time(dev, params),
            relaxed_beta: relaxed_final[i],
            beta: result.final_alloc.beta[i],
            gamma: result.final_alloc.gamma[i],
            upload_time_s: result.final_alloc.upload_time[i],
            upload_energy_j: result.final_alloc.per_device_energy[i],
        })
        .collect();
    let output = JointOutput {
        manifest: RunManifest::new("joint", resolved),
        converged: result.converged,
        iterations_used: result.iterations_used,
        objective: result.objective,
        scheduled_count: result.scheduled_count(),
        totals: Totals::of(&result.final_alloc, params),
        relaxed_objectives: result.relaxed_objectives,
        devices: rows,
        relaxed_trajectory: result.relaxed_trajectory,
    };
    emit_json(&output, out)
}

/// Deadline sweep in either mode, as CSV.
pub fn sweep(resolved: &Resolved, mode: SweepMode, out: Option<&Path>) -> Result<(), CliError> {
    let rows = match (&resolved.devices, mode) {
        (Some(devices), SweepMode::Allocation) => {
            let populations = vec![devices.clone(); resolved.scenario.trials];
            sim::sweep_allocation_over(&populations, &resolved.params, &resolved.scenario.t_sweep)?
        }
        (Some(devices), SweepMode::Joint) => {
            let populations = vec![devices.clone(); resolved.scenario.trials];
            sim::sweep_joint_over(
                &populations,
                &resolved.params,
                &resolved.scenario.t_sweep,
                resolved.params.tradeoff,
                resolved.scenario.rng_seed,
            )?
        }
        (None, SweepMode::Allocation) => sim::run_sweep_allocation(&resolved.scenario)?,
        (None, SweepMode::Joint) => {
            sim::run_sweep_joint(&resolved.scenario, resolved.params.tradeoff)?
        }
    };
    if verbose() {
        for row in &rows {
            eprintln!(
                "sweep: T = {} s, proposed {} J, baseline {} J, scheduled {}",
                row.round_time,
                row.mean_total_energy_proposed,
                row.mean_total_energy_baseline,
                row.mean_scheduled_count
            );
        }
    }
    let csv = sweep_csv(&rows)?;
    let manifest = RunManifest::new("sweep", resolved);
    emit_csv(&csv, &manifest, out)
}
