//! Calibration sweep for the default scheduling tradeoff.
//!
//! Prints, for a grid of tradeoff values, the mean scheduled count and the
//! energy reduction ratio at each deadline of the default scenario. The
//! shipped default (`sim::DEFAULT_TRADEOFF = 4000`) is the value where the
//! largest default deadline schedules nearly the whole population (~49/50)
//! while the weak-channel tail is still dropped, so the reduction ratio
//! stays strictly positive and decreasing across the sweep.
//!
//! Run with: `cargo run --release -p feel-rrm --example calibrate`

use feel_rrm::sim::{run_sweep_joint, ScenarioConfig};

fn main() {
    let cfg = ScenarioConfig {
        trials: 40,
        ..ScenarioConfig::default()
    };
    println!(
        "{:>10} {:>8} {:>12} {:>14} {:>14} {:>10}",
        "tradeoff", "T_ms", "scheduled", "proposed_J", "baseline_J", "ratio"
    );
    for tradeoff in [100.0, 1000.0, 2000.0, 4000.0, 8000.0] {
        let rows = run_sweep_joint(&cfg, tradeoff).expect("sweep");
        for row in rows {
            println!(
                "{:>10} {:>8.0} {:>12.2} {:>14.4e} {:>14.4e} {:>10.4}",
                tradeoff,
                row.round_time * 1e3,
                row.mean_scheduled_count,
                row.mean_total_energy_proposed,
                row.mean_total_energy_baseline,
                row.energy_reduction_ratio,
            );
        }
        println!();
    }
}
