//! Implementations of the batch subcommands, shared between the binary and
//! the integration tests.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};

use omsim_core::attractor::{
    cluster_amplitudes, run_to_attractor, sweep_attractors, AttractorRecord, SweepResult,
};
use omsim_core::covariance::{cosimulate, initial_covariance, CoSample, CosimConfig};
use omsim_core::dynamics::{simulate, ClassicalState, Trajectory};
use omsim_core::model::derive_scales;

use crate::config::RunConfig;
use crate::csvio::{entangle_table, sweep_table, trajectory_table};

/// One classical trajectory released from rest at
/// `q_s + init_amplitude_lambda * lambda_n`.
pub fn simulate_trajectory(config: &RunConfig, init_amplitude_lambda: f64) -> Result<Trajectory> {
    let initial = ClassicalState::at_rest(
        config.params.q_s + init_amplitude_lambda * config.scales.lambda_n,
    );
    simulate(&initial, &config.params, &config.scales, &config.integration)
        .map_err(|e| anyhow!(e))
}

pub fn run_simulate(config: &RunConfig, init_amplitude_lambda: f64, out: &Path) -> Result<()> {
    let traj = simulate_trajectory(config, init_amplitude_lambda)?;
    trajectory_table(&traj).write(out, config.output.stride, None)?;
    Ok(())
}

/// Full attractor-diagram sweep over the configured grids.
pub fn run_sweep_grid(config: &RunConfig) -> Result<SweepResult> {
    let ics: Vec<f64> = config
        .sweep
        .initial_amplitudes_lambda
        .iter()
        .map(|a| a * config.scales.lambda_n)
        .collect();
    sweep_attractors(
        &config.sweep.powers,
        &ics,
        &config.params,
        &config.scales,
        &config.policy,
        &config.integration,
    )
    .map_err(|e| anyhow!(e))
}

pub fn run_sweep(config: &RunConfig, out: &Path) -> Result<SweepResult> {
    let result = run_sweep_grid(config)?;
    for failure in &result.failures {
        eprintln!(
            "warning: sweep item (P = {} W, A0 = {} m) failed: {}",
            failure.power, failure.initial_amplitude, failure.error
        );
    }
    if result.records.is_empty() {
        bail!("every sweep item failed");
    }
    sweep_table(&result.records).write(out, config.output.stride, None)?;
    Ok(result)
}

/// Pick the orbit the co-simulation starts from: either the explicitly
/// requested initial amplitude, or the smallest converged limit cycle found
/// on the configured IC grid.
pub fn select_entangle_orbit(config: &RunConfig) -> Result<AttractorRecord> {
    let params = config.params;
    let scales = config.scales;
    if let Some(a_lambda) = config.entangle.init_amplitude_lambda {
        let record = run_to_attractor(
            a_lambda * scales.lambda_n,
            params.power,
            &params,
            &scales,
            &config.policy,
            &config.integration,
        )
        .map_err(|e| anyhow!(e))?;
        if !record.stats.converged {
            bail!(
                "orbit from A0 = {a_lambda} lambda_n did not converge within the run policy"
            );
        }
        return Ok(record);
    }
    let ics: Vec<f64> = config
        .sweep
        .initial_amplitudes_lambda
        .iter()
        .map(|a| a * scales.lambda_n)
        .collect();
    let result = sweep_attractors(
        &[params.power],
        &ics,
        &params,
        &scales,
        &config.policy,
        &config.integration,
    )
    .map_err(|e| anyhow!(e))?;
    result
        .records
        .into_iter()
        .filter(|r| r.stats.converged)
        .min_by(|a, b| a.stats.a_bar.total_cmp(&b.stats.a_bar))
        .context("no initial condition converged; cannot select the smallest cycle")
}

/// Relax onto the configured orbit, then co-propagate the fluctuation
/// covariance along it at the entanglement temperature.
pub fn run_entangle_samples(config: &RunConfig) -> Result<Vec<CoSample>> {
    let record = select_entangle_orbit(config)?;
    // the co-simulation runs at the entanglement temperature
    let params = config.params.with_temperature(config.entangle.temperature);
    let scales = derive_scales(&params, &config.constants).map_err(|e| anyhow!(e))?;
    let v0 = initial_covariance(&scales);
    let start = record.final_state;
    let cosim = CosimConfig::auto(
        &params,
        &scales,
        &start,
        config.entangle.periods * params.mechanical_period(),
    );
    cosimulate(&start, &v0, &params, &scales, &cosim).map_err(|e| anyhow!(e))
}

pub fn run_entangle(config: &RunConfig, out: &Path) -> Result<()> {
    let samples = run_entangle_samples(config)?;
    entangle_table(&samples).write(out, config.output.stride, None)?;
    Ok(())
}

/// Cluster summary printed after a sweep: power, cluster centers and sizes.
pub fn sweep_summary(result: &SweepResult, lambda_n: f64) -> String {
    let mut out = String::new();
    for pc in cluster_amplitudes(&result.records, 0.01 * lambda_n) {
        let centers: Vec<String> = pc
            .clusters
            .iter()
            .map(|c| format!("{:.4} lambda_n (n={})", c.center / lambda_n, c.count))
            .collect();
        out.push_str(&format!(
            "P = {:.4} W: {} attractor(s): {}\n",
            pc.power,
            pc.clusters.len(),
            centers.join(", ")
        ));
    }
    out
}
