//! Declarative run configuration: JSON in, validated [`RunConfig`] out.
//!
//! Every field is optional; unspecified fields take the reference defaults
//! (the parameter set of the reference figures). Unknown keys are errors.
//! Loading echoes the fully resolved configuration to an adjacent
//! `*.effective.json` so a run can be reproduced from its artifacts alone.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use omsim_core::dynamics::{
    IntegrationConfig, DEFAULT_DT_KAPPA, DEFAULT_SAMPLE_STRIDE, DEFAULT_STIFFNESS_GUARD,
};
use omsim_core::attractor::RunPolicy;
use omsim_core::model::{derive_scales, DerivedScales, DriveFrequencyRule, ModeParity, SystemParams};
use omsim_core::PhysicalConstants;

/// Raw JSON shape. All fields optional; `deny_unknown_fields` makes typos
/// hard errors.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<RawParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constants: Option<RawConstants>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub integration: Option<RawIntegration>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub run_policy: Option<RawPolicy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<RawSweep>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entangle: Option<RawEntangle>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<RawOutput>,
    /// Informational echo written by the loader; accepted and ignored on
    /// input so effective configs round-trip.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resolved: Option<serde_json::Value>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cavity_length: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode_order: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parity: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub power: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drive_frequency_rule: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drive_frequency: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConstants {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hbar: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawIntegration {
    /// Step size in seconds. Default `0.004 / kappa`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Run length in mechanical periods. Default 50.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration_periods: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_stride: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stiffness_guard: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPolicy {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relax_periods: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_periods: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_extensions: Option<u32>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSweep {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub power_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub power_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub power_steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ic_min_lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ic_max_lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ic_steps: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawEntangle {
    /// Membrane temperature for the co-simulation, K. Default 1 mK.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    /// Start from the smallest converged limit cycle found on the IC grid.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub smallest_cycle: Option<bool>,
    /// Co-simulation length in mechanical periods. Default 3.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub periods: Option<f64>,
    /// Explicit initial amplitude (lambda_n units); overrides smallest-cycle
    /// selection of the relaxation orbit.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init_amplitude_lambda: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawOutput {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// Extra decimation applied when writing CSV rows.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
}

/// Sweep grids, materialized.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub powers: Vec<f64>,
    /// Initial amplitudes in units of `lambda_n`.
    pub initial_amplitudes_lambda: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntangleOptions {
    pub temperature: f64,
    pub smallest_cycle: bool,
    pub periods: f64,
    pub init_amplitude_lambda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputOptions {
    pub dir: PathBuf,
    pub stride: usize,
}

/// Fully resolved and validated configuration of one CLI invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: SystemParams,
    pub constants: PhysicalConstants,
    pub scales: DerivedScales,
    pub integration: IntegrationConfig,
    /// `integration.duration` expressed in mechanical periods (kept verbatim
    /// so effective configs round-trip bit-exactly).
    pub duration_periods: f64,
    pub policy: RunPolicy,
    pub sweep: SweepGrid,
    pub entangle: EntangleOptions,
    pub output: OutputOptions,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

impl RunConfig {
    /// Resolve a raw config against the reference defaults and validate
    /// everything, reporting errors with full field paths.
    pub fn resolve(raw: &RawConfig) -> Result<RunConfig> {
        let constants = {
            let k = raw.constants.clone().unwrap_or_default();
            let d = PhysicalConstants::default();
            PhysicalConstants {
                hbar: k.hbar.unwrap_or(d.hbar),
                k_b: k.k_b.unwrap_or(d.k_b),
                c: k.c.unwrap_or(d.c),
            }
        };
        constants
            .validate()
            .map_err(|e| anyhow!("constants.{}", strip_field(&e)))?;

        let p = raw.params.clone().unwrap_or_default();
        let reference = SystemParams::reference();
        let omega_m = p.omega_m.unwrap_or(reference.omega_m);
        let cavity_length = p.cavity_length.unwrap_or(reference.cavity_length);
        let mode_order = p.mode_order.unwrap_or(reference.mode_order);
        let lambda_n = cavity_length / mode_order.max(1) as f64;
        let parity = match p.parity.as_deref() {
            None => reference.parity,
            Some("odd") => ModeParity::Odd,
            Some("even") => ModeParity::Even,
            Some(other) => bail!("params.parity: expected \"even\" or \"odd\", got {other:?}"),
        };
        let rule = p.drive_frequency_rule.as_deref();
        let drive = match (rule, p.drive_frequency) {
            (None, None) | (Some("resonant-at-q_s"), None) => DriveFrequencyRule::ResonantAtRest,
            (None, Some(w)) | (Some("explicit"), Some(w)) => DriveFrequencyRule::Explicit(w),
            (Some("explicit"), None) => {
                bail!("params.drive_frequency: required when drive_frequency_rule is \"explicit\"")
            }
            (Some("resonant-at-q_s"), Some(_)) => bail!(
                "params.drive_frequency: conflicts with drive_frequency_rule \"resonant-at-q_s\""
            ),
            (Some(other), _) => bail!(
                "params.drive_frequency_rule: expected \"resonant-at-q_s\" or \"explicit\", got {other:?}"
            ),
        };
        let params = SystemParams {
            omega_m,
            mass: p.mass.unwrap_or(reference.mass),
            // derived defaults follow the overridden primaries
            gamma: p.gamma.unwrap_or(1e-2 * omega_m),
            r_c: p.r_c.unwrap_or(reference.r_c),
            cavity_length,
            mode_order,
            parity,
            kappa: p.kappa.unwrap_or(50.0 * omega_m),
            q_s: p.q_s.unwrap_or(lambda_n / 8.0),
            power: p.power.unwrap_or(reference.power),
            temperature: p.temperature.unwrap_or(reference.temperature),
            drive,
        };
        let scales = derive_scales(&params, &constants)
            .map_err(|e| anyhow!("params.{}", strip_field(&e)))?;

        let i = raw.integration.clone().unwrap_or_default();
        let duration_periods = i.duration_periods.unwrap_or(50.0);
        if !(duration_periods > 0.0 && duration_periods.is_finite()) {
            bail!("integration.duration_periods: must be strictly positive");
        }
        let integration = IntegrationConfig {
            dt: i.dt.unwrap_or(DEFAULT_DT_KAPPA / params.kappa),
            duration: duration_periods * params.mechanical_period(),
            sample_stride: i.sample_stride.unwrap_or(DEFAULT_SAMPLE_STRIDE),
            stiffness_guard: i.stiffness_guard.unwrap_or(DEFAULT_STIFFNESS_GUARD),
        };
        integration
            .validate(&params)
            .map_err(|e| anyhow!("integration.{}", strip_field(&e)))?;

        let pol = raw.run_policy.clone().unwrap_or_default();
        let defaults = RunPolicy::default();
        let policy = RunPolicy {
            relax_periods: pol.relax_periods.unwrap_or(defaults.relax_periods),
            window_periods: pol.window_periods.unwrap_or(defaults.window_periods),
            max_extensions: pol.max_extensions.unwrap_or(defaults.max_extensions),
        };
        if policy.window_periods == 0 {
            bail!("run_policy.window_periods: must be >= 1");
        }

        let s = raw.sweep.clone().unwrap_or_default();
        let (p_min, p_max, p_steps) = (
            s.power_min.unwrap_or(0.005),
            s.power_max.unwrap_or(0.30),
            s.power_steps.unwrap_or(60),
        );
        let (a_min, a_max, a_steps) = (
            s.ic_min_lambda.unwrap_or(0.05),
            s.ic_max_lambda.unwrap_or(3.0),
            s.ic_steps.unwrap_or(12),
        );
        if p_steps == 0 || a_steps == 0 {
            bail!("sweep: power_steps and ic_steps must be >= 1");
        }
        if !(p_min >= 0.0 && p_max >= p_min) {
            bail!("sweep.power_min/power_max: need 0 <= power_min <= power_max");
        }
        if !(a_min >= 0.0 && a_max >= a_min) {
            bail!("sweep.ic_min_lambda/ic_max_lambda: need 0 <= min <= max");
        }
        let sweep = SweepGrid {
            powers: linspace(p_min, p_max, p_steps),
            initial_amplitudes_lambda: linspace(a_min, a_max, a_steps),
        };

        let e = raw.entangle.clone().unwrap_or_default();
        let entangle = EntangleOptions {
            temperature: e.temperature.unwrap_or(1e-3),
            smallest_cycle: e.smallest_cycle.unwrap_or(true),
            periods: e.periods.unwrap_or(3.0),
            init_amplitude_lambda: e.init_amplitude_lambda,
        };
        if !(entangle.periods > 0.0 && entangle.periods.is_finite()) {
            bail!("entangle.periods: must be strictly positive");
        }
        if entangle.temperature < 0.0 {
            bail!("entangle.temperature: must be >= 0");
        }

        let o = raw.output.clone().unwrap_or_default();
        let output = OutputOptions {
            dir: o.dir.unwrap_or_else(|| PathBuf::from(".")),
            stride: o.stride.unwrap_or(1).max(1),
        };

        Ok(RunConfig {
            params,
            constants,
            scales,
            integration,
            duration_periods,
            policy,
            sweep,
            entangle,
            output,
        })
    }

    /// The fully resolved configuration in raw-JSON shape: loading it back
    /// yields an identical `RunConfig`. The `resolved` block is informational
    /// (derived scales) and ignored on input.
    pub fn to_effective(&self) -> RawConfig {
        let p = &self.params;
        let (rule, freq) = match p.drive {
            DriveFrequencyRule::ResonantAtRest => ("resonant-at-q_s".to_string(), None),
            DriveFrequencyRule::Explicit(w) => ("explicit".to_string(), Some(w)),
        };
        RawConfig {
            params: Some(RawParams {
                omega_m: Some(p.omega_m),
                mass: Some(p.mass),
                gamma: Some(p.gamma),
                r_c: Some(p.r_c),
                cavity_length: Some(p.cavity_length),
                mode_order: Some(p.mode_order),
                parity: Some(
                    match p.parity {
                        ModeParity::Even => "even",
                        ModeParity::Odd => "odd",
                    }
                    .to_string(),
                ),
                kappa: Some(p.kappa),
                q_s: Some(p.q_s),
                power: Some(p.power),
                temperature: Some(p.temperature),
                drive_frequency_rule: Some(rule),
                drive_frequency: freq,
            }),
            constants: Some(RawConstants {
                hbar: Some(self.constants.hbar),
                k_b: Some(self.constants.k_b),
                c: Some(self.constants.c),
            }),
            integration: Some(RawIntegration {
                dt: Some(self.integration.dt),
                duration_periods: Some(self.duration_periods),
                sample_stride: Some(self.integration.sample_stride),
                stiffness_guard: Some(self.integration.stiffness_guard),
            }),
            run_policy: Some(RawPolicy {
                relax_periods: Some(self.policy.relax_periods),
                window_periods: Some(self.policy.window_periods),
                max_extensions: Some(self.policy.max_extensions),
            }),
            sweep: Some(RawSweep {
                power_min: Some(*self.sweep.powers.first().unwrap()),
                power_max: Some(*self.sweep.powers.last().unwrap()),
                power_steps: Some(self.sweep.powers.len()),
                ic_min_lambda: Some(*self.sweep.initial_amplitudes_lambda.first().unwrap()),
                ic_max_lambda: Some(*self.sweep.initial_amplitudes_lambda.last().unwrap()),
                ic_steps: Some(self.sweep.initial_amplitudes_lambda.len()),
            }),
            entangle: Some(RawEntangle {
                temperature: Some(self.entangle.temperature),
                smallest_cycle: Some(self.entangle.smallest_cycle),
                periods: Some(self.entangle.periods),
                init_amplitude_lambda: self.entangle.init_amplitude_lambda,
            }),
            output: Some(RawOutput {
                dir: Some(self.output.dir.clone()),
                stride: Some(self.output.stride),
            }),
            resolved: Some(serde_json::json!({
                "lambda_n_m": self.scales.lambda_n,
                "omega_n_rad_s": self.scales.omega_n,
                "omega_l_rad_s": self.scales.omega_l,
                "alpha_l_per_s": self.scales.alpha_l,
                "q_z_m": self.scales.q_z,
                "p_z_kg_m_s": self.scales.p_z,
                "n_th": self.scales.n_th,
                "mechanical_period_s": self.params.mechanical_period(),
            })),
        }
    }
}

fn strip_field(e: &omsim_core::SimError) -> String {
    match e {
        omsim_core::SimError::InvalidParameter { field, message } => {
            format!("{field}: {message}")
        }
        other => other.to_string(),
    }
}

/// Parse a raw config file. Unknown keys, type mismatches and JSON syntax
/// errors are reported with the file path.
pub fn parse_raw(path: &Path) -> Result<RawConfig> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let raw: RawConfig = serde_json::from_str(&text)
        .map_err(|e| anyhow!("{}: {e}", path.display()))?;
    Ok(raw)
}

/// Path of the effective-config echo adjacent to `path`.
pub fn effective_path(path: &Path) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "config".into());
    path.with_file_name(format!("{stem}.effective.json"))
}

/// Load, resolve and validate a config file, echoing the effective
/// configuration to `<stem>.effective.json` next to it.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let raw = parse_raw(path)?;
    let config = RunConfig::resolve(&raw)?;
    let echo = serde_json::to_string_pretty(&config.to_effective())?;
    fs::write(effective_path(path), echo + "\n")
        .with_context(|| format!("cannot write effective config next to {}", path.display()))?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_reference_defaults() {
        let raw: RawConfig = serde_json::from_str("{}").unwrap();
        let config = RunConfig::resolve(&raw).unwrap();
        let reference = SystemParams::reference();
        assert_eq!(config.params, reference);
        assert_eq!(config.constants, PhysicalConstants::default());
        assert_eq!(config.scales.lambda_n, 1e-6);
        assert_eq!(config.policy, RunPolicy::default());
        assert_eq!(config.sweep.powers.len(), 60);
        assert_eq!(config.sweep.initial_amplitudes_lambda.len(), 12);
        assert_eq!(config.entangle.temperature, 1e-3);
    }

    #[test]
    fn invalid_reflectivity_names_the_field() {
        let raw: RawConfig = serde_json::from_str(r#"{"params":{"r_c":1.0}}"#).unwrap();
        let err = RunConfig::resolve(&raw).unwrap_err().to_string();
        assert!(err.contains("params.r_c"), "error was: {err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = serde_json::from_str::<RawConfig>(r#"{"parms":{}}"#).unwrap_err();
        assert!(err.to_string().contains("unknown field"));
        let err = serde_json::from_str::<RawConfig>(r#"{"params":{"r":0.5}}"#).unwrap_err();
        assert!(err.to_string().contains("unknown field"));
    }

    #[test]
    fn explicit_drive_switches_rule() {
        let raw: RawConfig =
            serde_json::from_str(r#"{"params":{"drive_frequency":1.8836e15}}"#).unwrap();
        let config = RunConfig::resolve(&raw).unwrap();
        assert_eq!(config.params.drive, DriveFrequencyRule::Explicit(1.8836e15));
        // conflicting rule + frequency is an error
        let raw: RawConfig = serde_json::from_str(
            r#"{"params":{"drive_frequency_rule":"resonant-at-q_s","drive_frequency":1.0e15}}"#,
        )
        .unwrap();
        assert!(RunConfig::resolve(&raw).is_err());
    }

    #[test]
    fn derived_defaults_follow_overrides() {
        let raw: RawConfig =
            serde_json::from_str(r#"{"params":{"omega_m":1.0e6,"temperature":0.0}}"#).unwrap();
        let config = RunConfig::resolve(&raw).unwrap();
        assert_eq!(config.params.gamma, 1e4);
        assert_eq!(config.params.kappa, 5e7);
        assert!((config.integration.dt - DEFAULT_DT_KAPPA / 5e7).abs() < 1e-30);
    }

    #[test]
    fn effective_config_round_trips() {
        let raw: RawConfig = serde_json::from_str(
            r#"{"params":{"power":0.095},"integration":{"duration_periods":12.5},
                "sweep":{"power_steps":3},"entangle":{"periods":2.0}}"#,
        )
        .unwrap();
        let config = RunConfig::resolve(&raw).unwrap();
        let echoed = serde_json::to_string(&config.to_effective()).unwrap();
        let reparsed: RawConfig = serde_json::from_str(&echoed).unwrap();
        let config2 = RunConfig::resolve(&reparsed).unwrap();
        assert_eq!(config, config2);
    }

    #[test]
    fn effective_echo_written_next_to_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        fs::write(&path, "{}").unwrap();
        let config = load_config(&path).unwrap();
        let echo = dir.path().join("run.effective.json");
        assert!(echo.is_file());
        let config2 = load_config(&echo).unwrap();
        assert_eq!(config, config2);
    }
}
