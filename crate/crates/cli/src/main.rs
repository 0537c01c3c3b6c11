use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Result};
use clap::{Args, Parser, Subcommand};

use omsim_cli::config::{self, RawConfig, RunConfig};
use omsim_cli::csvio::read_csv;
use omsim_cli::figures;
use omsim_cli::runs;
use omsim_cli::validate;
use omsim_core::SimError;

/// Membrane-in-the-middle optomechanics simulator.
///
/// Integrates the classical mean-field dynamics of a driven cavity with a
/// partially reflecting membrane at mechanical amplitudes comparable to the
/// optical wavelength, maps self-sustained limit cycles and multistability,
/// and co-propagates the Gaussian quantum fluctuations to the time-resolved
/// membrane–cavity entanglement.
#[derive(Parser)]
#[command(name = "omsim", version, disable_help_subcommand = true)]
struct Cli {
    /// JSON run configuration; unspecified fields take the reference
    /// defaults. Flags override config fields.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct CommonOverrides {
    /// Drive power in W.
    #[arg(long)]
    power: Option<f64>,
    /// Integrator step expressed as kappa*dt (default 0.004).
    #[arg(long)]
    dt_kappa: Option<f64>,
    /// Output file.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one classical trajectory and write it as CSV
    /// (t, q0, p0, re_alpha, im_alpha, photon_number).
    Simulate {
        #[command(flatten)]
        common: CommonOverrides,
        /// Initial displacement from q_s in units of lambda_n.
        #[arg(long, default_value_t = 0.3)]
        init_amplitude_lambda: f64,
        /// Run length in mechanical periods.
        #[arg(long)]
        duration_periods: Option<f64>,
        /// Record every n-th step.
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Sweep drive power and initial amplitude, relax each pair onto its
    /// attractor and write the attractor diagram as CSV
    /// (power_W, init_amplitude_m, A_min_m, A_max_m, A_bar_m, converged).
    Sweep {
        #[command(flatten)]
        common: CommonOverrides,
        #[arg(long)]
        power_min: Option<f64>,
        #[arg(long)]
        power_max: Option<f64>,
        #[arg(long)]
        power_steps: Option<usize>,
        #[arg(long)]
        ic_min_lambda: Option<f64>,
        #[arg(long)]
        ic_max_lambda: Option<f64>,
        #[arg(long)]
        ic_steps: Option<usize>,
        /// Shortcut: relax/window periods for quick smoke sweeps.
        #[arg(long)]
        relax_periods: Option<u32>,
    },
    /// Relax onto a limit cycle (smallest converged cycle by default), then
    /// co-propagate the quantum fluctuations and write CSV
    /// (t, q0, p0, photon_number, E_N, eta_minus, nu_minus).
    Entangle {
        #[command(flatten)]
        common: CommonOverrides,
        /// Membrane temperature for the co-simulation, K.
        #[arg(long)]
        temperature: Option<f64>,
        /// Co-simulation length in mechanical periods.
        #[arg(long)]
        periods: Option<f64>,
        /// Start from this initial amplitude (lambda_n units) instead of the
        /// smallest converged cycle.
        #[arg(long)]
        init_amplitude_lambda: Option<f64>,
    },
    /// Run the built-in oracle suite (at the reference parameters) and print
    /// a PASS/FAIL table. Exits 3 on any failure.
    Validate,
    /// Render an SVG figure from previously written CSV output.
    Plot {
        /// One of: fig2 (mode landscape; needs no input), fig3 (phase
        /// portrait, simulate CSV), fig4 (attractor diagram, sweep CSV),
        /// fig5 (photon number vs position, simulate CSV), fig6 (E_N vs
        /// position, entangle CSV), fig7 (stacked time series, entangle CSV).
        #[arg(long)]
        figure: String,
        /// Input CSV (not needed for fig2).
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
        /// Output SVG file.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are not errors
            use clap::error::ErrorKind::*;
            let _ = e.print();
            return match e.kind() {
                DisplayHelp | DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };

    if let Ok(threads) = std::env::var("OMSIM_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        }
    }

    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(classify_error(&e))
        }
    }
}

/// 1 = usage/config error, 2 = integration/physics failure.
fn classify_error(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<SimError>() {
        Some(SimError::InvalidParameter { .. }) => 1,
        Some(_) => 2,
        None => {
            if e.to_string().starts_with("physics:") {
                2
            } else {
                1
            }
        }
    }
}

/// Mark an error as a physics/integration failure for the exit-code contract.
fn physics(e: anyhow::Error) -> anyhow::Error {
    match e.downcast::<SimError>() {
        Ok(sim) => anyhow!(sim),
        Err(other) => anyhow!("physics: {other:#}"),
    }
}

fn load(cli_config: &Option<PathBuf>, patch: impl FnOnce(&mut RawConfig)) -> Result<RunConfig> {
    let mut raw = match cli_config {
        Some(path) => config::parse_raw(path)?,
        None => RawConfig::default(),
    };
    patch(&mut raw);
    let resolved = RunConfig::resolve(&raw)?;
    if let Some(path) = cli_config {
        let echo = serde_json::to_string_pretty(&resolved.to_effective())?;
        std::fs::write(config::effective_path(path), echo + "\n")?;
    }
    Ok(resolved)
}

fn apply_common(raw: &mut RawConfig, common: &CommonOverrides) {
    if let Some(p) = common.power {
        raw.params.get_or_insert_with(Default::default).power = Some(p);
    }
    if let Some(dk) = common.dt_kappa {
        // resolved against the effective kappa afterwards; stash the ratio by
        // clearing dt and scaling once params are known. Simplest correct
        // path: resolve kappa here the same way the resolver will.
        let kappa = raw
            .params
            .as_ref()
            .and_then(|p| p.kappa)
            .unwrap_or_else(|| {
                let omega_m = raw
                    .params
                    .as_ref()
                    .and_then(|p| p.omega_m)
                    .unwrap_or(2.0 * std::f64::consts::PI * 1e5);
                50.0 * omega_m
            });
        raw.integration.get_or_insert_with(Default::default).dt = Some(dk / kappa);
    }
}

fn out_path(common: &CommonOverrides, default_name: &str) -> PathBuf {
    common
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(default_name))
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            common,
            init_amplitude_lambda,
            duration_periods,
            stride,
        } => {
            let config = load(&cli.config, |raw| {
                apply_common(raw, &common);
                let integ = raw.integration.get_or_insert_with(Default::default);
                if let Some(d) = duration_periods {
                    integ.duration_periods = Some(d);
                }
                if let Some(s) = stride {
                    integ.sample_stride = Some(s);
                }
            })?;
            let out = out_path(&common, "trajectory.csv");
            runs::run_simulate(&config, init_amplitude_lambda, &out).map_err(physics)?;
            eprintln!("wrote {}", out.display());
            Ok(())
        }
        Command::Sweep {
            common,
            power_min,
            power_max,
            power_steps,
            ic_min_lambda,
            ic_max_lambda,
            ic_steps,
            relax_periods,
        } => {
            let config = load(&cli.config, |raw| {
                apply_common(raw, &common);
                let sweep = raw.sweep.get_or_insert_with(Default::default);
                if power_min.is_some() {
                    sweep.power_min = power_min;
                }
                if power_max.is_some() {
                    sweep.power_max = power_max;
                }
                if power_steps.is_some() {
                    sweep.power_steps = power_steps;
                }
                if ic_min_lambda.is_some() {
                    sweep.ic_min_lambda = ic_min_lambda;
                }
                if ic_max_lambda.is_some() {
                    sweep.ic_max_lambda = ic_max_lambda;
                }
                if ic_steps.is_some() {
                    sweep.ic_steps = ic_steps;
                }
                if relax_periods.is_some() {
                    raw.run_policy.get_or_insert_with(Default::default).relax_periods =
                        relax_periods;
                }
            })?;
            let out = out_path(&common, "attractors.csv");
            let result = runs::run_sweep(&config, &out).map_err(physics)?;
            eprint!("{}", runs::sweep_summary(&result, config.scales.lambda_n));
            eprintln!("wrote {}", out.display());
            Ok(())
        }
        Command::Entangle {
            common,
            temperature,
            periods,
            init_amplitude_lambda,
        } => {
            let config = load(&cli.config, |raw| {
                apply_common(raw, &common);
                let ent = raw.entangle.get_or_insert_with(Default::default);
                if temperature.is_some() {
                    ent.temperature = temperature;
                }
                if periods.is_some() {
                    ent.periods = periods;
                }
                if init_amplitude_lambda.is_some() {
                    ent.init_amplitude_lambda = init_amplitude_lambda;
                }
            })?;
            let out = out_path(&common, "entanglement.csv");
            runs::run_entangle(&config, &out).map_err(physics)?;
            eprintln!("wrote {}", out.display());
            Ok(())
        }
        Command::Validate => {
            let results = validate::run_suite();
            let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
            let mut failed = 0;
            for r in &results {
                println!(
                    "{:<width$}  {}  {}",
                    r.name,
                    if r.passed { "PASS" } else { "FAIL" },
                    r.detail,
                );
                if !r.passed {
                    failed += 1;
                }
            }
            if failed > 0 {
                eprintln!("{failed} of {} checks failed", results.len());
                std::process::exit(3);
            }
            Ok(())
        }
        Command::Plot { figure, input, out } => {
            let config = load(&cli.config, |_| {})?;
            let (params, scales) = (&config.params, &config.scales);
            let need_input = || -> Result<(Vec<String>, Vec<Vec<f64>>)> {
                let path = input
                    .as_deref()
                    .ok_or_else(|| anyhow!("--input CSV is required for {figure}"))?;
                read_csv(path)
            };
            let panels = match figure.as_str() {
                "fig2" => figures::fig2(params, scales),
                "fig3" => {
                    let (h, rows) = need_input()?;
                    figures::fig3(&h, &rows, params, scales)?
                }
                "fig4" => {
                    let (h, rows) = need_input()?;
                    figures::fig4(&h, &rows, scales)?
                }
                "fig5" => {
                    let (h, rows) = need_input()?;
                    figures::fig5(&h, &rows, params, scales)?
                }
                "fig6" => {
                    let (h, rows) = need_input()?;
                    figures::fig6(&h, &rows, params, scales)?
                }
                "fig7" => {
                    let (h, rows) = need_input()?;
                    figures::fig7(&h, &rows, params, scales)?
                }
                other => bail!("unknown figure {other:?} (expected fig2..fig7)"),
            };
            let height = if panels.len() > 1 { 240 } else { 430 };
            let svg = figures::render_svg(&panels, 900, height);
            let path = out.unwrap_or_else(|| PathBuf::from(format!("{figure}.svg")));
            std::fs::write(&path, svg)?;
            eprintln!("wrote {}", path.display());
            Ok(())
        }
    }
}
