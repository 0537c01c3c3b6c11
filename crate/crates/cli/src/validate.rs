//! Built-in oracle suite: fast cross-checks of the numerical core against
//! independent analytic results, run at the reference parameters.

use num_complex::Complex64;

use omsim_core::attractor::{self, RunPolicy};
use omsim_core::covariance::{
    assemble_drift, evolve_covariance, initial_covariance, log_negativity, noise_matrix,
    tmsv_covariance,
};
use omsim_core::dynamics::{
    advance_state, simulate, simulate_clamped_cavity, ClassicalState, IntegrationConfig,
};
use omsim_core::model::{
    derive_scales, detuning, mode_frequency_jet, resonance_half_width, DerivedScales, ModeParity,
    SystemParams,
};
use omsim_core::PhysicalConstants;

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult {
        name,
        passed,
        detail,
    }
}

fn reference() -> (SystemParams, DerivedScales) {
    let params = SystemParams::reference();
    let scales = derive_scales(&params, &PhysicalConstants::default()).unwrap();
    (params, scales)
}

fn mode_periodicity() -> CheckResult {
    let (params, scales) = reference();
    let mut worst = 0.0f64;
    for parity in [ModeParity::Even, ModeParity::Odd] {
        for i in 0..1000 {
            let q = (i as f64 / 1000.0 - 0.5) * scales.lambda_n;
            let a = mode_frequency_jet(q, parity, &params, &scales).omega_c;
            let b = mode_frequency_jet(q + scales.lambda_n / 2.0, parity, &params, &scales).omega_c;
            let tol = 1e-9 * (a - scales.omega_n).abs() + 1e-3;
            worst = worst.max((a - b).abs() / tol);
        }
    }
    check(
        "mode landscape: lambda_n/2 periodicity",
        worst <= 1.0,
        format!("worst deviation {worst:.3e} of tolerance"),
    )
}

fn parity_sum() -> CheckResult {
    let (params, scales) = reference();
    let c_over_l = scales.constants.c / params.cavity_length;
    let expected = 2.0 * scales.omega_n + std::f64::consts::PI * c_over_l
        - 2.0 * c_over_l * params.r_c.asin();
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let q = i as f64 / 1000.0 * scales.lambda_n;
        let e = mode_frequency_jet(q, ModeParity::Even, &params, &scales).omega_c;
        let o = mode_frequency_jet(q, ModeParity::Odd, &params, &scales).omega_c;
        let tol = 1e-9 * ((e - scales.omega_n).abs() + (o - scales.omega_n).abs()) + 1e-3;
        worst = worst.max(((e + o) - expected).abs() / tol);
    }
    check(
        "mode landscape: parity sum is position independent",
        worst <= 1.0,
        format!("worst deviation {worst:.3e} of tolerance"),
    )
}

fn derivative_consistency() -> CheckResult {
    let (params, scales) = reference();
    let h = 1e-3 * scales.lambda_n;
    let d = |q: f64| detuning(q, &params, &scales);
    let c_over_l = scales.constants.c / params.cavity_length;
    let d1_scale = c_over_l * 4.0 * std::f64::consts::PI / scales.lambda_n;
    let d2_scale = d1_scale * 4.0 * std::f64::consts::PI / scales.lambda_n;
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let q = i as f64 / 1000.0 * scales.lambda_n / 2.0;
        let jet = mode_frequency_jet(q, ModeParity::Odd, &params, &scales);
        let fd1 =
            (-d(q + 2.0 * h) + 8.0 * d(q + h) - 8.0 * d(q - h) + d(q - 2.0 * h)) / (12.0 * h);
        let fd2 = (-d(q + 2.0 * h) + 16.0 * d(q + h) - 30.0 * d(q) + 16.0 * d(q - h)
            - d(q - 2.0 * h))
            / (12.0 * h * h);
        worst = worst
            .max((jet.d1 - fd1).abs() / (1e-6 * jet.d1.abs().max(1e-3 * d1_scale)))
            .max((jet.d2 - fd2).abs() / (1e-6 * jet.d2.abs().max(1e-3 * d2_scale)));
    }
    check(
        "mode landscape: analytic derivatives vs 5-point differences",
        worst <= 1.0,
        format!("worst deviation {worst:.3e} of tolerance (1e3 grid points)"),
    )
}

fn detuning_cancellation() -> CheckResult {
    let (params, scales) = reference();
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let q = (i as f64 / 1000.0 - 0.25) * scales.lambda_n;
        let direct = mode_frequency_jet(q, params.parity, &params, &scales).omega_c
            - scales.omega_l;
        worst = worst.max((detuning(q, &params, &scales) - direct).abs());
    }
    check(
        "detuning: cancelled form vs direct difference",
        worst <= 1.0,
        format!("worst |difference| {worst:.3e} rad/s (tolerance 1 rad/s)"),
    )
}

fn lorentzian() -> CheckResult {
    let (params, scales) = reference();
    let mut worst = 0.0f64;
    for multiple in [0.0, 1.0, 2.5, 5.0, 7.5, 10.0] {
        let dq = if multiple == 0.0 {
            0.0
        } else {
            resonance_half_width(&params, &scales, multiple).unwrap()
        };
        for q in [params.q_s + dq, params.q_s - dq] {
            let delta = detuning(q, &params, &scales);
            let a = simulate_clamped_cavity(
                q,
                Complex64::new(0.0, 0.0),
                &params,
                &scales,
                5e-3 / params.kappa,
                20.0 / params.kappa,
            );
            let expected =
                scales.alpha_l * scales.alpha_l / (params.kappa * params.kappa + delta * delta);
            worst = worst.max((a.norm_sqr() / expected - 1.0).abs());
        }
    }
    check(
        "cavity: Lorentzian steady state at 11 detunings (+-10 kappa)",
        worst <= 1e-6,
        format!("worst relative error {worst:.3e} (tolerance 1e-6)"),
    )
}

fn damped_decay() -> CheckResult {
    let (params, scales) = reference();
    let params = params.with_power(0.0);
    let scales = scales.with_power(0.0, &params);
    let d = 0.5 * scales.lambda_n;
    let initial = ClassicalState::at_rest(params.q_s + d);
    let config = IntegrationConfig::for_periods(&params, 10.0).with_stride(8);
    let traj = match simulate(&initial, &params, &scales, &config) {
        Ok(t) => t,
        Err(e) => return check("mechanics: free decay envelope", false, e.to_string()),
    };
    let mut worst = 0.0f64;
    for s in traj.samples.iter().skip(1) {
        let r = attractor::phase_space_amplitude(s, &params);
        let envelope = d * (-params.gamma * s.t / 2.0).exp();
        worst = worst.max((r / envelope - 1.0).abs());
    }
    check(
        "mechanics: free decay envelope e^{-gamma t/2} over 10 periods",
        worst <= 0.01,
        format!("worst relative envelope error {worst:.3e} (tolerance 1e-2)"),
    )
}

fn covariance_stationarity() -> CheckResult {
    let (params, scales) = reference();
    let drift = assemble_drift(&ClassicalState::at_rest(params.q_s), &params, &scales);
    let noise = noise_matrix(&params, &scales);
    let v0 = initial_covariance(&scales);
    let dt = 0.02 / params.kappa;
    let steps = (5.0 / params.gamma / dt).round() as u64;
    let v = evolve_covariance(&v0, &drift, &noise, dt, steps);
    let rel = (v.0 - v0.0).norm() / v0.0.norm();
    check(
        "covariance: thermal (x) vacuum stationary under decoupled drift (5/gamma)",
        rel <= 1e-6,
        format!("relative drift {rel:.3e} (tolerance 1e-6)"),
    )
}

fn tmsv_oracle() -> CheckResult {
    let (_, scales) = reference();
    let mut worst = 0.0f64;
    for r in [0.1, 0.5, 1.0] {
        let neg = log_negativity(&tmsv_covariance(r)).unwrap();
        worst = worst.max((neg.e_n - 2.0 * r).abs());
    }
    let vacuum = log_negativity(&tmsv_covariance(0.0)).unwrap().e_n;
    let thermal = log_negativity(&initial_covariance(&scales)).unwrap().e_n;
    check(
        "entanglement: two-mode-squeezed E_N = 2r; product states E_N = 0",
        worst <= 1e-9 && vacuum == 0.0 && thermal == 0.0,
        format!("worst |E_N - 2r| = {worst:.3e}; vacuum {vacuum}; thermal {thermal}"),
    )
}

fn energy_balance() -> CheckResult {
    let (params, scales) = reference();
    let params = params.with_power(0.095);
    let scales = scales.with_power(0.095, &params);
    let integ = IntegrationConfig::for_periods(&params, 1.0);
    let initial = ClassicalState::at_rest(params.q_s + 0.2 * scales.lambda_n);
    let policy = RunPolicy {
        relax_periods: 150,
        window_periods: 10,
        max_extensions: 1,
    };
    let (stats, end) =
        match attractor::relax_to_cycle(&initial, &params, &scales, &policy, &integ) {
            Ok(x) => x,
            Err(e) => return check("energy balance on a converged cycle", false, e.to_string()),
        };
    if !stats.converged {
        return check(
            "energy balance on a converged cycle",
            false,
            "orbit did not converge".into(),
        );
    }
    let config = IntegrationConfig {
        duration: 4.5 * params.mechanical_period(),
        sample_stride: 1,
        ..integ
    };
    let traj = match simulate(&end, &params, &scales, &config) {
        Ok(t) => t,
        Err(e) => return check("energy balance on a converged cycle", false, e.to_string()),
    };
    match attractor::cycle_energy_audit(&traj, &params, &scales) {
        Ok(audit) => check(
            "energy balance on a converged cycle (radiation work vs dissipation)",
            audit.relative_imbalance.abs() <= 0.01,
            format!(
                "imbalance {:+.3e} over {} cycles (tolerance 1e-2)",
                audit.relative_imbalance, audit.cycles
            ),
        ),
        Err(e) => check("energy balance on a converged cycle", false, e.to_string()),
    }
}

fn peak_alignment() -> CheckResult {
    let (params, scales) = reference();
    let params = params.with_power(0.095);
    let scales = scales.with_power(0.095, &params);
    let integ = IntegrationConfig::for_periods(&params, 1.0);
    let initial = ClassicalState::at_rest(params.q_s + 0.2 * scales.lambda_n);
    let t_m = params.mechanical_period();
    let relax = (100.0 * t_m / integ.dt).round() as u64;
    let state = match advance_state(&initial, &params, &scales, integ.dt, relax, integ.stiffness_guard) {
        Ok(s) => s,
        Err(e) => return check("photon peaks align with the resonance grid", false, e.to_string()),
    };
    let config = IntegrationConfig {
        duration: 2.0 * t_m,
        sample_stride: 8,
        ..integ
    };
    let traj = match simulate(&state, &params, &scales, &config) {
        Ok(t) => t,
        Err(e) => return check("photon peaks align with the resonance grid", false, e.to_string()),
    };
    let dq_res =
        resonance_half_width(&params, &scales, attractor::RESONANCE_WINDOW_KAPPA).unwrap();
    match attractor::detect_resonance_peaks(&traj, &params, &scales) {
        Ok(peaks) if !peaks.is_empty() => {
            let worst = peaks.iter().map(|p| p.offset.abs()).fold(0.0f64, f64::max);
            check(
                "photon peaks align with the resonance grid",
                worst < dq_res,
                format!(
                    "{} peaks, worst offset {:.3e} m vs window {:.3e} m",
                    peaks.len(),
                    worst,
                    dq_res
                ),
            )
        }
        Ok(_) => check(
            "photon peaks align with the resonance grid",
            false,
            "no peaks detected".into(),
        ),
        Err(e) => check("photon peaks align with the resonance grid", false, e.to_string()),
    }
}

/// Run the whole oracle suite.
pub fn run_suite() -> Vec<CheckResult> {
    vec![
        mode_periodicity(),
        parity_sum(),
        derivative_consistency(),
        detuning_cancellation(),
        lorentzian(),
        damped_decay(),
        covariance_stationarity(),
        tmsv_oracle(),
        energy_balance(),
        peak_alignment(),
    ]
}
