//! Cavity-mode frequency landscape of the membrane-in-the-middle cavity.
//!
//! A membrane of field reflectivity `r_c` at position `q` splits each pair of
//! degenerate cavity modes into an even and an odd branch whose frequencies
//! are periodic in `q` with period `lambda_n / 2`:
//!
//! ```text
//! omega_even(q) = omega_n + (c/L) asin(r_c cos(4 pi q / lambda_n)) - (c/L) asin(r_c)
//! omega_odd(q)  = omega_n + pi c/L - (c/L) asin(r_c cos(4 pi q / lambda_n)) - (c/L) asin(r_c)
//! ```
//!
//! Everything downstream needs `omega_c` together with its first two exact
//! derivatives in `q` (radiation force, linearized coupling, effective
//! mechanical frequency), plus the detuning `omega_c(q) - omega_l` in a form
//! that never subtracts two ~1e15 rad/s numbers.

use crate::constants::PhysicalConstants;
use crate::error::{Result, SimError};

/// Which of the two nondegenerate mode branches is driven.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeParity {
    Even,
    Odd,
}

impl ModeParity {
    /// Sign with which `asin(r_c cos θ)` enters the branch frequency.
    #[inline]
    pub(crate) fn sign(self) -> f64 {
        match self {
            ModeParity::Even => 1.0,
            ModeParity::Odd => -1.0,
        }
    }
}

/// How the drive laser frequency is fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DriveFrequencyRule {
    /// `omega_l = omega_c(q_s)` for the configured parity: the laser is
    /// resonant with the membrane at its static equilibrium position.
    ResonantAtRest,
    /// Explicit laser frequency in rad/s.
    Explicit(f64),
}

/// Physical parameters of one simulation run (SI units).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// Mechanical angular frequency, rad/s.
    pub omega_m: f64,
    /// Effective membrane mass, kg.
    pub mass: f64,
    /// Mechanical damping rate, rad/s.
    pub gamma: f64,
    /// Membrane field reflectivity magnitude, in `[0, 1)`.
    pub r_c: f64,
    /// Cavity length, m.
    pub cavity_length: f64,
    /// Longitudinal mode order `n`.
    pub mode_order: u32,
    /// Driven mode branch.
    pub parity: ModeParity,
    /// Cavity amplitude decay rate, rad/s.
    pub kappa: f64,
    /// Static equilibrium position of the membrane, m.
    pub q_s: f64,
    /// Drive laser power, W.
    pub power: f64,
    /// Membrane bath temperature, K.
    pub temperature: f64,
    /// Drive frequency rule.
    pub drive: DriveFrequencyRule,
}

impl SystemParams {
    /// The parameter set used throughout the reference figures:
    /// `omega_m = 2 pi x 1e5 rad/s`, `m = 5e-14 kg`, `gamma = 1e-2 omega_m`,
    /// `r_c = 0.8`, `L = 6 cm`, `n = 60000` (so `lambda_n = 1000 nm`), odd
    /// branch, `kappa = 50 omega_m`, `q_s = lambda_n / 8`, resonant drive,
    /// `P = 0.21 W`, `T = 1 mK`.
    pub fn reference() -> Self {
        let omega_m = 2.0 * std::f64::consts::PI * 1e5;
        let cavity_length = 0.06;
        let mode_order = 60_000;
        let lambda_n = cavity_length / mode_order as f64;
        Self {
            omega_m,
            mass: 5e-14,
            gamma: 1e-2 * omega_m,
            r_c: 0.8,
            cavity_length,
            mode_order,
            parity: ModeParity::Odd,
            kappa: 50.0 * omega_m,
            q_s: lambda_n / 8.0,
            power: 0.21,
            temperature: 1e-3,
            drive: DriveFrequencyRule::ResonantAtRest,
        }
    }

    pub fn with_power(mut self, power: f64) -> Self {
        self.power = power;
        self
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    /// Mechanical period `2 pi / omega_m`, s.
    pub fn mechanical_period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.omega_m
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_c >= 0.0 && self.r_c < 1.0) {
            return Err(SimError::invalid(
                "r_c",
                format!(
                    "membrane reflectivity must lie in [0, 1), got {}; the derivative \
                     formulas are singular at r_c = 1",
                    self.r_c
                ),
            ));
        }
        let positive = [
            ("omega_m", self.omega_m),
            ("mass", self.mass),
            ("kappa", self.kappa),
            ("cavity_length", self.cavity_length),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SimError::invalid(name, "must be strictly positive"));
            }
        }
        let nonnegative = [
            ("gamma", self.gamma),
            ("temperature", self.temperature),
            ("power", self.power),
        ];
        for (name, v) in nonnegative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(SimError::invalid(name, "must be finite and >= 0"));
            }
        }
        if self.mode_order == 0 {
            return Err(SimError::invalid("mode_order", "must be a positive integer"));
        }
        if !self.q_s.is_finite() {
            return Err(SimError::invalid("q_s", "must be finite"));
        }
        // Markov treatment of the thermal bath needs a high mechanical Q.
        if self.temperature > 0.0 && self.gamma > 0.0 && self.omega_m / self.gamma < 10.0 {
            return Err(SimError::invalid(
                "gamma",
                format!(
                    "mechanical quality factor omega_m/gamma = {:.3} < 10 is incompatible \
                     with the Markovian thermal-noise model at T > 0",
                    self.omega_m / self.gamma
                ),
            ));
        }
        if let DriveFrequencyRule::Explicit(w) = self.drive {
            if !(w > 0.0 && w.is_finite()) {
                return Err(SimError::invalid(
                    "drive_frequency",
                    "explicit drive frequency must be strictly positive",
                ));
            }
        }
        Ok(())
    }
}

/// Internal representation of the detuning, chosen so that no ~1e15 rad/s
/// constants ever enter a subtraction along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum DetuningForm {
    /// `Delta(q) = sign * (c/L) * (f(q) - f(q_s))`, exact cancellation.
    Resonant { f_qs: f64 },
    /// `Delta(q) = sign * (c/L) * f(q) + offset`; `offset` is the one-time
    /// constant `omega_n + branch base - omega_l`.
    Explicit { offset: f64 },
}

/// Quantities derived once from [`SystemParams`]; all downstream operations
/// take `(params, scales)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedScales {
    /// Membrane-scale wavelength `lambda_n = L / n`, m.
    pub lambda_n: f64,
    /// Degenerate-mode frequency `omega_n = 2 n pi c / L`, rad/s.
    pub omega_n: f64,
    /// Zero-point position spread `sqrt(hbar / (m omega_m))`, m.
    pub q_z: f64,
    /// Zero-point momentum spread `sqrt(hbar m omega_m)`, kg·m/s.
    pub p_z: f64,
    /// Real drive amplitude `sqrt(2 kappa P / (hbar omega_l))`, 1/s.
    pub alpha_l: f64,
    /// Mean thermal phonon occupation of the mechanical bath.
    pub n_th: f64,
    /// Resolved drive frequency, rad/s.
    pub omega_l: f64,
    /// Constants snapshot the scales were derived with.
    pub constants: PhysicalConstants,
    pub(crate) c_over_l: f64,
    pub(crate) detuning_form: DetuningForm,
}

impl DerivedScales {
    /// Recompute only the power-dependent drive amplitude. Used by sweeps,
    /// where everything else in the scale set is power-independent.
    pub fn with_power(&self, power: f64, params: &SystemParams) -> DerivedScales {
        let mut out = *self;
        out.alpha_l = drive_amplitude(power, params.kappa, self.omega_l, &self.constants);
        out
    }
}

fn drive_amplitude(power: f64, kappa: f64, omega_l: f64, constants: &PhysicalConstants) -> f64 {
    (2.0 * kappa * power / (constants.hbar * omega_l)).sqrt()
}

/// The mode frequency and its first two derivatives at one position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeJet {
    /// `omega_c(q)`, rad/s.
    pub omega_c: f64,
    /// `omega_c'(q)`, rad/(s·m).
    pub d1: f64,
    /// `omega_c''(q)`, rad/(s·m^2).
    pub d2: f64,
}

/// `f(theta) = asin(r_c cos theta)` and its two theta-derivatives divided by
/// the chain-rule powers of `4 pi / lambda_n`, i.e. already expressed as
/// q-derivatives scaled by `lambda_n`:
/// returns `(f, lambda_n f', lambda_n^2 f'')`.
#[inline]
pub(crate) fn membrane_phase_jet(theta: f64, r_c: f64) -> (f64, f64, f64) {
    let (sin_t, cos_t) = theta.sin_cos();
    let k = 4.0 * std::f64::consts::PI;
    let root_sq = 1.0 - r_c * r_c * cos_t * cos_t;
    let root = root_sq.sqrt();
    let f = (r_c * cos_t).asin();
    let d1 = -r_c * k * sin_t / root;
    let d2 = -r_c * k * k * (1.0 - r_c * r_c) * cos_t / (root_sq * root);
    (f, d1, d2)
}

/// Branch base frequency without the q-dependent term:
/// even `omega_n - (c/L) asin(r_c)`, odd `omega_n + pi c/L - (c/L) asin(r_c)`.
fn branch_base(parity: ModeParity, omega_n: f64, c_over_l: f64, r_c: f64) -> f64 {
    let common = omega_n - c_over_l * r_c.asin();
    match parity {
        ModeParity::Even => common,
        ModeParity::Odd => common + std::f64::consts::PI * c_over_l,
    }
}

/// Derive all secondary scales from a validated parameter set.
pub fn derive_scales(params: &SystemParams, constants: &PhysicalConstants) -> Result<DerivedScales> {
    constants.validate()?;
    params.validate()?;

    let lambda_n = params.cavity_length / params.mode_order as f64;
    let c_over_l = constants.c / params.cavity_length;
    let omega_n = 2.0 * params.mode_order as f64 * std::f64::consts::PI * c_over_l;

    let q_z = (constants.hbar / (params.mass * params.omega_m)).sqrt();
    let p_z = (constants.hbar * params.mass * params.omega_m).sqrt();

    let theta_s = 4.0 * std::f64::consts::PI * params.q_s / lambda_n;
    let f_qs = (params.r_c * theta_s.cos()).asin();

    let (omega_l, detuning_form) = match params.drive {
        DriveFrequencyRule::ResonantAtRest => {
            let base = branch_base(params.parity, omega_n, c_over_l, params.r_c);
            let omega_l = base + params.parity.sign() * c_over_l * f_qs;
            (omega_l, DetuningForm::Resonant { f_qs })
        }
        DriveFrequencyRule::Explicit(omega_l) => {
            let base = branch_base(params.parity, omega_n, c_over_l, params.r_c);
            (omega_l, DetuningForm::Explicit { offset: base - omega_l })
        }
    };

    let n_th = if params.temperature > 0.0 {
        let x = constants.hbar * params.omega_m / (constants.k_b * params.temperature);
        1.0 / x.exp_m1()
    } else {
        0.0
    };

    Ok(DerivedScales {
        lambda_n,
        omega_n,
        q_z,
        p_z,
        alpha_l: drive_amplitude(params.power, params.kappa, omega_l, constants),
        n_th,
        omega_l,
        constants: *constants,
        c_over_l,
        detuning_form,
    })
}

/// `omega_c(q)` and its first two q-derivatives for one branch.
pub fn mode_frequency_jet(
    q: f64,
    parity: ModeParity,
    params: &SystemParams,
    scales: &DerivedScales,
) -> ModeJet {
    let theta = 4.0 * std::f64::consts::PI * q / scales.lambda_n;
    let (f, lf1, lf2) = membrane_phase_jet(theta, params.r_c);
    let s = parity.sign();
    let base = branch_base(parity, scales.omega_n, scales.c_over_l, params.r_c);
    ModeJet {
        omega_c: base + s * scales.c_over_l * f,
        d1: s * scales.c_over_l * lf1 / scales.lambda_n,
        d2: s * scales.c_over_l * lf2 / (scales.lambda_n * scales.lambda_n),
    }
}

/// Detuning `omega_c(q) - omega_l` of the driven branch, computed in the
/// analytically cancelled form.
pub fn detuning(q: f64, params: &SystemParams, scales: &DerivedScales) -> f64 {
    let theta = 4.0 * std::f64::consts::PI * q / scales.lambda_n;
    let f = (params.r_c * theta.cos()).asin();
    let s = params.parity.sign();
    match scales.detuning_form {
        DetuningForm::Resonant { f_qs } => s * scales.c_over_l * (f - f_qs),
        DetuningForm::Explicit { offset } => s * scales.c_over_l * f + offset,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValidityStatus {
    Pass,
    Warning,
    Error,
}

/// Outcome of the single-mode validity check.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidityReport {
    /// Minimum frequency gap to the adjacent branches,
    /// `pi c/L - 2 (c/L) asin(r_c)`, rad/s.
    pub mode_gap: f64,
    /// `kappa / mode_gap`.
    pub ratio: f64,
    pub status: ValidityStatus,
    pub message: String,
}

/// Check that the driven mode is spectrally isolated: the single-mode model
/// requires `kappa` much smaller than the inter-branch gap. The thresholds
/// (warn above 1%, error above 10% of the gap) quantify "much smaller".
pub fn check_single_mode_validity(params: &SystemParams, scales: &DerivedScales) -> ValidityReport {
    let gap = std::f64::consts::PI * scales.c_over_l - 2.0 * scales.c_over_l * params.r_c.asin();
    let ratio = params.kappa / gap;
    let (status, message) = if ratio > 0.1 {
        (
            ValidityStatus::Error,
            format!(
                "kappa/gap = {ratio:.3e} > 0.1: the driven mode overlaps adjacent branches; \
                 the single-mode model does not apply"
            ),
        )
    } else if ratio > 0.01 {
        (
            ValidityStatus::Warning,
            format!("kappa/gap = {ratio:.3e} > 0.01: single-mode treatment is marginal"),
        )
    } else {
        (
            ValidityStatus::Pass,
            format!("kappa/gap = {ratio:.3e}: single-mode treatment is well justified"),
        )
    };
    ValidityReport {
        mode_gap: gap,
        ratio,
        status,
        message,
    }
}

/// Largest possible magnitude of the detuning along any trajectory,
/// `max_q |Delta(q)|`. Used by step-size guards.
pub fn detuning_bound(params: &SystemParams, scales: &DerivedScales) -> f64 {
    let a = params.r_c.asin();
    match scales.detuning_form {
        DetuningForm::Resonant { f_qs } => scales.c_over_l * (a + f_qs.abs()),
        DetuningForm::Explicit { offset } => scales.c_over_l * a + offset.abs(),
    }
}

/// Half-width `delta_q` of the resonance window around the equilibrium
/// resonance position, defined by `|Delta(q_s + delta_q)| = multiple * kappa`.
/// Requires the resonant drive rule. Solved by bisection over one quarter
/// period; if the detuning never reaches the target the full quarter period
/// `lambda_n / 8` is returned.
pub fn resonance_half_width(
    params: &SystemParams,
    scales: &DerivedScales,
    multiple: f64,
) -> Result<f64> {
    if !matches!(scales.detuning_form, DetuningForm::Resonant { .. }) {
        return Err(SimError::Analysis(
            "resonance_half_width requires the resonant-at-q_s drive rule".into(),
        ));
    }
    let target = multiple * params.kappa;
    let mut lo = 0.0;
    let mut hi = scales.lambda_n / 8.0;
    if detuning(params.q_s + hi, params, scales).abs() < target {
        return Ok(hi);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if detuning(params.q_s + mid, params, scales).abs() < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
