//! Gaussian quantum fluctuations around the classical orbit.
//!
//! The quadrature fluctuation vector `u = [δq, δp, δx, δy]` obeys the linear
//! Langevin equation `du/dt = A(t) u + noise`, so its state is fully
//! characterized by the 4x4 symmetric covariance matrix `V` with
//! `V_ij = <u_i u_j + u_j u_i>/2` (vacuum variance 1/2), which evolves as
//!
//! ```text
//! dV/dt = A(t) V + V A(t)^T + D,      D = diag[0, gamma (2 n_th + 1), kappa, kappa]
//! ```
//!
//! with the drift rebuilt from the classical trajectory at every integrator
//! stage. Entanglement between membrane and cavity mode is measured by the
//! logarithmic negativity computed from the partially transposed symplectic
//! spectrum.

use nalgebra::{Matrix2, Matrix4};

use crate::dynamics::{ClassicalState, ScaledModel};
use crate::error::{Result, SimError};
use crate::model::{detuning, detuning_bound, mode_frequency_jet, DerivedScales, SystemParams};

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Drift matrix of the fluctuation equations at one instant, together with
/// the scalars it was assembled from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftMatrix {
    pub matrix: Matrix4<f64>,
    /// Detuning `omega_c(q0) - omega_l`, rad/s.
    pub delta: f64,
    /// Real part of the effective coupling `sqrt(2) q_z omega_c'(q0) alpha`.
    pub g_x: f64,
    /// Imaginary part of the effective coupling.
    pub g_y: f64,
    /// Effective mechanical frequency
    /// `omega_m + q_z^2 omega_c''(q0) |alpha|^2`, rad/s.
    pub omega_eff: f64,
}

/// Build the drift matrix from a classical phase point:
///
/// ```text
///        |    0        omega_m    0       0    |
/// A  =   | -Omega_m   -gamma    -G_x    -G_y   |
///        |   G_y        0       -kappa   Delta |
///        |  -G_x        0       -Delta  -kappa |
/// ```
pub fn assemble_drift(
    state: &ClassicalState,
    params: &SystemParams,
    scales: &DerivedScales,
) -> DriftMatrix {
    let jet = mode_frequency_jet(state.q0, params.parity, params, scales);
    let delta = detuning(state.q0, params, scales);
    let g = SQRT_2 * scales.q_z * jet.d1 * state.alpha;
    let omega_eff = params.omega_m + scales.q_z * scales.q_z * jet.d2 * state.alpha.norm_sqr();
    let (g_x, g_y) = (g.re, g.im);
    let matrix = Matrix4::new(
        0.0, params.omega_m, 0.0, 0.0, //
        -omega_eff, -params.gamma, -g_x, -g_y, //
        g_y, 0.0, -params.kappa, delta, //
        -g_x, 0.0, -delta, -params.kappa,
    );
    DriftMatrix {
        matrix,
        delta,
        g_x,
        g_y,
        omega_eff,
    }
}

/// Diagonal diffusion matrix `D = diag[0, gamma (2 n_th + 1), kappa, kappa]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseMatrix {
    pub diag: [f64; 4],
}

impl NoiseMatrix {
    pub fn matrix(&self) -> Matrix4<f64> {
        Matrix4::from_diagonal(&self.diag.into())
    }
}

pub fn noise_matrix(params: &SystemParams, scales: &DerivedScales) -> NoiseMatrix {
    NoiseMatrix {
        diag: [
            0.0,
            params.gamma * (2.0 * scales.n_th + 1.0),
            params.kappa,
            params.kappa,
        ],
    }
}

/// Symmetric covariance matrix of the quadrature fluctuations in the basis
/// `[δq, δp, δx, δy]`, vacuum variance 1/2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceMatrix(pub Matrix4<f64>);

impl CovarianceMatrix {
    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.0
    }

    /// Largest absolute entry.
    pub fn norm_max(&self) -> f64 {
        self.0.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Largest absolute deviation from symmetry.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..4 {
            for j in (i + 1)..4 {
                worst = worst.max((self.0[(i, j)] - self.0[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn symmetrize(&mut self) {
        for i in 0..4 {
            for j in (i + 1)..4 {
                let m = 0.5 * (self.0[(i, j)] + self.0[(j, i)]);
                self.0[(i, j)] = m;
                self.0[(j, i)] = m;
            }
        }
    }

    /// Determinants of the 2x2 blocks `V1` (membrane), `V2` (cavity) and
    /// `V3` (cross-correlations) of `V = [[V1, V3], [V3^T, V2]]`.
    pub fn block_dets(&self) -> (f64, f64, f64) {
        let b = |r: usize, c: usize| Matrix2::new(
            self.0[(r, c)],
            self.0[(r, c + 1)],
            self.0[(r + 1, c)],
            self.0[(r + 1, c + 1)],
        );
        (
            b(0, 0).determinant(),
            b(2, 2).determinant(),
            b(0, 2).determinant(),
        )
    }

    pub fn determinant(&self) -> f64 {
        self.0.determinant()
    }
}

/// `dV/dt = A V + V A^T + D`. The result is exactly symmetric for symmetric
/// `V`: it is computed as `M + M^T + D` with `M = A V`.
pub fn covariance_rhs(
    v: &CovarianceMatrix,
    drift: &DriftMatrix,
    noise: &NoiseMatrix,
) -> Matrix4<f64> {
    let m = drift.matrix * v.0;
    let mut out = m + m.transpose();
    for i in 0..4 {
        out[(i, i)] += noise.diag[i];
    }
    out
}

/// Stationary covariance of the uncoupled system: membrane thermalized at
/// `n_th`, cavity in vacuum. This is the pre-switch-on state and the initial
/// condition of every co-simulation.
pub fn initial_covariance(scales: &DerivedScales) -> CovarianceMatrix {
    let v_mech = 0.5 * (2.0 * scales.n_th + 1.0);
    CovarianceMatrix(Matrix4::from_diagonal(&[v_mech, v_mech, 0.5, 0.5].into()))
}

/// Two-mode squeezed covariance with squeezing parameter `r`
/// (`V1 = V2 = cosh(2r)/2 I`, `V3 = sinh(2r)/2 diag(1, -1)`). Pure state;
/// its logarithmic negativity is `2r`. Oracle constructor for tests.
pub fn tmsv_covariance(r: f64) -> CovarianceMatrix {
    let c = 0.5 * (2.0 * r).cosh();
    let s = 0.5 * (2.0 * r).sinh();
    CovarianceMatrix(Matrix4::new(
        c, 0.0, s, 0.0, //
        0.0, c, 0.0, -s, //
        s, 0.0, c, 0.0, //
        0.0, -s, 0.0, c,
    ))
}

/// Tolerance scale for radicand clamping: radicands more negative than
/// `-1e-12 * max(1, scale)` indicate a corrupted matrix rather than roundoff.
fn clamped_sqrt(radicand: f64, scale: f64, context: &str) -> Result<f64> {
    let tol = 1e-12 * scale.max(1.0);
    if radicand < -tol {
        return Err(SimError::CorruptCovariance {
            message: format!("{context}: radicand {radicand:.3e} below -{tol:.3e}"),
        });
    }
    Ok(radicand.max(0.0).sqrt())
}

/// Symplectic eigenvalues `(nu_minus, nu_plus)` of a physical two-mode
/// covariance matrix; the state is physical iff `nu_minus >= 1/2`.
pub fn symplectic_eigenvalues(v: &CovarianceMatrix) -> Result<(f64, f64)> {
    let (d1, d2, d3) = v.block_dets();
    let sigma = d1 + d2 + 2.0 * d3;
    let det = v.determinant();
    let disc = clamped_sqrt(sigma * sigma - 4.0 * det, sigma * sigma, "symplectic discriminant")?;
    let nu_plus = clamped_sqrt(0.5 * (sigma + disc), sigma.abs(), "nu_plus")?;
    let nu_minus = clamped_sqrt(0.5 * (sigma - disc), sigma.abs(), "nu_minus")?;
    Ok((nu_minus, nu_plus))
}

/// Logarithmic negativity of the membrane–cavity split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogNegativity {
    /// `E_N = max(0, -ln(2 eta_minus))`.
    pub e_n: f64,
    /// Smallest symplectic eigenvalue of the partially transposed state.
    pub eta_minus: f64,
}

/// `eta_minus = sqrt((Sigma - sqrt(Sigma^2 - 4 det V)) / 2)` with
/// `Sigma = det V1 + det V2 - 2 det V3`; `E_N = max(0, -ln(2 eta_minus))`.
pub fn log_negativity(v: &CovarianceMatrix) -> Result<LogNegativity> {
    let (d1, d2, d3) = v.block_dets();
    let sigma = d1 + d2 - 2.0 * d3;
    let det = v.determinant();
    let disc = clamped_sqrt(sigma * sigma - 4.0 * det, sigma * sigma, "PT discriminant")?;
    let eta_minus = clamped_sqrt(0.5 * (sigma - disc), sigma.abs(), "eta_minus")?;
    if eta_minus <= 0.0 {
        return Err(SimError::CorruptCovariance {
            message: "eta_minus vanished; covariance matrix is singular".into(),
        });
    }
    Ok(LogNegativity {
        e_n: (-(2.0 * eta_minus).ln()).max(0.0),
        eta_minus,
    })
}

/// Evolve `V` under a fixed drift and noise with RK4 (oracle helper; the
/// production path is [`cosimulate`], where the drift tracks the classical
/// orbit).
pub fn evolve_covariance(
    v0: &CovarianceMatrix,
    drift: &DriftMatrix,
    noise: &NoiseMatrix,
    dt: f64,
    steps: u64,
) -> CovarianceMatrix {
    let mut v = *v0;
    for _ in 0..steps {
        let k1 = covariance_rhs(&v, drift, noise);
        let k2 = covariance_rhs(&CovarianceMatrix(v.0 + 0.5 * dt * k1), drift, noise);
        let k3 = covariance_rhs(&CovarianceMatrix(v.0 + 0.5 * dt * k2), drift, noise);
        let k4 = covariance_rhs(&CovarianceMatrix(v.0 + dt * k3), drift, noise);
        v = CovarianceMatrix(v.0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
        v.symmetrize();
    }
    v
}

/// Entanglement diagnostics at one sampled time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntanglementSample {
    /// Time, s.
    pub t: f64,
    /// Logarithmic negativity.
    pub e_n: f64,
    /// Smallest PT symplectic eigenvalue.
    pub eta_minus: f64,
    /// Smallest symplectic eigenvalue of `V` itself (physicality monitor,
    /// must stay >= 1/2 up to tolerance).
    pub min_symplectic_eig: f64,
}

/// One recorded co-simulation sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoSample {
    pub state: ClassicalState,
    pub covariance: CovarianceMatrix,
    pub entanglement: EntanglementSample,
}

/// Ceiling on `dt * max(kappa, |Delta|, |G|, Omega_m)` during co-simulation.
pub const DEFAULT_DRIFT_GUARD: f64 = 0.05;

/// Physicality is violated when `nu_minus < 1/2 - PHYSICALITY_TOLERANCE`.
pub const PHYSICALITY_TOLERANCE: f64 = 1e-4;

/// Controls for a classical+covariance co-simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosimConfig {
    /// Step size, s.
    pub dt: f64,
    /// Total integration time, s.
    pub duration: f64,
    /// Record every `sample_stride`-th step.
    pub sample_stride: usize,
    /// Ceiling on `dt * max(kappa, |Delta|, |G|, Omega_m)`, checked at every
    /// step; violation is an error, never silent sub-stepping.
    pub drift_guard: f64,
}

/// Analytic upper bound on the fastest rate entering the drift matrix along
/// any trajectory whose cavity amplitude never exceeds `alpha_max`.
pub fn cosim_rate_bound(params: &SystemParams, scales: &DerivedScales, alpha_max: f64) -> f64 {
    let four_pi = 4.0 * std::f64::consts::PI;
    let root = (1.0 - params.r_c * params.r_c).sqrt();
    // max |omega_c'| = (c/L) 4 pi r_c / lambda_n,
    // max |omega_c''| = (c/L) (4 pi / lambda_n)^2 r_c / sqrt(1 - r_c^2)
    let d1_max = scales.c_over_l * four_pi * params.r_c / scales.lambda_n;
    let d2_max = scales.c_over_l * (four_pi / scales.lambda_n).powi(2) * params.r_c / root;
    let g_max = SQRT_2 * scales.q_z * d1_max * alpha_max;
    let omega_eff_max = params.omega_m + scales.q_z * scales.q_z * d2_max * alpha_max * alpha_max;
    params
        .kappa
        .max(detuning_bound(params, scales))
        .max(g_max)
        .max(omega_eff_max)
}

impl CosimConfig {
    /// Choose the largest step satisfying the drift guard with a 20% margin
    /// against the analytic rate bound, and a sampling stride of roughly 1e-3
    /// mechanical periods.
    pub fn auto(
        params: &SystemParams,
        scales: &DerivedScales,
        initial: &ClassicalState,
        duration: f64,
    ) -> Self {
        let alpha_max = (scales.alpha_l / params.kappa).max(initial.alpha.norm());
        let rate = cosim_rate_bound(params, scales, alpha_max);
        let dt = 0.8 * DEFAULT_DRIFT_GUARD / rate;
        let sample_dt = 1e-3 * params.mechanical_period();
        let sample_stride = (sample_dt / dt).round().max(1.0) as usize;
        Self {
            dt,
            duration,
            sample_stride,
            drift_guard: DEFAULT_DRIFT_GUARD,
        }
    }

    pub fn steps(&self) -> u64 {
        (self.duration / self.dt).round().max(1.0) as u64
    }
}

/// Scaled drift matrix `A(t) / omega_m` and the fastest rate in it (in units
/// of `omega_m`), built from the scaled classical state.
fn scaled_drift(model: &ScaledModel, s: &[f64; 4]) -> (Matrix4<f64>, f64) {
    let theta = 4.0 * std::f64::consts::PI * s[0];
    let (f, lf1, lf2) = crate::model::membrane_phase_jet(theta, model.r_c);
    let delta_t = if model.is_resonant {
        model.sign * model.cl_t * (f - model.resonant_f_qs)
    } else {
        model.sign * model.cl_t * f + model.explicit_offset_t
    };
    let w1 = model.sign * model.cl_t * lf1;
    let w2 = model.sign * model.cl_t * lf2;
    let gx = SQRT_2 * model.qz_over_lambda * w1 * model.a_ref * s[2];
    let gy = SQRT_2 * model.qz_over_lambda * w1 * model.a_ref * s[3];
    let n_ph = s[2] * s[2] + s[3] * s[3];
    let omega_eff_t = 1.0
        + model.qz_over_lambda * model.qz_over_lambda * w2 * model.a_ref * model.a_ref * n_ph;
    let gamma_t = model.gamma_t;
    let kappa_t = model.kappa_t;
    let a = Matrix4::new(
        0.0, 1.0, 0.0, 0.0, //
        -omega_eff_t, -gamma_t, -gx, -gy, //
        gy, 0.0, -kappa_t, delta_t, //
        -gx, 0.0, -delta_t, -kappa_t,
    );
    let rate = kappa_t
        .max(delta_t.abs())
        .max((gx * gx + gy * gy).sqrt())
        .max(omega_eff_t.abs());
    (a, rate)
}

/// Joint fixed-step RK4 integration of the classical mean-field state and
/// the fluctuation covariance matrix. The drift is rebuilt from the classical
/// stage values at every RK4 stage; `V` is symmetrized after every step.
///
/// Errors on non-finite states, on drift-guard violations and on physicality
/// violations (`nu_minus < 1/2 - 1e-4`) at sampled times.
pub fn cosimulate(
    initial: &ClassicalState,
    v0: &CovarianceMatrix,
    params: &SystemParams,
    scales: &DerivedScales,
    config: &CosimConfig,
) -> Result<Vec<CoSample>> {
    if !initial.is_finite() {
        return Err(SimError::IntegrationFailure {
            t: initial.t,
            message: "non-finite initial state".into(),
        });
    }
    let model = ScaledModel::new(params, scales);
    let dtau = config.dt * params.omega_m;
    let guard = config.drift_guard;
    let noise_t = {
        let n = noise_matrix(params, scales);
        [
            n.diag[0] / params.omega_m,
            n.diag[1] / params.omega_m,
            n.diag[2] / params.omega_m,
            n.diag[3] / params.omega_m,
        ]
    };

    // stage derivative of the joint state
    let joint_rhs = |s: &[f64; 4], v: &Matrix4<f64>, t: f64| -> Result<([f64; 4], Matrix4<f64>)> {
        let ds = model.rhs(s);
        let (a, rate) = scaled_drift(&model, s);
        if rate * dtau > guard {
            return Err(SimError::StepGuard {
                t,
                rate_name: "max(kappa,|Delta|,|G|,Omega_m)",
                product: rate * dtau,
                guard,
            });
        }
        let m = a * v;
        let mut dv = m + m.transpose();
        for i in 0..4 {
            dv[(i, i)] += noise_t[i];
        }
        Ok((ds, dv))
    };

    let steps = config.steps();
    let stride = config.sample_stride.max(1) as u64;
    let mut samples = Vec::with_capacity((steps / stride + 2) as usize);

    let mut s = model.to_scaled(initial);
    let mut v = *v0;
    v.symmetrize();

    let record = |samples: &mut Vec<CoSample>,
                  s: &[f64; 4],
                  v: &CovarianceMatrix,
                  t: f64|
     -> Result<()> {
        let neg = log_negativity(v)?;
        let (nu_minus, _) = symplectic_eigenvalues(v)?;
        if nu_minus < 0.5 - PHYSICALITY_TOLERANCE {
            return Err(SimError::Physicality { t, nu_minus });
        }
        samples.push(CoSample {
            state: model.to_si(s, t),
            covariance: *v,
            entanglement: EntanglementSample {
                t,
                e_n: neg.e_n,
                eta_minus: neg.eta_minus,
                min_symplectic_eig: nu_minus,
            },
        });
        Ok(())
    };

    record(&mut samples, &s, &v, initial.t)?;

    let add4 = |a: &[f64; 4], b: &[f64; 4], h: f64| {
        [a[0] + h * b[0], a[1] + h * b[1], a[2] + h * b[2], a[3] + h * b[3]]
    };
    for i in 1..=steps {
        let t = initial.t + (i - 1) as f64 * config.dt;
        let (k1s, k1v) = joint_rhs(&s, &v.0, t)?;
        let (k2s, k2v) = joint_rhs(&add4(&s, &k1s, 0.5 * dtau), &(v.0 + 0.5 * dtau * k1v), t)?;
        let (k3s, k3v) = joint_rhs(&add4(&s, &k2s, 0.5 * dtau), &(v.0 + 0.5 * dtau * k2v), t)?;
        let (k4s, k4v) = joint_rhs(&add4(&s, &k3s, dtau), &(v.0 + dtau * k3v), t)?;
        for j in 0..4 {
            s[j] += dtau / 6.0 * (k1s[j] + 2.0 * k2s[j] + 2.0 * k3s[j] + k4s[j]);
        }
        v = CovarianceMatrix(v.0 + dtau / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v));
        v.symmetrize();

        if i % stride == 0 {
            let t_now = initial.t + i as f64 * config.dt;
            if !(s.iter().all(|x| x.is_finite()) && v.0.iter().all(|x| x.is_finite())) {
                return Err(SimError::IntegrationFailure {
                    t: t_now,
                    message: "co-simulation state became non-finite".into(),
                });
            }
            record(&mut samples, &s, &v, t_now)?;
        }
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::PhysicalConstants;
    use crate::model::derive_scales;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn setup() -> (SystemParams, DerivedScales) {
        let params = SystemParams::reference();
        let scales = derive_scales(&params, &PhysicalConstants::default()).unwrap();
        (params, scales)
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    fn decoupled_drift(params: &SystemParams, scales: &DerivedScales) -> DriftMatrix {
        assemble_drift(&ClassicalState::at_rest(params.q_s), params, scales)
    }

    #[test]
    fn drift_decouples_at_rest() {
        let (params, scales) = setup();
        let drift = decoupled_drift(&params, &scales);
        let expected = Matrix4::new(
            0.0, params.omega_m, 0.0, 0.0, //
            -params.omega_m, -params.gamma, 0.0, 0.0, //
            0.0, 0.0, -params.kappa, 0.0, //
            0.0, 0.0, 0.0, -params.kappa,
        );
        assert_eq!(drift.matrix, expected);
        assert_eq!(drift.delta, 0.0);
        assert_eq!((drift.g_x, drift.g_y), (0.0, 0.0));
    }

    #[test]
    fn drift_at_equilibrium_with_field() {
        let (params, scales) = setup();
        let alpha = Complex64::new(2.0e4, 0.0);
        let state = ClassicalState {
            alpha,
            ..ClassicalState::at_rest(params.q_s)
        };
        let drift = assemble_drift(&state, &params, &scales);
        // curvature vanishes at q_s, so Omega_m stays omega_m
        assert!(rel_err(drift.omega_eff, params.omega_m) < 1e-12);
        // real alpha with positive slope: G real and positive
        let jet = mode_frequency_jet(params.q_s, params.parity, &params, &scales);
        assert!(jet.d1 > 0.0);
        assert!(rel_err(drift.g_x, SQRT_2 * scales.q_z * jet.d1 * alpha.re) < 1e-12);
        assert_eq!(drift.g_y, 0.0);
    }

    /// Independent element-by-element drift assembly, with its own detuning
    /// computed as a direct frequency difference.
    fn drift_oracle(
        state: &ClassicalState,
        params: &SystemParams,
        scales: &DerivedScales,
    ) -> Matrix4<f64> {
        let jet = mode_frequency_jet(state.q0, params.parity, params, scales);
        let delta = jet.omega_c - scales.omega_l;
        let gx = SQRT_2 * scales.q_z * jet.d1 * state.alpha.re;
        let gy = SQRT_2 * scales.q_z * jet.d1 * state.alpha.im;
        let om = params.omega_m + scales.q_z.powi(2) * jet.d2 * state.alpha.norm_sqr();
        let mut a = Matrix4::zeros();
        a[(0, 1)] = params.omega_m;
        a[(1, 0)] = -om;
        a[(1, 1)] = -params.gamma;
        a[(1, 2)] = -gx;
        a[(1, 3)] = -gy;
        a[(2, 0)] = gy;
        a[(2, 2)] = -params.kappa;
        a[(2, 3)] = delta;
        a[(3, 0)] = -gx;
        a[(3, 2)] = -delta;
        a[(3, 3)] = -params.kappa;
        a
    }

    #[test]
    fn drift_matches_independent_assembly_on_random_states() {
        use rand::{Rng, SeedableRng};
        let (params, scales) = setup();
        let mut rng = rand::rngs::StdRng::seed_from_u64(0x5eed);
        for _ in 0..100 {
            let state = ClassicalState {
                t: 0.0,
                q0: params.q_s + (rng.gen::<f64>() - 0.5) * 2.0 * scales.lambda_n,
                p0: (rng.gen::<f64>() - 0.5) * 2e-14,
                alpha: Complex64::new(
                    (rng.gen::<f64>() - 0.5) * 4e5,
                    (rng.gen::<f64>() - 0.5) * 4e5,
                ),
            };
            let drift = assemble_drift(&state, &params, &scales);
            let oracle = drift_oracle(&state, &params, &scales);
            for i in 0..4 {
                for j in 0..4 {
                    let (a, b) = (drift.matrix[(i, j)], oracle[(i, j)]);
                    // the oracle's detuning carries ~1 rad/s of cancellation
                    // noise from the direct 1e15 - 1e15 subtraction
                    assert!(
                        (a - b).abs() <= 1e-9 * b.abs() + 1.0,
                        "A[{i},{j}] = {a} vs oracle {b}"
                    );
                }
            }
        }
    }

    #[test]
    fn rhs_zero_drift_zero_noise() {
        let v = CovarianceMatrix(Matrix4::new(
            1.0, 0.2, 0.3, 0.4, //
            0.2, 2.0, 0.5, 0.6, //
            0.3, 0.5, 3.0, 0.7, //
            0.4, 0.6, 0.7, 4.0,
        ));
        let drift = DriftMatrix {
            matrix: Matrix4::zeros(),
            delta: 0.0,
            g_x: 0.0,
            g_y: 0.0,
            omega_eff: 0.0,
        };
        let noise = NoiseMatrix { diag: [0.0; 4] };
        assert_eq!(covariance_rhs(&v, &drift, &noise), Matrix4::zeros());
    }

    #[test]
    fn thermal_vacuum_is_stationary() {
        let (params, scales) = setup();
        let drift = decoupled_drift(&params, &scales);
        let noise = noise_matrix(&params, &scales);
        let v = initial_covariance(&scales);
        let rhs = covariance_rhs(&v, &drift, &noise);
        let scale = params.kappa * v.norm_max();
        for x in rhs.iter() {
            assert!(
                x.abs() <= 1e-12 * scale,
                "stationarity violated: rhs entry {x}"
            );
        }
    }

    #[test]
    fn identity_over_two_heats_only_the_momentum() {
        let (params, scales) = setup();
        let drift = decoupled_drift(&params, &scales);
        let noise = noise_matrix(&params, &scales);
        let v = CovarianceMatrix(Matrix4::identity() * 0.5);
        let rhs = covariance_rhs(&v, &drift, &noise);
        assert!(rel_err(rhs[(1, 1)], 2.0 * params.gamma * scales.n_th) < 1e-9);
        for (i, j) in [(0, 0), (2, 2), (3, 3), (0, 2), (1, 3)] {
            assert!(rhs[(i, j)].abs() <= 1e-9 * params.kappa);
        }
    }

    #[test]
    fn initial_covariance_values() {
        let (params, scales) = setup();
        let v = initial_covariance(&scales);
        assert!(rel_err(v.0[(0, 0)], scales.n_th + 0.5) < 1e-12);
        assert_eq!(v.0[(2, 2)], 0.5);
        assert_eq!(log_negativity(&v).unwrap().e_n, 0.0);

        let cold = derive_scales(&params.with_temperature(0.0), &scales.constants).unwrap();
        assert_eq!(initial_covariance(&cold).0, Matrix4::identity() * 0.5);
    }

    #[test]
    fn symplectic_spectrum_known_states() {
        let (_, scales) = setup();
        let vacuum = CovarianceMatrix(Matrix4::identity() * 0.5);
        let (lo, hi) = symplectic_eigenvalues(&vacuum).unwrap();
        assert!(rel_err(lo, 0.5) < 1e-14 && rel_err(hi, 0.5) < 1e-14);

        let thermal = initial_covariance(&scales);
        let (lo, hi) = symplectic_eigenvalues(&thermal).unwrap();
        assert!(rel_err(lo, 0.5) < 1e-12);
        assert!(rel_err(hi, scales.n_th + 0.5) < 1e-12);

        // pure two-mode squeezed state: nu- = nu+ = 1/2, det V = 1/16. The
        // symplectic discriminant vanishes identically here, so roundoff in
        // the 4x4 determinant surfaces as ~1e-7 in the degenerate roots.
        for r in [0.1, 0.5, 1.0] {
            let v = tmsv_covariance(r);
            assert!(rel_err(v.determinant(), 1.0 / 16.0) < 1e-10);
            let (lo, hi) = symplectic_eigenvalues(&v).unwrap();
            assert!((lo - 0.5).abs() < 1e-6 && (hi - 0.5).abs() < 1e-6);
        }
    }

    #[test]
    fn log_negativity_oracles() {
        let vacuum = CovarianceMatrix(Matrix4::identity() * 0.5);
        let neg = log_negativity(&vacuum).unwrap();
        assert!(rel_err(neg.eta_minus, 0.5) < 1e-14);
        assert_eq!(neg.e_n, 0.0);

        let (_, scales) = setup();
        assert_eq!(log_negativity(&initial_covariance(&scales)).unwrap().e_n, 0.0);

        assert_eq!(tmsv_covariance(0.0).0, Matrix4::identity() * 0.5);
        for r in [0.1, 0.5, 1.0] {
            let neg = log_negativity(&tmsv_covariance(r)).unwrap();
            assert!(
                (neg.e_n - 2.0 * r).abs() < 1e-9,
                "E_N({r}) = {} != {}",
                neg.e_n,
                2.0 * r
            );
        }
    }

    #[test]
    fn fixed_drift_holds_thermal_vacuum_stationary() {
        let (params, scales) = setup();
        let drift = decoupled_drift(&params, &scales);
        let noise = noise_matrix(&params, &scales);
        let v0 = initial_covariance(&scales);
        let dt = 0.02 / params.kappa;
        let steps = (2.0 / params.gamma / dt).round() as u64;
        let v = evolve_covariance(&v0, &drift, &noise, dt, steps);
        let drift_rel = (v.0 - v0.0).norm() / v0.0.norm();
        assert!(drift_rel < 1e-9, "thermal-vacuum drifted by {drift_rel:.3e}");
    }

    #[test]
    fn decoherence_is_monotone_without_coupling() {
        let (params, scales) = setup();
        let drift = decoupled_drift(&params, &scales);
        let noise = noise_matrix(&params, &scales);
        let mut v = tmsv_covariance(1.0);
        let dt = 0.02 / params.kappa;
        let mut last = log_negativity(&v).unwrap().e_n;
        for _ in 0..400 {
            v = evolve_covariance(&v, &drift, &noise, dt, 50);
            let e_n = log_negativity(&v).unwrap().e_n;
            assert!(e_n <= last + 1e-12, "E_N grew from {last} to {e_n}");
            last = e_n;
        }
    }

    #[test]
    fn cosimulation_stays_at_fixed_point_without_drive() {
        let (params, scales) = setup();
        let params = params.with_power(0.0);
        let scales = scales.with_power(0.0, &params);
        let v0 = initial_covariance(&scales);
        let initial = ClassicalState::at_rest(params.q_s);
        let config = CosimConfig {
            dt: 0.01 / params.kappa,
            duration: 0.2 * params.mechanical_period(),
            sample_stride: 100,
            drift_guard: DEFAULT_DRIFT_GUARD,
        };
        let samples = cosimulate(&initial, &v0, &params, &scales, &config).unwrap();
        for s in &samples {
            assert!((s.covariance.0 - v0.0).norm() / v0.0.norm() < 1e-9);
            assert_eq!(s.entanglement.e_n, 0.0);
        }
    }

    #[test]
    fn cosimulation_is_deterministic() {
        let (params, scales) = setup();
        let initial = ClassicalState::at_rest(params.q_s + 0.05 * scales.lambda_n);
        let v0 = initial_covariance(&scales);
        let config = CosimConfig::auto(&params, &scales, &initial, 0.02 * params.mechanical_period());
        let a = cosimulate(&initial, &v0, &params, &scales, &config).unwrap();
        let b = cosimulate(&initial, &v0, &params, &scales, &config).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.entanglement.e_n.to_bits(), y.entanglement.e_n.to_bits());
            assert_eq!(x.covariance.0, y.covariance.0);
        }
    }

    #[test]
    fn scaled_drift_matches_public_assembly() {
        let (params, scales) = setup();
        let model = ScaledModel::new(&params, &scales);
        let state = ClassicalState {
            t: 0.0,
            q0: params.q_s + 0.37 * scales.lambda_n,
            p0: 1.1e-14,
            alpha: Complex64::new(1.7e5, -0.6e5),
        };
        let s = model.to_scaled(&state);
        let (a_t, _) = scaled_drift(&model, &s);
        let a = assemble_drift(&state, &params, &scales).matrix;
        for i in 0..4 {
            for j in 0..4 {
                let expect = a[(i, j)] / params.omega_m;
                assert!(
                    (a_t[(i, j)] - expect).abs() <= 1e-12 * expect.abs().max(1e-12),
                    "A~[{i},{j}] = {} vs {}",
                    a_t[(i, j)],
                    expect
                );
            }
        }
    }

    #[test]
    fn drift_guard_rejects_oversized_steps() {
        let (params, scales) = setup();
        let initial = ClassicalState::at_rest(params.q_s + 0.5 * scales.lambda_n);
        let v0 = initial_covariance(&scales);
        // a step fine for the classical system but far beyond the drift guard
        let config = CosimConfig {
            dt: 0.004 / params.kappa,
            duration: 0.5 * params.mechanical_period(),
            sample_stride: 10,
            drift_guard: DEFAULT_DRIFT_GUARD,
        };
        let err = cosimulate(&initial, &v0, &params, &scales, &config).unwrap_err();
        assert!(matches!(err, SimError::StepGuard { .. }), "got {err:?}");
    }

    /// Random physical covariance matrices: symplectic squeeze + beamsplitter
    /// applied to a two-mode thermal state.
    fn random_physical(nu1: f64, nu2: f64, r1: f64, r2: f64, theta: f64) -> CovarianceMatrix {
        let d = Matrix4::from_diagonal(&[nu1, nu1, nu2, nu2].into());
        let sq = Matrix4::from_diagonal(
            &[r1.exp(), (-r1).exp(), r2.exp(), (-r2).exp()].into(),
        );
        let (s, c) = theta.sin_cos();
        let bs = Matrix4::new(
            c, 0.0, s, 0.0, //
            0.0, c, 0.0, s, //
            -s, 0.0, c, 0.0, //
            0.0, -s, 0.0, c,
        );
        let t = bs * sq;
        let mut v = CovarianceMatrix(t * d * t.transpose());
        v.symmetrize();
        v
    }

    proptest! {
        #[test]
        fn ppt_consistency_on_random_states(
            nu1 in 0.5f64..8.0,
            nu2 in 0.5f64..8.0,
            r1 in -1.2f64..1.2,
            r2 in -1.2f64..1.2,
            theta in 0.0f64..std::f64::consts::FRAC_PI_2,
        ) {
            let v = random_physical(nu1, nu2, r1, r2, theta);
            let (nu_minus, _) = symplectic_eigenvalues(&v).unwrap();
            prop_assert!(nu_minus >= 0.5 - 1e-9, "unphysical construction: {nu_minus}");
            let neg = log_negativity(&v).unwrap();
            // E_N > 0 exactly when the PT eigenvalue dips below 1/2
            if neg.e_n > 0.0 {
                prop_assert!(neg.eta_minus < 0.5 + 1e-12);
            } else {
                prop_assert!(neg.eta_minus >= 0.5 - 1e-12);
            }
            prop_assert!((neg.e_n - (-(2.0 * neg.eta_minus).ln()).max(0.0)).abs() < 1e-14);
        }
    }
}
