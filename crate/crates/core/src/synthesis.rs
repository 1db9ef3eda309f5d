//! Closed-form control pulses for a node with one excited level.
//!
//! Trapping forces the reflected and re-emitted amplitudes to cancel, which
//! pins `g(t)` to the incoming photon and `r(t)` to its derivative. The
//! storage amplitude `|e(t)|` then follows from probability balance, its
//! phase from the imaginary part of `e* de/dt`, and the control field from
//! the `r` equation of motion. Generation runs the same construction with the
//! cavity emptying into the waveguide instead.

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::envelope::PhotonEnvelope;
use crate::feasibility::{self, FeasibilityReport};
use crate::grid::{self, phase_rate};
use crate::node::NodeParams;
use crate::pulse::{ControlPulse, PulseError};
use crate::trajectory::Trajectory;
use crate::{EPS_END, EPS_START};

const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error("no disentangling control pulse exists: margin {min_margin:.3e} at t = {argmin_t}")]
    Infeasible { min_margin: f64, argmin_t: f64 },
    #[error("adiabatic relation needs an unchirped envelope (|Im alpha| up to {max_imag:.3e})")]
    ChirpedInput { max_imag: f64 },
    #[error("adiabatic relation needs zero Raman detuning (got {0})")]
    Detuned(f64),
    #[error(transparent)]
    Pulse(#[from] PulseError),
    #[error(transparent)]
    Envelope(#[from] crate::envelope::EnvelopeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Trap,
    Generate,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Trap => "trap",
            Mode::Generate => "generate",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SynthesisResult {
    pub pulse: ControlPulse,
    pub trajectory: Trajectory,
    /// Final storage probability (trap) or emitted photon probability (generate).
    pub efficiency: f64,
    pub mode: Mode,
    pub report: FeasibilityReport,
}

/// Trapping efficiency
/// `(1 - Gc/k)(1 - gamma (k - Gc) / 4|g0|^2) - gamma / (k |g0|^2) int |a'|^2`.
/// Negative values mean no photon can be stored.
pub fn eta_trap(env: &PhotonEnvelope, p: &NodeParams) -> f64 {
    let g2 = p.g0_sq();
    (1.0 - p.gamma_c / p.kappa) * (1.0 - p.gamma_sp * (p.kappa - p.gamma_c) / (4.0 * g2))
        - p.gamma_sp / (p.kappa * g2) * env.derivative_norm()
}

/// Generation efficiency, the reciprocal of
/// `(1 + Gc/k)(1 + gamma (k + Gc) / 4|g0|^2) + gamma / (k |g0|^2) int |a'|^2`.
pub fn eta_gen(env: &PhotonEnvelope, p: &NodeParams) -> f64 {
    let g2 = p.g0_sq();
    let denom = (1.0 + p.gamma_c / p.kappa) * (1.0 + p.gamma_sp * (p.kappa + p.gamma_c) / (4.0 * g2))
        + p.gamma_sp / (p.kappa * g2) * env.derivative_norm();
    denom.recip()
}

/// Control pulse that absorbs `env` into `|e>` with nothing reflected.
pub fn synthesize_trap(env: &PhotonEnvelope, p: &NodeParams) -> Result<SynthesisResult, SynthesisError> {
    let report = feasibility::margin_trap(env, p);
    if !report.feasible {
        return Err(SynthesisError::Infeasible { min_margin: report.min_margin, argmin_t: report.argmin_t });
    }
    let scale = p.kappa.sqrt().recip();
    let g: Vec<C64> = env.values().iter().map(|a| a * scale).collect();
    let g_dot: Vec<C64> = env.derivatives().iter().map(|a| a * scale).collect();
    let half = 0.5 * (p.kappa - p.gamma_c);
    let r: Vec<C64> = g.iter().zip(&g_dot).map(|(g, gd)| I * (gd - g * half) / p.g0.conj()).collect();

    let active = report.window.clone();
    let e = storage_amplitude(&report.margin, &g, &g_dot, &r, p, active.clone(), env.grid().dt());
    let pulse = control_field(env, p, &g, &r, &e, active)?;
    let efficiency = e.last().unwrap().norm_sqr();
    Ok(SynthesisResult {
        pulse,
        trajectory: Trajectory { grid: *env.grid(), g, r, e },
        efficiency,
        mode: Mode::Trap,
        report,
    })
}

/// Control pulse that releases the excitation stored in `|e>` as a photon
/// with waveform `env`, with efficiency [`eta_gen`].
pub fn synthesize_gen(env: &PhotonEnvelope, p: &NodeParams) -> Result<SynthesisResult, SynthesisError> {
    let report = feasibility::margin_gen(env, p);
    if !report.feasible {
        return Err(SynthesisError::Infeasible { min_margin: report.min_margin, argmin_t: report.argmin_t });
    }
    let eta = eta_gen(env, p);
    let scale = (eta / p.kappa).sqrt();
    let g: Vec<C64> = env.values().iter().map(|a| a * scale).collect();
    let g_dot: Vec<C64> = env.derivatives().iter().map(|a| a * scale).collect();
    let half = 0.5 * (p.kappa + p.gamma_c);
    let r: Vec<C64> = g.iter().zip(&g_dot).map(|(g, gd)| I * (gd + g * half) / p.g0.conj()).collect();

    // the drive runs from the first sample until the storage level is empty
    let stop = report.margin.iter().position(|m| *m < EPS_END).unwrap_or(report.margin.len());
    let e = storage_amplitude(&report.margin, &g, &g_dot, &r, p, 0..stop, env.grid().dt());
    let pulse = control_field(env, p, &g, &r, &e, 0..stop)?;
    Ok(SynthesisResult {
        pulse,
        trajectory: Trajectory { grid: *env.grid(), g, r, e },
        efficiency: eta,
        mode: Mode::Generate,
        report,
    })
}

/// `e(t) = |e| exp(i Phi_e)` with `|e|^2` given by the margin series and
/// `Phi_e' = (|r|^2 (Phi_r' + Delta) - |g|^2 Phi_g') / |e|^2`, integrated from
/// zero at the start of `active`. Outside `active` the magnitude is kept and
/// the phase frozen.
fn storage_amplitude(
    margin: &[f64],
    g: &[C64],
    g_dot: &[C64],
    r: &[C64],
    p: &NodeParams,
    active: std::ops::Range<usize>,
    dt: f64,
) -> Vec<C64> {
    let n = margin.len();
    let r_dot = grid::derivative(r, dt);
    let mut rate = vec![0.0; n];
    for k in active.clone() {
        let e2 = margin[k];
        rate[k] = (r[k].norm_sqr() * (phase_rate(r[k], r_dot[k]) + p.delta)
            - g[k].norm_sqr() * phase_rate(g[k], g_dot[k]))
            / e2;
    }
    let mut phase = vec![0.0; n];
    for k in active.start + 1..active.end {
        phase[k] = phase[k - 1] + 0.5 * dt * (rate[k - 1] + rate[k]);
    }
    if active.end > active.start {
        let last = phase[active.end - 1];
        phase[active.end..].iter_mut().for_each(|x| *x = last);
    }
    margin
        .iter()
        .zip(&phase)
        .enumerate()
        .map(|(k, (m, ph))| {
            if k < active.start {
                C64::new(0.0, 0.0)
            } else {
                C64::from_polar(m.max(0.0).sqrt(), *ph)
            }
        })
        .collect()
}

/// `Omega / 2 = (i / e) (r' + (gamma/2 + i Delta) r + i g0 g)` on `active`,
/// zero elsewhere.
fn control_field(
    env: &PhotonEnvelope,
    p: &NodeParams,
    g: &[C64],
    r: &[C64],
    e: &[C64],
    active: std::ops::Range<usize>,
) -> Result<ControlPulse, SynthesisError> {
    let r_dot = grid::derivative(r, env.grid().dt());
    let decay = C64::new(0.5 * p.gamma_sp, p.delta);
    let mut omega = vec![C64::new(0.0, 0.0); g.len()];
    for k in active {
        let num = r_dot[k] + decay * r[k] + I * p.g0 * g[k];
        omega[k] = 2.0 * I * num / e[k];
    }
    Ok(ControlPulse::from_complex(*env.grid(), &omega)?)
}

/// Slow-pulse (STIRAP) estimate
/// `|Omega/2|^2 = |g0|^2 |a|^2 / (kappa int_{-inf}^t |a|^2)` for an unchirped
/// photon and a resonant node. The phase is zero.
pub fn adiabatic_pulse(env: &PhotonEnvelope, p: &NodeParams) -> Result<ControlPulse, SynthesisError> {
    let max_imag = env.values().iter().map(|v| v.im.abs()).fold(0.0, f64::max);
    if max_imag > 1e-10 {
        return Err(SynthesisError::ChirpedInput { max_imag });
    }
    if p.delta != 0.0 {
        return Err(SynthesisError::Detuned(p.delta));
    }
    let cum = env.cumulative_norm();
    let g2 = p.g0_sq();
    let magnitude: Vec<f64> = env
        .values()
        .iter()
        .zip(&cum)
        .map(|(a, c)| if *c < EPS_START { 0.0 } else { 2.0 * (g2 * a.norm_sqr() / (p.kappa * c)).sqrt() })
        .collect();
    let n = magnitude.len();
    Ok(ControlPulse::new(*env.grid(), magnitude, vec![0.0; n])?)
}

#[derive(Debug, Clone)]
pub struct RecoveredEnvelope {
    /// `int |a|^2` before renormalization.
    pub raw_norm: f64,
    /// Normalized envelope; `None` when the pulse carries no photon.
    pub envelope: Option<PhotonEnvelope>,
}

/// Photon released by a slowly varying pulse:
/// `|a|^2 = (kappa/|g0|^2) |Omega/2|^2 exp(-(kappa/|g0|^2) int_t^inf |Omega/2|^2)`,
/// the exact inverse of [`adiabatic_pulse`]. Only the pulse magnitude is used.
pub fn envelope_from_adiabatic_pulse(pulse: &ControlPulse, p: &NodeParams) -> Result<RecoveredEnvelope, SynthesisError> {
    let grid = *pulse.grid();
    let dt = grid.dt();
    let ratio = p.kappa / p.g0_sq();
    let quarter: Vec<f64> = pulse.magnitude().iter().map(|m| 0.25 * m * m).collect();
    let n = quarter.len();
    // reverse running integral int_t^end
    let mut tail = vec![0.0; n];
    for k in (0..n - 1).rev() {
        tail[k] = tail[k + 1] + 0.5 * dt * (quarter[k] + quarter[k + 1]);
    }
    let intensity: Vec<f64> = quarter.iter().zip(&tail).map(|(q, t)| ratio * q * (-ratio * t).exp()).collect();
    let raw_norm = grid::trapezoid(&intensity, dt);
    if raw_norm == 0.0 {
        return Ok(RecoveredEnvelope { raw_norm, envelope: None });
    }
    let values = intensity.iter().map(|x| C64::new(x.sqrt(), 0.0)).collect();
    let envelope = PhotonEnvelope::tabulated(grid, values)?;
    Ok(RecoveredEnvelope { raw_norm, envelope: Some(envelope) })
}
