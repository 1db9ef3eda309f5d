//! Forward integration of the node's input-output equations.
//!
//! ```text
//! g' = -i g0* r - (kappa + Gc)/2 g + sqrt(kappa) a_in
//! r' = -(gamma/2 + i Delta) r - i g0 g - i (Omega/2) e
//! e' = -i (Omega*/2) r
//! a_out = sqrt(kappa) g - a_in
//! ```
//!
//! and its multi-level counterpart. The integrator is classic fixed-step RK4
//! on the shared grid, with drive and control linearly interpolated at half
//! steps. Nothing here depends on the synthesis code, so it serves as the
//! independent check on every synthesized pulse.

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::envelope::PhotonEnvelope;
use crate::grid::{self, TimeGrid};
use crate::node::{MultiNodeParams, NodeParams};
use crate::pulse::ControlPulse;
use crate::trajectory::{MultiTrajectory, Trajectory};

/// Largest `dt * rate` accepted for any rate in the problem.
pub const MAX_STEP_RATE: f64 = 0.1;

const I: C64 = C64 { re: 0.0, im: 1.0 };
const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("input and control pulse are not on the same grid")]
    GridMismatch,
    #[error("time step {dt} too coarse for fastest rate {rate} (dt * rate = {product:.3} > {MAX_STEP_RATE})")]
    StepTooCoarse { dt: f64, rate: f64, product: f64 },
    #[error("initial state is not a valid node state: {0}")]
    BadInitialState(String),
    #[error("field has zero norm")]
    ZeroField,
}

/// Waveguide field driving the cavity.
#[derive(Debug, Clone, Copy)]
pub enum Input<'a> {
    Vacuum,
    Envelope(&'a PhotonEnvelope),
    Samples(&'a [C64]),
}

impl Input<'_> {
    fn samples(&self, grid: &TimeGrid) -> Result<Vec<C64>, SimError> {
        match *self {
            Input::Vacuum => Ok(vec![ZERO; grid.n_points()]),
            Input::Envelope(env) if env.grid().same_as(grid) => Ok(env.values().to_vec()),
            Input::Samples(s) if s.len() == grid.n_points() => Ok(s.to_vec()),
            _ => Err(SimError::GridMismatch),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeState {
    pub g: C64,
    pub r: C64,
    pub e: C64,
}

impl NodeState {
    pub const EMPTY: NodeState = NodeState { g: ZERO, r: ZERO, e: ZERO };
    /// Excitation stored in `|e,0>`.
    pub const STORED: NodeState = NodeState { g: ZERO, r: ZERO, e: C64 { re: 1.0, im: 0.0 } };
    /// One photon in the cavity.
    pub const CAVITY: NodeState = NodeState { g: C64 { re: 1.0, im: 0.0 }, r: ZERO, e: ZERO };

    pub fn norm_sqr(&self) -> f64 {
        self.g.norm_sqr() + self.r.norm_sqr() + self.e.norm_sqr()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiNodeState {
    pub g: C64,
    pub r: Vec<C64>,
    pub e: C64,
}

impl MultiNodeState {
    pub fn empty(n: usize) -> Self {
        Self { g: ZERO, r: vec![ZERO; n], e: ZERO }
    }

    pub fn stored(n: usize) -> Self {
        Self { e: C64::new(1.0, 0.0), ..Self::empty(n) }
    }

    pub fn cavity(n: usize) -> Self {
        Self { g: C64::new(1.0, 0.0), ..Self::empty(n) }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.g.norm_sqr() + self.r.iter().map(|x| x.norm_sqr()).sum::<f64>() + self.e.norm_sqr()
    }
}

/// Where the probability went over the run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Budgets {
    /// Node population at the first sample.
    pub initial: f64,
    /// Node population at the last sample.
    pub node_prob: f64,
    /// `int |a_out|^2`.
    pub emitted: f64,
    /// `Gc int |g|^2`.
    pub spurious_cavity: f64,
    /// Spontaneous emission from the excited manifold.
    pub spontaneous: f64,
    /// `int |a_in|^2`.
    pub input: f64,
}

impl Budgets {
    /// `node_prob + emitted + spurious + spontaneous - input - initial`; zero
    /// up to discretization error.
    pub fn balance_residual(&self) -> f64 {
        self.node_prob + self.emitted + self.spurious_cavity + self.spontaneous - self.input - self.initial
    }
}

#[derive(Debug, Clone)]
pub struct SimOutcome<T = Trajectory> {
    pub trajectory: T,
    pub alpha_in: Vec<C64>,
    pub alpha_out: Vec<C64>,
    pub budgets: Budgets,
}

/// Integrates the single-level node from `init` under input `input` and
/// control `pulse`.
pub fn simulate(input: Input<'_>, pulse: &ControlPulse, p: &NodeParams, init: NodeState) -> Result<SimOutcome, SimError> {
    let grid = *pulse.grid();
    let a_in = input.samples(&grid)?;
    check_init(init.norm_sqr())?;
    let fastest = [pulse.peak(), p.g0.norm(), p.kappa + p.gamma_c, p.gamma_sp, p.delta.abs()]
        .into_iter()
        .fold(0.0, f64::max);
    check_step(grid.dt(), fastest)?;

    let omega = pulse.samples();
    let sqrt_k = p.kappa.sqrt();
    let half_loss = 0.5 * (p.kappa + p.gamma_c);
    let r_decay = C64::new(0.5 * p.gamma_sp, p.delta);
    let g0 = p.g0;
    let g0c = p.g0.conj();
    let rhs = |s: [C64; 3], a: C64, w: C64| -> [C64; 3] {
        let [g, r, e] = s;
        [
            -I * g0c * r - g * half_loss + a * sqrt_k,
            -r_decay * r - I * g0 * g - I * 0.5 * w * e,
            -I * 0.5 * w.conj() * r,
        ]
    };

    let n = grid.n_points();
    let dt = grid.dt();
    let mut g = Vec::with_capacity(n);
    let mut r = Vec::with_capacity(n);
    let mut e = Vec::with_capacity(n);
    let mut s = [init.g, init.r, init.e];
    g.push(s[0]);
    r.push(s[1]);
    e.push(s[2]);
    for k in 0..n - 1 {
        let (a0, a1) = (a_in[k], a_in[k + 1]);
        let (w0, w1) = (omega[k], omega[k + 1]);
        let (ah, wh) = (0.5 * (a0 + a1), 0.5 * (w0 + w1));
        let k1 = rhs(s, a0, w0);
        let k2 = rhs(axpy(&s, &k1, 0.5 * dt), ah, wh);
        let k3 = rhs(axpy(&s, &k2, 0.5 * dt), ah, wh);
        let k4 = rhs(axpy(&s, &k3, dt), a1, w1);
        for j in 0..3 {
            s[j] += (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]) * (dt / 6.0);
        }
        g.push(s[0]);
        r.push(s[1]);
        e.push(s[2]);
    }

    let alpha_out: Vec<C64> = g.iter().zip(&a_in).map(|(g, a)| g * sqrt_k - a).collect();
    let sq = |v: &[C64]| -> Vec<f64> { v.iter().map(|x| x.norm_sqr()).collect() };
    let budgets = Budgets {
        initial: init.norm_sqr(),
        node_prob: s.iter().map(|x| x.norm_sqr()).sum(),
        emitted: grid::trapezoid(&sq(&alpha_out), dt),
        spurious_cavity: p.gamma_c * grid::trapezoid(&sq(&g), dt),
        spontaneous: p.gamma_sp * grid::trapezoid(&sq(&r), dt),
        input: grid::trapezoid(&sq(&a_in), dt),
    };
    Ok(SimOutcome { trajectory: Trajectory { grid, g, r, e }, alpha_in: a_in, alpha_out, budgets })
}

/// Multi-level counterpart of [`simulate`]:
/// `R' = -i D R - i g G - i (Omega/2) e V`, `e' = -i (Omega*/2) V^dagger R`,
/// `g' = -i G^dagger R - (kappa + Gc)/2 g + sqrt(kappa) a_in`, with
/// `D = diag(Delta_k - i gamma_k)`.
pub fn simulate_n(
    input: Input<'_>,
    pulse: &ControlPulse,
    m: &MultiNodeParams,
    init: &MultiNodeState,
) -> Result<SimOutcome<MultiTrajectory>, SimError> {
    let grid = *pulse.grid();
    let a_in = input.samples(&grid)?;
    let nl = m.n_levels();
    if init.r.len() != nl {
        return Err(SimError::BadInitialState(format!("expected {nl} excited amplitudes, got {}", init.r.len())));
    }
    check_init(init.norm_sqr())?;
    let fastest = m
        .couplings
        .iter()
        .map(|c| c.norm())
        .chain(m.deltas.iter().map(|d| d.abs()))
        .chain(m.gammas.iter().copied())
        .chain([pulse.peak(), m.kappa + m.gamma_c])
        .fold(0.0, f64::max);
    check_step(grid.dt(), fastest)?;

    let omega = pulse.samples();
    let sqrt_k = m.kappa.sqrt();
    let half_loss = 0.5 * (m.kappa + m.gamma_c);
    let diag: Vec<C64> = m.deltas.iter().zip(&m.gammas).map(|(d, g)| C64::new(*d, -*g)).collect();
    let dim = nl + 2;
    // state layout: [g, R_1 .. R_N, e]
    let rhs = |s: &[C64], a: C64, w: C64, out: &mut [C64]| {
        let g = s[0];
        let e = s[dim - 1];
        let rs = &s[1..=nl];
        let mut g_dag_r = ZERO;
        let mut v_dag_r = ZERO;
        for k in 0..nl {
            g_dag_r += m.couplings[k].conj() * rs[k];
            v_dag_r += m.branching[k].conj() * rs[k];
        }
        out[0] = -I * g_dag_r - g * half_loss + a * sqrt_k;
        for k in 0..nl {
            out[1 + k] = -I * diag[k] * rs[k] - I * g * m.couplings[k] - I * 0.5 * w * e * m.branching[k];
        }
        out[dim - 1] = -I * 0.5 * w.conj() * v_dag_r;
    };

    let n = grid.n_points();
    let dt = grid.dt();
    let mut s: Vec<C64> = std::iter::once(init.g).chain(init.r.iter().copied()).chain([init.e]).collect();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![ZERO; dim], vec![ZERO; dim], vec![ZERO; dim], vec![ZERO; dim]);
    let mut tmp = vec![ZERO; dim];
    let mut g = Vec::with_capacity(n);
    let mut rr = Vec::with_capacity(n);
    let mut e = Vec::with_capacity(n);
    let record = |s: &[C64], g: &mut Vec<C64>, rr: &mut Vec<Vec<C64>>, e: &mut Vec<C64>| {
        g.push(s[0]);
        rr.push(s[1..=nl].to_vec());
        e.push(s[dim - 1]);
    };
    record(&s, &mut g, &mut rr, &mut e);
    for k in 0..n - 1 {
        let (a0, a1) = (a_in[k], a_in[k + 1]);
        let (w0, w1) = (omega[k], omega[k + 1]);
        let (ah, wh) = (0.5 * (a0 + a1), 0.5 * (w0 + w1));
        rhs(&s, a0, w0, &mut k1);
        stage(&s, &k1, 0.5 * dt, &mut tmp);
        rhs(&tmp, ah, wh, &mut k2);
        stage(&s, &k2, 0.5 * dt, &mut tmp);
        rhs(&tmp, ah, wh, &mut k3);
        stage(&s, &k3, dt, &mut tmp);
        rhs(&tmp, a1, w1, &mut k4);
        for j in 0..dim {
            s[j] += (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]) * (dt / 6.0);
        }
        record(&s, &mut g, &mut rr, &mut e);
    }

    let alpha_out: Vec<C64> = g.iter().zip(&a_in).map(|(g, a)| g * sqrt_k - a).collect();
    let sq = |v: &[C64]| -> Vec<f64> { v.iter().map(|x| x.norm_sqr()).collect() };
    let weighted: Vec<f64> =
        rr.iter().map(|r| r.iter().zip(&m.gammas).map(|(x, gk)| 2.0 * gk * x.norm_sqr()).sum()).collect();
    let budgets = Budgets {
        initial: init.norm_sqr(),
        node_prob: s.iter().map(|x| x.norm_sqr()).sum(),
        emitted: grid::trapezoid(&sq(&alpha_out), dt),
        spurious_cavity: m.gamma_c * grid::trapezoid(&sq(&g), dt),
        spontaneous: grid::trapezoid(&weighted, dt),
        input: grid::trapezoid(&sq(&a_in), dt),
    };
    let trajectory = MultiTrajectory { grid, g, r: rr, e, r_par: None, r_perp: None, y: None };
    Ok(SimOutcome { trajectory, alpha_in: a_in, alpha_out, budgets })
}

/// Normalized overlap `|int a* b|^2 / (int |a|^2 int |b|^2)`.
pub fn output_overlap(a: &[C64], b: &PhotonEnvelope) -> Result<f64, SimError> {
    if a.len() != b.values().len() {
        return Err(SimError::GridMismatch);
    }
    let dt = b.grid().dt();
    let na = grid::trapezoid(&a.iter().map(|x| x.norm_sqr()).collect::<Vec<_>>(), dt);
    if na == 0.0 {
        return Err(SimError::ZeroField);
    }
    let nb = b.total_norm();
    let cross: Vec<C64> = a.iter().zip(b.values()).map(|(x, y)| x.conj() * y).collect();
    let ov = grid::trapezoid(&cross, dt);
    Ok((ov.norm_sqr() / (na * nb)).min(1.0))
}

fn axpy(s: &[C64; 3], k: &[C64; 3], h: f64) -> [C64; 3] {
    [s[0] + k[0] * h, s[1] + k[1] * h, s[2] + k[2] * h]
}

fn stage(s: &[C64], k: &[C64], h: f64, out: &mut [C64]) {
    for ((o, x), d) in out.iter_mut().zip(s).zip(k) {
        *o = x + d * h;
    }
}

fn check_init(norm: f64) -> Result<(), SimError> {
    if !norm.is_finite() || norm > 1.0 + 1e-12 {
        return Err(SimError::BadInitialState(format!("norm {norm} exceeds one excitation")));
    }
    Ok(())
}

fn check_step(dt: f64, rate: f64) -> Result<(), SimError> {
    let product = dt * rate;
    if product > MAX_STEP_RATE {
        return Err(SimError::StepTooCoarse { dt, rate, product });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_pulse(t_end: f64, dt: f64) -> ControlPulse {
        ControlPulse::zero(TimeGrid::spanning(0.0, t_end, dt).unwrap())
    }

    #[test]
    fn vacuum_rabi_oscillation() {
        // kappa enters only as a loss, so a tiny value leaves the closed-system
        // solution intact to well below the tolerance over this window
        let p = NodeParams::new(1e-12, 0.0, 0.0, C64::new(1.0, 0.0), 0.0).unwrap();
        let pulse = zero_pulse(10.0, 0.001);
        let out = simulate(Input::Vacuum, &pulse, &p, NodeState::CAVITY).unwrap();
        for (k, t) in pulse.grid().times().enumerate() {
            assert!((out.trajectory.r[k].norm_sqr() - t.sin().powi(2)).abs() < 1e-6);
        }
    }

    #[test]
    fn empty_cavity_decay() {
        let p = NodeParams::new(1.0, 0.0, 0.0, C64::new(1e-300, 0.0), 0.0).unwrap();
        let pulse = zero_pulse(30.0, 0.001);
        let out = simulate(Input::Vacuum, &pulse, &p, NodeState::CAVITY).unwrap();
        for (k, t) in pulse.grid().times().enumerate() {
            assert!((out.trajectory.g[k].norm_sqr() - (-t).exp()).abs() < 1e-10);
        }
        assert!((out.budgets.emitted - 1.0).abs() < 1e-6);
        assert!(out.budgets.balance_residual().abs() < 1e-6);
    }

    #[test]
    fn zero_pulse_leaves_storage_untouched() {
        let p = NodeParams::new(1.0, 0.1, 0.3, C64::new(2.0, 0.5), 1.0).unwrap();
        let pulse = zero_pulse(20.0, 0.01);
        let init = NodeState { g: C64::new(0.5, 0.1), r: C64::new(0.0, 0.3), e: C64::new(0.6, -0.2) };
        let out = simulate(Input::Vacuum, &pulse, &p, init).unwrap();
        let e0 = init.e.norm();
        for e in &out.trajectory.e {
            assert!((e.norm() - e0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_coarse_steps_and_mismatched_grids() {
        let p = NodeParams::lossless(1.0, 20.0).unwrap();
        let pulse = zero_pulse(10.0, 0.01);
        assert!(matches!(
            simulate(Input::Vacuum, &pulse, &p, NodeState::EMPTY),
            Err(SimError::StepTooCoarse { .. })
        ));
        let short = vec![ZERO; 3];
        let p = NodeParams::lossless(1.0, 1.0).unwrap();
        assert_eq!(
            simulate(Input::Samples(&short), &pulse, &p, NodeState::EMPTY).unwrap_err(),
            SimError::GridMismatch
        );
        let bad = NodeState { g: C64::new(1.0, 0.0), r: C64::new(1.0, 0.0), e: ZERO };
        assert!(matches!(simulate(Input::Vacuum, &pulse, &p, bad), Err(SimError::BadInitialState(_))));
    }

    #[test]
    fn overlap_properties() {
        let grid = TimeGrid::spanning(-100.0, 150.0, 0.05).unwrap();
        let tau = 5.0;
        let env = PhotonEnvelope::gaussian(0.0, tau, grid).unwrap();
        assert!((output_overlap(env.values(), &env).unwrap() - 1.0).abs() < 1e-12);
        let scaled: Vec<C64> = env.values().iter().map(|v| v * C64::new(0.3, -2.0)).collect();
        assert!((output_overlap(&scaled, &env).unwrap() - 1.0).abs() < 1e-12);
        let shifted = PhotonEnvelope::gaussian(5.0 * tau, tau, grid).unwrap();
        let ov = output_overlap(shifted.values(), &env).unwrap();
        // |<a|b>|^2 = exp(-(shift)^2 / (4 tau^2))
        assert!((ov - (-25.0f64 / 4.0).exp()).abs() < 1e-8);
        assert!(ov <= 2e-3);
        assert_eq!(output_overlap(&vec![ZERO; grid.n_points()], &env), Err(SimError::ZeroField));
    }
}
