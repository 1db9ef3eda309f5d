//! Transfer through a node whose control field sees several excited levels.
//!
//! The excited manifold is split into the direction `V` addressed by the
//! control field (parallel) and its orthogonal complement (perpendicular).
//! The perpendicular amplitudes are not driven by the control at all; they
//! obey the linear equation
//!
//! ```text
//! R_perp' = -i M R_perp - i (G_perp g + i D_par^perp y / G_par*)
//! M       = D_perp^perp - D_par^perp G_perp^dagger / G_par*
//! ```
//!
//! once the cavity amplitude `g` and `y = -i G^dagger R` are fixed by the
//! transfer condition. The parallel amplitude follows algebraically, `|e|` from
//! probability balance and the control field from the parallel equation of
//! motion. A real eigenvalue of `M` is a dark state: population parked there
//! never returns to the control.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::envelope::PhotonEnvelope;
use crate::feasibility::{self, FeasibilityReport};
use crate::grid::{self, phase_rate};
use crate::node::MultiNodeParams;
use crate::pulse::{ControlPulse, PulseError};
use crate::synthesis::Mode;
use crate::trajectory::MultiTrajectory;
use crate::EPS_END;

const I: C64 = C64 { re: 0.0, im: 1.0 };
const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// `|G_par|` below this fraction of `|G|` leaves the control with no handle
/// on the cavity.
pub const DEGENERACY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MultilevelError {
    #[error("control branching is (nearly) orthogonal to the cavity couplings: |G_par| = {g_par:.3e}, |G| = {g_norm:.3e}")]
    DegenerateBranching { g_par: f64, g_norm: f64 },
    #[error("no disentangling control pulse exists: margin {min_margin:.3e} at t = {argmin_t}")]
    Infeasible { min_margin: f64, argmin_t: f64 },
    #[error("generation efficiency {0} is outside (0, 1]")]
    NoRootInUnitInterval(f64),
    #[error("trajectory and node disagree on the number of levels ({traj} vs {node})")]
    LevelMismatch { traj: usize, node: usize },
    #[error(transparent)]
    Node(#[from] crate::node::NodeError),
    #[error(transparent)]
    Pulse(#[from] PulseError),
}

/// Block form of the level problem in the basis `(V, complement)`.
#[derive(Debug, Clone)]
pub struct LevelDecomposition {
    /// `V^dagger G`.
    pub g_par: C64,
    /// Coordinates of `G` in the complement basis.
    pub g_perp: DVector<C64>,
    /// `V^dagger D V`.
    pub d_par_par: C64,
    /// `V^dagger D U_perp`, row of length `N - 1`.
    pub d_perp_to_par: DVector<C64>,
    /// `U_perp^dagger D V`, column of length `N - 1`.
    pub d_par_to_perp: DVector<C64>,
    /// `U_perp^dagger D U_perp`.
    pub d_perp_perp: DMatrix<C64>,
    pub m: DMatrix<C64>,
    /// Orthonormal basis of the complement of `V`, one column per vector.
    pub complement: DMatrix<C64>,
    /// `V` itself.
    pub branching: DVector<C64>,
}

impl LevelDecomposition {
    pub fn n_levels(&self) -> usize {
        self.branching.len()
    }

    /// Full unitary `[V | U_perp]`.
    pub fn basis(&self) -> DMatrix<C64> {
        let n = self.n_levels();
        let mut u = DMatrix::zeros(n, n);
        u.set_column(0, &self.branching);
        for j in 0..n - 1 {
            u.set_column(j + 1, &self.complement.column(j));
        }
        u
    }

    /// Reassembles `D` from its blocks in the level basis.
    pub fn reassembled_detunings(&self) -> DMatrix<C64> {
        let n = self.n_levels();
        let mut b = DMatrix::zeros(n, n);
        b[(0, 0)] = self.d_par_par;
        for j in 0..n - 1 {
            b[(0, j + 1)] = self.d_perp_to_par[j];
            b[(j + 1, 0)] = self.d_par_to_perp[j];
            for i in 0..n - 1 {
                b[(i + 1, j + 1)] = self.d_perp_perp[(i, j)];
            }
        }
        let u = self.basis();
        &u * b * u.adjoint()
    }

    /// Excited vector in the level basis from its block coordinates.
    pub fn assemble(&self, r_par: C64, r_perp: &[C64]) -> Vec<C64> {
        let mut out: Vec<C64> = self.branching.iter().map(|v| v * r_par).collect();
        for (j, x) in r_perp.iter().enumerate() {
            for (i, o) in out.iter_mut().enumerate() {
                *o += self.complement[(i, j)] * x;
            }
        }
        out
    }
}

pub fn decompose(m: &MultiNodeParams) -> Result<LevelDecomposition, MultilevelError> {
    m.validate()?;
    let n = m.n_levels();
    let v = DVector::from_vec(m.branching.clone());
    let g = DVector::from_vec(m.couplings.clone());
    let g_par = v.dotc(&g);
    let g_norm = g.norm();
    if g_par.norm() < DEGENERACY_TOLERANCE * g_norm {
        return Err(MultilevelError::DegenerateBranching { g_par: g_par.norm(), g_norm });
    }
    let complement = complement_basis(&v);
    let d = DMatrix::from_diagonal(&DVector::from_iterator(
        n,
        m.deltas.iter().zip(&m.gammas).map(|(dk, gk)| C64::new(*dk, -*gk)),
    ));
    let u_adj = complement.adjoint();
    let g_perp = &u_adj * &g;
    let dv = &d * &v;
    let d_par_par = v.dotc(&dv);
    let d_par_to_perp = &u_adj * &dv;
    let d_perp_to_par = (v.adjoint() * &d * &complement).transpose();
    let d_perp_perp = &u_adj * &d * &complement;
    let m_mat = &d_perp_perp - (&d_par_to_perp * g_perp.adjoint()) / g_par.conj();
    Ok(LevelDecomposition {
        g_par,
        g_perp,
        d_par_par,
        d_perp_to_par,
        d_par_to_perp,
        d_perp_perp,
        m: m_mat,
        complement,
        branching: v,
    })
}

/// Gram-Schmidt over the canonical axes, at each step taking the axis whose
/// residual (after removing `v` and the vectors chosen so far) is largest,
/// lowest index first on ties.
fn complement_basis(v: &DVector<C64>) -> DMatrix<C64> {
    let n = v.len();
    let mut chosen: Vec<DVector<C64>> = vec![v.clone()];
    let mut used = vec![false; n];
    for _ in 0..n - 1 {
        let mut best: Option<(usize, DVector<C64>, f64)> = None;
        for axis in 0..n {
            if used[axis] {
                continue;
            }
            let mut w = DVector::zeros(n);
            w[axis] = C64::new(1.0, 0.0);
            for _ in 0..2 {
                for q in &chosen {
                    let c = q.dotc(&w);
                    w -= q * c;
                }
            }
            let norm = w.norm();
            if best.as_ref().is_none_or(|(_, _, b)| norm > *b * (1.0 + 1e-12)) {
                best = Some((axis, w, norm));
            }
        }
        let (axis, w, norm) = best.expect("complement exists while fewer than n vectors are chosen");
        used[axis] = true;
        chosen.push(w / C64::new(norm, 0.0));
    }
    let mut u = DMatrix::zeros(n, n - 1);
    for (j, q) in chosen.iter().skip(1).enumerate() {
        u.set_column(j, q);
    }
    u
}

#[derive(Debug, Clone)]
pub struct DarkStateReport {
    pub eigenvalues: Vec<C64>,
    /// Indices into `eigenvalues` with `|Im| < tol`.
    pub flagged: Vec<usize>,
    pub tol: f64,
}

impl DarkStateReport {
    pub fn warning(&self) -> bool {
        !self.flagged.is_empty()
    }
}

/// Eigenvalues of `M`; those with `|Im| < tol` are dark. The default
/// tolerance is `1e-9 * max(1, spectral radius)`.
pub fn dark_state_check(d: &LevelDecomposition, tol_dark: Option<f64>) -> DarkStateReport {
    if d.m.nrows() == 0 {
        return DarkStateReport { eigenvalues: Vec::new(), flagged: Vec::new(), tol: tol_dark.unwrap_or(1e-9) };
    }
    let eigenvalues: Vec<C64> = d
        .m
        .clone()
        .schur()
        .eigenvalues()
        .map(|ev| ev.iter().copied().collect())
        .unwrap_or_else(|| {
            // complex Schur form is triangular; read the diagonal directly
            let (_, t) = d.m.clone().schur().unpack();
            t.diagonal().iter().copied().collect()
        });
    let radius = eigenvalues.iter().map(|l| l.norm()).fold(0.0, f64::max);
    let tol = tol_dark.unwrap_or(1e-9 * radius.max(1.0));
    let flagged = eigenvalues.iter().enumerate().filter(|(_, l)| l.im.abs() < tol).map(|(k, _)| k).collect();
    DarkStateReport { eigenvalues, flagged, tol }
}

#[derive(Debug, Clone)]
pub struct MultiSynthesisResult {
    pub pulse: ControlPulse,
    pub trajectory: MultiTrajectory,
    /// Final `|e|^2` (trap) or emitted probability (generate).
    pub efficiency: f64,
    pub mode: Mode,
    pub report: FeasibilityReport,
    pub dark_states: DarkStateReport,
}

impl MultiSynthesisResult {
    pub fn dark_state_warning(&self) -> bool {
        self.dark_states.warning()
    }
}

/// Block coordinates of the excited manifold along a transfer.
pub(crate) struct ExcitedPath {
    pub r_par: Vec<C64>,
    pub r_perp: Vec<Vec<C64>>,
    pub r: Vec<Vec<C64>>,
}

/// Integrates `R_perp` from zero and recovers `R_par` for prescribed `g`, `y`.
pub(crate) fn excited_path(d: &LevelDecomposition, g: &[C64], y: &[C64], dt: f64) -> ExcitedPath {
    let n = g.len();
    let np = d.n_levels() - 1;
    let gpc = d.g_par.conj();
    let source = |k: usize| -> Vec<C64> {
        (0..np).map(|i| d.g_perp[i] * g[k] + I * d.d_par_to_perp[i] * y[k] / gpc).collect()
    };
    let mut r_perp = Vec::with_capacity(n);
    let mut state = vec![ZERO; np];
    r_perp.push(state.clone());
    if np > 0 {
        let mm: Vec<C64> = (0..np * np).map(|idx| d.m[(idx / np, idx % np)]).collect();
        let rhs = |x: &[C64], s: &[C64], out: &mut [C64]| {
            for i in 0..np {
                let mut acc = s[i];
                for j in 0..np {
                    acc += mm[i * np + j] * x[j];
                }
                out[i] = -I * acc;
            }
        };
        let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
            (vec![ZERO; np], vec![ZERO; np], vec![ZERO; np], vec![ZERO; np], vec![ZERO; np]);
        let mut s0 = source(0);
        for k in 0..n - 1 {
            let s1 = source(k + 1);
            let sh: Vec<C64> = s0.iter().zip(&s1).map(|(a, b)| 0.5 * (a + b)).collect();
            rhs(&state, &s0, &mut k1);
            axpy_into(&state, &k1, 0.5 * dt, &mut tmp);
            rhs(&tmp, &sh, &mut k2);
            axpy_into(&state, &k2, 0.5 * dt, &mut tmp);
            rhs(&tmp, &sh, &mut k3);
            axpy_into(&state, &k3, dt, &mut tmp);
            rhs(&tmp, &s1, &mut k4);
            for i in 0..np {
                state[i] += (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (dt / 6.0);
            }
            r_perp.push(state.clone());
            s0 = s1;
        }
    } else {
        r_perp.resize(n, Vec::new());
    }
    let r_par: Vec<C64> = (0..n)
        .map(|k| {
            let gr: C64 = (0..np).map(|i| d.g_perp[i].conj() * r_perp[k][i]).sum();
            I * (y[k] + I * gr) / gpc
        })
        .collect();
    let r = (0..n).map(|k| d.assemble(r_par[k], &r_perp[k])).collect();
    ExcitedPath { r_par, r_perp, r }
}

fn axpy_into(x: &[C64], k: &[C64], h: f64, out: &mut [C64]) {
    for ((o, a), b) in out.iter_mut().zip(x).zip(k) {
        *o = a + b * h;
    }
}

/// `2 sum_k gamma_k int |R_k|^2`, running.
fn spontaneous_loss(r: &[Vec<C64>], m: &MultiNodeParams, dt: f64) -> Vec<f64> {
    let w: Vec<f64> = r.iter().map(|rk| rk.iter().zip(&m.gammas).map(|(x, g)| 2.0 * g * x.norm_sqr()).sum()).collect();
    grid::cumulative_trapezoid(&w, dt)
}

/// Everything the construction fixes before the control field is computed.
struct Plan {
    d: LevelDecomposition,
    g: Vec<C64>,
    y: Vec<C64>,
    path: ExcitedPath,
    report: FeasibilityReport,
}

fn trap_plan(env: &PhotonEnvelope, m: &MultiNodeParams) -> Result<Plan, MultilevelError> {
    let d = decompose(m)?;
    let dt = env.grid().dt();
    let scale = m.kappa.sqrt().recip();
    let g: Vec<C64> = env.values().iter().map(|a| a * scale).collect();
    let g_dot: Vec<C64> = env.derivatives().iter().map(|a| a * scale).collect();
    let half = 0.5 * (m.kappa - m.gamma_c);
    let y: Vec<C64> = g.iter().zip(&g_dot).map(|(g, gd)| gd - g * half).collect();
    let path = excited_path(&d, &g, &y, dt);

    // |e|^2 = (1 - Gc/k) C + 2 Im int R^dag D R - |g|^2 - R^dag R
    let cum = env.cumulative_norm();
    let loss = spontaneous_loss(&path.r, m, dt);
    let margin: Vec<f64> = (0..g.len())
        .map(|k| {
            (1.0 - m.gamma_c / m.kappa) * cum[k]
                - loss[k]
                - g[k].norm_sqr()
                - path.r[k].iter().map(|x| x.norm_sqr()).sum::<f64>()
        })
        .collect();
    let window = feasibility::arrival_window(env, false);
    let eta = 1.0 - m.gamma_c / m.kappa - loss[loss.len() - 1];
    let report = feasibility::summarize(env, margin, window, m.gamma_c < m.kappa, eta);
    Ok(Plan { d, g, y, path, report })
}

fn gen_plan(env: &PhotonEnvelope, m: &MultiNodeParams) -> Result<Plan, MultilevelError> {
    let d = decompose(m)?;
    let dt = env.grid().dt();
    let (unit_g, unit_y, unit_path) = gen_unit_path(env, m, &d);
    let eta = gen_efficiency(m, &unit_path, dt)?;
    let s = eta.sqrt();
    let g: Vec<C64> = unit_g.iter().map(|x| x * s).collect();
    let y: Vec<C64> = unit_y.iter().map(|x| x * s).collect();
    let path = ExcitedPath {
        r_par: unit_path.r_par.iter().map(|x| x * s).collect(),
        r_perp: unit_path.r_perp.iter().map(|v| v.iter().map(|x| x * s).collect()).collect(),
        r: unit_path.r.iter().map(|v| v.iter().map(|x| x * s).collect()).collect(),
    };

    // 1 - |e|^2 = (kappa + Gc) int |g|^2 + 2 sum gamma_k int |R_k|^2 + |g|^2 + R^dag R
    let gsq: Vec<f64> = g.iter().map(|x| x.norm_sqr()).collect();
    let cum_g = grid::cumulative_trapezoid(&gsq, dt);
    let loss = spontaneous_loss(&path.r, m, dt);
    let margin: Vec<f64> = (0..g.len())
        .map(|k| {
            1.0 - (m.kappa + m.gamma_c) * cum_g[k]
                - loss[k]
                - gsq[k]
                - path.r[k].iter().map(|x| x.norm_sqr()).sum::<f64>()
        })
        .collect();
    let window = feasibility::arrival_window(env, true);
    let mut report = feasibility::summarize(env, margin, window, true, eta);
    report.predicted_efficiency = Some(eta);
    Ok(Plan { d, g, y, path, report })
}

/// Trapping criterion for a multi-level node: the `|e|^2` series the
/// construction would need, with its minimum over the arrival window.
pub fn margin_trap_n(env: &PhotonEnvelope, m: &MultiNodeParams) -> Result<FeasibilityReport, MultilevelError> {
    Ok(trap_plan(env, m)?.report)
}

/// Generation counterpart of [`margin_trap_n`].
pub fn margin_gen_n(env: &PhotonEnvelope, m: &MultiNodeParams) -> Result<FeasibilityReport, MultilevelError> {
    Ok(gen_plan(env, m)?.report)
}

/// Control pulse that traps `env` in `|e>` through the multi-level manifold.
pub fn synthesize_trap_n(env: &PhotonEnvelope, m: &MultiNodeParams) -> Result<MultiSynthesisResult, MultilevelError> {
    let plan = trap_plan(env, m)?;
    if !plan.report.feasible {
        return Err(MultilevelError::Infeasible { min_margin: plan.report.min_margin, argmin_t: plan.report.argmin_t });
    }
    let active = plan.report.window.clone();
    finish(env, plan, active, Mode::Trap)
}

/// Control pulse that emits `env` from `|e>` through the multi-level manifold.
pub fn synthesize_gen_n(env: &PhotonEnvelope, m: &MultiNodeParams) -> Result<MultiSynthesisResult, MultilevelError> {
    let plan = gen_plan(env, m)?;
    if !plan.report.feasible {
        return Err(MultilevelError::Infeasible { min_margin: plan.report.min_margin, argmin_t: plan.report.argmin_t });
    }
    let stop = plan.report.margin.iter().position(|x| *x < EPS_END).unwrap_or(plan.report.margin.len());
    finish(env, plan, 0..stop, Mode::Generate)
}

/// Generation path per unit efficiency: `g = alpha / sqrt(kappa)`,
/// `y = g' + (kappa + Gc) g / 2`.
fn gen_unit_path(env: &PhotonEnvelope, m: &MultiNodeParams, d: &LevelDecomposition) -> (Vec<C64>, Vec<C64>, ExcitedPath) {
    let scale = m.kappa.sqrt().recip();
    let g: Vec<C64> = env.values().iter().map(|a| a * scale).collect();
    let half = 0.5 * (m.kappa + m.gamma_c);
    let y: Vec<C64> = g.iter().zip(env.derivatives()).map(|(g, ad)| ad * scale + g * half).collect();
    let path = excited_path(d, &g, &y, env.grid().dt());
    (g, y, path)
}

fn gen_efficiency(m: &MultiNodeParams, unit: &ExcitedPath, dt: f64) -> Result<f64, MultilevelError> {
    let l1 = spontaneous_loss(&unit.r, m, dt).last().copied().unwrap_or(0.0);
    let eta = (1.0 + m.gamma_c / m.kappa + l1).recip();
    if eta > 0.0 && eta <= 1.0 {
        Ok(eta)
    } else {
        Err(MultilevelError::NoRootInUnitInterval(eta))
    }
}

fn finish(
    env: &PhotonEnvelope,
    plan: Plan,
    active: std::ops::Range<usize>,
    mode: Mode,
) -> Result<MultiSynthesisResult, MultilevelError> {
    let Plan { d, g, y, path, report } = plan;
    let n = g.len();
    let dt = env.grid().dt();
    let rp_dot = grid::derivative(&path.r_par, dt);
    let perp_to_par = |k: usize| -> C64 { d.d_perp_to_par.iter().zip(&path.r_perp[k]).map(|(a, b)| a * b).sum() };

    let mut rate = vec![0.0; n];
    for k in active.clone() {
        let rp = path.r_par[k];
        let num = rp.norm_sqr() * (d.d_par_par.re + phase_rate(rp, rp_dot[k]))
            + ((perp_to_par(k) + g[k] * d.g_par) * rp.conj()).re;
        rate[k] = num / report.margin[k];
    }
    let mut phase = vec![0.0; n];
    for k in active.start + 1..active.end {
        phase[k] = phase[k - 1] + 0.5 * dt * (rate[k - 1] + rate[k]);
    }
    if active.end > active.start {
        let last = phase[active.end - 1];
        phase[active.end..].iter_mut().for_each(|x| *x = last);
    }
    let e: Vec<C64> = (0..n)
        .map(|k| if k < active.start { ZERO } else { C64::from_polar(report.margin[k].max(0.0).sqrt(), phase[k]) })
        .collect();

    let mut omega = vec![ZERO; n];
    for k in active {
        let num = rp_dot[k] + I * d.d_par_par * path.r_par[k] + I * perp_to_par(k) + I * g[k] * d.g_par;
        omega[k] = 2.0 * I * num / e[k];
    }
    let pulse = ControlPulse::from_complex(*env.grid(), &omega)?;
    let efficiency = match mode {
        Mode::Trap => e[n - 1].norm_sqr(),
        Mode::Generate => report.predicted_efficiency.unwrap_or(0.0),
    };
    let dark_states = dark_state_check(&d, None);
    let trajectory = MultiTrajectory {
        grid: *env.grid(),
        g,
        r: path.r,
        e,
        r_par: Some(path.r_par),
        r_perp: Some(path.r_perp),
        y: Some(y),
    };
    Ok(MultiSynthesisResult { pulse, trajectory, efficiency, mode, report, dark_states })
}

/// `1 - Gc/kappa + 2 int R^dag Im(D) R` over a full trapping trajectory.
pub fn eta_trap_n(traj: &MultiTrajectory, m: &MultiNodeParams) -> Result<f64, MultilevelError> {
    if traj.n_levels() != m.n_levels() {
        return Err(MultilevelError::LevelMismatch { traj: traj.n_levels(), node: m.n_levels() });
    }
    let loss = spontaneous_loss(&traj.r, m, traj.grid.dt());
    Ok(1.0 - m.gamma_c / m.kappa - loss.last().copied().unwrap_or(0.0))
}

/// Self-consistent generation efficiency `1 / (1 + Gc/kappa + L)`, where `L`
/// is the spontaneous loss of the generation path at unit efficiency.
pub fn eta_gen_n(env: &PhotonEnvelope, m: &MultiNodeParams) -> Result<f64, MultilevelError> {
    let d = decompose(m)?;
    let (_, _, unit) = gen_unit_path(env, m, &d);
    gen_efficiency(m, &unit, env.grid().dt())
}
