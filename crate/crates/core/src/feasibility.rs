//! Pointwise existence criteria for a disentangling control pulse.
//!
//! Each criterion is the squared amplitude `|e(t)|^2` that the target
//! trajectory forces on the storage level. A control pulse exists iff it stays
//! strictly positive wherever the photon has started to arrive (trapping) or
//! has not yet fully left (generation).

use std::ops::Range;

use crate::envelope::PhotonEnvelope;
use crate::node::NodeParams;
use crate::synthesis::{eta_gen, eta_trap};
use crate::EPS_START;

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    /// Criterion value at every grid point.
    pub margin: Vec<f64>,
    /// Minimum of `margin` over `window`.
    pub min_margin: f64,
    pub argmin_t: f64,
    pub feasible: bool,
    pub predicted_efficiency: Option<f64>,
    /// Grid indices on which positivity is enforced.
    pub window: Range<usize>,
}

/// Lossless criterion: `C(t) - |a|^2/kappa - |a' - kappa a/2|^2 / (kappa |g0|^2)`
/// with `C` the running norm. Loss rates and detuning in `p` are ignored.
pub fn margin_lossless(env: &PhotonEnvelope, p: &NodeParams) -> FeasibilityReport {
    let lossless = NodeParams { gamma_c: 0.0, gamma_sp: 0.0, delta: 0.0, ..*p };
    let margin = trap_margin_series(env, &lossless);
    let window = arrival_window(env, false);
    summarize(env, margin, window, true, 1.0)
}

/// Lossy trapping criterion; its final value is the trapping efficiency.
/// Never feasible once spurious cavity loss reaches the waveguide coupling.
pub fn margin_trap(env: &PhotonEnvelope, p: &NodeParams) -> FeasibilityReport {
    let margin = trap_margin_series(env, p);
    let window = arrival_window(env, false);
    let allowed = p.gamma_c < p.kappa;
    let eta = eta_trap(env, p);
    summarize(env, margin, window, allowed, eta)
}

/// Generation criterion `|e(t)|^2 = 1 - eta_gen * H(t)`, where `H` is the
/// accumulated emission, loss and node population per unit efficiency. It
/// must stay positive until the photon has left.
pub fn margin_gen(env: &PhotonEnvelope, p: &NodeParams) -> FeasibilityReport {
    let eta = eta_gen(env, p);
    let margin: Vec<f64> = gen_loss_series(env, p).into_iter().map(|h| 1.0 - eta * h).collect();
    let window = arrival_window(env, true);
    let mut r = summarize(env, margin, window, true, eta);
    r.predicted_efficiency = Some(eta);
    r
}

pub(crate) fn trap_margin_series(env: &PhotonEnvelope, p: &NodeParams) -> Vec<f64> {
    let kappa = p.kappa;
    let g2 = p.g0_sq();
    let kd = p.kappa - p.gamma_c;
    let lead = (1.0 - p.gamma_c / kappa) * (1.0 - p.gamma_sp * kd / (4.0 * g2));
    let slope = p.gamma_sp / (kappa * g2);
    let inst = (1.0 - p.gamma_sp * kd / (2.0 * g2)) / kappa;
    let cum = env.cumulative_norm();
    let cum_d = env.cumulative_derivative_norm();
    env.values()
        .iter()
        .zip(env.derivatives())
        .zip(cum.iter().zip(&cum_d))
        .map(|((a, ad), (c, cd))| {
            lead * c - slope * cd - a.norm_sqr() * inst - (ad - a * (0.5 * kd)).norm_sqr() / (kappa * g2)
        })
        .collect()
}

/// Right-hand side of the generation balance, per unit efficiency.
pub(crate) fn gen_loss_series(env: &PhotonEnvelope, p: &NodeParams) -> Vec<f64> {
    let kappa = p.kappa;
    let g2 = p.g0_sq();
    let ks = p.kappa + p.gamma_c;
    let lead = (1.0 + p.gamma_c / kappa) * (1.0 + p.gamma_sp * ks / (4.0 * g2));
    let slope = p.gamma_sp / (kappa * g2);
    let inst = (1.0 + p.gamma_sp * ks / (2.0 * g2)) / kappa;
    let cum = env.cumulative_norm();
    let cum_d = env.cumulative_derivative_norm();
    env.values()
        .iter()
        .zip(env.derivatives())
        .zip(cum.iter().zip(&cum_d))
        .map(|((a, ad), (c, cd))| {
            lead * c + slope * cd + a.norm_sqr() * inst + (ad + a * (0.5 * ks)).norm_sqr() / (kappa * g2)
        })
        .collect()
}

/// Indices where the running norm exceeds `EPS_START` (and, for generation,
/// stays below `1 - EPS_START`).
pub(crate) fn arrival_window(env: &PhotonEnvelope, departing: bool) -> Range<usize> {
    let cum = env.cumulative_norm();
    let total = cum[cum.len() - 1];
    let start = cum.iter().position(|&c| c > EPS_START).unwrap_or(cum.len());
    let end = if departing {
        cum.iter().rposition(|&c| c < total - EPS_START).map_or(start, |k| k + 1)
    } else {
        cum.len()
    };
    start..end.max(start)
}

pub(crate) fn summarize(
    env: &PhotonEnvelope,
    margin: Vec<f64>,
    window: Range<usize>,
    allowed: bool,
    efficiency: f64,
) -> FeasibilityReport {
    let (mut min_margin, mut argmin) = (f64::INFINITY, window.start.min(margin.len() - 1));
    for k in window.clone() {
        // a NaN margin (overflowed amplitudes) counts as violated
        let value = if margin[k].is_nan() { f64::NEG_INFINITY } else { margin[k] };
        if value < min_margin {
            min_margin = value;
            argmin = k;
        }
    }
    let feasible = allowed && !window.is_empty() && min_margin > 0.0;
    FeasibilityReport {
        min_margin,
        argmin_t: env.grid().time(argmin),
        feasible,
        predicted_efficiency: feasible.then_some(efficiency),
        margin,
        window,
    }
}
