//! Physical parameters of a cavity node.
//!
//! All rates are angular frequencies in the frame rotating at the cavity
//! resonance. The single-level excited state decays in amplitude at
//! `gamma_sp / 2`; in the multi-level description each level `k` decays in
//! amplitude at `gammas[k]`, so a one-level [`MultiNodeParams`] corresponds to
//! a [`NodeParams`] with `gamma_sp = 2 * gammas[0]`.

use num_complex::Complex64 as C64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NodeError {
    #[error("invalid node parameter: {0}")]
    Invalid(String),
    #[error("Purcell factor is undefined without spontaneous emission")]
    UndefinedForZeroGamma,
    #[error("expected a single excited level, got {0}")]
    NotSingleLevel(usize),
}

/// Node with one excited level `|r>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeParams {
    /// Cavity leakage into the waveguide.
    pub kappa: f64,
    /// Spurious cavity loss.
    pub gamma_c: f64,
    /// Spontaneous emission rate of `|r>` (population).
    pub gamma_sp: f64,
    /// Vacuum Rabi coupling between `|g,1>` and `|r,0>`.
    pub g0: C64,
    /// Raman detuning.
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingRegime {
    Strong,
    Weak,
}

impl std::fmt::Display for CouplingRegime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CouplingRegime::Strong => "strong",
            CouplingRegime::Weak => "weak",
        })
    }
}

impl NodeParams {
    pub fn new(kappa: f64, gamma_c: f64, gamma_sp: f64, g0: C64, delta: f64) -> Result<Self, NodeError> {
        let p = Self { kappa, gamma_c, gamma_sp, g0, delta };
        p.validate()?;
        Ok(p)
    }

    /// Lossless node with real coupling and no detuning.
    pub fn lossless(kappa: f64, g0: f64) -> Result<Self, NodeError> {
        Self::new(kappa, 0.0, 0.0, C64::new(g0, 0.0), 0.0)
    }

    pub fn validate(&self) -> Result<(), NodeError> {
        let mut bad = Vec::new();
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            bad.push(format!("kappa must be > 0 (got {})", self.kappa));
        }
        if !(self.gamma_c >= 0.0 && self.gamma_c.is_finite()) {
            bad.push(format!("gamma_c must be >= 0 (got {})", self.gamma_c));
        }
        if !(self.gamma_sp >= 0.0 && self.gamma_sp.is_finite()) {
            bad.push(format!("gamma_sp must be >= 0 (got {})", self.gamma_sp));
        }
        if !(self.g0.norm() > 0.0 && self.g0.norm().is_finite()) {
            bad.push(format!("|g0| must be > 0 (got {})", self.g0));
        }
        if !self.delta.is_finite() {
            bad.push(format!("delta must be finite (got {})", self.delta));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(NodeError::Invalid(bad.join("; ")))
        }
    }

    pub fn g0_sq(&self) -> f64 {
        self.g0.norm_sqr()
    }

    /// `4 |g0|^2 / (kappa gamma_sp)`.
    pub fn purcell_factor(&self) -> Result<f64, NodeError> {
        if self.gamma_sp == 0.0 {
            return Err(NodeError::UndefinedForZeroGamma);
        }
        Ok(4.0 * self.g0_sq() / (self.kappa * self.gamma_sp))
    }

    /// Strong when the vacuum Rabi splitting `2|g0|` exceeds both half-linewidths.
    pub fn coupling_regime(&self) -> CouplingRegime {
        if 2.0 * self.g0.norm() > (0.5 * self.kappa).max(0.5 * self.gamma_sp) {
            CouplingRegime::Strong
        } else {
            CouplingRegime::Weak
        }
    }

    /// Same node as a one-level [`MultiNodeParams`] (`gammas[0] = gamma_sp / 2`).
    pub fn to_multi(&self) -> MultiNodeParams {
        MultiNodeParams {
            kappa: self.kappa,
            gamma_c: self.gamma_c,
            couplings: vec![self.g0],
            branching: vec![C64::new(1.0, 0.0)],
            deltas: vec![self.delta],
            gammas: vec![0.5 * self.gamma_sp],
        }
    }
}

/// Node with `N` excited levels `|r_k>`. The control field drives the
/// combination `branching` (unit norm) of excited levels.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiNodeParams {
    pub kappa: f64,
    pub gamma_c: f64,
    /// Cavity couplings `g_k`.
    pub couplings: Vec<C64>,
    /// Control branching vector `V`, unit Euclidean norm.
    pub branching: Vec<C64>,
    /// Raman detunings `Delta_k`.
    pub deltas: Vec<f64>,
    /// Amplitude decay rates `gamma_k`.
    pub gammas: Vec<f64>,
}

pub const BRANCHING_NORM_TOLERANCE: f64 = 1e-12;

impl MultiNodeParams {
    pub fn new(
        kappa: f64,
        gamma_c: f64,
        couplings: Vec<C64>,
        branching: Vec<C64>,
        deltas: Vec<f64>,
        gammas: Vec<f64>,
    ) -> Result<Self, NodeError> {
        let m = Self { kappa, gamma_c, couplings, branching, deltas, gammas };
        m.validate()?;
        Ok(m)
    }

    pub fn n_levels(&self) -> usize {
        self.couplings.len()
    }

    pub fn validate(&self) -> Result<(), NodeError> {
        let mut bad = Vec::new();
        let n = self.couplings.len();
        if n == 0 {
            bad.push("at least one excited level is required".to_string());
        }
        if self.branching.len() != n || self.deltas.len() != n || self.gammas.len() != n {
            bad.push(format!(
                "level arrays must have equal length (couplings {}, branching {}, deltas {}, gammas {})",
                n,
                self.branching.len(),
                self.deltas.len(),
                self.gammas.len()
            ));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            bad.push(format!("kappa must be > 0 (got {})", self.kappa));
        }
        if !(self.gamma_c >= 0.0 && self.gamma_c.is_finite()) {
            bad.push(format!("gamma_c must be >= 0 (got {})", self.gamma_c));
        }
        if self.gammas.iter().any(|g| !(*g >= 0.0 && g.is_finite())) {
            bad.push("all gammas must be >= 0".to_string());
        }
        if self.deltas.iter().any(|d| !d.is_finite()) {
            bad.push("all deltas must be finite".to_string());
        }
        let vnorm = self.branching.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if (vnorm - 1.0).abs() > BRANCHING_NORM_TOLERANCE {
            bad.push(format!("branching vector must have unit norm (got {vnorm})"));
        }
        if bad.is_empty() && self.parallel_coupling().norm() == 0.0 {
            bad.push("control branching is orthogonal to the cavity couplings".to_string());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(NodeError::Invalid(bad.join("; ")))
        }
    }

    /// `G_par = V^dagger G`.
    pub fn parallel_coupling(&self) -> C64 {
        self.branching.iter().zip(&self.couplings).map(|(v, g)| v.conj() * g).sum()
    }

    /// Collapses a one-level node onto [`NodeParams`]. `sp_rate` and `det`
    /// override the spontaneous rate and detuning when given.
    pub fn as_single_level(&self, sp_rate: Option<f64>, det: Option<f64>) -> Result<NodeParams, NodeError> {
        if self.n_levels() != 1 {
            return Err(NodeError::NotSingleLevel(self.n_levels()));
        }
        NodeParams::new(
            self.kappa,
            self.gamma_c,
            sp_rate.unwrap_or(2.0 * self.gammas[0]),
            self.couplings[0],
            det.unwrap_or(self.deltas[0]),
        )
    }

    /// Copy with level `k` removed; the branching vector is renormalized.
    pub fn without_level(&self, k: usize) -> Result<Self, NodeError> {
        let mut m = self.clone();
        m.couplings.remove(k);
        m.branching.remove(k);
        m.deltas.remove(k);
        m.gammas.remove(k);
        let norm = m.branching.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            m.branching.iter_mut().for_each(|v| *v /= norm);
        }
        m.validate()?;
        Ok(m)
    }
}
