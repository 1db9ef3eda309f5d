//! Single-photon envelopes `alpha(t)` sampled on a [`TimeGrid`].
//!
//! Envelopes are normalized to one photon on construction and must vanish at
//! the grid edges: every criterion downstream integrates from the start of
//! the grid as a stand-in for `-inf`, so truncated tails are rejected rather
//! than silently clipped.

use std::f64::consts::PI;
use std::io::BufRead;

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::grid::{self, TimeGrid};

/// Largest probability `|alpha|^2 dt` allowed in the first and last sample.
pub const EDGE_TOLERANCE: f64 = 1e-10;

/// Relative deviation from a uniform step allowed in tabulated input.
pub const UNIFORMITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum EnvelopeError {
    #[error("pulse width must be positive and finite, got {0}")]
    BadWidth(f64),
    #[error("grid [{start}, {end}] does not cover the required span [{need_start}, {need_end}]")]
    GridTooNarrow { start: f64, end: f64, need_start: f64, need_end: f64 },
    #[error("envelope does not vanish at the grid edges (edge probability {edge:.3e} > {EDGE_TOLERANCE:e})")]
    EdgeNotVanishing { edge: f64 },
    #[error("envelope has zero norm")]
    ZeroNorm,
    #[error("expected {expected} samples for the grid, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("sample index {index} out of range (n = {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("csv line {line}: {msg}")]
    Csv { line: usize, msg: String },
    #[error(transparent)]
    Grid(#[from] grid::GridError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Analytic origin of an envelope, used for exact derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Gaussian { t0: f64, tau: f64 },
    Sech { t0: f64, tau: f64 },
    Tabulated,
}

impl Family {
    fn center(&self) -> Option<f64> {
        match *self {
            Family::Gaussian { t0, .. } | Family::Sech { t0, .. } => Some(t0),
            Family::Tabulated => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PhotonEnvelope {
    grid: TimeGrid,
    values: Vec<C64>,
    derivative: Vec<C64>,
    family: Family,
    chirp: f64,
}

impl PhotonEnvelope {
    /// `alpha(t) = (2 pi tau^2)^(-1/4) exp(-(t - t0)^2 / (4 tau^2))`, so that
    /// `|alpha|^2` is a normal density of standard deviation `tau`.
    pub fn gaussian(t0: f64, tau: f64, grid: TimeGrid) -> Result<Self, EnvelopeError> {
        check_width(tau)?;
        check_span(&grid, t0 - 8.0 * tau, t0 + 8.0 * tau)?;
        let amp = (2.0 * PI * tau * tau).powf(-0.25);
        let (values, derivative): (Vec<C64>, Vec<C64>) = grid
            .times()
            .map(|t| {
                let x = t - t0;
                let a = amp * (-x * x / (4.0 * tau * tau)).exp();
                (C64::new(a, 0.0), C64::new(-x / (2.0 * tau * tau) * a, 0.0))
            })
            .unzip();
        Self::finish(grid, values, Some(derivative), Family::Gaussian { t0, tau })
    }

    /// `alpha(t) = (2 tau)^(-1/2) sech((t - t0) / tau)`.
    pub fn sech(t0: f64, tau: f64, grid: TimeGrid) -> Result<Self, EnvelopeError> {
        check_width(tau)?;
        check_span(&grid, t0 - 10.0 * tau, t0 + 10.0 * tau)?;
        let amp = (2.0 * tau).powf(-0.5);
        let (values, derivative): (Vec<C64>, Vec<C64>) = grid
            .times()
            .map(|t| {
                let x = (t - t0) / tau;
                let a = amp / x.cosh();
                (C64::new(a, 0.0), C64::new(-x.tanh() / tau * a, 0.0))
            })
            .unzip();
        Self::finish(grid, values, Some(derivative), Family::Sech { t0, tau })
    }

    /// Arbitrary samples on `grid`; derivatives come from finite differences.
    pub fn tabulated(grid: TimeGrid, values: Vec<C64>) -> Result<Self, EnvelopeError> {
        if values.len() != grid.n_points() {
            return Err(EnvelopeError::LengthMismatch { expected: grid.n_points(), got: values.len() });
        }
        Self::finish(grid, values, None, Family::Tabulated)
    }

    /// Reads `t,re,im` rows. The time column must be strictly increasing and
    /// uniform to within [`UNIFORMITY_TOLERANCE`] of the step.
    pub fn from_csv<R: BufRead>(reader: R) -> Result<Self, EnvelopeError> {
        let mut lines = reader.lines().enumerate();
        let header = loop {
            match lines.next() {
                Some((_, line)) => {
                    let line = line?;
                    if !line.trim().is_empty() {
                        break line;
                    }
                }
                None => return Err(EnvelopeError::Csv { line: 1, msg: "empty file".into() }),
            }
        };
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols != ["t", "re", "im"] {
            return Err(EnvelopeError::Csv { line: 1, msg: format!("expected header `t,re,im`, got `{header}`") });
        }
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (idx, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let lineno = idx + 1;
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(EnvelopeError::Csv { line: lineno, msg: format!("expected 3 fields, got {}", fields.len()) });
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| EnvelopeError::Csv { line: lineno, msg: format!("bad number `{s}`: {e}") })
            };
            times.push(parse(fields[0])?);
            values.push(C64::new(parse(fields[1])?, parse(fields[2])?));
        }
        if times.len() < 2 {
            return Err(EnvelopeError::Csv { line: 2, msg: "need at least two samples".into() });
        }
        let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
        if !(dt > 0.0) {
            return Err(EnvelopeError::Csv { line: 2, msg: "time column must be strictly increasing".into() });
        }
        for (k, &t) in times.iter().enumerate() {
            let expected = times[0] + k as f64 * dt;
            if (t - expected).abs() > UNIFORMITY_TOLERANCE * dt || (k > 0 && t <= times[k - 1]) {
                return Err(EnvelopeError::Csv {
                    line: k + 2,
                    msg: format!("time column is not uniform at t = {t}"),
                });
            }
        }
        let grid = TimeGrid::new(times[0], dt, times.len())?;
        Self::tabulated(grid, values)
    }

    fn finish(
        grid: TimeGrid,
        mut values: Vec<C64>,
        derivative: Option<Vec<C64>>,
        family: Family,
    ) -> Result<Self, EnvelopeError> {
        if let Some(k) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(EnvelopeError::NonFinite(k));
        }
        let dt = grid.dt();
        let norm = grid::trapezoid(&values.iter().map(|v| v.norm_sqr()).collect::<Vec<_>>(), dt);
        if !(norm > 0.0) {
            return Err(EnvelopeError::ZeroNorm);
        }
        let scale = norm.sqrt().recip();
        values.iter_mut().for_each(|v| *v *= scale);
        let derivative = match derivative {
            Some(mut d) => {
                d.iter_mut().for_each(|v| *v *= scale);
                d
            }
            None => grid::derivative(&values, dt),
        };
        let edge = values[0].norm_sqr().max(values[values.len() - 1].norm_sqr()) * dt;
        if edge >= EDGE_TOLERANCE {
            return Err(EnvelopeError::EdgeNotVanishing { edge });
        }
        Ok(Self { grid, values, derivative, family, chirp: 0.0 })
    }

    /// Multiplies by `exp(-i delta (t - t_ref))`, shifting the carrier away from
    /// the cavity resonance. `t_ref` is the family center for analytic
    /// envelopes and the intensity centroid for tabulated ones.
    pub fn apply_chirp(&self, delta_pc: f64) -> Self {
        let t_ref = self.chirp_reference();
        let phases: Vec<C64> = self
            .grid
            .times()
            .map(|t| C64::from_polar(1.0, -delta_pc * (t - t_ref)))
            .collect();
        let values: Vec<C64> = self.values.iter().zip(&phases).map(|(v, p)| v * p).collect();
        let derivative = match self.family {
            Family::Tabulated => grid::derivative(&values, self.grid.dt()),
            _ => self
                .derivative
                .iter()
                .zip(&self.values)
                .zip(&phases)
                .map(|((d, v), p)| (d - C64::i() * delta_pc * v) * p)
                .collect(),
        };
        Self { grid: self.grid, values, derivative, family: self.family, chirp: self.chirp + delta_pc }
    }

    fn chirp_reference(&self) -> f64 {
        self.family.center().unwrap_or_else(|| {
            let w: Vec<f64> = self
                .grid
                .times()
                .zip(&self.values)
                .map(|(t, v)| t * v.norm_sqr())
                .collect();
            grid::trapezoid(&w, self.grid.dt()) / self.total_norm()
        })
    }

    /// `(alpha, alpha_dot)` at grid index `k`.
    pub fn sample(&self, k: usize) -> Result<(C64, C64), EnvelopeError> {
        if k >= self.values.len() {
            return Err(EnvelopeError::IndexOutOfRange { index: k, len: self.values.len() });
        }
        Ok((self.values[k], self.derivative[k]))
    }

    /// Running `int_{t_start}^{t} |alpha|^2`.
    pub fn cumulative_norm(&self) -> Vec<f64> {
        grid::cumulative_trapezoid(&self.intensity(), self.grid.dt())
    }

    /// Running `int_{t_start}^{t} |alpha_dot|^2`.
    pub fn cumulative_derivative_norm(&self) -> Vec<f64> {
        let d: Vec<f64> = self.derivative.iter().map(|v| v.norm_sqr()).collect();
        grid::cumulative_trapezoid(&d, self.grid.dt())
    }

    pub fn total_norm(&self) -> f64 {
        grid::trapezoid(&self.intensity(), self.grid.dt())
    }

    /// `int |alpha_dot|^2` over the grid.
    pub fn derivative_norm(&self) -> f64 {
        let d: Vec<f64> = self.derivative.iter().map(|v| v.norm_sqr()).collect();
        grid::trapezoid(&d, self.grid.dt())
    }

    pub fn intensity(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn derivatives(&self) -> &[C64] {
        &self.derivative
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// Accumulated detuning applied through [`PhotonEnvelope::apply_chirp`].
    pub fn chirp(&self) -> f64 {
        self.chirp
    }

    /// Same samples with the analytic descriptor dropped, so derivatives come
    /// from finite differences.
    pub fn to_tabulated(&self) -> Self {
        Self {
            grid: self.grid,
            values: self.values.clone(),
            derivative: grid::derivative(&self.values, self.grid.dt()),
            family: Family::Tabulated,
            chirp: self.chirp,
        }
    }

    /// True when every sample is real to within `tol`.
    pub fn is_real(&self, tol: f64) -> bool {
        self.values.iter().all(|v| v.im.abs() <= tol)
    }
}

fn check_width(tau: f64) -> Result<(), EnvelopeError> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(EnvelopeError::BadWidth(tau))
    }
}

fn check_span(grid: &TimeGrid, need_start: f64, need_end: f64) -> Result<(), EnvelopeError> {
    let slack = 1e-9 * grid.dt();
    if grid.t_start() > need_start + slack || grid.t_end() < need_end - slack {
        return Err(EnvelopeError::GridTooNarrow {
            start: grid.t_start(),
            end: grid.t_end(),
            need_start,
            need_end,
        });
    }
    Ok(())
}
