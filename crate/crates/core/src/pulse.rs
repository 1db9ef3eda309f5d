use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::grid::{self, TimeGrid};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PulseError {
    #[error("expected {expected} samples for the grid, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("pulse magnitude must be finite and non-negative (index {0})")]
    BadMagnitude(usize),
    #[error("pulse phase jumps by more than pi between samples {0} and {next}", next = .0 + 1)]
    Discontinuous(usize),
}

/// Classical control field `Omega(t) = |Omega| exp(i Phi)` on the e-r
/// transition. The phase is stored unwrapped.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPulse {
    grid: TimeGrid,
    magnitude: Vec<f64>,
    phase: Vec<f64>,
}

impl ControlPulse {
    pub fn new(grid: TimeGrid, magnitude: Vec<f64>, phase: Vec<f64>) -> Result<Self, PulseError> {
        let n = grid.n_points();
        for len in [magnitude.len(), phase.len()] {
            if len != n {
                return Err(PulseError::LengthMismatch { expected: n, got: len });
            }
        }
        if let Some(k) = magnitude.iter().position(|m| !(*m >= 0.0 && m.is_finite())) {
            return Err(PulseError::BadMagnitude(k));
        }
        if let Some(k) = phase.windows(2).position(|w| !((w[1] - w[0]).abs() <= std::f64::consts::PI)) {
            return Err(PulseError::Discontinuous(k));
        }
        Ok(Self { grid, magnitude, phase })
    }

    pub fn zero(grid: TimeGrid) -> Self {
        let n = grid.n_points();
        Self { grid, magnitude: vec![0.0; n], phase: vec![0.0; n] }
    }

    /// Builds a pulse from complex samples. Where the field vanishes the
    /// phase is held at its nearest defined value so the profile stays
    /// continuous.
    pub fn from_complex(grid: TimeGrid, samples: &[C64]) -> Result<Self, PulseError> {
        let n = grid.n_points();
        if samples.len() != n {
            return Err(PulseError::LengthMismatch { expected: n, got: samples.len() });
        }
        let magnitude: Vec<f64> = samples.iter().map(|s| s.norm()).collect();
        let mut phase = vec![0.0; n];
        let mut last: Option<f64> = None;
        for (k, s) in samples.iter().enumerate() {
            if magnitude[k] > 0.0 {
                let mut a = s.arg();
                if let Some(prev) = last {
                    // keep the branch of the previous defined sample
                    a = prev + principal(a - prev);
                }
                phase[k] = a;
                last = Some(a);
            } else if let Some(prev) = last {
                phase[k] = prev;
            }
        }
        if let Some(first) = magnitude.iter().position(|m| *m > 0.0) {
            let p0 = phase[first];
            phase[..first].iter_mut().for_each(|p| *p = p0);
        }
        grid::unwrap_phase(&mut phase);
        Self::new(grid, magnitude, phase)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn magnitude(&self) -> &[f64] {
        &self.magnitude
    }

    pub fn phase(&self) -> &[f64] {
        &self.phase
    }

    #[inline]
    pub fn sample(&self, k: usize) -> C64 {
        C64::from_polar(self.magnitude[k], self.phase[k])
    }

    pub fn samples(&self) -> Vec<C64> {
        (0..self.magnitude.len()).map(|k| self.sample(k)).collect()
    }

    pub fn peak(&self) -> f64 {
        self.magnitude.iter().copied().fold(0.0, f64::max)
    }

    /// `int |Omega|^2 dt`.
    pub fn energy(&self) -> f64 {
        let sq: Vec<f64> = self.magnitude.iter().map(|m| m * m).collect();
        grid::trapezoid(&sq, self.grid.dt())
    }

    /// Spread `max Phi - min Phi` over samples whose magnitude exceeds `floor`.
    pub fn phase_variation(&self, floor: f64) -> f64 {
        let active = self.phase.iter().zip(&self.magnitude).filter(|(_, m)| **m > floor).map(|(p, _)| *p);
        let (lo, hi) = active.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p), hi.max(p)));
        if hi >= lo {
            hi - lo
        } else {
            0.0
        }
    }
}

fn principal(x: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    x - TAU * ((x + PI) / TAU).floor()
}
