//! Uniform time grid shared by envelopes, pulses and trajectories, plus the
//! two discrete calculus primitives everything else is built on: a running
//! trapezoid integral and a finite-difference derivative.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64 as C64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("time step must be positive and finite, got {0}")]
    BadStep(f64),
    #[error("a grid needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("grid start must be finite, got {0}")]
    BadStart(f64),
    #[error("empty time span [{start}, {end}]")]
    EmptySpan { start: f64, end: f64 },
}

/// Uniform grid `t_k = t_start + k * dt`, `k = 0..n_points`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_start: f64,
    dt: f64,
    n_points: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, dt: f64, n_points: usize) -> Result<Self, GridError> {
        if !t_start.is_finite() {
            return Err(GridError::BadStart(t_start));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(GridError::BadStep(dt));
        }
        if n_points < 2 {
            return Err(GridError::TooFewPoints(n_points));
        }
        Ok(Self { t_start, dt, n_points })
    }

    /// Grid covering `[t_start, t_end]` with step `dt`. The number of points is
    /// rounded so that the last point lands within half a step of `t_end`.
    pub fn spanning(t_start: f64, t_end: f64, dt: f64) -> Result<Self, GridError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(GridError::BadStep(dt));
        }
        if !(t_end > t_start) {
            return Err(GridError::EmptySpan { start: t_start, end: t_end });
        }
        let steps = ((t_end - t_start) / dt).round() as usize;
        Self::new(t_start, dt, steps + 1)
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.n_points - 1)
    }

    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        self.t_start + k as f64 * self.dt
    }

    pub fn times(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.n_points).map(move |k| self.time(k))
    }

    /// True when both grids have the same start, step and length.
    pub fn same_as(&self, other: &TimeGrid) -> bool {
        self == other
    }
}

/// Running trapezoid integral; `out[0] = 0`.
pub fn cumulative_trapezoid<T>(values: &[T], dt: f64) -> Vec<T>
where
    T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>,
{
    let mut out = Vec::with_capacity(values.len());
    let mut acc = T::default();
    out.push(acc);
    for w in values.windows(2) {
        acc = acc + (w[0] + w[1]) * (0.5 * dt);
        out.push(acc);
    }
    out
}

/// Trapezoid integral over the whole series.
pub fn trapezoid<T>(values: &[T], dt: f64) -> T
where
    T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>,
{
    let n = values.len();
    if n < 2 {
        return T::default();
    }
    let mut inner = T::default();
    for v in &values[1..n - 1] {
        inner = inner + *v;
    }
    (inner + (values[0] + values[n - 1]) * 0.5) * dt
}

/// Derivative on a uniform grid: 4th-order central differences in the
/// interior, 2nd-order central one point in from each edge and 2nd-order
/// one-sided at the edges themselves.
pub fn derivative<T>(values: &[T], dt: f64) -> Vec<T>
where
    T: Copy + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
{
    let n = values.len();
    assert!(n >= 2, "derivative needs at least two samples");
    if n == 2 {
        let d = (values[1] - values[0]) * (1.0 / dt);
        return vec![d, d];
    }
    let f = values;
    let inv = 1.0 / dt;
    let mut out = Vec::with_capacity(n);
    out.push((f[1] * 4.0 - f[0] * 3.0 - f[2]) * (0.5 * inv));
    for k in 1..n - 1 {
        let d = if k >= 2 && k + 2 < n {
            (f[k - 2] - f[k + 2] + (f[k + 1] - f[k - 1]) * 8.0) * (inv / 12.0)
        } else {
            (f[k + 1] - f[k - 1]) * (0.5 * inv)
        };
        out.push(d);
    }
    out.push((f[n - 1] * 3.0 - f[n - 2] * 4.0 + f[n - 3]) * (0.5 * inv));
    out
}

/// Phase rate `Im(x' x*) / |x|^2` with null amplitudes contributing nothing.
pub(crate) fn phase_rate(x: C64, x_dot: C64) -> f64 {
    let n = x.norm_sqr();
    if n < crate::EPS_PHASE {
        0.0
    } else {
        (x_dot * x.conj()).im / n
    }
}

/// Unwrap a sequence of principal-value phases so adjacent samples never
/// differ by more than pi.
pub fn unwrap_phase(phases: &mut [f64]) {
    use std::f64::consts::{PI, TAU};
    for k in 1..phases.len() {
        let mut d = phases[k] - phases[k - 1];
        d -= TAU * ((d + PI) / TAU).floor();
        phases[k] = phases[k - 1] + d;
    }
}
