use num_complex::Complex64 as C64;

use crate::grid::TimeGrid;

/// Amplitudes of the single-excitation node state
/// `g |g,1> + r |r,0> + e |e,0>` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub g: Vec<C64>,
    pub r: Vec<C64>,
    pub e: Vec<C64>,
}

impl Trajectory {
    /// `|g|^2 + |r|^2 + |e|^2` at each sample.
    pub fn node_probability(&self) -> Vec<f64> {
        self.g
            .iter()
            .zip(&self.r)
            .zip(&self.e)
            .map(|((g, r), e)| g.norm_sqr() + r.norm_sqr() + e.norm_sqr())
            .collect()
    }

    pub fn final_storage(&self) -> f64 {
        self.e.last().map_or(0.0, |e| e.norm_sqr())
    }
}

/// Node trajectory with `N` excited levels. `r[k]` is the excited-state
/// vector at sample `k` in the level basis. The parallel/perpendicular
/// coordinates and `y` are only filled in by synthesis.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiTrajectory {
    pub grid: TimeGrid,
    pub g: Vec<C64>,
    pub r: Vec<Vec<C64>>,
    pub e: Vec<C64>,
    pub r_par: Option<Vec<C64>>,
    pub r_perp: Option<Vec<Vec<C64>>>,
    pub y: Option<Vec<C64>>,
}

impl MultiTrajectory {
    pub fn n_levels(&self) -> usize {
        self.r.first().map_or(0, Vec::len)
    }

    pub fn node_probability(&self) -> Vec<f64> {
        self.g
            .iter()
            .zip(&self.r)
            .zip(&self.e)
            .map(|((g, r), e)| g.norm_sqr() + r.iter().map(|x| x.norm_sqr()).sum::<f64>() + e.norm_sqr())
            .collect()
    }

    pub fn final_storage(&self) -> f64 {
        self.e.last().map_or(0.0, |e| e.norm_sqr())
    }

    /// Amplitude of level `level` across the grid.
    pub fn level(&self, level: usize) -> Vec<C64> {
        self.r.iter().map(|r| r[level]).collect()
    }
}
