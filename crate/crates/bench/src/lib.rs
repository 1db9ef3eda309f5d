//! Fixed scenarios shared by the benchmarks.

use cavity_node::{NodeParams, PhotonEnvelope, TimeGrid, C64};

/// Gaussian photon of width `tau` on `[-10 tau, 10 tau]` with step `dt`.
pub fn photon(tau: f64, dt: f64) -> PhotonEnvelope {
    let grid = TimeGrid::spanning(-10.0 * tau, 10.0 * tau, dt).expect("valid grid");
    PhotonEnvelope::gaussian(0.0, tau, grid).expect("grid covers the photon")
}

/// Strongly coupled node with every loss channel switched on.
pub fn lossy_node() -> NodeParams {
    NodeParams::new(1.0, 0.05, 0.2, C64::new(5.0, 0.0), 0.0).expect("valid node")
}
