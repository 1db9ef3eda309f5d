//! Coherent single-photon trapping and generation with a Lambda-type
//! cavity QED node.
//!
//! Given a photon waveform and the node's rates, the crate decides whether a
//! control pulse can store (or emit) the photon while leaving node and
//! waveguide unentangled, builds that pulse in closed form, and checks it by
//! integrating the input-output equations forward in time.
//!
//! Time is measured in arbitrary units shared by all rates; every field is
//! expressed in the frame rotating at the cavity frequency.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod envelope;
pub mod feasibility;
pub mod grid;
pub mod multilevel;
pub mod node;
pub mod pulse;
pub mod simulator;
pub mod synthesis;
pub mod trajectory;

pub use num_complex::Complex64 as C64;

pub use envelope::{EnvelopeError, Family, PhotonEnvelope};
pub use feasibility::{margin_gen, margin_lossless, margin_trap, FeasibilityReport};
pub use grid::{GridError, TimeGrid};
pub use multilevel::{
    dark_state_check, decompose, eta_gen_n, eta_trap_n, margin_gen_n, margin_trap_n, synthesize_gen_n, synthesize_trap_n,
    DarkStateReport,
    LevelDecomposition, MultiSynthesisResult, MultilevelError,
};
pub use node::{CouplingRegime, MultiNodeParams, NodeError, NodeParams};
pub use pulse::{ControlPulse, PulseError};
pub use simulator::{output_overlap, simulate, simulate_n, Budgets, Input, SimError, SimOutcome};
pub use synthesis::{
    adiabatic_pulse, envelope_from_adiabatic_pulse, eta_gen, eta_trap, synthesize_gen, synthesize_trap, Mode,
    RecoveredEnvelope, SynthesisError, SynthesisResult,
};
pub use trajectory::{MultiTrajectory, Trajectory};

/// Running photon number below which trapping has not started; criteria are
/// not enforced and the control field is off.
pub const EPS_START: f64 = 1e-8;

/// Storage probability below which generation is complete and the control
/// field is switched off.
pub const EPS_END: f64 = 1e-8;

/// Squared amplitude below which a phase is treated as undefined.
pub const EPS_PHASE: f64 = 1e-30;
