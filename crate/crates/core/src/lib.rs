//! Trap trajectories for fast transport of mixed-species trapped-ion chains.
//!
//! The crate is organised bottom-up:
//!
//! * [`chain`]: the one-dimensional Coulomb chain in a harmonic well, its forces,
//!   equilibrium geometry and mass-weighted normal modes.
//! * [`trajectory`]: trap-minimum trajectories `Q0(t)` with exact derivatives.
//! * [`design`]: invariant-based inverse engineering of `Q0(t)` from the
//!   auxiliary mode equations, plus the uncoupled-mode excitation model.
//! * [`dynamics`]: full classical propagation and per-mode excitation readout.
//! * [`config`] and [`sweep`]: batch sweeps, parameter optimisation and dataset output used by
//!   the `ionshuttle` binary.
//!
//! All quantities are SI internally.

pub mod chain;
pub mod config;
pub mod design;
pub mod dynamics;
mod error;
pub mod integrate;
pub mod linalg;
pub mod optimize;
pub mod sweep;
pub mod trajectory;

pub use chain::{ChainConfig, NormalModeBasis, PhaseState, Species};
pub use design::{AuxiliarySolution, DesignResult};
pub use dynamics::{ExcitationReport, IntegratorOptions, ModeExcitation};
pub use error::{Error, Result};
pub use trajectory::{BoundaryReport, Trajectory, TrajectoryKind};
