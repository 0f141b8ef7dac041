//! Semiclassical propagation of Gaussian coherent states.
//!
//! The crate propagates a two-dimensional (or one-dimensional) coherent state
//! through a smooth potential or a circular hard-wall billiard and compares
//! several semiclassical wavefunctions against an exact split-operator run:
//!
//! - `psi_sc`: complex classical trajectories selected by a root search in the
//!   complexified initial phase space,
//! - `psi_tga`: the thawed Gaussian built on the central trajectory,
//! - `psi_q`, `psi_p`, `psi_mixed`: real trajectories with fixed initial
//!   position, fixed initial momentum, or mixed boundary conditions.
//!
//! Tangent matrices are always expressed in variables scaled by the packet
//! uncertainties, `x~ = B^-1 x` and `p~ = C^-1 p` with `B C = hbar`.
//!
//! The `examples/` directory of this crate has one runnable program per major
//! capability; the `scwave` binary runs whole scenarios from presets or
//! config files.

pub mod dynamics;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod potentials;
pub mod quantum;
pub mod runner;
pub mod scenarios;
pub mod semiclassical;
pub mod shooting;
pub mod verify;
pub mod wavepacket;

pub use num_complex::Complex64 as C64;

pub use dynamics::{
    evolve, ComplexPhasePoint, ComplexTrajectory, Hamiltonian, IntegratorSettings, TangentMatrix,
};
pub use error::{Error, Result};
pub use grid::{
    normalized_overlap, overlap, sample_on_grid, CellFlags, FlagField, Grid, WaveField,
};
pub use potentials::PotentialSpec;
pub use scenarios::{preset, Method, Scenario};
pub use wavepacket::{coherent_state_amplitude, WavepacketParams};
