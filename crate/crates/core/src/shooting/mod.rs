//! Boundary-value problems that select the trajectories reaching a final
//! position `x` at time `T`.
//!
//! The complex search varies `omega` in `x(0) = q + omega`,
//! `p(0) = p + i C B^-1 omega`; the real searches vary the initial momentum,
//! the initial position, or one of each. Every Newton iteration reads its
//! Jacobian off the scaled tangent matrix of the current trajectory.

mod complex;
mod newton;
mod real;
mod sweep;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{
    ComplexPhasePoint, ComplexTrajectory, DynamicsError, Hamiltonian, IntegratorSettings,
};
use crate::semiclassical::ExponentPhi0;
use crate::wavepacket::WavepacketParams;
use crate::C64;

pub use complex::{
    centre_root, complex_start, continue_complex, enumerate_families, main_family_root,
    solve_complex, solve_two_point,
};
pub use real::{
    billiard_q_roots, continue_real, real_start, solve_mixed, solve_p_to_x, solve_q_to_x,
    solve_real,
};
pub use sweep::{
    continuation_sweep, follow_edge, follow_path, merge_sweeps, Anchor, SweepResult, SweepRoot,
};

/// Roots found by a multi-start search, with the reasons other starts failed.
#[derive(Clone, Debug)]
pub struct RootSearch<R> {
    pub roots: Vec<R>,
    pub failures: Vec<ShootError>,
}

impl<R> Default for RootSearch<R> {
    fn default() -> Self {
        RootSearch {
            roots: Vec::new(),
            failures: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Error)]
pub enum ShootError {
    #[error(
        "root search did not converge after {iterations} iterations (best residual {residual:.3e})"
    )]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("singular boundary Jacobian (|det| = {det:.3e}): caustic")]
    Caustic { det: f64 },
    #[error("continuation left the branch (scaled jump {jump:.3e})")]
    BranchLost { jump: f64 },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("invalid root search input: {0}")]
    Invalid(String),
    #[error("no {kind} root search for potential `{potential}`")]
    Unsupported {
        kind: &'static str,
        potential: &'static str,
    },
}

/// Grid of starting guesses for the family search, per complex component of
/// `omega`: `points_per_axis` values of real and imaginary part each, spread
/// over `[-half_width * b, half_width * b]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedGrid {
    pub points_per_axis: usize,
    pub half_width: f64,
}

impl Default for SeedGrid {
    fn default() -> Self {
        SeedGrid {
            points_per_axis: 5,
            half_width: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(default)]
pub struct ShootingSettings {
    /// Residual tolerance in scaled position units.
    pub tol: f64,
    pub max_iter: usize,
    /// Step halvings allowed per Newton iteration.
    pub max_halvings: u32,
    /// Boundary Jacobians with smaller determinant are treated as caustics.
    pub singular_tol: f64,
    pub integrator: IntegratorSettings,
    pub seed_grid: SeedGrid,
}

impl Default for ShootingSettings {
    fn default() -> Self {
        ShootingSettings {
            tol: 1e-8,
            max_iter: 40,
            max_halvings: 8,
            singular_tol: 1e-12,
            integrator: IntegratorSettings::default().without_path(),
            seed_grid: SeedGrid::default(),
        }
    }
}

/// What is propagated: the Hamiltonian, the packet, the final time.
#[derive(Clone, Copy, Debug)]
pub struct Propagation<'a> {
    pub ham: &'a Hamiltonian,
    pub params: &'a WavepacketParams,
    pub t: f64,
}

impl<'a> Propagation<'a> {
    pub fn new(ham: &'a Hamiltonian, params: &'a WavepacketParams, t: f64) -> Self {
        Propagation { ham, params, t }
    }

    /// Real trajectory from the packet centre, with its path recorded.
    pub fn centre_trajectory(
        &self,
        settings: &IntegratorSettings,
    ) -> Result<ComplexTrajectory, ShootError> {
        let start = ComplexPhasePoint::real(self.params.q(), self.params.p());
        Ok(crate::dynamics::evolve(
            &start,
            self.t,
            self.ham,
            self.params,
            settings,
        )?)
    }

    fn check_target(&self, x: &[f64]) -> Result<(), ShootError> {
        if x.len() != self.params.dim() {
            return Err(ShootError::Invalid(format!(
                "target has {} components, packet has {}",
                x.len(),
                self.params.dim()
            )));
        }
        if !(self.t >= 0.0 && self.t.is_finite()) {
            return Err(ShootError::Invalid(format!(
                "propagation time must be >= 0, got {}",
                self.t
            )));
        }
        Ok(())
    }
}

/// A saddle of the complex-trajectory propagator at one final position.
#[derive(Clone, Debug)]
pub struct ComplexRoot {
    pub omega: Vec<C64>,
    pub trajectory: ComplexTrajectory,
    pub family_id: u32,
    /// `Im Phi0 >= 0`; roots failing it are kept but never summed.
    pub contributing: bool,
    pub phi0: ExponentPhi0,
    /// Newton iterations spent on this root.
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RealKind {
    /// Initial position fixed at `q`, initial momentum free.
    QtoX,
    /// Initial momentum fixed at `p`, initial position free.
    PtoX,
    /// `q_x` and `p_y` fixed, `(q_y, p_x)` free.
    Mixed,
}

/// A real trajectory satisfying one of the mixed boundary problems.
#[derive(Clone, Debug)]
pub struct RealRoot {
    pub kind: RealKind,
    /// The free initial components: `p_i`, `q_i`, or `(q_yi, p_xi)`.
    pub unknowns: Vec<f64>,
    pub trajectory: ComplexTrajectory,
    /// Hard-wall reflections along the path.
    pub maslov_count: u32,
    pub family_id: u32,
}

/// Write the root sets of a sweep as CSV: one line per root.
pub fn write_root_csv(
    path: &Path,
    points: &[[f64; 2]],
    roots: &[Vec<ComplexRoot>],
) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        w,
        "x,y,family_id,re_omega_x,re_omega_y,im_omega_x,im_omega_y,im_phi0,contributing"
    )?;
    for (x, cell) in points.iter().zip(roots) {
        for r in cell {
            let om = |i: usize| r.omega.get(i).copied().unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{:e},{:e},{:e},{:e},{:e},{}",
                x[0],
                x[1],
                r.family_id,
                om(0).re,
                om(1).re,
                om(0).im,
                om(1).im,
                r.phi0.im_phi0(),
                u8::from(r.contributing)
            )?;
        }
    }
    w.flush()
}
