//! Semiclassical wavefunctions assembled from trajectories.
//!
//! Every estimator has the form `N exp(E) / sqrt(det(Mxx + i Mxp))`, with the
//! square root continued along the trajectory; they differ in the exponent
//! `E` and in which trajectories enter. With real initial offset `d = x0 - q`
//! and momentum offset `g`, the three real-trajectory exponents are special
//! cases of
//!
//! ```text
//! E = (i/hbar)(S + p.d) - d.B^-2.d/2 - g.Phi^-1.g/2,
//! Phi^-1 = -i B (Mxx + i Mxp)^-1 Mxp B.
//! ```

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::ComplexTrajectory;
use crate::grid::{CellFlags, FlagField, Grid, WaveField};
use crate::linalg::{self, CMatrix};
use crate::shooting::{ComplexRoot, RealKind, RealRoot, SweepResult};
use crate::wavepacket::WavepacketParams;
use crate::C64;

/// Tolerance on `Im Phi0` below which a saddle is non-contributing.
pub const CONTRIBUTING_TOL: f64 = 1e-10;

/// The stationary exponent, stored as `(i/hbar) Phi0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExponentPhi0 {
    pub value: C64,
    pub hbar: f64,
}

impl ExponentPhi0 {
    pub fn phi0(&self) -> C64 {
        -C64::i() * self.hbar * self.value
    }

    pub fn im_phi0(&self) -> f64 {
        -self.hbar * self.value.re
    }

    pub fn is_contributing(&self) -> bool {
        self.im_phi0() >= -CONTRIBUTING_TOL
    }
}

/// `(i/hbar)(S + p.omega) - omega.B^-2.omega / 2`.
pub fn phi0_exponent(omega: &[C64], action: C64, params: &WavepacketParams) -> ExponentPhi0 {
    let (p, b, hbar) = (params.p(), params.b(), params.hbar());
    let mut phase = action;
    let mut gauss = C64::default();
    for i in 0..omega.len() {
        phase += p[i] * omega[i];
        gauss += omega[i] * omega[i] / (b[i] * b[i]);
    }
    ExponentPhi0 {
        value: C64::i() / hbar * phase - 0.5 * gauss,
        hbar,
    }
}

pub fn exponent_phi0(root: &ComplexRoot, params: &WavepacketParams) -> ExponentPhi0 {
    phi0_exponent(&root.omega, root.trajectory.action, params)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(default)]
pub struct AssemblySettings {
    /// Cells where some summed term has `|det(Mxx + i Mxp)|` below this are flagged.
    pub caustic_tol: f64,
    /// Drop saddles with `Im Phi0 < 0`.
    pub discard_non_contributing: bool,
    /// Cut secondary terms that blow up across neighbouring nodes.
    pub false_divergence: bool,
    pub divergence_ratio: f64,
    /// Number of consecutive nodes over which the term must grow.
    pub divergence_run: usize,
}

impl Default for AssemblySettings {
    fn default() -> Self {
        AssemblySettings {
            caustic_tol: 1e-4,
            discard_non_contributing: true,
            false_divergence: true,
            divergence_ratio: 10.0,
            divergence_run: 3,
        }
    }
}

/// One estimator value with its reliability flags.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointValue {
    pub value: C64,
    pub flags: CellFlags,
}

/// An estimator sampled on a grid.
#[derive(Clone, Debug)]
pub struct EstimatorField {
    pub field: WaveField,
    pub flags: FlagField,
}

fn prefactor(
    tr: &ComplexTrajectory,
    params: &WavepacketParams,
    caustic_tol: f64,
    flags: &mut CellFlags,
) -> C64 {
    if tr.prefactor_det().norm() < caustic_tol {
        flags.insert(CellFlags::CAUSTIC);
    }
    params.norm_const() / tr.sqrt_prefactor_det()
}

/// Contribution of one complex saddle.
pub fn sc_term(root: &ComplexRoot, params: &WavepacketParams) -> C64 {
    params.norm_const() * root.phi0.value.exp() / root.trajectory.sqrt_prefactor_det()
}

/// Complex-trajectory estimator at one point from the saddles found there.
pub fn psi_sc(
    roots: &[ComplexRoot],
    params: &WavepacketParams,
    settings: &AssemblySettings,
) -> PointValue {
    let mut flags = CellFlags::default();
    let mut value = C64::default();
    let mut used = 0;
    for r in roots {
        if settings.discard_non_contributing && !r.contributing {
            continue;
        }
        used += 1;
        value +=
            prefactor(&r.trajectory, params, settings.caustic_tol, &mut flags) * r.phi0.value.exp();
    }
    if used == 0 {
        flags.insert(CellFlags::UNREACHABLE);
    }
    PointValue { value, flags }
}

/// Thawed Gaussian built on the real centre trajectory.
pub fn psi_tga(x: &[f64], centre: &ComplexTrajectory, params: &WavepacketParams) -> C64 {
    let (b, hbar) = (params.b(), params.hbar());
    let m = &centre.tangent;
    let end = centre.end();
    let xi = match linalg::inverse(&m.prefactor_matrix()) {
        Some(inv) => (m.pp() - m.px() * C64::i()) * inv,
        None => return C64::default(),
    };
    let d = b.len();
    let dx: Vec<C64> = (0..d).map(|i| C64::new(x[i], 0.0) - end.x[i]).collect();
    let mut phase = centre.action;
    let mut quad = C64::default();
    for i in 0..d {
        phase += end.p[i] * dx[i];
        for j in 0..d {
            quad += dx[i] / b[i] * xi[(i, j)] * dx[j] / b[j];
        }
    }
    let e = C64::i() / hbar * phase - 0.5 * quad;
    params.norm_const() * e.exp() / centre.sqrt_prefactor_det()
}

/// `g.Phi^-1.g` with `Phi^-1 = -i B (Mxx + i Mxp)^-1 Mxp B`.
fn phi_inverse_form(tr: &ComplexTrajectory, b: &[f64], g: &[C64]) -> Option<C64> {
    let m = &tr.tangent;
    let inv = linalg::inverse(&m.prefactor_matrix())?;
    let core: CMatrix = inv * m.xp();
    let d = b.len();
    let mut acc = C64::default();
    for i in 0..d {
        for j in 0..d {
            acc += g[i] * b[i] * core[(i, j)] * b[j] * g[j];
        }
    }
    Some(-C64::i() * acc)
}

/// Exponent of a real-trajectory term: the trajectory starts at `x0` with
/// momentum `p0`, both real.
fn real_exponent(tr: &ComplexTrajectory, params: &WavepacketParams) -> Option<C64> {
    let (q, p, b, hbar) = (params.q(), params.p(), params.b(), params.hbar());
    let start = tr.start();
    let d = b.len();
    let off: Vec<f64> = (0..d).map(|i| start.x[i].re - q[i]).collect();
    let g: Vec<C64> = (0..d)
        .map(|i| C64::i() / hbar * (p[i] - start.p[i].re) - off[i] / (b[i] * b[i]))
        .collect();
    let mut phase = tr.action;
    let mut gauss = 0.0;
    for i in 0..d {
        phase += p[i] * off[i];
        gauss += off[i] * off[i] / (b[i] * b[i]);
    }
    let quad = phi_inverse_form(tr, b, &g)?;
    Some(C64::i() / hbar * phase - 0.5 * gauss - 0.5 * quad)
}

/// Contribution of one real root, including `exp(-i pi/2)` per wall bounce.
pub fn real_term(root: &RealRoot, params: &WavepacketParams) -> C64 {
    let e = real_exponent(&root.trajectory, params).unwrap_or(C64::new(f64::NEG_INFINITY, 0.0));
    let maslov = C64::from_polar(1.0, -FRAC_PI_2 * root.maslov_count as f64);
    params.norm_const() * maslov * e.exp() / root.trajectory.sqrt_prefactor_det()
}

fn psi_real(
    roots: &[RealRoot],
    kind: RealKind,
    params: &WavepacketParams,
    settings: &AssemblySettings,
) -> PointValue {
    let mut flags = CellFlags::default();
    let mut value = C64::default();
    let mut used = 0;
    for r in roots.iter().filter(|r| r.kind == kind) {
        used += 1;
        let pre = prefactor(&r.trajectory, params, settings.caustic_tol, &mut flags);
        let maslov = C64::from_polar(1.0, -FRAC_PI_2 * r.maslov_count as f64);
        match real_exponent(&r.trajectory, params) {
            Some(e) => value += pre * maslov * e.exp(),
            None => flags.insert(CellFlags::CAUSTIC),
        }
    }
    if used == 0 {
        flags.insert(CellFlags::UNREACHABLE);
    }
    PointValue { value, flags }
}

/// Fixed initial position: coherent sum over the momentum roots.
pub fn psi_q(
    roots: &[RealRoot],
    params: &WavepacketParams,
    settings: &AssemblySettings,
) -> PointValue {
    psi_real(roots, RealKind::QtoX, params, settings)
}

/// Fixed initial momentum: coherent sum over the position roots.
pub fn psi_p(
    roots: &[RealRoot],
    params: &WavepacketParams,
    settings: &AssemblySettings,
) -> PointValue {
    psi_real(roots, RealKind::PtoX, params, settings)
}

/// Mixed conditions, `q_x` and `p_y` fixed.
pub fn psi_mixed(
    roots: &[RealRoot],
    params: &WavepacketParams,
    settings: &AssemblySettings,
) -> PointValue {
    psi_real(roots, RealKind::Mixed, params, settings)
}

fn collect(grid: &Grid, values: Vec<PointValue>) -> EstimatorField {
    let (amps, flags) = values.into_iter().map(|v| (v.value, v.flags)).unzip();
    EstimatorField {
        field: WaveField {
            grid: *grid,
            amplitudes: amps,
        },
        flags: FlagField { grid: *grid, flags },
    }
}

/// Thawed Gaussian on every node.
pub fn assemble_tga(
    grid: &Grid,
    centre: &ComplexTrajectory,
    params: &WavepacketParams,
) -> EstimatorField {
    let values = (0..grid.len())
        .into_par_iter()
        .map(|i| PointValue {
            value: psi_tga(&grid.point_at(i), centre, params),
            flags: CellFlags::default(),
        })
        .collect();
    collect(grid, values)
}

/// Real-trajectory estimator on every node of a sweep.
pub fn assemble_real(
    kind: RealKind,
    sweep: &SweepResult<RealRoot>,
    params: &WavepacketParams,
    settings: &AssemblySettings,
) -> EstimatorField {
    let values = sweep
        .roots
        .par_iter()
        .map(|cell| psi_real(cell, kind, params, settings))
        .collect();
    collect(&sweep.grid, values)
}

/// Complex-trajectory estimator on every node of a sweep, with the
/// false-divergence filter applied to secondary families.
pub fn assemble_sc(
    sweep: &SweepResult<ComplexRoot>,
    params: &WavepacketParams,
    settings: &AssemblySettings,
) -> EstimatorField {
    let grid = &sweep.grid;
    let term_of = |idx: usize, fid: u32| -> Option<f64> {
        sweep.roots[idx]
            .iter()
            .find(|r| r.family_id == fid && (r.contributing || !settings.discard_non_contributing))
            .map(|r| sc_term(r, params).norm())
    };
    let values = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let cell = &sweep.roots[idx];
            if !settings.false_divergence {
                return psi_sc(cell, params, settings);
            }
            let main = term_of(idx, 0).unwrap_or(0.0);
            let (ix, iy) = grid.coords(idx);
            let mut kept = Vec::with_capacity(cell.len());
            let mut filtered = false;
            for r in cell {
                if r.family_id != 0 && (r.contributing || !settings.discard_non_contributing) {
                    let t = sc_term(r, params).norm();
                    if t > settings.divergence_ratio * main
                        && grows_into(grid, ix, iy, settings.divergence_run, |j| {
                            term_of(j, r.family_id)
                        })
                    {
                        filtered = true;
                        continue;
                    }
                }
                kept.push(r.clone());
            }
            let mut v = psi_sc(&kept, params, settings);
            if filtered {
                v.flags.insert(CellFlags::FILTERED);
            }
            v
        })
        .collect();
    collect(grid, values)
}

/// Whether `term` increases strictly over `run` consecutive nodes ending at
/// `(ix, iy)`, approaching from any of the four axis directions.
fn grows_into(
    grid: &Grid,
    ix: usize,
    iy: usize,
    run: usize,
    term: impl Fn(usize) -> Option<f64>,
) -> bool {
    let run = run.max(2) as i64;
    'dir: for (sx, sy) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
        let mut prev: Option<f64> = None;
        for k in (0..run).rev() {
            let jx = ix as i64 + sx * k;
            let jy = iy as i64 + sy * k;
            if jx < 0 || jy < 0 || jx >= grid.nx as i64 || jy >= grid.ny as i64 {
                continue 'dir;
            }
            let Some(t) = term(grid.index(jx as usize, jy as usize)) else {
                continue 'dir;
            };
            if prev.is_some_and(|p| t <= p) {
                continue 'dir;
            }
            prev = Some(t);
        }
        return true;
    }
    false
}

/// Overlap with caustic cells removed from both fields and both renormalised.
pub fn masked_overlap(reference: &WaveField, approx: &EstimatorField) -> crate::Result<f64> {
    let mut a = reference.clone();
    let mut b = approx.field.clone();
    for (i, f) in approx.flags.flags.iter().enumerate() {
        if f.contains(CellFlags::CAUSTIC) {
            a.amplitudes[i] = C64::default();
            b.amplitudes[i] = C64::default();
        }
    }
    crate::grid::normalized_overlap(&a, &b)
}

#[cfg(test)]
mod tests;
