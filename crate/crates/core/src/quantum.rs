//! Exact propagation by the split-operator Fourier method, the reference
//! against which the semiclassical estimators are scored.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::dynamics::Hamiltonian;
use crate::error::{Error, Result};
use crate::grid::{sample_on_grid, Grid, WaveField};
use crate::wavepacket::{coherent_state_amplitude, WavepacketParams};
use crate::C64;

/// Angular wavenumbers of an `n`-point periodic lattice with spacing `h`, in
/// FFT order `0, 1, ..., n/2 - 1, -n/2, ..., -1` (times `2 pi / (n h)`).
pub fn wavenumbers(n: usize, h: f64) -> Vec<f64> {
    let dk = 2.0 * PI / (n as f64 * h);
    (0..n)
        .map(|j| {
            let m = if j < n.div_ceil(2) {
                j as f64
            } else {
                j as f64 - n as f64
            };
            m * dk
        })
        .collect()
}

/// Largest grid spacing that resolves the packet's momentum content.
pub fn nyquist_spacing(params: &WavepacketParams, axis: usize) -> f64 {
    let p = params.p().iter().map(|v| v * v).sum::<f64>().sqrt();
    PI * params.hbar() / (p + 4.0 * params.hbar() / params.b()[axis])
}

pub fn check_nyquist(params: &WavepacketParams, grid: &Grid) -> Result<()> {
    for axis in 0..2 {
        let required = nyquist_spacing(params, axis);
        if grid.spacing[axis] >= required {
            return Err(Error::Nyquist {
                axis,
                spacing: grid.spacing[axis],
                required,
            });
        }
    }
    Ok(())
}

/// Precomputed phase tables and transforms for Strang steps
/// `exp(-iV dt/2h) exp(-iK dt/h) exp(-iV dt/2h)` on a periodic grid.
pub struct SplitStepPlan {
    pub grid: Grid,
    pub dt: f64,
    kinetic: Vec<C64>,
    half_potential: Vec<C64>,
    full_potential: Vec<C64>,
    fft_x: Arc<dyn Fft<f64>>,
    ifft_x: Arc<dyn Fft<f64>>,
    fft_y: Arc<dyn Fft<f64>>,
    ifft_y: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SplitStepPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SplitStepPlan")
            .field("grid", &self.grid)
            .field("dt", &self.dt)
            .finish()
    }
}

impl SplitStepPlan {
    pub fn new(grid: &Grid, ham: &Hamiltonian, hbar: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "time step must be positive, got {dt}"
            )));
        }
        ham.potential.validate()?;
        let kx = wavenumbers(grid.nx, grid.spacing[0]);
        let ky = wavenumbers(grid.ny, grid.spacing[1]);
        let mut kinetic = Vec::with_capacity(grid.len());
        for y in &ky {
            for x in &kx {
                let e = hbar * hbar * (x * x + y * y) / (2.0 * ham.mass);
                kinetic.push(C64::from_polar(1.0, -e * dt / hbar));
            }
        }
        let v: Vec<f64> = (0..grid.len())
            .map(|i| ham.potential.grid_value(&grid.point_at(i)))
            .collect();
        let phase = |s: f64| {
            v.iter()
                .map(|&v| C64::from_polar(1.0, -v * s * dt / hbar))
                .collect::<Vec<_>>()
        };
        let mut planner = FftPlanner::new();
        Ok(SplitStepPlan {
            grid: *grid,
            dt,
            kinetic,
            half_potential: phase(0.5),
            full_potential: phase(1.0),
            fft_x: planner.plan_fft_forward(grid.nx),
            ifft_x: planner.plan_fft_inverse(grid.nx),
            fft_y: planner.plan_fft_forward(grid.ny),
            ifft_y: planner.plan_fft_inverse(grid.ny),
        })
    }

    /// Largest deviation of any phase-table entry from unit modulus.
    pub fn phase_table_defect(&self) -> f64 {
        self.kinetic
            .iter()
            .chain(&self.half_potential)
            .chain(&self.full_potential)
            .map(|z| (z.norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    fn transform(&self, psi: &mut [C64], scratch: &mut Vec<C64>, forward: bool) {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let (fx, fy) = if forward {
            (&self.fft_x, &self.fft_y)
        } else {
            (&self.ifft_x, &self.ifft_y)
        };
        fx.process(psi);
        scratch.resize(psi.len(), C64::default());
        transpose(psi, scratch, nx, ny);
        fy.process(scratch);
        transpose(scratch, psi, ny, nx);
    }

    /// Advance `psi` by `steps` time steps in place.
    pub fn run(&self, psi: &mut WaveField, steps: usize) -> Result<()> {
        self.grid.ensure_same(&psi.grid)?;
        if steps == 0 {
            return Ok(());
        }
        let a = &mut psi.amplitudes;
        let mut scratch = Vec::new();
        let scale = 1.0 / self.grid.len() as f64;
        mul(a, &self.half_potential);
        for s in 0..steps {
            self.transform(a, &mut scratch, true);
            for (z, k) in a.iter_mut().zip(&self.kinetic) {
                *z *= k * scale;
            }
            self.transform(a, &mut scratch, false);
            if s + 1 < steps {
                mul(a, &self.full_potential);
            }
        }
        mul(a, &self.half_potential);
        Ok(())
    }
}

fn mul(a: &mut [C64], b: &[C64]) {
    for (z, w) in a.iter_mut().zip(b) {
        *z *= w;
    }
}

/// `dst[c * rows + r] = src[r * cols + c]` for a `rows x cols` row-major `src`.
fn transpose(src: &[C64], dst: &mut [C64], cols: usize, rows: usize) {
    const TILE: usize = 32;
    for r0 in (0..rows).step_by(TILE) {
        for c0 in (0..cols).step_by(TILE) {
            for r in r0..(r0 + TILE).min(rows) {
                for c in c0..(c0 + TILE).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

/// Number of steps for time `t` at nominal step `dt`; the step is shrunk so
/// that the steps tile `[0, t]` exactly.
pub fn step_count(t: f64, dt: f64) -> Result<(usize, f64)> {
    if !(t >= 0.0) || !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "bad time {t} or step {dt}"
        )));
    }
    let n = (t / dt - 1e-9).ceil().max(0.0) as usize;
    Ok(if n == 0 { (0, dt) } else { (n, t / n as f64) })
}

/// Coherent state sampled on `grid` and propagated to time `t`.
pub fn propagate_exact(
    params: &WavepacketParams,
    ham: &Hamiltonian,
    t: f64,
    grid: &Grid,
    dt: f64,
) -> Result<WaveField> {
    propagate_observed(params, ham, t, grid, dt, 0, |_, _| {})
}

/// As [`propagate_exact`], calling `observe(time, field)` every `every` steps
/// (and at the start); `every = 0` disables it.
pub fn propagate_observed(
    params: &WavepacketParams,
    ham: &Hamiltonian,
    t: f64,
    grid: &Grid,
    dt: f64,
    every: usize,
    mut observe: impl FnMut(f64, &WaveField),
) -> Result<WaveField> {
    if params.dim() != 2 {
        return Err(Error::InvalidParameter(
            "grid propagation is two-dimensional".into(),
        ));
    }
    check_nyquist(params, grid)?;
    let (steps, dt) = step_count(t, dt)?;
    let plan = SplitStepPlan::new(grid, ham, params.hbar(), dt)?;
    let mut psi = sample_on_grid(|x| Ok(coherent_state_amplitude(&x, params)), grid)?;
    if every == 0 {
        plan.run(&mut psi, steps)?;
        return Ok(psi);
    }
    observe(0.0, &psi);
    let mut done = 0;
    while done < steps {
        let k = every.min(steps - done);
        plan.run(&mut psi, k)?;
        done += k;
        observe(done as f64 * dt, &psi);
    }
    Ok(psi)
}

/// `sum_{region} |psi|^2 dA`.
pub fn region_probability(field: &WaveField, region: impl Fn([f64; 2]) -> bool) -> f64 {
    let g = &field.grid;
    field
        .amplitudes
        .iter()
        .enumerate()
        .filter(|(i, _)| region(g.point_at(*i)))
        .map(|(_, z)| z.norm_sqr())
        .sum::<f64>()
        * g.cell_area()
}

/// Field with everything outside `region` set to zero.
pub fn restrict(field: &WaveField, region: impl Fn([f64; 2]) -> bool) -> WaveField {
    field.masked(region)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

/// Density along the grid line where coordinate `fixed` is nearest `value`:
/// `line_cut(f, Axis::Y, 0.0)` is the profile along `x` at `y = 0`.
pub fn line_cut(field: &WaveField, fixed: Axis, value: f64) -> Vec<(f64, f64)> {
    let g = &field.grid;
    match fixed {
        Axis::Y => {
            let (_, iy) = g.nearest([g.origin[0], value]);
            (0..g.nx)
                .map(|ix| (g.point(ix, iy)[0], field.at(ix, iy).norm_sqr()))
                .collect()
        }
        Axis::X => {
            let (ix, _) = g.nearest([value, g.origin[1]]);
            (0..g.ny)
                .map(|iy| (g.point(ix, iy)[1], field.at(ix, iy).norm_sqr()))
                .collect()
        }
    }
}

/// `<x>` of a normalised field.
pub fn mean_position(field: &WaveField) -> [f64; 2] {
    let g = &field.grid;
    let mut m = [0.0; 2];
    for (i, z) in field.amplitudes.iter().enumerate() {
        let x = g.point_at(i);
        let w = z.norm_sqr();
        m[0] += w * x[0];
        m[1] += w * x[1];
    }
    let n = field.norm_sqr() / g.cell_area();
    [m[0] / n, m[1] / n]
}
