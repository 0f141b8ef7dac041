//! Complex classical trajectories with their scaled tangent matrices.
//!
//! The integrated state is `(x, p, S, M)`: position and momentum in complex
//! arithmetic, the action `S = int (p.xdot - H) dt`, and the `2d x 2d` tangent
//! matrix in uncertainty-scaled variables, which obeys
//!
//! ```text
//! dM/dt = [[ B^-1 H_px B,  B^-1 H_pp C],
//!          [-C^-1 H_xx B, -C^-1 H_xp C]] M,     M(0) = 1.
//! ```
//!
//! The phase of `sqrt(det(Mxx + i Mxp))` is followed continuously along the
//! path so that the semiclassical prefactor never jumps branch.

pub mod billiard;
mod rk;

use std::f64::consts::FRAC_PI_2;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, CMatrix};
use crate::potentials::PotentialSpec;
use crate::wavepacket::WavepacketParams;
use crate::C64;

pub use billiard::{evolve_billiard, BilliardTrajectory};

#[derive(Debug, Clone, Error)]
pub enum DynamicsError {
    #[error(
        "step size underflow at t = {t:.6}: the continued potential is singular near x = {last:?}"
    )]
    StepUnderflow { t: f64, last: ComplexPhasePoint },
    #[error("energy drift {drift:.3e} exceeds {allowed:.3e} at t = {t:.6}")]
    EnergyDrift { t: f64, drift: f64, allowed: f64 },
    #[error("step budget exhausted at t = {t:.6}")]
    TooManySteps { t: f64, last: ComplexPhasePoint },
    #[error("potential `{0}` has no analytic continuation")]
    NotSmooth(&'static str),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// `H = p^2 / 2m + V(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hamiltonian {
    pub potential: PotentialSpec,
    #[serde(default = "unit_mass")]
    pub mass: f64,
}

fn unit_mass() -> f64 {
    1.0
}

impl Hamiltonian {
    pub fn new(potential: PotentialSpec) -> Self {
        Hamiltonian {
            potential,
            mass: 1.0,
        }
    }

    pub fn energy(&self, x: &[C64], p: &[C64]) -> Result<C64, DynamicsError> {
        let kinetic: C64 = p.iter().map(|&v| v * v).sum::<C64>() / (2.0 * self.mass);
        let v = self
            .potential
            .value(x)
            .map_err(|_| DynamicsError::NotSmooth(self.potential.name()))?;
        Ok(kinetic + v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Dormand–Prince embedded 5(4) pair.
    #[default]
    Dopri5,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    #[serde(default)]
    pub scheme: Scheme,
    /// Keep every accepted step in [`ComplexTrajectory::samples`].
    #[serde(default = "yes")]
    pub record_path: bool,
}

fn yes() -> bool {
    true
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        IntegratorSettings {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: 0.1,
            scheme: Scheme::Dopri5,
            record_path: true,
        }
    }
}

impl IntegratorSettings {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let ok = |v: f64| v > 0.0 && v <= 1e-2;
        if !ok(self.rel_tol) || !ok(self.abs_tol) || !(self.max_step > 0.0) {
            return Err(DynamicsError::InvalidInput(format!(
                "tolerances must lie in (0, 1e-2] and max_step > 0, got {self:?}"
            )));
        }
        Ok(())
    }

    /// Same settings with both tolerances divided by `factor`.
    pub fn tightened(&self, factor: f64) -> Self {
        IntegratorSettings {
            rel_tol: self.rel_tol / factor,
            abs_tol: self.abs_tol / factor,
            ..*self
        }
    }

    pub fn without_path(&self) -> Self {
        IntegratorSettings {
            record_path: false,
            ..*self
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexPhasePoint {
    pub x: Vec<C64>,
    pub p: Vec<C64>,
}

impl ComplexPhasePoint {
    pub fn new(x: Vec<C64>, p: Vec<C64>) -> Self {
        debug_assert_eq!(x.len(), p.len());
        ComplexPhasePoint { x, p }
    }

    pub fn real(x: &[f64], p: &[f64]) -> Self {
        ComplexPhasePoint {
            x: x.iter().map(|&v| C64::new(v, 0.0)).collect(),
            p: p.iter().map(|&v| C64::new(v, 0.0)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// Largest imaginary part over all coordinates.
    pub fn max_imag(&self) -> f64 {
        self.x
            .iter()
            .chain(&self.p)
            .map(|z| z.im.abs())
            .fold(0.0, f64::max)
    }

    pub fn real_x(&self) -> Vec<f64> {
        self.x.iter().map(|z| z.re).collect()
    }

    pub fn real_p(&self) -> Vec<f64> {
        self.p.iter().map(|z| z.re).collect()
    }
}

/// Tangent matrix in scaled variables, stored row-major as a `2d x 2d` array.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentMatrix {
    d: usize,
    m: Vec<C64>,
}

impl TangentMatrix {
    pub fn identity(d: usize) -> Self {
        let n = 2 * d;
        let mut m = vec![C64::default(); n * n];
        for i in 0..n {
            m[i * n + i] = C64::new(1.0, 0.0);
        }
        TangentMatrix { d, m }
    }

    pub fn from_row_major(d: usize, m: Vec<C64>) -> Self {
        assert_eq!(m.len(), 4 * d * d);
        TangentMatrix { d, m }
    }

    pub fn from_matrix(d: usize, m: &CMatrix) -> Self {
        let n = 2 * d;
        TangentMatrix {
            d,
            m: (0..n * n).map(|k| m[(k / n, k % n)]).collect(),
        }
    }

    /// Scale an unscaled (plain phase-space) tangent matrix:
    /// `M = D M0 D^-1` with `D = diag(B^-1, C^-1)`.
    pub fn from_unscaled(m0: &CMatrix, b: &[f64], c: &[f64]) -> Self {
        let d = b.len();
        let s: Vec<f64> = b.iter().chain(c).copied().collect();
        let m = CMatrix::from_fn(2 * d, 2 * d, |i, j| m0[(i, j)] * (s[j] / s[i]));
        Self::from_matrix(d, &m)
    }

    /// Inverse of [`TangentMatrix::from_unscaled`].
    pub fn unscaled(&self, b: &[f64], c: &[f64]) -> CMatrix {
        let s: Vec<f64> = b.iter().chain(c).copied().collect();
        let n = 2 * self.d;
        CMatrix::from_fn(n, n, |i, j| self.m[i * n + j] * (s[i] / s[j]))
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.m
    }

    pub fn full(&self) -> CMatrix {
        let n = 2 * self.d;
        CMatrix::from_row_slice(n, n, &self.m)
    }

    fn block(&self, r: usize, c: usize) -> CMatrix {
        let (d, n) = (self.d, 2 * self.d);
        CMatrix::from_fn(d, d, |i, j| self.m[(r * d + i) * n + c * d + j])
    }

    pub fn xx(&self) -> CMatrix {
        self.block(0, 0)
    }

    pub fn xp(&self) -> CMatrix {
        self.block(0, 1)
    }

    pub fn px(&self) -> CMatrix {
        self.block(1, 0)
    }

    pub fn pp(&self) -> CMatrix {
        self.block(1, 1)
    }

    /// `Mxx + i Mxp`, whose determinant sets the semiclassical prefactor.
    pub fn prefactor_matrix(&self) -> CMatrix {
        self.xx() + self.xp() * C64::i()
    }

    pub fn prefactor_det(&self) -> C64 {
        prefactor_det(self.d, &self.m)
    }

    pub fn det(&self) -> C64 {
        linalg::det(2 * self.d, &self.m)
    }

    /// `max |M^T J M - J|` (plain transpose; the matrix may be complex).
    pub fn symplectic_defect(&self) -> f64 {
        let m = self.full();
        let j = linalg::symplectic_unit(self.d);
        linalg::max_abs(&(m.transpose() * &j * &m - j))
    }

    /// `self * other` (apply `other` first).
    pub fn compose(&self, other: &TangentMatrix) -> TangentMatrix {
        TangentMatrix::from_matrix(self.d, &(self.full() * other.full()))
    }
}

fn prefactor_det(d: usize, m: &[C64]) -> C64 {
    let n = 2 * d;
    let mut a = [C64::default(); 16];
    for i in 0..d {
        for j in 0..d {
            a[i * d + j] = m[i * n + j] + C64::i() * m[i * n + d + j];
        }
    }
    linalg::det(d, &a[..d * d])
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub point: ComplexPhasePoint,
    pub action: C64,
    pub tangent: TangentMatrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexTrajectory {
    /// Accepted integrator steps, first at `t = 0`, last at `t = T`. Holds only
    /// the two end points when path recording is off.
    pub samples: Vec<TrajectorySample>,
    pub action: C64,
    pub tangent: TangentMatrix,
    /// Continuously tracked `arg sqrt(det(Mxx + i Mxp))`; zero at `t = 0`.
    pub branch_phase: f64,
    /// `H` at `t = 0`.
    pub energy: C64,
}

impl ComplexTrajectory {
    pub fn start(&self) -> &ComplexPhasePoint {
        &self.samples[0].point
    }

    pub fn end(&self) -> &ComplexPhasePoint {
        &self.samples.last().unwrap().point
    }

    /// Drop interior samples, keeping the endpoints.
    pub fn discard_path(&mut self) {
        if self.samples.len() > 2 {
            let last = self.samples.pop().unwrap();
            self.samples.truncate(1);
            self.samples.push(last);
        }
        self.samples.shrink_to_fit();
    }

    pub fn duration(&self) -> f64 {
        self.samples.last().unwrap().t
    }

    pub fn prefactor_det(&self) -> C64 {
        self.tangent.prefactor_det()
    }

    /// `sqrt(det(Mxx + i Mxp))` on the tracked branch.
    pub fn sqrt_prefactor_det(&self) -> C64 {
        C64::from_polar(self.prefactor_det().norm().sqrt(), self.branch_phase)
    }

    /// Write `t, Re/Im x_i, Re/Im p_i, Re/Im S, Re/Im det M` per sample.
    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        let d = self.start().dim();
        let mut head = vec!["t".to_string()];
        for v in ["x", "p"] {
            for i in 0..d {
                head.push(format!("re_{v}{i}"));
                head.push(format!("im_{v}{i}"));
            }
        }
        head.extend(["re_s", "im_s", "re_det_m", "im_det_m"].map(String::from));
        writeln!(w, "{}", head.join(","))?;
        for s in &self.samples {
            let mut row = vec![s.t.to_string()];
            for z in s.point.x.iter().chain(&s.point.p) {
                row.push(z.re.to_string());
                row.push(z.im.to_string());
            }
            let det = s.tangent.det();
            for z in [s.action, det] {
                row.push(z.re.to_string());
                row.push(z.im.to_string());
            }
            writeln!(w, "{}", row.join(","))?;
        }
        w.flush()
    }
}

struct Layout {
    d: usize,
}

impl Layout {
    fn len(&self) -> usize {
        2 * self.d + 1 + 4 * self.d * self.d
    }
    fn x(&self) -> std::ops::Range<usize> {
        0..self.d
    }
    fn p(&self) -> std::ops::Range<usize> {
        self.d..2 * self.d
    }
    fn s(&self) -> usize {
        2 * self.d
    }
    fn m(&self) -> std::ops::Range<usize> {
        2 * self.d + 1..self.len()
    }
}

/// Integrate Hamilton's equations, the action and the scaled tangent matrix
/// from `start` over `[0, t_final]`.
pub fn evolve(
    start: &ComplexPhasePoint,
    t_final: f64,
    ham: &Hamiltonian,
    params: &WavepacketParams,
    settings: &IntegratorSettings,
) -> Result<ComplexTrajectory, DynamicsError> {
    let d = start.dim();
    if d != params.dim() || start.p.len() != d {
        return Err(DynamicsError::InvalidInput(format!(
            "start has dimension {d}, packet has {}",
            params.dim()
        )));
    }
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(DynamicsError::InvalidInput(format!(
            "propagation time {t_final} must be >= 0"
        )));
    }
    if !ham.potential.is_smooth() {
        return Err(DynamicsError::NotSmooth(ham.potential.name()));
    }
    settings.validate()?;

    let lay = Layout { d };
    let n2 = 2 * d;
    let b = params.b().to_vec();
    let c = params.c();
    let inv_m = 1.0 / ham.mass;

    let mut y0 = vec![C64::default(); lay.len()];
    y0[lay.x()].copy_from_slice(&start.x);
    y0[lay.p()].copy_from_slice(&start.p);
    y0[lay.m()].copy_from_slice(TangentMatrix::identity(d).as_slice());

    let energy0 = ham.energy(&start.x, &start.p)?;
    let allowed = 100.0 * settings.rel_tol * energy0.norm().max(1.0);

    // Scratch for the right-hand side.
    let mut grad = vec![C64::default(); d];
    let mut hxx = vec![C64::default(); d * d];
    let mut gen = vec![C64::default(); n2 * n2];
    let potential = &ham.potential;

    let rhs = |_t: f64, y: &[C64], dy: &mut [C64]| -> Result<(), DynamicsError> {
        let x = &y[lay.x()];
        let p = &y[lay.p()];
        let v = potential
            .eval_into(x, &mut grad, &mut hxx)
            .map_err(|_| DynamicsError::NotSmooth(potential.name()))?;
        let mut p2 = C64::default();
        for i in 0..d {
            dy[i] = p[i] * inv_m;
            dy[d + i] = -grad[i];
            p2 += p[i] * p[i];
        }
        dy[lay.s()] = p2 * (0.5 * inv_m) - v;

        // H_px = H_xp = 0 and H_pp = 1/m for this Hamiltonian; the generator is
        // assembled from all four blocks regardless.
        for i in 0..d {
            for j in 0..d {
                let hpp = if i == j {
                    C64::new(inv_m, 0.0)
                } else {
                    C64::default()
                };
                let hxp = C64::default();
                let hpx = C64::default();
                gen[i * n2 + j] = hpx * (b[j] / b[i]);
                gen[i * n2 + d + j] = hpp * (c[j] / b[i]);
                gen[(d + i) * n2 + j] = -hxx[i * d + j] * (b[j] / c[i]);
                gen[(d + i) * n2 + d + j] = -hxp * (c[j] / c[i]);
            }
        }
        let m = &y[lay.m()];
        let dm = &mut dy[lay.m()];
        for i in 0..n2 {
            for j in 0..n2 {
                let mut acc = C64::default();
                for k in 0..n2 {
                    acc += gen[i * n2 + k] * m[k * n2 + j];
                }
                dm[i * n2 + j] = acc;
            }
        }
        Ok(())
    };

    let mut branch = 0.0;
    let mut last_arg = 0.0;
    let mut samples = vec![TrajectorySample {
        t: 0.0,
        point: start.clone(),
        action: C64::default(),
        tangent: TangentMatrix::identity(d),
    }];

    let observe = |t: f64, y: &[C64]| -> Result<rk::Verdict, DynamicsError> {
        let det = prefactor_det(d, &y[lay.m()]);
        if det.norm() > 0.0 {
            let step = linalg::wrap_angle(det.arg() - last_arg);
            if step.abs() > FRAC_PI_2 {
                return Ok(rk::Verdict::Shrink(0.5));
            }
            branch += 0.5 * step;
            last_arg = det.arg();
        }
        let e = ham.energy(&y[lay.x()], &y[lay.p()])?;
        let drift = (e - energy0).norm();
        if drift > allowed {
            return Err(DynamicsError::EnergyDrift { t, drift, allowed });
        }
        if settings.record_path {
            samples.push(sample_from_state(&lay, t, y));
        }
        Ok(rk::Verdict::Accept)
    };

    let ctl = rk::Control {
        rel_tol: settings.rel_tol,
        abs_tol: settings.abs_tol,
        max_step: settings.max_step,
        min_step: 1e-12,
        max_steps: 1_000_000,
    };
    let point = |y: &[C64]| ComplexPhasePoint::new(y[lay.x()].to_vec(), y[lay.p()].to_vec());
    let y = rk::integrate(rhs, &y0, t_final, ctl, observe).map_err(|f| match f {
        rk::Failure::StepUnderflow { t, y } => DynamicsError::StepUnderflow { t, last: point(&y) },
        rk::Failure::Rhs(err) => err,
        rk::Failure::TooManySteps { t, y } => DynamicsError::TooManySteps { t, last: point(&y) },
        rk::Failure::Observer(e) => e,
    })?;

    if !settings.record_path && t_final > 0.0 {
        samples.push(sample_from_state(&lay, t_final, &y));
    }
    let last = samples.last().unwrap().clone();
    Ok(ComplexTrajectory {
        samples,
        action: last.action,
        tangent: last.tangent,
        branch_phase: branch,
        energy: energy0,
    })
}

fn sample_from_state(lay: &Layout, t: f64, y: &[C64]) -> TrajectorySample {
    TrajectorySample {
        t,
        point: ComplexPhasePoint::new(y[lay.x()].to_vec(), y[lay.p()].to_vec()),
        action: y[lay.s()],
        tangent: TangentMatrix::from_row_major(lay.d, y[lay.m()].to_vec()),
    }
}
