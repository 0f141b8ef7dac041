//! Circular hard-wall billiard: exact free flight with specular reflection,
//! and the exact linearisation of that map.
//!
//! At a wall hit the position rows of the tangent map pick up the Householder
//! reflection `P = 1 - 2 n n^T` (for any incidence angle), so
//! `det(Mxx + i Mxp)` changes sign at every bounce and is continuous between
//! bounces. The tracked branch adds `+pi` to `arg det` per bounce; the
//! semiclassical assembly then applies the hard-wall phase separately.

use std::f64::consts::PI;

use super::{ComplexPhasePoint, ComplexTrajectory, DynamicsError, TangentMatrix, TrajectorySample};
use crate::linalg::{self, CMatrix};
use crate::wavepacket::WavepacketParams;
use crate::C64;

type Mat4 = [[f64; 4]; 4];

/// Free-flight sub-samples per segment used to follow the prefactor phase.
const PHASE_SAMPLES: usize = 64;

/// Exact billiard flow from an interior point, with its unscaled Jacobian
/// `d(x, p)(T) / d(x, p)(0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BilliardFlow {
    pub x: [f64; 2],
    pub p: [f64; 2],
    pub jacobian: Mat4,
    pub bounce_times: Vec<f64>,
    pub bounce_points: Vec<[f64; 2]>,
    /// Segment start states `(t, x, p)`, the first at `t = 0`.
    pub segments: Vec<(f64, [f64; 2], [f64; 2])>,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BilliardTrajectory {
    pub direction: [f64; 2],
    pub speed: f64,
    pub bounce_times: Vec<f64>,
    pub bounce_points: Vec<[f64; 2]>,
    pub segments: Vec<(f64, [f64; 2], [f64; 2])>,
    pub bounce_count: u32,
    /// Real path with scaled tangent matrix, action and tracked branch.
    pub trajectory: ComplexTrajectory,
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn matmul(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn identity4() -> Mat4 {
    let mut m = [[0.0; 4]; 4];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

fn free_flight(t: f64, mass: f64) -> Mat4 {
    let mut f = identity4();
    f[0][2] = t / mass;
    f[1][3] = t / mass;
    f
}

/// Time until `x + v t` reaches `|.| = radius`, for `x` inside the disk.
fn hit_time(x: [f64; 2], v: [f64; 2], radius: f64) -> Option<f64> {
    let a = dot(v, v);
    if a == 0.0 {
        return None;
    }
    let b = dot(x, v);
    let c = dot(x, x) - radius * radius;
    let disc = (b * b - a * c).max(0.0).sqrt();
    // Stable form of the positive root.
    let tau = if b >= 0.0 {
        -c / (b + disc)
    } else {
        (disc - b) / a
    };
    Some(tau.max(0.0))
}

/// Jacobian of "fly for `tau` to the wall and reflect", evaluated on the
/// nominal hit. Variations of the hit time are absorbed so the map covers a
/// fixed time interval.
fn wall_jacobian(
    x: [f64; 2],
    p: [f64; 2],
    tau: f64,
    radius: f64,
    mass: f64,
) -> (Mat4, [f64; 2], [f64; 2]) {
    let v = [p[0] / mass, p[1] / mass];
    let h = [x[0] + v[0] * tau, x[1] + v[1] * tau];
    let n = [h[0] / radius, h[1] / radius];
    let pn = dot(p, n);
    let p_out = [p[0] - 2.0 * pn * n[0], p[1] - 2.0 * pn * n[1]];
    let hv = dot(h, v);

    let mut jac = [[0.0; 4]; 4];
    for col in 0..4 {
        let mut dx = [0.0; 2];
        let mut dp = [0.0; 2];
        if col < 2 {
            dx[col] = 1.0;
        } else {
            dp[col - 2] = 1.0;
        }
        let dh_pre = [dx[0] + dp[0] * tau / mass, dx[1] + dp[1] * tau / mass];
        let dtau = -dot(h, dh_pre) / hv;
        let dh = [dh_pre[0] + v[0] * dtau, dh_pre[1] + v[1] * dtau];
        let dn = [dh[0] / radius, dh[1] / radius];
        let coef = dot(dp, n) + dot(p, dn);
        let dp_out = [
            dp[0] - 2.0 * coef * n[0] - 2.0 * pn * dn[0],
            dp[1] - 2.0 * coef * n[1] - 2.0 * pn * dn[1],
        ];
        let dx_out = [
            dh[0] - p_out[0] / mass * dtau,
            dh[1] - p_out[1] / mass * dtau,
        ];
        jac[0][col] = dx_out[0];
        jac[1][col] = dx_out[1];
        jac[2][col] = dp_out[0];
        jac[3][col] = dp_out[1];
    }
    (jac, h, p_out)
}

/// Propagate `(x0, p0)` inside the disk for time `t_final`.
pub fn billiard_flow(
    x0: [f64; 2],
    p0: [f64; 2],
    t_final: f64,
    radius: f64,
    mass: f64,
    max_bounces: usize,
) -> Result<BilliardFlow, DynamicsError> {
    if !(t_final > 0.0) {
        return Err(DynamicsError::InvalidInput(format!(
            "billiard time must be positive, got {t_final}"
        )));
    }
    if dot(x0, x0) >= radius * radius {
        return Err(DynamicsError::InvalidInput(format!(
            "start {x0:?} is not inside radius {radius}"
        )));
    }
    let (mut x, mut p) = (x0, p0);
    let mut t = 0.0;
    let mut jac = identity4();
    let mut flow = BilliardFlow {
        x,
        p,
        jacobian: jac,
        bounce_times: Vec::new(),
        bounce_points: Vec::new(),
        segments: vec![(0.0, x, p)],
        radius,
    };
    loop {
        let v = [p[0] / mass, p[1] / mass];
        match hit_time(x, v, radius) {
            Some(tau) if t + tau < t_final => {
                if flow.bounce_times.len() == max_bounces {
                    return Err(DynamicsError::InvalidInput(format!(
                        "more than {max_bounces} wall hits before t = {t_final}"
                    )));
                }
                let (wall, h, p_out) = wall_jacobian(x, p, tau, radius, mass);
                jac = matmul(&wall, &jac);
                t += tau;
                flow.bounce_times.push(t);
                flow.bounce_points.push(h);
                flow.segments.push((t, h, p_out));
                x = h;
                p = p_out;
            }
            _ => {
                let rest = t_final - t;
                jac = matmul(&free_flight(rest, mass), &jac);
                x = [x[0] + v[0] * rest, x[1] + v[1] * rest];
                break;
            }
        }
    }
    flow.x = x;
    flow.p = p;
    flow.jacobian = jac;
    Ok(flow)
}

fn to_cmatrix(m: &Mat4) -> CMatrix {
    CMatrix::from_fn(4, 4, |i, j| C64::new(m[i][j], 0.0))
}

/// Trajectory launched from the centre of a disk of radius `radius` with
/// momentum `speed * direction`.
pub fn evolve_billiard(
    direction: [f64; 2],
    speed: f64,
    t_final: f64,
    radius: f64,
    max_bounces: usize,
    params: &WavepacketParams,
    mass: f64,
) -> Result<BilliardTrajectory, DynamicsError> {
    if params.dim() != 2 {
        return Err(DynamicsError::InvalidInput(
            "billiard is two-dimensional".into(),
        ));
    }
    if !(speed > 0.0) {
        return Err(DynamicsError::InvalidInput(format!(
            "speed must be positive, got {speed}"
        )));
    }
    let norm = dot(direction, direction).sqrt();
    if !(norm > 0.0) {
        return Err(DynamicsError::InvalidInput(
            "launch direction must be non-zero".into(),
        ));
    }
    let u = [direction[0] / norm, direction[1] / norm];
    let p0 = [speed * u[0], speed * u[1]];
    let flow = billiard_flow([0.0, 0.0], p0, t_final, radius, mass, max_bounces)?;
    let trajectory = trajectory_from_flow(&flow, t_final, params, mass);
    Ok(BilliardTrajectory {
        direction: u,
        speed,
        bounce_count: flow.bounce_times.len() as u32,
        bounce_times: flow.bounce_times.clone(),
        bounce_points: flow.bounce_points.clone(),
        segments: flow.segments.clone(),
        trajectory,
    })
}

/// Sample the path, scale the tangent matrix and follow the prefactor phase.
pub(crate) fn trajectory_from_flow(
    flow: &BilliardFlow,
    t_final: f64,
    params: &WavepacketParams,
    mass: f64,
) -> ComplexTrajectory {
    let b = params.b();
    let c = params.c();
    let p0 = flow.segments[0].2;
    let kinetic = dot(p0, p0) / (2.0 * mass);

    // Rebuild the Jacobian segment by segment so interior samples are exact.
    let mut samples = Vec::new();
    let mut jac = identity4();
    let mut branch = 0.0;
    let mut last_arg = 0.0;
    let n_seg = flow.segments.len();
    for (k, &(t0, xs, ps)) in flow.segments.iter().enumerate() {
        let t1 = if k + 1 < n_seg {
            flow.segments[k + 1].0
        } else {
            t_final
        };
        let v = [ps[0] / mass, ps[1] / mass];
        for s in 0..=PHASE_SAMPLES {
            if k > 0 && s == 0 {
                continue;
            }
            let dt = (t1 - t0) * s as f64 / PHASE_SAMPLES as f64;
            let m_t = matmul(&free_flight(dt, mass), &jac);
            let tangent = TangentMatrix::from_unscaled(&to_cmatrix(&m_t), b, &c);
            // Undo the accumulated reflections so the determinant is continuous.
            let det = tangent.prefactor_det() * if k % 2 == 1 { -1.0 } else { 1.0 };
            if det.norm() > 0.0 {
                branch += 0.5 * linalg::wrap_angle(det.arg() - last_arg);
                last_arg = det.arg();
            }
            let x = [xs[0] + v[0] * dt, xs[1] + v[1] * dt];
            samples.push(TrajectorySample {
                t: t0 + dt,
                point: ComplexPhasePoint::real(&x, &ps),
                action: C64::new(kinetic * (t0 + dt), 0.0),
                tangent,
            });
        }
        if k + 1 < n_seg {
            let (wall, _, _) = wall_jacobian(xs, ps, t1 - t0, flow.radius, mass);
            jac = matmul(&wall, &jac);
        }
    }
    let last = samples.last().unwrap().clone();
    ComplexTrajectory {
        branch_phase: branch + 0.5 * PI * flow.bounce_times.len() as f64,
        action: last.action,
        tangent: last.tangent,
        samples,
        energy: C64::new(kinetic, 0.0),
    }
}
