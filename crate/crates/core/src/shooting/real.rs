use nalgebra::{DMatrix, DVector};

use super::newton::{damped_newton, Eval};
use super::{Propagation, RealKind, RealRoot, RootSearch, ShootError, ShootingSettings};
use crate::dynamics::{
    evolve, evolve_billiard, ComplexPhasePoint, ComplexTrajectory, TangentMatrix,
};
use crate::potentials::PotentialSpec;
use crate::wavepacket::WavepacketParams;

/// Distinct real roots differ by more than this in scaled unknowns.
const REAL_DEDUP: f64 = 1e-6;

impl RealKind {
    pub fn name(self) -> &'static str {
        match self {
            RealKind::QtoX => "q->x",
            RealKind::PtoX => "p->x",
            RealKind::Mixed => "mixed",
        }
    }

    /// Packet scale of each unknown.
    fn scales(self, params: &WavepacketParams) -> Vec<f64> {
        let (b, c) = (params.b().to_vec(), params.c());
        match self {
            RealKind::QtoX => c,
            RealKind::PtoX => b,
            RealKind::Mixed => vec![b[1], c[0]],
        }
    }

    /// The unknowns of the centre trajectory.
    pub fn centre_unknowns(self, params: &WavepacketParams) -> Vec<f64> {
        match self {
            RealKind::QtoX => params.p().to_vec(),
            RealKind::PtoX => params.q().to_vec(),
            RealKind::Mixed => vec![params.q()[1], params.p()[0]],
        }
    }
}

/// Initial `(x, p)` for the given free components; the fixed ones come from
/// the packet centre.
pub fn real_start(
    kind: RealKind,
    params: &WavepacketParams,
    unknowns: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let (q, p) = (params.q(), params.p());
    match kind {
        RealKind::QtoX => (q.to_vec(), unknowns.to_vec()),
        RealKind::PtoX => (unknowns.to_vec(), p.to_vec()),
        RealKind::Mixed => (vec![q[0], unknowns[0]], vec![unknowns[1], p[1]]),
    }
}

/// Derivative of the scaled final position `B^-1 x(T)` with respect to the unknowns.
fn boundary_jacobian(kind: RealKind, m: &TangentMatrix, params: &WavepacketParams) -> DMatrix<f64> {
    let (b, c) = (params.b(), params.c());
    let (xx, xp) = (m.xx(), m.xp());
    let d = b.len();
    match kind {
        RealKind::QtoX => DMatrix::from_fn(d, d, |i, j| xp[(i, j)].re / c[j]),
        RealKind::PtoX => DMatrix::from_fn(d, d, |i, j| xx[(i, j)].re / b[j]),
        RealKind::Mixed => DMatrix::from_fn(2, 2, |i, j| {
            if j == 0 {
                xx[(i, 1)].re / b[1]
            } else {
                xp[(i, 0)].re / c[0]
            }
        }),
    }
}

fn shoot(
    kind: RealKind,
    prop: &Propagation,
    x: &[f64],
    u: &DVector<f64>,
    settings: &ShootingSettings,
) -> Result<Eval<ComplexTrajectory>, ShootError> {
    let (x0, p0) = real_start(kind, prop.params, u.as_slice());
    let tr = evolve(
        &ComplexPhasePoint::real(&x0, &p0),
        prop.t,
        prop.ham,
        prop.params,
        &settings.integrator,
    )?;
    let b = prop.params.b();
    let end = tr.end().real_x();
    let residual = DVector::from_fn(b.len(), |i, _| (end[i] - x[i]) / b[i]);
    Ok(Eval {
        residual,
        jacobian: boundary_jacobian(kind, &tr.tangent, prop.params),
        payload: tr,
    })
}

fn check(kind: RealKind, x: &[f64], prop: &Propagation, seed: &[f64]) -> Result<(), ShootError> {
    prop.check_target(x)?;
    if kind == RealKind::Mixed && x.len() != 2 {
        return Err(ShootError::Invalid(
            "mixed boundary conditions need d = 2".into(),
        ));
    }
    if seed.len() != x.len() {
        return Err(ShootError::Invalid(format!(
            "seed has {} components, target has {}",
            seed.len(),
            x.len()
        )));
    }
    Ok(())
}

/// Newton search for one real root of the given kind on a smooth potential.
pub fn solve_real(
    kind: RealKind,
    x: &[f64],
    prop: &Propagation,
    seed: &[f64],
    settings: &ShootingSettings,
) -> Result<RealRoot, ShootError> {
    check(kind, x, prop, seed)?;
    if !prop.ham.potential.is_smooth() {
        return Err(ShootError::Unsupported {
            kind: kind.name(),
            potential: prop.ham.potential.name(),
        });
    }
    let conv = damped_newton(
        DVector::from_column_slice(seed),
        |u| shoot(kind, prop, x, u, settings),
        settings,
        false,
    )?;
    let det = conv.eval.jacobian.determinant();
    if !(det.abs() > settings.singular_tol) {
        return Err(ShootError::Caustic { det: det.abs() });
    }
    Ok(RealRoot {
        kind,
        unknowns: conv.z.as_slice().to_vec(),
        trajectory: conv.eval.payload,
        maslov_count: 0,
        family_id: 0,
    })
}

fn multi_start(
    kind: RealKind,
    x: &[f64],
    prop: &Propagation,
    seeds: &[Vec<f64>],
    settings: &ShootingSettings,
) -> RootSearch<RealRoot> {
    let mut out = RootSearch::default();
    let scales = kind.scales(prop.params);
    for seed in seeds {
        match solve_real(kind, x, prop, seed, settings) {
            Ok(r) => {
                if !out
                    .roots
                    .iter()
                    .any(|o| unknown_distance(o, &r, &scales) < REAL_DEDUP)
                {
                    out.roots.push(r);
                }
            }
            Err(e) => out.failures.push(e),
        }
    }
    for (k, r) in out.roots.iter_mut().enumerate() {
        r.family_id = k as u32;
    }
    out
}

pub(crate) fn unknown_distance(a: &RealRoot, b: &RealRoot, scales: &[f64]) -> f64 {
    a.unknowns
        .iter()
        .zip(&b.unknowns)
        .zip(scales)
        .map(|((u, v), s)| ((u - v) / s).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Roots with the initial position fixed at `q`. The billiard is solved
/// analytically; smooth potentials by Newton from each seed momentum.
pub fn solve_q_to_x(
    x: &[f64],
    prop: &Propagation,
    seeds: &[Vec<f64>],
    settings: &ShootingSettings,
) -> Result<RootSearch<RealRoot>, ShootError> {
    if let PotentialSpec::Billiard { radius, .. } = prop.ham.potential {
        prop.check_target(x)?;
        return billiard_q_roots(x, prop, radius);
    }
    Ok(multi_start(RealKind::QtoX, x, prop, seeds, settings))
}

/// Roots with the initial momentum fixed at `p`.
pub fn solve_p_to_x(
    x: &[f64],
    prop: &Propagation,
    seeds: &[Vec<f64>],
    settings: &ShootingSettings,
) -> Result<RootSearch<RealRoot>, ShootError> {
    Ok(multi_start(RealKind::PtoX, x, prop, seeds, settings))
}

/// Roots with `q_x` and `p_y` fixed; seeds are `(q_yi, p_xi)`.
pub fn solve_mixed(
    x: &[f64],
    prop: &Propagation,
    seeds: &[Vec<f64>],
    settings: &ShootingSettings,
) -> Result<RootSearch<RealRoot>, ShootError> {
    Ok(multi_start(RealKind::Mixed, x, prop, seeds, settings))
}

/// Direct and one-bounce trajectories from the disk centre to `x`. Starting
/// at the centre every path is a diameter, so the launch direction is `+-x/|x|`.
pub fn billiard_q_roots(
    x: &[f64],
    prop: &Propagation,
    radius: f64,
) -> Result<RootSearch<RealRoot>, ShootError> {
    let params = prop.params;
    if params.dim() != 2 || params.q().iter().any(|v| v.abs() > 1e-12) {
        return Err(ShootError::Unsupported {
            kind: "off-centre q->x",
            potential: "billiard",
        });
    }
    let mut out = RootSearch::default();
    let r = x[0].hypot(x[1]);
    if r >= radius {
        return Ok(out);
    }
    if r < 1e-9 * radius {
        // The reflected rays refocus at the centre.
        out.failures.push(ShootError::Caustic { det: 0.0 });
        return Ok(out);
    }
    let m = prop.ham.mass;
    let u = [x[0] / r, x[1] / r];
    let launches = [
        (u, r, 0u32),
        (u, 2.0 * radius - r, 1),
        ([-u[0], -u[1]], 2.0 * radius + r, 1),
    ];
    for (family, (dir, path_length, bounces)) in launches.into_iter().enumerate() {
        let speed = m * path_length / prop.t;
        match evolve_billiard(dir, speed, prop.t, radius, 1, params, m) {
            Ok(mut b) if b.bounce_count == bounces => {
                b.trajectory.discard_path();
                out.roots.push(RealRoot {
                    kind: RealKind::QtoX,
                    unknowns: vec![speed * b.direction[0], speed * b.direction[1]],
                    maslov_count: b.bounce_count,
                    trajectory: b.trajectory,
                    family_id: family as u32,
                })
            }
            Ok(_) => {}
            Err(e) => out.failures.push(e.into()),
        }
    }
    Ok(out)
}

/// Newton may land at most this fraction of the predicted step away from the
/// prediction; further means it converged onto another branch.
const MAX_CORRECTION: f64 = 0.5;

/// Follow a smooth-potential real root from `from` to the nearby `to` with a
/// tangent predictor. A step that lands on another branch fails with
/// `BranchLost`, so callers can subdivide.
pub fn continue_real(
    root: &RealRoot,
    from: &[f64],
    to: &[f64],
    prop: &Propagation,
    settings: &ShootingSettings,
) -> Result<RealRoot, ShootError> {
    let b = prop.params.b();
    let scales = root.kind.scales(prop.params);
    let jac = boundary_jacobian(root.kind, &root.trajectory.tangent, prop.params);
    let dx = DVector::from_fn(b.len(), |i, _| (to[i] - from[i]) / b[i]);
    let du = jac
        .lu()
        .solve(&dx)
        .ok_or(ShootError::Caustic { det: 0.0 })?;
    let scaled_norm = |v: &mut dyn Iterator<Item = f64>| {
        v.zip(&scales)
            .map(|(d, s)| (d / s).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let step = scaled_norm(&mut du.iter().copied());
    let seed: Vec<f64> = root
        .unknowns
        .iter()
        .zip(du.iter())
        .map(|(u, d)| u + d)
        .collect();
    let mut out = solve_real(root.kind, to, prop, &seed, settings)?;
    let jump = scaled_norm(&mut out.unknowns.iter().zip(&seed).map(|(u, v)| u - v));
    if jump > MAX_CORRECTION * step + 1e-6 {
        return Err(ShootError::BranchLost { jump });
    }
    out.family_id = root.family_id;
    Ok(out)
}
