use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::newton::{damped_newton, Eval};
use super::sweep::follow_path;
use super::{ComplexRoot, Propagation, RootSearch, ShootError, ShootingSettings};
use crate::dynamics::{evolve, ComplexPhasePoint, ComplexTrajectory};
use crate::linalg;
use crate::semiclassical::phi0_exponent;
use crate::wavepacket::WavepacketParams;
use crate::C64;

/// `x(0) = q + omega`, `p(0) = p + i hbar B^-2 omega`.
pub fn complex_start(params: &WavepacketParams, omega: &[C64]) -> ComplexPhasePoint {
    let (q, p, b, hbar) = (params.q(), params.p(), params.b(), params.hbar());
    let x = (0..q.len()).map(|i| q[i] + omega[i]).collect();
    let k = (0..q.len())
        .map(|i| p[i] + C64::i() * (hbar / (b[i] * b[i])) * omega[i])
        .collect();
    ComplexPhasePoint::new(x, k)
}

fn omega_from_scaled(z: &DVector<f64>, b: &[f64]) -> Vec<C64> {
    let d = b.len();
    (0..d).map(|i| b[i] * C64::new(z[i], z[d + i])).collect()
}

fn scaled_from_omega(omega: &[C64], b: &[f64]) -> DVector<f64> {
    let d = b.len();
    DVector::from_fn(2 * d, |k, _| {
        let w = omega[k % d] / b[k % d];
        if k < d {
            w.re
        } else {
            w.im
        }
    })
}

fn shoot(
    prop: &Propagation,
    x: &[f64],
    z: &DVector<f64>,
    settings: &ShootingSettings,
) -> Result<Eval<ComplexTrajectory>, ShootError> {
    let b = prop.params.b();
    let d = b.len();
    let omega = omega_from_scaled(z, b);
    let tr = evolve(
        &complex_start(prop.params, &omega),
        prop.t,
        prop.ham,
        prop.params,
        &settings.integrator,
    )?;
    let end = &tr.end().x;
    let mut residual = DVector::zeros(2 * d);
    for i in 0..d {
        let r = (end[i] - x[i]) / b[i];
        residual[i] = r.re;
        residual[d + i] = r.im;
    }
    let jac = tr.tangent.prefactor_matrix();
    let jacobian = DMatrix::from_fn(2 * d, 2 * d, |r, c| {
        let v = jac[(r % d, c % d)];
        match (r < d, c < d) {
            (true, true) | (false, false) => v.re,
            (true, false) => -v.im,
            (false, true) => v.im,
        }
    });
    Ok(Eval {
        residual,
        jacobian,
        payload: tr,
    })
}

fn root_from(
    prop: &Propagation,
    omega: Vec<C64>,
    trajectory: ComplexTrajectory,
    iterations: usize,
) -> ComplexRoot {
    let phi0 = phi0_exponent(&omega, trajectory.action, prop.params);
    ComplexRoot {
        omega,
        contributing: phi0.is_contributing(),
        trajectory,
        family_id: 0,
        phi0,
        iterations,
    }
}

fn solve_with(
    x: &[f64],
    prop: &Propagation,
    seed: &[C64],
    settings: &ShootingSettings,
    polish: bool,
) -> Result<ComplexRoot, ShootError> {
    prop.check_target(x)?;
    if seed.len() != x.len() {
        return Err(ShootError::Invalid(format!(
            "seed has {} components, target has {}",
            seed.len(),
            x.len()
        )));
    }
    let b = prop.params.b();
    let z0 = scaled_from_omega(seed, b);
    let conv = damped_newton(z0, |z| shoot(prop, x, z, settings), settings, polish)?;
    Ok(root_from(
        prop,
        omega_from_scaled(&conv.z, b),
        conv.eval.payload,
        conv.iterations,
    ))
}

/// Newton search for `omega` with `x(T) = x` (real), started from `seed`.
pub fn solve_complex(
    x: &[f64],
    prop: &Propagation,
    seed: &[C64],
    settings: &ShootingSettings,
) -> Result<ComplexRoot, ShootError> {
    solve_with(x, prop, seed, settings, false)
}

/// First-order guess for the root at `to`, from the root at `from`.
fn predict(
    root: &ComplexRoot,
    from: &[f64],
    to: &[f64],
    params: &WavepacketParams,
) -> Option<Vec<C64>> {
    let b = params.b();
    let rhs: Vec<C64> = (0..b.len())
        .map(|i| C64::new((to[i] - from[i]) / b[i], 0.0))
        .collect();
    let dw = linalg::solve(&root.trajectory.tangent.prefactor_matrix(), &rhs)?;
    Some((0..b.len()).map(|i| root.omega[i] + b[i] * dw[i]).collect())
}

/// Follow `root` (solved at `from`) to the nearby target `to`, keeping its family id.
pub fn continue_complex(
    root: &ComplexRoot,
    from: &[f64],
    to: &[f64],
    prop: &Propagation,
    settings: &ShootingSettings,
) -> Result<ComplexRoot, ShootError> {
    let first = match predict(root, from, to, prop.params) {
        Some(seed) => solve_complex(to, prop, &seed, settings),
        None => Err(ShootError::Caustic { det: 0.0 }),
    };
    let mut out = first.or_else(|_| solve_complex(to, prop, &root.omega, settings))?;
    out.family_id = root.family_id;
    Ok(out)
}

/// The `omega = 0` root at the endpoint of the centre trajectory.
pub fn centre_root(
    prop: &Propagation,
    settings: &ShootingSettings,
) -> Result<(ComplexRoot, Vec<f64>), ShootError> {
    let d = prop.params.dim();
    let tr = prop.centre_trajectory(&settings.integrator)?;
    let xc = tr.end().real_x();
    Ok((root_from(prop, vec![C64::default(); d], tr, 0), xc))
}

/// Main-family root at `x`, reached by continuation from the centre
/// trajectory's endpoint where `omega = 0`.
pub fn main_family_root(
    x: &[f64],
    prop: &Propagation,
    settings: &ShootingSettings,
) -> Result<ComplexRoot, ShootError> {
    prop.check_target(x)?;
    let (root, xc) = centre_root(prop, settings)?;
    follow_path(root, &xc, x, prop.params.b(), |r, a, b| {
        continue_complex(r, a, b, prop, settings)
    })
}

/// Multi-start root search over the configured seed grid. Distinct roots are
/// numbered by increasing `|B^-1 omega|` after the main family, which is 0.
pub fn enumerate_families(
    x: &[f64],
    prop: &Propagation,
    settings: &ShootingSettings,
) -> Result<RootSearch<ComplexRoot>, ShootError> {
    prop.check_target(x)?;
    let d = prop.params.dim();
    let b = prop.params.b();
    let n = settings.seed_grid.points_per_axis.max(1);
    let w = settings.seed_grid.half_width;
    let level = |k: usize| {
        if n == 1 {
            0.0
        } else {
            -w + 2.0 * w * k as f64 / (n - 1) as f64
        }
    };
    let total = n.pow(2 * d as u32);
    let seeds: Vec<Vec<C64>> = (0..total)
        .map(|mut idx| {
            let mut digits = Vec::with_capacity(2 * d);
            for _ in 0..2 * d {
                digits.push(level(idx % n));
                idx /= n;
            }
            (0..d)
                .map(|i| b[i] * C64::new(digits[i], digits[d + i]))
                .collect()
        })
        .collect();
    let results: Vec<Result<ComplexRoot, ShootError>> = seeds
        .par_iter()
        .map(|seed| solve_with(x, prop, seed, settings, true))
        .collect();

    let dedup = 10.0 * settings.tol;
    let mut search = RootSearch::default();
    for r in results {
        match r {
            Ok(r) => {
                if !search
                    .roots
                    .iter()
                    .any(|o| omega_distance(o, &r, b) < dedup)
                {
                    search.roots.push(r);
                }
            }
            Err(e) => search.failures.push(e),
        }
    }
    search
        .roots
        .sort_by(|u, v| omega_size(u, b).total_cmp(&omega_size(v, b)));

    let main = main_family_root(x, prop, settings).ok();
    let main_idx = main.as_ref().and_then(|m| {
        search
            .roots
            .iter()
            .position(|r| omega_distance(r, m, b) < 1e3 * settings.tol)
    });
    let main_idx = match (main_idx, main) {
        (Some(i), _) => Some(i),
        (None, Some(m)) => {
            search.roots.push(m);
            Some(search.roots.len() - 1)
        }
        (None, None) => None,
    };
    if let Some(i) = main_idx {
        let m = search.roots.remove(i);
        search.roots.insert(0, m);
    }
    let offset = u32::from(main_idx.is_none());
    for (k, r) in search.roots.iter_mut().enumerate() {
        r.family_id = k as u32 + offset;
    }
    Ok(search)
}

pub(crate) fn omega_distance(a: &ComplexRoot, b: &ComplexRoot, w: &[f64]) -> f64 {
    a.omega
        .iter()
        .zip(&b.omega)
        .zip(w)
        .map(|((u, v), s)| ((u - v) / s).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

fn omega_size(r: &ComplexRoot, w: &[f64]) -> f64 {
    r.omega.iter().zip(w).map(|(u, s)| (u / s).norm_sqr()).sum()
}

/// Trajectory from the complex position `start` to the real position `x` in
/// time `T`, found by Newton on the initial momentum.
pub fn solve_two_point(
    start: &[C64],
    x: &[f64],
    prop: &Propagation,
    seed_p: &[C64],
    settings: &ShootingSettings,
) -> Result<ComplexTrajectory, ShootError> {
    prop.check_target(x)?;
    let (b, c) = (prop.params.b(), prop.params.c());
    let d = b.len();
    let to_p = |z: &DVector<f64>| -> Vec<C64> {
        (0..d).map(|i| c[i] * C64::new(z[i], z[d + i])).collect()
    };
    let z0 = DVector::from_fn(2 * d, |k, _| {
        let w = seed_p[k % d] / c[k % d];
        if k < d {
            w.re
        } else {
            w.im
        }
    });
    let eval = |z: &DVector<f64>| -> Result<Eval<ComplexTrajectory>, ShootError> {
        let point = ComplexPhasePoint::new(start.to_vec(), to_p(z));
        let tr = evolve(&point, prop.t, prop.ham, prop.params, &settings.integrator)?;
        let xp = tr.tangent.xp();
        let mut residual = DVector::zeros(2 * d);
        for i in 0..d {
            let r = (tr.end().x[i] - x[i]) / b[i];
            residual[i] = r.re;
            residual[d + i] = r.im;
        }
        let jacobian = DMatrix::from_fn(2 * d, 2 * d, |r, col| {
            let v = xp[(r % d, col % d)];
            match (r < d, col < d) {
                (true, true) | (false, false) => v.re,
                (true, false) => -v.im,
                (false, true) => v.im,
            }
        });
        Ok(Eval {
            residual,
            jacobian,
            payload: tr,
        })
    };
    Ok(damped_newton(z0, eval, settings, true)?.eval.payload)
}
