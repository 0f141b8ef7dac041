//! Named property checks behind `scwave verify`, and the measurements they
//! are built from.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{
    evolve, evolve_billiard, ComplexPhasePoint, Hamiltonian, IntegratorSettings,
};
use crate::error::Result;
use crate::grid::{normalized_overlap, Grid};
use crate::linalg;
use crate::potentials::PotentialSpec;
use crate::quantum::propagate_exact;
use crate::runner::{run, RunOptions};
use crate::scenarios::{preset, Method, Scenario};
use crate::semiclassical::{psi_mixed, psi_p, psi_q, psi_sc, psi_tga, AssemblySettings};
use crate::shooting::{
    main_family_root, solve_complex, solve_real, solve_two_point, ComplexRoot, Propagation,
    RealKind, RealRoot, ShootingSettings,
};
use crate::wavepacket::{coherent_state_amplitude, WavepacketParams};
use crate::C64;

#[derive(Clone, Debug, Default)]
pub struct VerifyOptions {
    /// Run only checks whose name contains one of these.
    pub only: Vec<String>,
    /// Integrator relative tolerance override.
    pub rel_tol: Option<f64>,
    /// Include the preset reproductions.
    pub presets: bool,
}

impl VerifyOptions {
    fn integrator(&self) -> IntegratorSettings {
        let mut s = IntegratorSettings::default().without_path();
        if let Some(t) = self.rel_tol {
            s.rel_tol = t;
            s.abs_tol = t * 1e-2;
        }
        s
    }
}

#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

type Check = fn(&VerifyOptions) -> std::result::Result<String, String>;

fn fail(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn below(what: &str, value: f64, limit: f64) -> std::result::Result<String, String> {
    let msg = format!("{what} = {value:.3e} (limit {limit:.0e})");
    if value < limit {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Smooth potentials paired with a packet whose trajectories stay bounded.
pub fn smooth_cases() -> Vec<(PotentialSpec, WavepacketParams)> {
    let planar = |q: [f64; 2], p: [f64; 2]| WavepacketParams::planar(q, p, 1.0).unwrap();
    vec![
        (PotentialSpec::Free, planar([0.0, 0.0], [1.0, 0.5])),
        (
            PotentialSpec::Harmonic {
                omega: vec![1.0, 1.3],
            },
            planar([1.0, -0.5], [0.5, 1.0]),
        ),
        (
            PotentialSpec::gaussian_well(),
            planar([-10.0, 1.0], [3.0, 0.0]),
        ),
        (
            PotentialSpec::Quartic { a: 0.5, b_q: 0.1 },
            planar([0.0, 0.0], [2.0, 0.0]),
        ),
        (
            PotentialSpec::Ridge {
                v0: 10.0,
                r0: 5.0,
                sigma: 10.0,
            },
            planar([-10.0, 0.0], [4.0, 0.0]),
        ),
    ]
}

/// Overlap of every estimator with the exact field on the free and harmonic
/// presets.
pub fn quadratic_overlaps() -> Result<Vec<(String, Method, f64)>> {
    let mut out = Vec::new();
    for name in ["free_test", "harmonic_test"] {
        let s = preset(name)?;
        let r = run(&s, &RunOptions::default())?;
        for m in r.report.methods {
            out.push((name.to_string(), m.method, m.overlap));
        }
    }
    Ok(out)
}

/// Largest deviation of any estimator from the initial coherent state at
/// `T = 0`, over sample points of the gaussian-well packet.
pub fn zero_time_error() -> Result<f64> {
    let ham = Hamiltonian::new(PotentialSpec::gaussian_well());
    let params = WavepacketParams::new(vec![-10.0, 1.0], vec![3.0, 0.0], vec![1.0, 0.8], 1.0)?;
    let prop = Propagation::new(&ham, &params, 0.0);
    let s = ShootingSettings::default();
    let a = AssemblySettings::default();
    let (q, p) = (params.q().to_vec(), params.p().to_vec());
    let centre = evolve(
        &ComplexPhasePoint::real(&q, &p),
        0.0,
        &ham,
        &params,
        &IntegratorSettings::default(),
    )?;
    let zero = [C64::default(); 2];
    let mut worst = 0.0f64;
    for x in [[-10.0, 1.0], [-9.3, 2.1], [-11.2, 0.4], [-8.9, -0.3]] {
        let exact = coherent_state_amplitude(&x, &params);
        let sc = solve_complex(&x, &prop, &zero, &s)?;
        worst = worst.max((psi_sc(&[sc], &params, &a).value - exact).norm());
        worst = worst.max((psi_tga(&x, &centre, &params) - exact).norm());
        let pr = solve_real(RealKind::PtoX, &x, &prop, &q, &s)?;
        worst = worst.max((psi_p(&[pr], &params, &a).value - exact).norm());
        // With q_x fixed only the line x = q_x is reached, by p_xi = p_x; the
        // boundary Jacobian is singular at T = 0 so the root is built directly.
        let xm = [q[0], x[1]];
        let mr = RealRoot {
            kind: RealKind::Mixed,
            unknowns: vec![x[1], p[0]],
            trajectory: evolve(
                &ComplexPhasePoint::real(&xm, &p),
                0.0,
                &ham,
                &params,
                &IntegratorSettings::default(),
            )?,
            maslov_count: 0,
            family_id: 0,
        };
        worst = worst.max(
            (psi_mixed(&[mr], &params, &a).value - coherent_state_amplitude(&xm, &params)).norm(),
        );
    }
    let qr = RealRoot {
        kind: RealKind::QtoX,
        unknowns: p.clone(),
        trajectory: centre,
        maslov_count: 0,
        family_id: 0,
    };
    worst =
        worst.max((psi_q(&[qr], &params, &a).value - coherent_state_amplitude(&q, &params)).norm());
    Ok(worst)
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SymplecticStats {
    pub trajectories: usize,
    pub max_defect: f64,
    pub max_det_error: f64,
}

/// Symplectic defect and `|det M - 1|` over `n` random complex trajectories
/// per smooth potential, plus `n` billiard trajectories.
pub fn symplectic_stats(
    n: usize,
    settings: &IntegratorSettings,
    seed: u64,
) -> Result<SymplecticStats> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut st = SymplecticStats::default();
    let mut record = |m: &crate::dynamics::TangentMatrix| {
        st.trajectories += 1;
        st.max_defect = st.max_defect.max(m.symplectic_defect());
        st.max_det_error = st.max_det_error.max((m.det() - 1.0).norm());
    };
    for (spec, params) in smooth_cases() {
        let ham = Hamiltonian::new(spec);
        for _ in 0..n {
            let mut c = |centre: f64, spread: f64, im: f64| {
                C64::new(
                    centre + rng.random_range(-spread..spread),
                    rng.random_range(-im..im),
                )
            };
            let (q, p) = (params.q(), params.p());
            let x = vec![c(q[0], 1.0, 0.2), c(q[1], 1.0, 0.2)];
            let k = vec![c(p[0], 0.5, 0.2), c(p[1], 0.5, 0.2)];
            let t = rng.random_range(0.5..2.5);
            let tr = evolve(&ComplexPhasePoint::new(x, k), t, &ham, &params, settings)?;
            record(&tr.tangent);
        }
    }
    let params = WavepacketParams::planar([0.0, 0.0], [4.0, 0.0], 1.0)?;
    for _ in 0..n {
        let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let speed = rng.random_range(1.0..12.0);
        let b = evolve_billiard([phi.cos(), phi.sin()], speed, 0.5, 3.0, 4, &params, 1.0)?;
        record(&b.trajectory.tangent);
    }
    Ok(st)
}

/// Worst relative error of analytic gradients and Hessians against central
/// differences at random complex points.
pub fn derivative_error(seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for (spec, params) in smooth_cases() {
        for _ in 0..10 {
            let x: Vec<C64> = params
                .q()
                .iter()
                .map(|q| C64::new(q + rng.random_range(-2.0..2.0), rng.random_range(-0.3..0.3)))
                .collect();
            let g = spec.gradient(&x)?;
            let hess = spec.hessian(&x)?;
            let gscale = g.iter().map(|z| z.norm()).fold(1e-3, f64::max);
            let hscale = hess.iter().map(|z| z.norm()).fold(1e-3, f64::max);
            for j in 0..x.len() {
                let shift = |s: f64| {
                    let mut y = x.clone();
                    y[j] += s;
                    y
                };
                let fd = (spec.value(&shift(h))? - spec.value(&shift(-h))?) / (2.0 * h);
                worst = worst.max((fd - g[j]).norm() / gscale);
                let (gp, gm) = (spec.gradient(&shift(h))?, spec.gradient(&shift(-h))?);
                for i in 0..x.len() {
                    worst = worst.max(((gp[i] - gm[i]) / (2.0 * h) - hess[(i, j)]).norm() / hscale);
                }
            }
        }
    }
    Ok(worst)
}

fn tight_settings() -> ShootingSettings {
    let mut s = ShootingSettings {
        tol: 1e-13,
        ..ShootingSettings::default()
    };
    s.integrator.rel_tol = 1e-12;
    s.integrator.abs_tol = 1e-14;
    s
}

/// `n` random window points of the gaussian-well preset with their
/// main-family roots, solved at tight tolerance.
pub fn sampled_roots(n: usize, seed: u64) -> Result<(Scenario, Vec<([f64; 2], ComplexRoot)>)> {
    let s = preset("gaussian_well")?;
    let ham = s.hamiltonian();
    let prop = Propagation::new(&ham, &s.packet, s.time);
    let settings = tight_settings();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let x = [rng.random_range(-4.0..6.0), rng.random_range(-5.0..5.0)];
        if let Ok(r) = main_family_root(&x, &prop, &settings) {
            out.push((x, r));
        }
    }
    Ok((s, out))
}

/// Complex action of the trajectory from `start` to `x`, and its initial momentum.
fn two_point(
    start: &[C64],
    x: &[f64],
    prop: &Propagation,
    seed: &[C64],
    s: &ShootingSettings,
) -> Result<(C64, Vec<C64>)> {
    let tr = solve_two_point(start, x, prop, seed, s)?;
    Ok((tr.action, tr.start().p.clone()))
}

/// Norm of the finite-difference gradient of the saddle exponent over the
/// complex initial position at each sampled root.
pub fn saddle_residuals(n: usize, seed: u64) -> Result<Vec<f64>> {
    let (sc, roots) = sampled_roots(n, seed)?;
    let ham = sc.hamiltonian();
    let params = &sc.packet;
    let prop = Propagation::new(&ham, params, sc.time);
    let s = tight_settings();
    let (q, p, b, hbar) = (params.q(), params.p(), params.b(), params.hbar());
    let h = 1e-3;
    let mut out = Vec::new();
    for (x, root) in roots {
        let x0 = root.trajectory.start().x.clone();
        let p0 = root.trajectory.start().p.clone();
        let phi = |xp: &[C64]| -> Result<C64> {
            let (action, _) = two_point(xp, &x, &prop, &p0, &s)?;
            let mut v = action;
            for i in 0..2 {
                let d = xp[i] - q[i];
                v += p[i] * d + C64::i() * hbar / 2.0 * d * d / (b[i] * b[i]);
            }
            Ok(v)
        };
        let mut g2 = 0.0;
        for j in 0..2 {
            let at = |k: f64| {
                let mut y = x0.clone();
                y[j] += k * h;
                y
            };
            let d = (-phi(&at(2.0))? + 8.0 * phi(&at(1.0))? - 8.0 * phi(&at(-1.0))?
                + phi(&at(-2.0))?)
                / (12.0 * h);
            g2 += d.norm_sqr();
        }
        out.push(g2.sqrt());
    }
    Ok(out)
}

/// Relative mismatch between the determinant of the exponent's Hessian, from
/// finite differences of re-shot trajectories, and its tangent-matrix form.
pub fn determinant_identity_errors(n: usize, seed: u64) -> Result<Vec<f64>> {
    let (sc, roots) = sampled_roots(n, seed)?;
    let ham = sc.hamiltonian();
    let params = &sc.packet;
    let prop = Propagation::new(&ham, params, sc.time);
    let s = tight_settings();
    let (b, hbar) = (params.b(), params.hbar());
    let h = 1e-4;
    let mut out = Vec::new();
    for (x, root) in roots {
        let x0 = root.trajectory.start().x.clone();
        let p0 = root.trajectory.start().p.clone();
        let mut hess = linalg::diag(&[0.0, 0.0]);
        for j in 0..2 {
            let at = |k: f64| {
                let mut y = x0.clone();
                y[j] += k * h;
                y
            };
            let (_, pp) = two_point(&at(1.0), &x, &prop, &p0, &s)?;
            let (_, pm) = two_point(&at(-1.0), &x, &prop, &p0, &s)?;
            for i in 0..2 {
                // S_{x'x'} = -dp'/dx'
                hess[(i, j)] = -(pp[i] - pm[i]) / (2.0 * h);
            }
        }
        let scale = C64::i() / hbar;
        let mut m = hess.clone();
        for i in 0..2 {
            m[(i, i)] += C64::i() * hbar / (b[i] * b[i]);
        }
        let lhs = (m * scale).determinant();
        let tan = &root.trajectory.tangent;
        let det_b: f64 = b.iter().product();
        let rhs = C64::i().powi(2) / (det_b * det_b) * tan.prefactor_det() / tan.xp().determinant();
        out.push((lhs - rhs).norm() / rhs.norm());
    }
    Ok(out)
}

/// Norm drift of the exact propagation for each shipped preset.
pub fn unitarity_drifts() -> Result<Vec<(String, f64)>> {
    let mut out = Vec::new();
    for name in ["gaussian_well", "quartic", "billiard", "ridge"] {
        let s = preset(name)?;
        let (_, _, r) = crate::runner::exact_reference(&s)?;
        out.push((name.to_string(), r.norm_drift));
    }
    Ok(out)
}

/// `overlap(psi_dt, psi_dt/2)` for a preset at its configured step.
pub fn dt_convergence(s: &Scenario) -> Result<f64> {
    let grid: Grid = s.grid.full()?;
    let ham = s.hamiltonian();
    let a = propagate_exact(&s.packet, &ham, s.time, &grid, s.grid.dt)?;
    let b = propagate_exact(&s.packet, &ham, s.time, &grid, s.grid.dt / 2.0)?;
    normalized_overlap(&a, &b)
}

fn check_quadratic(_: &VerifyOptions) -> std::result::Result<String, String> {
    let all = quadratic_overlaps().map_err(fail)?;
    let worst = all.iter().min_by(|a, b| a.2.total_cmp(&b.2)).unwrap();
    let msg = format!("min overlap {:.10} ({} {})", worst.2, worst.0, worst.1);
    if worst.2 > 1.0 - 1e-6 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn check_zero_time(_: &VerifyOptions) -> std::result::Result<String, String> {
    below("max |psi - psi0|", zero_time_error().map_err(fail)?, 1e-10)
}

fn check_symplectic(o: &VerifyOptions) -> std::result::Result<String, String> {
    let st = symplectic_stats(100, &o.integrator(), 7).map_err(fail)?;
    below(
        &format!(
            "{} trajectories, max symplectic defect / |det M - 1|",
            st.trajectories
        ),
        st.max_defect.max(st.max_det_error),
        1e-7,
    )
}

fn check_derivatives(_: &VerifyOptions) -> std::result::Result<String, String> {
    below(
        "gradient/hessian vs finite differences",
        derivative_error(11).map_err(fail)?,
        1e-5,
    )
}

fn check_determinant(_: &VerifyOptions) -> std::result::Result<String, String> {
    let e = determinant_identity_errors(20, 3).map_err(fail)?;
    below(
        "20 points, max relative error",
        e.iter().copied().fold(0.0, f64::max),
        1e-4,
    )
}

fn check_saddle(_: &VerifyOptions) -> std::result::Result<String, String> {
    let e = saddle_residuals(20, 5).map_err(fail)?;
    below(
        "20 roots, max |grad Phi|",
        e.iter().copied().fold(0.0, f64::max),
        1e-6,
    )
}

fn check_unitarity(_: &VerifyOptions) -> std::result::Result<String, String> {
    let d = unitarity_drifts().map_err(fail)?;
    below(
        "max norm drift over presets",
        d.iter().map(|x| x.1).fold(0.0, f64::max),
        1e-10,
    )
}

fn check_dt(_: &VerifyOptions) -> std::result::Result<String, String> {
    let mut worst: f64 = 1.0;
    for name in ["free_test", "harmonic_test", "quartic"] {
        worst = worst.min(dt_convergence(&preset(name).map_err(fail)?).map_err(fail)?);
    }
    below("1 - overlap(dt, dt/2)", 1.0 - worst, 1e-8)
}

fn check_presets(o: &VerifyOptions) -> std::result::Result<String, String> {
    if !o.presets {
        return Ok("skipped (pass --presets)".into());
    }
    let mut lines = Vec::new();
    let mut ok = true;
    for (name, method, lo, hi) in [
        ("gaussian_well", Method::Sc, 0.89, 0.95),
        ("quartic", Method::Sc, 0.92, 0.98),
        ("billiard", Method::Q, 0.95, 0.99),
    ] {
        let s = preset(name).map_err(fail)?;
        let r = run(&s, &RunOptions::default()).map_err(fail)?;
        let v = r.report.method(method).map(|m| m.overlap).unwrap_or(0.0);
        ok &= (lo..=hi).contains(&v);
        lines.push(format!("{name} {method} {v:.4}"));
    }
    if ok {
        Ok(lines.join(", "))
    } else {
        Err(lines.join(", "))
    }
}

pub const CHECKS: [&str; 9] = [
    "quadratic",
    "zero_time",
    "symplectic",
    "derivatives",
    "determinant_identity",
    "saddle_stationarity",
    "unitarity",
    "dt_convergence",
    "presets",
];

fn checks() -> Vec<(&'static str, Check)> {
    let fns: [Check; 9] = [
        check_quadratic,
        check_zero_time,
        check_symplectic,
        check_derivatives,
        check_determinant,
        check_saddle,
        check_unitarity,
        check_dt,
        check_presets,
    ];
    CHECKS.into_iter().zip(fns).collect()
}

pub fn run_checks(opts: &VerifyOptions) -> Vec<CheckResult> {
    checks()
        .into_iter()
        .filter(|(name, _)| {
            opts.only.is_empty() || opts.only.iter().any(|o| name.contains(o.as_str()))
        })
        .map(|(name, f)| {
            let t = Instant::now();
            let (passed, detail) = match f(opts) {
                Ok(d) => (true, d),
                Err(d) => (false, d),
            };
            CheckResult {
                name,
                passed,
                detail,
                seconds: t.elapsed().as_secs_f64(),
            }
        })
        .collect()
}

pub fn matrix(results: &[CheckResult]) -> String {
    let mut s = String::new();
    for r in results {
        s += &format!(
            "{:<4} {:<22} {:>7.1}s  {}\n",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.seconds,
            r.detail
        );
    }
    s
}
