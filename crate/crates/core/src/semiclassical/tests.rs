use super::*;
use crate::dynamics::{evolve, ComplexPhasePoint, Hamiltonian, IntegratorSettings};
use crate::potentials::PotentialSpec;
use crate::shooting::{
    solve_complex, solve_mixed, solve_p_to_x, solve_q_to_x, Propagation, ShootingSettings,
};
use crate::wavepacket::coherent_state_amplitude;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn well() -> (Hamiltonian, WavepacketParams) {
    (
        Hamiltonian::new(PotentialSpec::gaussian_well()),
        WavepacketParams::new(vec![-10.0, 1.0], vec![3.0, 0.0], vec![1.0, 0.8], 0.9).unwrap(),
    )
}

fn real_root(
    kind: RealKind,
    ham: &Hamiltonian,
    params: &WavepacketParams,
    x0: &[f64],
    p0: &[f64],
    t: f64,
    unknowns: Vec<f64>,
) -> RealRoot {
    let tr = evolve(
        &ComplexPhasePoint::real(x0, p0),
        t,
        ham,
        params,
        &IntegratorSettings::default(),
    )
    .unwrap();
    RealRoot {
        kind,
        unknowns,
        trajectory: tr,
        maslov_count: 0,
        family_id: 0,
    }
}

#[test]
fn zero_time_reproduces_the_coherent_state() {
    let (ham, params) = well();
    let prop = Propagation::new(&ham, &params, 0.0);
    let s = ShootingSettings::default();
    let a = AssemblySettings::default();
    let (q, p) = (params.q().to_vec(), params.p().to_vec());
    for x in [[-10.0, 1.0], [-9.3, 2.1], [-11.2, 0.4]] {
        let exact = coherent_state_amplitude(&x, &params);
        let sc = solve_complex(&x, &prop, &[c(0.0, 0.0), c(0.0, 0.0)], &s).unwrap();
        assert!((psi_sc(&[sc], &params, &a).value - exact).norm() < 1e-10);
        let centre = evolve(
            &ComplexPhasePoint::real(&q, &p),
            0.0,
            &ham,
            &params,
            &IntegratorSettings::default(),
        )
        .unwrap();
        assert!((psi_tga(&x, &centre, &params) - exact).norm() < 1e-10);
        let pr = solve_p_to_x(&x, &prop, &[q.clone()], &s).unwrap();
        assert!((psi_p(&pr.roots, &params, &a).value - exact).norm() < 1e-10);
        // On the line x = q_x every mixed root has p_xi = p_x.
        let xm = [q[0], x[1]];
        let m = real_root(
            RealKind::Mixed,
            &ham,
            &params,
            &xm,
            &p,
            0.0,
            vec![x[1], p[0]],
        );
        let exact_m = coherent_state_amplitude(&xm, &params);
        assert!((psi_mixed(&[m], &params, &a).value - exact_m).norm() < 1e-10);
    }
    // Only x = q is reached with a fixed initial position.
    let qr = real_root(RealKind::QtoX, &ham, &params, &q, &p, 0.0, p.clone());
    let v = psi_q(&[qr], &params, &a).value;
    assert!((v - c(params.norm_const(), 0.0)).norm() < 1e-12);
}

#[test]
fn centre_image_point_agrees_across_estimators() {
    let (ham, params) = well();
    let t = 4.0;
    let prop = Propagation::new(&ham, &params, t);
    let s = ShootingSettings::default();
    let a = AssemblySettings::default();
    let centre = prop
        .centre_trajectory(&IntegratorSettings::default())
        .unwrap();
    let xc = centre.end().real_x();
    let tga = psi_tga(&xc, &centre, &params);
    let sc = solve_complex(&xc, &prop, &[c(0.0, 0.0), c(0.0, 0.0)], &s).unwrap();
    let q = solve_q_to_x(&xc, &prop, &[params.p().to_vec()], &s).unwrap();
    assert!((psi_sc(&[sc], &params, &a).value - tga).norm() < 1e-8 * tga.norm());
    assert!((psi_q(&q.roots, &params, &a).value - tga).norm() < 1e-8 * tga.norm());
}

#[test]
fn centre_root_exponent_is_the_real_action() {
    let (ham, params) = well();
    let prop = Propagation::new(&ham, &params, 4.0);
    let centre = prop
        .centre_trajectory(&IntegratorSettings::default())
        .unwrap();
    let e = phi0_exponent(&[c(0.0, 0.0), c(0.0, 0.0)], centre.action, &params);
    assert_eq!(e.im_phi0(), 0.0);
    assert!((e.phi0() - centre.action).norm() < 1e-14);
    assert!(e.is_contributing());
}

#[test]
fn free_exponent_matches_closed_form() {
    let ham = Hamiltonian::new(PotentialSpec::Free);
    let params = WavepacketParams::planar([0.5, -1.0], [1.0, 2.0], 1.0).unwrap();
    let t = 1.5;
    let prop = Propagation::new(&ham, &params, t);
    let x = [2.0, 0.7];
    let root = solve_complex(
        &x,
        &prop,
        &[c(0.0, 0.0), c(0.0, 0.0)],
        &ShootingSettings::default(),
    )
    .unwrap();
    let mut phi = C64::default();
    for i in 0..2 {
        let w = (x[i] - params.q()[i] - params.p()[i] * t) / c(1.0, t);
        let p0 = params.p()[i] + C64::i() * w;
        phi += p0 * p0 * t / 2.0 + params.p()[i] * w + C64::i() / 2.0 * w * w;
    }
    assert!((exponent_phi0(&root, &params).phi0() - phi).norm() < 1e-10);
}

#[test]
fn free_tga_is_the_spreading_gaussian() {
    let ham = Hamiltonian::new(PotentialSpec::Free);
    let params =
        WavepacketParams::new(vec![0.5, -1.0], vec![1.0, 2.0], vec![0.8, 1.3], 1.0).unwrap();
    let t = 1.7;
    let prop = Propagation::new(&ham, &params, t);
    let centre = prop
        .centre_trajectory(&IntegratorSettings::default())
        .unwrap();
    let exact = |x: [f64; 2]| {
        let mut v = C64::new(1.0, 0.0);
        for i in 0..2 {
            let (q, p, b) = (params.q()[i], params.p()[i], params.b()[i]);
            let tau = c(1.0, t / (b * b));
            let e = -(x[i] - q - p * t).powi(2) / (2.0 * b * b * tau)
                + C64::i() * (p * (x[i] - q) - p * p * t / 2.0);
            v *= (std::f64::consts::PI * b * b).powf(-0.25) / tau.sqrt() * e.exp();
        }
        v
    };
    for x in [[0.5, -1.0], [2.2, 2.4], [1.0, 3.5], [-1.0, 0.0]] {
        assert!(
            (psi_tga(&x, &centre, &params) - exact(x)).norm() < 1e-10,
            "{x:?}"
        );
    }
}

/// The exponents written out separately for each kind of boundary condition.
fn textbook_exponent(root: &RealRoot, params: &WavepacketParams) -> C64 {
    let (q, p, b, hbar) = (params.q(), params.p(), params.b(), params.hbar());
    let cw = params.c();
    let tr = &root.trajectory;
    let m = &tr.tangent;
    let inv = crate::linalg::inverse(&m.prefactor_matrix()).unwrap();
    let i = C64::i();
    let start = tr.start();
    match root.kind {
        RealKind::QtoX => {
            let dp: Vec<f64> = (0..2).map(|k| p[k] - start.p[k].re).collect();
            let core = &inv * m.xp();
            let mut quad = C64::default();
            for a in 0..2 {
                for bb in 0..2 {
                    quad += dp[a] / cw[a] * core[(a, bb)] * dp[bb] / cw[bb];
                }
            }
            i / hbar * tr.action - 0.5 * i * quad
        }
        RealKind::PtoX => {
            let dq: Vec<f64> = (0..2).map(|k| q[k] - start.x[k].re).collect();
            let core = &inv * m.xx();
            let mut quad = C64::default();
            let mut lin = 0.0;
            for a in 0..2 {
                lin += p[a] * dq[a];
                for bb in 0..2 {
                    quad += dq[a] / b[a] * core[(a, bb)] * dq[bb] / b[bb];
                }
            }
            i / hbar * (tr.action - lin) - 0.5 * quad
        }
        RealKind::Mixed => {
            let dpx = p[0] - start.p[0].re;
            let dy = q[1] - start.x[1].re;
            let xi = [i * dpx / hbar, C64::new(dy / (b[1] * b[1]), 0.0)];
            let core = &inv * m.xp();
            let mut quad = C64::default();
            for a in 0..2 {
                for bb in 0..2 {
                    quad += xi[a] * (-i * b[a] * core[(a, bb)] * b[bb]) * xi[bb];
                }
            }
            i / hbar * (tr.action - p[1] * dy) - 0.5 * quad - dy * dy / (2.0 * b[1] * b[1])
        }
    }
}

#[test]
fn real_exponents_match_the_separate_forms() {
    let (ham, params) = well();
    let prop = Propagation::new(&ham, &params, 4.0);
    let s = ShootingSettings::default();
    let x = [-2.0, -0.5];
    let roots = [
        solve_q_to_x(&x, &prop, &[params.p().to_vec()], &s)
            .unwrap()
            .roots,
        solve_p_to_x(&x, &prop, &[params.q().to_vec()], &s)
            .unwrap()
            .roots,
        solve_mixed(&x, &prop, &[vec![params.q()[1], params.p()[0]]], &s)
            .unwrap()
            .roots,
    ];
    for found in roots {
        let r = &found[0];
        let unified = real_exponent(&r.trajectory, &params).unwrap();
        let want = textbook_exponent(r, &params);
        assert!(
            (unified - want).norm() < 1e-10 * want.norm().max(1.0),
            "{:?}: {unified} vs {want}",
            r.kind
        );
    }
}

#[test]
fn non_contributing_roots_are_skipped() {
    let (ham, params) = well();
    let prop = Propagation::new(&ham, &params, 4.0);
    let mut root = solve_complex(
        &[-2.0, -0.5],
        &prop,
        &[c(0.0, 0.0), c(0.0, 0.0)],
        &ShootingSettings::default(),
    )
    .unwrap();
    root.contributing = false;
    let a = AssemblySettings::default();
    let v = psi_sc(&[root.clone()], &params, &a);
    assert_eq!(v.value, C64::default());
    assert!(v.flags.contains(CellFlags::UNREACHABLE));
    let keep = AssemblySettings {
        discard_non_contributing: false,
        ..a
    };
    assert!(psi_sc(&[root], &params, &keep).value.norm() > 0.0);
}

#[test]
fn divergence_run_detection() {
    let grid = Grid::new([0.0, 0.0], [1.0, 1.0], 5, 1).unwrap();
    let growing = [1.0, 2.0, 4.0, 8.0, 16.0];
    assert!(grows_into(&grid, 4, 0, 3, |j| Some(growing[j])));
    assert!(grows_into(&grid, 0, 0, 3, |j| Some(growing[4 - j])));
    let bumpy = [1.0, 3.0, 2.0, 1.0, 5.0];
    assert!(!grows_into(&grid, 2, 0, 3, |j| Some(bumpy[j])));
    assert!(!grows_into(&grid, 4, 0, 3, |j| (j > 2).then_some(growing[j])));
}

#[test]
fn billiard_bounce_term_has_image_sign() {
    // Just after a normal reflection the bounced term is minus the free one.
    let ham = Hamiltonian::new(PotentialSpec::billiard(3.0));
    let params = WavepacketParams::planar([0.0, 0.0], [4.0, 0.0], 1.0).unwrap();
    let t = 0.5;
    let prop = Propagation::new(&ham, &params, t);
    let r = 3.0 - 1e-7;
    let found = solve_q_to_x(&[r, 0.0], &prop, &[], &ShootingSettings::default()).unwrap();
    let direct = found.roots.iter().find(|r| r.maslov_count == 0).unwrap();
    let bounced = found
        .roots
        .iter()
        .find(|r| r.maslov_count == 1 && r.unknowns[0] > 0.0)
        .unwrap();
    let (a, b) = (real_term(direct, &params), real_term(bounced, &params));
    assert!((a + b).norm() < 1e-5 * a.norm(), "{a} {b}");
}
