//! Complex root search at one final position: the main family by
//! continuation from the centre trajectory, and every family found from the
//! multi-start seed grid.

use scwave::scenarios::preset;
use scwave::semiclassical::{psi_sc, sc_term, AssemblySettings};
use scwave::shooting::{enumerate_families, main_family_root, solve_q_to_x, Propagation};

fn main() -> scwave::Result<()> {
    let s = preset("gaussian_well")?;
    let ham = s.hamiltonian();
    let prop = Propagation::new(&ham, &s.packet, s.time);
    let x = [-2.0, -0.5];

    let main = main_family_root(&x, &prop, &s.shooting)?;
    println!(
        "main family at {x:?}: omega = {:.6?}, Im Phi0 = {:.4e}",
        main.omega,
        main.phi0.im_phi0()
    );

    let all = enumerate_families(&x, &prop, &s.shooting)?;
    println!(
        "{} families ({} seeds failed)",
        all.roots.len(),
        all.failures.len()
    );
    for r in &all.roots {
        println!(
            "  family {:>2}  omega {:>40}  Im Phi0 {:>10.3e}  |term| {:.3e}  contributing {}",
            r.family_id,
            format!("{:.4?}", r.omega),
            r.phi0.im_phi0(),
            sc_term(r, &s.packet).norm(),
            r.contributing
        );
    }
    let v = psi_sc(&all.roots, &s.packet, &AssemblySettings::default());
    println!("psi_sc over all contributing families: {:.6}", v.value);

    let real = solve_q_to_x(&x, &prop, &[s.packet.p().to_vec()], &s.shooting)?;
    for r in &real.roots {
        println!("real q->x root: initial momentum {:.6?}", r.unknowns);
    }
    Ok(())
}
