//! Integrate one complex trajectory through the gaussian well and print its
//! action, tangent-matrix diagnostics and prefactor.

use scwave::shooting::complex_start;
use scwave::{evolve, Hamiltonian, IntegratorSettings, PotentialSpec, WavepacketParams, C64};

fn main() -> scwave::Result<()> {
    let params = WavepacketParams::planar([-10.0, 1.0], [3.0, 0.0], 1.0)?;
    let ham = Hamiltonian::new(PotentialSpec::gaussian_well());
    let omega = [C64::new(0.1, 0.0), C64::new(0.0, 0.1)];
    let start = complex_start(&params, &omega);
    let tr = evolve(&start, 4.0, &ham, &params, &IntegratorSettings::default())?;
    let end = tr.end();
    println!("x(T)               {:.6?}", end.x);
    println!("p(T)               {:.6?}", end.p);
    println!("action             {:.8}", tr.action);
    println!("energy             {:.8}", tr.energy);
    println!("det M - 1          {:.2e}", (tr.tangent.det() - 1.0).norm());
    println!("symplectic defect  {:.2e}", tr.tangent.symplectic_defect());
    println!("det(Mxx + i Mxp)   {:.6}", tr.prefactor_det());
    println!("tracked sqrt       {:.6}", tr.sqrt_prefactor_det());
    println!("samples            {}", tr.samples.len());
    Ok(())
}
