//! Thawed Gaussian versus the exact field in the quartic oscillator.

use scwave::quantum::propagate_exact;
use scwave::scenarios::preset;
use scwave::semiclassical::{assemble_tga, masked_overlap};
use scwave::shooting::Propagation;

fn main() -> scwave::Result<()> {
    let s = preset("quartic")?;
    let ham = s.hamiltonian();
    let (window, offset) = s.grid.window()?;
    for t in [0.5, 1.0, 1.5, 2.0, 2.4] {
        let exact = propagate_exact(&s.packet, &ham, t, &s.grid.full()?, s.grid.dt)?
            .crop(&window, offset)?;
        let centre =
            Propagation::new(&ham, &s.packet, t).centre_trajectory(&s.shooting.integrator)?;
        let tga = assemble_tga(&window, &centre, &s.packet);
        println!(
            "T = {t:.1}: overlap(exact, tga) = {:.5}",
            masked_overlap(&exact, &tga)?
        );
    }
    Ok(())
}
