//! Exact split-operator propagation: harmonic revival, step-size
//! convergence and the quartic oscillator's classical half period.

use std::f64::consts::PI;

use scwave::quantum::{mean_position, propagate_exact, propagate_observed};
use scwave::scenarios::preset;
use scwave::{
    coherent_state_amplitude, normalized_overlap, sample_on_grid, Grid, Hamiltonian, PotentialSpec,
    WavepacketParams,
};

fn main() -> scwave::Result<()> {
    let params = WavepacketParams::planar([1.0, 0.0], [0.0, 1.0], 1.0)?;
    let ham = Hamiltonian::new(PotentialSpec::Harmonic {
        omega: vec![1.0, 1.0],
    });
    let grid = Grid::periodic([-8.0, 8.0], [-8.0, 8.0], 128, 128)?;
    let initial = sample_on_grid(|x| Ok(coherent_state_amplitude(&x, &params)), &grid)?;
    let back = propagate_exact(&params, &ham, 2.0 * PI, &grid, 2.0 * PI / 2000.0)?;
    println!(
        "harmonic revival overlap: {:.12}",
        normalized_overlap(&initial, &back)?
    );

    let q = preset("quartic")?;
    let grid = q.grid.full()?;
    let a = propagate_exact(&q.packet, &q.hamiltonian(), q.time, &grid, q.grid.dt)?;
    let b = propagate_exact(&q.packet, &q.hamiltonian(), q.time, &grid, q.grid.dt / 2.0)?;
    println!(
        "quartic 1 - overlap(dt, dt/2): {:.3e}",
        1.0 - normalized_overlap(&a, &b)?
    );

    let mut prev = (0.0, q.packet.q()[0]);
    let mut crossing = None;
    propagate_observed(
        &q.packet,
        &q.hamiltonian(),
        3.0,
        &grid,
        q.grid.dt,
        10,
        |t, f| {
            let x = mean_position(f)[0];
            if crossing.is_none() && t > 0.5 && prev.1 > 0.0 && x <= 0.0 {
                crossing = Some(prev.0 + (t - prev.0) * prev.1 / (prev.1 - x));
            }
            prev = (t, x);
        },
    )?;
    println!(
        "quartic <x> crosses zero at t = {:.3}",
        crossing.unwrap_or(f64::NAN)
    );
    Ok(())
}
