//! Sample a coherent state on a grid and check its norm and moments.

use scwave::quantum::mean_position;
use scwave::{coherent_state_amplitude, sample_on_grid, Grid, WavepacketParams};

fn main() -> scwave::Result<()> {
    let params = WavepacketParams::new(vec![-1.0, 0.5], vec![2.0, 0.0], vec![1.0, 0.6], 1.0)?;
    let grid = Grid::periodic([-8.0, 8.0], [-8.0, 8.0], 128, 128)?;
    let psi = sample_on_grid(|x| Ok(coherent_state_amplitude(&x, &params)), &grid)?;
    println!("norm            {:.12}", psi.norm_sqr());
    println!("<x>             {:?}", mean_position(&psi));
    println!(
        "psi(q)          {:.6}",
        coherent_state_amplitude(params.q(), &params)
    );
    println!("normalisation N {:.6}", params.norm_const());
    Ok(())
}
