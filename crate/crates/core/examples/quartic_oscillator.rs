//! Bound motion in an isotropic quartic oscillator: complex trajectories
//! versus the real-trajectory estimators, whose reachable region ends at a
//! caustic.
//!
//! `cargo run --release --example quartic_oscillator [window_points] [out_dir]`

use scwave::quantum::{line_cut, Axis};
use scwave::runner::{run, RunOptions};
use scwave::scenarios::preset;

fn main() -> scwave::Result<()> {
    let mut args = std::env::args().skip(1);
    let mut s = preset("quartic")?;
    if let Some(n) = args.next().and_then(|a| a.parse().ok()) {
        s.grid = s.grid.with_window_points(n);
    }
    let opts = RunOptions {
        out_dir: args.next().map(Into::into),
        progress: true,
    };
    let out = run(&s, &opts)?;
    print!("{}", out.report.table());
    println!("y = 0 cut of the exact density:");
    for (x, d) in line_cut(&out.exact.normalized(), Axis::Y, 0.0)
        .iter()
        .step_by(8)
    {
        println!("  {x:>6.2} {d:.5} {}", "#".repeat((d * 150.0) as usize));
    }
    Ok(())
}
