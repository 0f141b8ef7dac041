//! Scattering off an attractive gaussian well with every estimator.
//!
//! `cargo run --release --example gaussian_well [window_points] [out_dir]`

use scwave::runner::{run, RunOptions};
use scwave::scenarios::preset;

fn main() -> scwave::Result<()> {
    let mut args = std::env::args().skip(1);
    let mut s = preset("gaussian_well")?;
    if let Some(n) = args.next().and_then(|a| a.parse().ok()) {
        s.grid = s.grid.with_window_points(n);
    }
    let opts = RunOptions {
        out_dir: args.next().map(Into::into),
        progress: true,
    };
    let out = run(&s, &opts)?;
    print!("{}", out.report.table());

    // Peak heights, both fields normalised on the window.
    let exact = out.exact.normalized();
    let sc = out.fields[&scwave::Method::Sc].field.normalized();
    let peak = |f: &scwave::WaveField| f.density().into_iter().fold(0.0, f64::max);
    println!(
        "main peak density: exact {:.4}, sc {:.4}",
        peak(&exact),
        peak(&sc)
    );
    Ok(())
}
