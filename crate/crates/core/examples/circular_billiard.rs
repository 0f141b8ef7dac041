//! Circular hard-wall billiard: the direct and once-reflected real
//! trajectories against a soft-wall exact run.
//!
//! `cargo run --release --example circular_billiard [window_points] [out_dir]`

use scwave::quantum::{line_cut, Axis};
use scwave::runner::{run, RunOptions};
use scwave::scenarios::preset;

fn main() -> scwave::Result<()> {
    let mut args = std::env::args().skip(1);
    let mut s = preset("billiard")?;
    if let Some(n) = args.next().and_then(|a| a.parse().ok()) {
        s.grid = s.grid.with_window_points(n);
    }
    let opts = RunOptions {
        out_dir: args.next().map(Into::into),
        progress: true,
    };
    let out = run(&s, &opts)?;
    print!("{}", out.report.table());
    let exact = line_cut(&out.exact.normalized(), Axis::Y, 0.0);
    let q = line_cut(
        &out.fields[&scwave::Method::Q].field.normalized(),
        Axis::Y,
        0.0,
    );
    println!("{:>6} {:>8} {:>8}", "x", "exact", "q");
    for ((x, e), (_, a)) in exact
        .iter()
        .zip(&q)
        .step_by(6)
        .filter(|((x, _), _)| *x > 0.0)
    {
        println!("{x:>6.2} {e:>8.4} {a:>8.4}");
    }
    Ok(())
}
