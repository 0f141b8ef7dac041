//! Tunnelling into a circular ridge: transmitted probability and the
//! fixed-position versus fixed-momentum real-trajectory estimators.
//!
//! `cargo run --release --example tunnelling_ridge [window_points] [out_dir]`

use scwave::runner::{run, RunOptions};
use scwave::scenarios::preset;

fn main() -> scwave::Result<()> {
    let mut args = std::env::args().skip(1);
    let mut s = preset("ridge")?;
    if let Some(n) = args.next().and_then(|a| a.parse().ok()) {
        s.grid = s.grid.with_window_points(n);
    }
    let opts = RunOptions {
        out_dir: args.next().map(Into::into),
        progress: true,
    };
    let out = run(&s, &opts)?;
    print!("{}", out.report.table());
    Ok(())
}
