use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use scwave::runner::{run, RunOptions};
use scwave::scenarios::{preset, Method, Scenario};
use scwave::verify;
use scwave::Error;

#[derive(Parser)]
#[command(
    name = "scwave",
    version,
    about = "Semiclassical coherent-state propagation"
)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "SCWAVE_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write fields, cuts and a report.
    Run(RunArgs),
    /// Run the numerical property checks.
    Verify(VerifyArgs),
    /// Print a preset as a config file.
    Export { preset: String },
}

#[derive(Args)]
struct RunArgs {
    /// gaussian_well, quartic, billiard, ridge, free_test or harmonic_test.
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    preset: Option<String>,
    /// Scenario TOML file (see `scwave export`).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "scwave-out")]
    out_dir: PathBuf,
    /// Comma-separated subset of exact,sc,tga,q,p,mixed.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    /// Window nodes per axis; the domain resolution scales to match.
    #[arg(long)]
    grid: Option<usize>,
    /// Split-operator time step.
    #[arg(long)]
    dt: Option<f64>,
    /// Also write every field as CSV.
    #[arg(long)]
    csv: bool,
    /// Dump the centre trajectory and the families at the window centre.
    #[arg(long)]
    debug_trajectories: bool,
    /// Dump every root found at every window node.
    #[arg(long)]
    debug_roots: bool,
    /// Suppress progress output; the summary table is still printed.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// Run only checks whose name contains one of these.
    #[arg(long, value_delimiter = ',')]
    only: Vec<String>,
    /// Integrator relative tolerance override, for sensitivity checks.
    #[arg(long)]
    rel_tol: Option<f64>,
    /// Include the slow preset reproductions.
    #[arg(long)]
    presets: bool,
}

fn scenario(args: &RunArgs) -> Result<Scenario, Error> {
    let mut s = match (&args.preset, &args.config) {
        (Some(name), _) => preset(name)?,
        (None, Some(path)) => Scenario::load(path)?,
        (None, None) => {
            return Err(Error::Config(
                "one of --preset or --config is required".into(),
            ))
        }
    };
    if let Some(m) = &args.methods {
        s.methods = m.clone();
    }
    if let Some(n) = args.grid {
        s.grid = s.grid.with_window_points(n);
    }
    if let Some(dt) = args.dt {
        s.grid.dt = dt;
    }
    s.output.csv |= args.csv;
    s.output.debug_trajectories |= args.debug_trajectories;
    s.output.debug_roots |= args.debug_roots;
    s.validate()?;
    Ok(s)
}

fn exit_for(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::UnknownPreset { .. }
        | Error::Incompatible { .. }
        | Error::Nyquist { .. }
        | Error::InvalidParameter(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match cli.command {
        Command::Run(args) => {
            let s = match scenario(&args) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            };
            let opts = RunOptions {
                out_dir: Some(args.out_dir.clone()),
                progress: !args.quiet,
            };
            match run(&s, &opts) {
                Ok(out) => {
                    print!("{}", out.report.table());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(exit_for(&e))
                }
            }
        }
        Command::Verify(args) => {
            let opts = verify::VerifyOptions {
                only: args.only,
                rel_tol: args.rel_tol,
                presets: args.presets,
            };
            let results = verify::run_checks(&opts);
            print!("{}", verify::matrix(&results));
            if results.is_empty() {
                eprintln!("error: no check matches the filter");
                return ExitCode::from(1);
            }
            if results.iter().all(|r| r.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            }
        }
        Command::Export { preset: name } => match preset(&name).and_then(|s| s.to_toml()) {
            Ok(text) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        },
    }
}
