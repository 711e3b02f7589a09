use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use planexec::sim::{export_metrics, run_experiment_with, Profile, SimConfig};

/// Runs the cooking experiment in virtual time and writes its metrics.
#[derive(Parser)]
#[command(name = "simexp")]
struct Args {
    /// Number of robots (1 to 3).
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=3))]
    robots: u8,
    /// Duration profile: sim or real.
    #[arg(long, default_value = "sim")]
    profile: Profile,
    /// Virtual seconds to simulate.
    #[arg(long, default_value_t = 2000.0)]
    horizon: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Seconds of work per battery charge; 0 disables battery events.
    #[arg(long, default_value_t = planexec::sim::DEFAULT_BATTERY_PERIOD)]
    battery: f64,
    /// Metrics CSV; an existing file gets a new column.
    #[arg(long)]
    out: PathBuf,
    /// Copy of every hub message.
    #[arg(long)]
    hub_log: Option<PathBuf>,
    /// Directory for the graph and tree of every plan.
    #[arg(long)]
    dot: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let mut cfg = SimConfig::new(args.robots as usize, args.horizon, args.seed);
    cfg.profile = args.profile;
    cfg.battery_period = (args.battery > 0.0).then_some(args.battery);
    let log = match &args.hub_log {
        Some(p) => match File::create(p) {
            Ok(f) => Some(Box::new(BufWriter::new(f)) as Box<dyn std::io::Write + Send>),
            Err(e) => {
                eprintln!("simexp: {}: {e}", p.display());
                return ExitCode::FAILURE;
            }
        },
        None => None,
    };
    let run = match run_experiment_with(&cfg, log, args.dot.as_deref()) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("simexp: {e}");
            return ExitCode::FAILURE;
        }
    };
    print!("{}", run.metrics);
    let label = format!("{}robot-{}-seed{}", args.robots, if cfg.profile == Profile::Simulated { "sim" } else { "real" }, args.seed);
    if let Err(e) = export_metrics(&run.metrics, &label, &args.out) {
        eprintln!("simexp: {}: {e}", args.out.display());
        return ExitCode::FAILURE;
    }
    ExitCode::SUCCESS
}
