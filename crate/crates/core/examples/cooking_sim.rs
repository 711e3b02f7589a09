//! Runs the cooking experiment for one to three robots and prints the
//! metrics side by side.
//!
//! `cargo run --release --example cooking_sim [seed]`

use planexec::sim::{run_experiment, Metrics, SimConfig};

fn main() {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(42);
    let runs: Vec<Metrics> = (1..=3).map(|n| run_experiment(&SimConfig::new(n, 2000.0, seed)).unwrap()).collect();
    println!("{:<12}{:>10}{:>10}{:>10}", "metric", "1 robot", "2 robots", "3 robots");
    for (i, label) in Metrics::LABELS.iter().enumerate() {
        let cells: String = runs.iter().map(|m| format!("{:>10.1}", m.values()[i])).collect();
        println!("{label:<12}{cells}");
    }
}
