//! Operator shell over a domain and problem.
//!
//! ```text
//! cargo run --example terminal -- --domain d.pddl --problem p.pddl
//! cargo run --example terminal -- --domain d.pddl --problem p.pddl --command "get plan"
//! cargo run --example terminal -- --domain d.pddl --problem p.pddl --script demo.txt
//! ```
//!
//! Without a domain, the bundled cooking domain and problem are loaded.

use std::io::BufReader;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::Parser;

use planexec::knowledge::KnowledgeBase;
use planexec::pddl::{parse_domain, parse_problem};
use planexec::terminal::{repl, Session, SessionConfig, Terminal};

const DOMAIN: &str = include_str!("../fixtures/cooking_domain.pddl");
const PROBLEM: &str = include_str!("../fixtures/cooking_problem.pddl");

#[derive(Parser)]
struct Args {
    #[arg(long, requires = "problem")]
    domain: Option<PathBuf>,
    #[arg(long)]
    problem: Option<PathBuf>,
    /// Runs one command and exits.
    #[arg(long, conflicts_with = "script")]
    command: Option<String>,
    /// Runs the commands of a file, echoing each one.
    #[arg(long)]
    script: Option<PathBuf>,
    /// Seeds the jitter of simulated durations.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Relative spread of simulated durations.
    #[arg(long, default_value_t = 0.0)]
    jitter: f64,
}

fn load(args: &Args) -> Result<KnowledgeBase, String> {
    let read = |p: &PathBuf| std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()));
    let (dtext, ptext) = match (&args.domain, &args.problem) {
        (Some(d), Some(p)) => (read(d)?, read(p)?),
        (None, None) => (DOMAIN.to_string(), PROBLEM.to_string()),
        _ => return Err("--problem needs --domain".into()),
    };
    let domain = Arc::new(parse_domain(&dtext).map_err(|e| format!("domain: {e}"))?);
    let problem = parse_problem(&ptext, &domain).map_err(|e| format!("problem: {e}"))?;
    KnowledgeBase::from_problem(domain, &problem).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let args = Args::parse();
    let kb = match load(&args) {
        Ok(kb) => kb,
        Err(e) => {
            eprintln!("terminal: {e}");
            return ExitCode::FAILURE;
        }
    };
    let session = Session::new(kb, SessionConfig { seed: args.seed, jitter: args.jitter, ..Default::default() });
    let stdout = std::io::stdout().lock();
    let code = if let Some(cmd) = &args.command {
        let mut term = Terminal::new(session, stdout);
        match term.execute(cmd) {
            Ok(_) if term.errors == 0 => 0,
            _ => 1,
        }
    } else if let Some(path) = &args.script {
        let mut term = Terminal::new(session, stdout);
        match term.execute(&format!("source {}", path.display())) {
            Ok(_) if term.errors == 0 => 0,
            _ => 1,
        }
    } else {
        match repl(session, BufReader::new(std::io::stdin()), stdout, false) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("terminal: {e}");
                1
            }
        }
    };
    ExitCode::from(code as u8)
}
