use std::io::Read;
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use crate::knowledge::KnowledgeState;
use crate::pddl::{print_domain, print_problem, Domain};

use super::plan_file::parse_solver_output;
use super::{PlannerError, SolveOutcome};

/// Where the external solver writes its plan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlanOutput {
    Stdout,
    /// The file substituted for `{plan}` in the argument template.
    File,
}

/// A PDDL solver run as a child process.
///
/// `args` may contain the placeholders `{domain}`, `{problem}` and `{plan}`,
/// which are replaced by paths to temporary files.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalSolver {
    pub program: PathBuf,
    pub args: Vec<String>,
    pub output: PlanOutput,
    pub timeout: Duration,
}

impl ExternalSolver {
    pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(15);

    /// A POPF-style invocation: `program {domain} {problem}`, plan on stdout.
    pub fn new(program: impl Into<PathBuf>) -> Self {
        ExternalSolver {
            program: program.into(),
            args: vec!["{domain}".into(), "{problem}".into()],
            output: PlanOutput::Stdout,
            timeout: Self::DEFAULT_TIMEOUT,
        }
    }

    pub fn solve(&self, domain: &Domain, state: &KnowledgeState) -> Result<SolveOutcome, PlannerError> {
        let io = |e: std::io::Error| PlannerError::Io(e.to_string());
        let dir = TempDir::new().map_err(io)?;
        let domain_path = dir.0.join("domain.pddl");
        let problem_path = dir.0.join("problem.pddl");
        let plan_path = dir.0.join("plan.txt");
        std::fs::write(&domain_path, print_domain(domain)).map_err(io)?;
        std::fs::write(&problem_path, print_problem(&state.to_problem("task", domain))).map_err(io)?;

        let args: Vec<String> = self
            .args
            .iter()
            .map(|a| {
                a.replace("{domain}", &domain_path.to_string_lossy())
                    .replace("{problem}", &problem_path.to_string_lossy())
                    .replace("{plan}", &plan_path.to_string_lossy())
            })
            .collect();
        let mut child = Command::new(&self.program)
            .args(&args)
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound | std::io::ErrorKind::PermissionDenied => {
                    PlannerError::SolverNotFound(self.program.clone())
                }
                _ => io(e),
            })?;

        // Drain pipes on threads so a chatty solver cannot block on a full pipe.
        let mut stdout = child.stdout.take().expect("piped");
        let mut stderr = child.stderr.take().expect("piped");
        let out_thread = std::thread::spawn(move || {
            let mut s = String::new();
            let _ = stdout.read_to_string(&mut s);
            s
        });
        let err_thread = std::thread::spawn(move || {
            let mut s = String::new();
            let _ = stderr.read_to_string(&mut s);
            s
        });

        let deadline = Instant::now() + self.timeout;
        let status = loop {
            if let Some(status) = child.try_wait().map_err(io)? {
                break status;
            }
            if Instant::now() >= deadline {
                let _ = child.kill();
                let _ = child.wait();
                return Err(PlannerError::SolverTimeout(self.timeout));
            }
            std::thread::sleep(Duration::from_millis(5));
        };
        let out = out_thread.join().unwrap_or_default();
        let err = err_thread.join().unwrap_or_default();
        if !status.success() {
            return Err(PlannerError::SolverFailed { status: status.to_string(), stderr: err.trim().to_string() });
        }
        let text = match self.output {
            PlanOutput::Stdout => out,
            PlanOutput::File => match std::fs::read_to_string(&plan_path) {
                Ok(t) => t,
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
                Err(e) => return Err(io(e)),
            },
        };
        let plan = parse_solver_output(&text, domain)?;
        if plan.is_empty() && !state.evaluate(state.goal()).unwrap_or(false) {
            return Ok(SolveOutcome::NoPlan);
        }
        Ok(SolveOutcome::Plan(plan))
    }
}

struct TempDir(PathBuf);

impl TempDir {
    fn new() -> std::io::Result<Self> {
        static COUNTER: AtomicU64 = AtomicU64::new(0);
        let n = COUNTER.fetch_add(1, Ordering::Relaxed);
        let path = std::env::temp_dir().join(format!("planexec-{}-{n}", std::process::id()));
        std::fs::create_dir_all(&path)?;
        Ok(TempDir(path))
    }
}

impl Drop for TempDir {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}
