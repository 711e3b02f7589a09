//! Temporal planning: grounding, a builtin forward search, an adapter for
//! external PDDL solvers, plan files and a plan validator.
//!
//! Plans produced by the builtin search are sequential: each action starts
//! one millisecond after the previous one ends. Partial-order structure is
//! recovered later by the plan graph.

mod external;
mod grounding;
mod plan_file;
mod search;
mod validate;

use std::fmt;
use std::path::PathBuf;
use std::time::Duration;

use crate::knowledge::{EvalError, KnowledgeState};
use crate::pddl::{ActionName, Domain, ObjectName};

pub use external::{ExternalSolver, PlanOutput};
pub use grounding::{ground_action, GroundedAction};
pub use plan_file::{parse_plan_file, PlanParseError};
pub use search::{BuiltinSolver, DEFAULT_NODE_BUDGET};
pub use validate::{event_cmp, validate_plan, Phase, Violation, ViolationKind};

/// Separation between consecutive actions in builtin plans.
pub const EPSILON: f64 = 0.001;

/// One scheduled action of a plan.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanItem {
    pub time: f64,
    pub action: ActionName,
    pub args: Vec<ObjectName>,
    pub duration: f64,
}

impl PlanItem {
    pub fn end(&self) -> f64 {
        self.time + self.duration
    }

    pub fn ground(&self, domain: &Domain, state: &KnowledgeState) -> Result<GroundedAction, PlannerError> {
        ground_action(domain, state, &self.action, &self.args)
    }
}

impl fmt::Display for PlanItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.action)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

/// Items ordered by start time; equal times keep their input order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Plan {
    pub items: Vec<PlanItem>,
}

impl Plan {
    pub fn new(mut items: Vec<PlanItem>) -> Self {
        items.sort_by(|a, b| a.time.total_cmp(&b.time));
        Plan { items }
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn makespan(&self) -> f64 {
        self.items.iter().map(PlanItem::end).fold(0.0, f64::max)
    }

    /// `time<TAB>(action args)` per line.
    pub fn to_tab_text(&self) -> String {
        self.items.iter().map(|i| format!("{}\t{}\n", i.time, i)).collect()
    }

    /// `time: (action args)  [duration]` per line, three decimals.
    pub fn to_popf_text(&self) -> String {
        self.items.iter().map(|i| format!("{:.3}: {}  [{:.3}]\n", i.time, i, i.duration)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolveOutcome {
    Plan(Plan),
    NoPlan,
}

impl SolveOutcome {
    pub fn plan(self) -> Option<Plan> {
        match self {
            SolveOutcome::Plan(p) => Some(p),
            SolveOutcome::NoPlan => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolverSpec {
    Builtin(BuiltinSolver),
    External(ExternalSolver),
}

impl Default for SolverSpec {
    fn default() -> Self {
        SolverSpec::Builtin(BuiltinSolver::default())
    }
}

impl SolverSpec {
    pub fn solve(&self, domain: &Domain, state: &KnowledgeState) -> Result<SolveOutcome, PlannerError> {
        match self {
            SolverSpec::Builtin(s) => s.solve(domain, state),
            SolverSpec::External(s) => s.solve(domain, state),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlannerError {
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("`{action}` expects {expected} argument(s), found {found}")]
    Arity { action: String, expected: usize, found: usize },
    #[error("argument `{arg}` of `{action}` is not a `{expected}`")]
    ArgumentType { action: String, arg: String, expected: String },
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error("`{action}` has non-positive duration {duration}")]
    InvalidDuration { action: String, duration: f64 },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("the builtin solver does not support numeric conditions (in {0})")]
    NumericCondition(String),
    #[error("search budget of {budget} nodes exhausted")]
    BudgetExhausted { budget: usize },
    #[error("solver program not found: {}", .0.display())]
    SolverNotFound(PathBuf),
    #[error("solver exited with {status}: {stderr}")]
    SolverFailed { status: String, stderr: String },
    #[error("solver timed out after {0:?}")]
    SolverTimeout(Duration),
    #[error("io error: {0}")]
    Io(String),
    #[error(transparent)]
    PlanParse(#[from] PlanParseError),
}
