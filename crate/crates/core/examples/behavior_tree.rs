//! Turns a plan graph into a behavior tree and ticks it against a state where
//! every action takes its planned duration.
//!
//! `cargo run --example behavior_tree`

use std::collections::HashMap;
use std::sync::Arc;

use planexec::bt::{graph_to_bt, ExecStatus, ExecutionContext, TickStatus};
use planexec::knowledge::{EvalError, KnowledgeBase, KnowledgeState};
use planexec::pddl::{parse_domain, parse_problem, Condition, Effect};
use planexec::plan_graph::build_graph;
use planexec::planner::{parse_plan_file, GroundedAction};

struct Clocked {
    state: KnowledgeState,
    now: f64,
    started: HashMap<usize, f64>,
}

impl ExecutionContext for Clocked {
    fn evaluate(&self, condition: &Condition) -> Result<bool, EvalError> {
        self.state.evaluate(condition)
    }

    fn apply(&mut self, effect: &Effect) -> Result<(), String> {
        self.state.apply(effect).map_err(|e| e.to_string())
    }

    fn execute(&mut self, unit: usize, action: &GroundedAction) -> ExecStatus {
        let start = *self.started.entry(unit).or_insert(self.now);
        let elapsed = self.now - start;
        if elapsed + 1e-9 >= action.duration {
            ExecStatus::Succeeded
        } else {
            ExecStatus::Running { completion: elapsed / action.duration }
        }
    }

    fn cancel(&mut self, _unit: usize) {}

    fn now(&self) -> f64 {
        self.now
    }
}

fn main() {
    let domain = Arc::new(parse_domain(include_str!("../fixtures/assembly_domain.pddl")).unwrap());
    let problem = parse_problem(include_str!("../fixtures/assembly_problem.pddl"), &domain).unwrap();
    let kb = KnowledgeBase::from_problem(domain.clone(), &problem).unwrap();
    let plan = parse_plan_file(include_str!("../fixtures/listing1.plan"), &domain).unwrap();
    let graph = build_graph(&domain, kb.state(), &plan).unwrap();

    let mut tree = graph_to_bt(&graph);
    print!("{}", tree.to_text());

    let mut ctx = Clocked { state: kb.state().clone(), now: 0.0, started: HashMap::new() };
    let status = loop {
        let s = tree.tick_until_quiescent(&mut ctx);
        if s != TickStatus::Running {
            break s;
        }
        ctx.now += 0.1;
    };
    println!("{status:?} at {:.1}", ctx.now);
    println!("goal holds: {}", ctx.state.evaluate(kb.state().goal()).unwrap());
}
