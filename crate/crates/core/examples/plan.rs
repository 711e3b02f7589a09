//! Plans the cooking problem with the built-in solver and validates the plan.
//!
//! `cargo run --example plan`

use std::sync::Arc;

use planexec::knowledge::KnowledgeBase;
use planexec::pddl::{parse_domain, parse_problem};
use planexec::planner::{validate_plan, BuiltinSolver, SolveOutcome};

fn main() {
    let domain = Arc::new(parse_domain(include_str!("../fixtures/cooking_domain.pddl")).unwrap());
    let problem = parse_problem(include_str!("../fixtures/cooking_problem.pddl"), &domain).unwrap();
    let kb = KnowledgeBase::from_problem(domain.clone(), &problem).unwrap();

    match BuiltinSolver::default().solve(&domain, kb.state()).unwrap() {
        SolveOutcome::Plan(plan) => {
            print!("{}", plan.to_popf_text());
            println!("makespan {:.3}", plan.makespan());
            match validate_plan(&domain, kb.state(), &plan) {
                Ok(()) => println!("valid"),
                Err(v) => println!("invalid: {v}"),
            }
        }
        SolveOutcome::NoPlan => println!("no plan"),
    }
}
