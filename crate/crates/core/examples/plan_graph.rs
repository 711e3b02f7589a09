//! Builds the dependency graph of a plan file and prints it as DOT.
//!
//! `cargo run --example plan_graph > plan.dot && dot -Tsvg plan.dot -o plan.svg`

use std::sync::Arc;

use planexec::knowledge::KnowledgeBase;
use planexec::pddl::{parse_domain, parse_problem};
use planexec::plan_graph::build_graph;
use planexec::planner::parse_plan_file;

fn main() {
    let domain = Arc::new(parse_domain(include_str!("../fixtures/assembly_domain.pddl")).unwrap());
    let problem = parse_problem(include_str!("../fixtures/assembly_problem.pddl"), &domain).unwrap();
    let kb = KnowledgeBase::from_problem(domain.clone(), &problem).unwrap();
    let plan = parse_plan_file(include_str!("../fixtures/listing1.plan"), &domain).unwrap();

    let graph = build_graph(&domain, kb.state(), &plan).unwrap();
    print!("{}", graph.to_dot());
    eprintln!("{} actions, roots {:?}, critical path {:.3}", graph.len(), graph.roots(), graph.critical_path());
}
