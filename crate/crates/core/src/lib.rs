pub mod auction;
pub mod bt;
pub mod executor;
pub mod knowledge;
pub mod pddl;
pub mod plan_graph;
pub mod planner;
pub mod runtime;
pub mod sim;
pub mod terminal;
