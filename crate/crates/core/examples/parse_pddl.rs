//! Parses a domain and problem, prints them back and shows a parse error.
//!
//! `cargo run --example parse_pddl [domain.pddl problem.pddl]`

use planexec::pddl::{parse_domain, parse_problem, print_domain, print_problem};

fn main() {
    let paths: Vec<String> = std::env::args().skip(1).collect();
    let (dtext, ptext) = match paths.as_slice() {
        [d, p] => (std::fs::read_to_string(d).unwrap(), std::fs::read_to_string(p).unwrap()),
        _ => (
            include_str!("../fixtures/assembly_domain.pddl").to_string(),
            include_str!("../fixtures/assembly_problem.pddl").to_string(),
        ),
    };
    let domain = parse_domain(&dtext).expect("domain");
    let problem = parse_problem(&ptext, &domain).expect("problem");
    println!("{}", print_domain(&domain));
    println!("{}", print_problem(&problem));
    println!("{} actions, {} objects", domain.actions.len(), problem.objects.len());

    match parse_domain("(define (domain broken) (:predicates (at ?x))") {
        Ok(_) => unreachable!(),
        Err(e) => println!("error: {e}"),
    }
}
