//! Runs the executor against simulated performers in virtual time and prints
//! its NDJSON status events.
//!
//! `cargo run --example executor`

use std::sync::Arc;

use planexec::auction::{FeedbackMode, Hub, Performer, PerformerSpec, SharedTime, TimedWork, Transport};
use planexec::executor::{Executor, ExecutorConfig};
use planexec::knowledge::KnowledgeBase;
use planexec::pddl::{parse_domain, parse_problem};

fn main() {
    let domain = Arc::new(parse_domain(include_str!("../fixtures/cooking_domain.pddl")).unwrap());
    let problem = parse_problem(include_str!("../fixtures/cooking_problem.pddl"), &domain).unwrap();
    let kb = KnowledgeBase::from_problem(domain.clone(), &problem).unwrap();

    let time = SharedTime::default();
    let hub = Arc::new(Hub::with_clock(time.clone()));
    let mut exec = Executor::new("executor", kb, hub.clone(), ExecutorConfig::default()).unwrap();
    exec.set_status_sink(Box::new(std::io::stdout()));

    let mut performers: Vec<_> = domain
        .actions
        .iter()
        .map(|a| {
            let spec = PerformerSpec::new(&format!("r2d2-{}", a.name), a.name.as_str()).specialized(&["r2d2"]);
            let p = Performer::new(spec, TimedWork::new(|_: &[String]| 5.0)).with_feedback(FeedbackMode::Quartiles);
            (p, hub.subscribe().unwrap())
        })
        .collect();

    let mut now = 0.0;
    exec.execute_goal(now).unwrap();
    while exec.is_running() && now < 600.0 {
        time.set(now);
        loop {
            let mut busy = false;
            for (p, sub) in &mut performers {
                for m in sub.drain() {
                    for out in p.handle(&m, now) {
                        hub.publish(&out).unwrap();
                        busy = true;
                    }
                }
                for out in p.poll(now) {
                    hub.publish(&out).unwrap();
                    busy = true;
                }
            }
            busy |= exec.tick(now).unwrap();
            if !busy {
                break;
            }
        }
        now = ((now + 0.1) * 10.0_f64).round() / 10.0;
    }
    eprintln!("{} after {:.1} s", exec.status().state.label(), now);
}
