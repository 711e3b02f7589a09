//! Fixtures, random instances and a simulated execution rig shared by the
//! integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use planexec::auction::{FeedbackMode, Hub, Performer, PerformerSpec, SharedTime, Subscription, TimedWork, Transport};
use planexec::executor::{Executor, ExecutorConfig};
use planexec::knowledge::KnowledgeBase;
use planexec::pddl::{parse_condition, parse_domain, parse_problem, Domain};
use planexec::planner::{BuiltinSolver, Plan, SolveOutcome};

pub const ASSEMBLY_DOMAIN: &str = include_str!("../../fixtures/assembly_domain.pddl");
pub const ASSEMBLY_PROBLEM: &str = include_str!("../../fixtures/assembly_problem.pddl");
pub const LISTING: &str = include_str!("../../fixtures/listing1.plan");
pub const COOKING_DOMAIN: &str = include_str!("../../fixtures/cooking_domain.pddl");
pub const COOKING_PROBLEM: &str = include_str!("../../fixtures/cooking_problem.pddl");

pub fn kb_of(domain: &str, problem: &str) -> KnowledgeBase {
    let d = Arc::new(parse_domain(domain).unwrap());
    let p = parse_problem(problem, &d).unwrap();
    KnowledgeBase::from_problem(d, &p).unwrap()
}

pub const ZONES: [&str; 5] = ["kitchen", "zone_a", "zone_b", "zone_c", "charger_zone"];
pub const INGREDIENTS: [&str; 6] = ["flour_1", "eggs_1", "pasta_1", "tomato_1", "eggs_2", "potato_1"];
pub const DISHES: [&str; 3] = ["cake_1", "spaghetti_1", "omelet_1"];

/// A cooking problem with 1 to 3 robots at random zones, ingredients at
/// random places and a goal of one or two random literals.
pub fn random_cooking_problem(rng: &mut ChaCha8Rng) -> String {
    let robots = &["r2d2", "c3po", "bb8"][..rng.gen_range(1..=3)];
    let mut init = String::new();
    for r in robots {
        let z = ZONES[rng.gen_range(0..ZONES.len())];
        init += &format!("(robot_at {r} {z}) (battery_ok {r}) (idle {r}) (= (battery_level {r}) 900)\n");
    }
    for z in &ZONES[1..] {
        init += &format!("(connected kitchen {z}) (connected {z} kitchen)\n");
    }
    init += "(charger charger_zone)\n";
    for i in INGREDIENTS {
        init += &format!("(ingredient_at {i} {})\n", ZONES[rng.gen_range(0..4)]);
    }
    init += "(recipe cake_1 flour_1 eggs_1) (recipe spaghetti_1 pasta_1 tomato_1) (recipe omelet_1 eggs_2 potato_1)\n";
    let mut goal = Vec::new();
    for _ in 0..rng.gen_range(1..=2) {
        goal.push(match rng.gen_range(0..3) {
            0 => format!("(ingredient_at {} kitchen)", INGREDIENTS[rng.gen_range(0..6)]),
            1 => format!("(robot_at {} {})", robots[rng.gen_range(0..robots.len())], ZONES[rng.gen_range(0..5)]),
            _ => format!("(dish_cooked {})", DISHES[rng.gen_range(0..3)]),
        });
    }
    format!(
        "(define (problem random) (:domain cooking)
          (:objects {} - robot zone_a zone_b zone_c charger_zone - zone {} - ingredient
                    cake_1 - cake spaghetti_1 - spaghetti omelet_1 - omelet)
          (:init {init})
          (:goal (and {})))",
        robots.join(" "),
        INGREDIENTS.join(" "),
        goal.join(" ")
    )
}

/// Solves random cooking problems until one yields a non-empty plan of at
/// most `max_len` actions. Long searches give up early.
pub fn solved_cooking_instance(domain: &Arc<Domain>, rng: &mut ChaCha8Rng, max_len: usize) -> (KnowledgeBase, Plan) {
    let solver = BuiltinSolver { node_budget: 5_000 };
    loop {
        let problem = parse_problem(&random_cooking_problem(rng), domain).unwrap();
        let kb = KnowledgeBase::from_problem(domain.clone(), &problem).unwrap();
        if let Ok(SolveOutcome::Plan(p)) = solver.solve(domain, kb.state()) {
            if !p.is_empty() && p.len() <= max_len {
                return (kb, p);
            }
        }
    }
}

pub fn cooking_domain() -> Arc<Domain> {
    Arc::new(parse_domain(COOKING_DOMAIN).unwrap())
}

pub type Work = TimedWork<Box<dyn FnMut(&[String]) -> f64 + Send>>;

/// An executor with one simulated performer per action and object of the
/// action's first parameter type, all on a recording hub in virtual time.
pub struct Rig {
    pub time: SharedTime,
    pub hub: Arc<Hub>,
    pub exec: Executor,
    pub performers: Vec<(Performer<Work>, Subscription)>,
    pub now: f64,
}

pub const STEP: f64 = 0.1;

impl Rig {
    /// `duration` maps an action name and its arguments to seconds.
    pub fn new(kb: KnowledgeBase, feedback: FeedbackMode, duration: fn(&str, &[String]) -> f64) -> Rig {
        let time = SharedTime::default();
        let hub = Arc::new(Hub::with_clock(time.clone()).record());
        let domain = kb.domain().clone();
        let instances = kb.state().instances().clone();
        let exec = Executor::new("executor", kb, hub.clone(), ExecutorConfig::default()).unwrap();
        let mut performers = Vec::new();
        for action in &domain.actions {
            let first = &action.params[0].ty;
            for (obj, ty) in &instances {
                if !domain.is_subtype(ty, first) {
                    continue;
                }
                let spec = PerformerSpec::new(&format!("{obj}-{}", action.name), action.name.as_str()).specialized(&[obj.as_str()]);
                let name = action.name.to_string();
                let work: Work = TimedWork::new(Box::new(move |args| duration(&name, args)));
                performers.push((Performer::new(spec, work).with_feedback(feedback), hub.subscribe().unwrap()));
            }
        }
        Rig { time, hub, exec, performers, now: 0.0 }
    }

    pub fn performer(&mut self, id: &str) -> &mut Performer<Work> {
        &mut self.performers.iter_mut().find(|(p, _)| p.id() == id).unwrap().0
    }

    pub fn set_goal(&mut self, text: &str) {
        let kb = self.exec.kb();
        let objects: Vec<_> = kb.state().instances().clone().into_iter().collect();
        let goal = parse_condition(text, kb.domain(), &objects).unwrap();
        self.exec.kb_mut().set_goal(goal).unwrap();
    }

    /// Delivers messages at the current time until nobody has anything to say.
    pub fn settle(&mut self) {
        self.time.set(self.now);
        loop {
            let mut busy = false;
            for (p, sub) in &mut self.performers {
                for m in sub.drain() {
                    for out in p.handle(&m, self.now) {
                        self.hub.publish(&out).unwrap();
                        busy = true;
                    }
                }
                for out in p.poll(self.now) {
                    self.hub.publish(&out).unwrap();
                    busy = true;
                }
            }
            busy |= self.exec.tick(self.now).unwrap();
            if !busy {
                return;
            }
        }
    }

    /// Advances in fixed steps until `end` or until `stop` holds.
    pub fn run_until(&mut self, end: f64, stop: impl Fn(&Rig) -> bool) {
        self.settle();
        while self.now < end - 1e-9 && !stop(self) {
            self.now = ((self.now + STEP) * 10.0).round() / 10.0;
            self.settle();
        }
    }

    pub fn run_to_end(&mut self, limit: f64) {
        self.run_until(limit, |r| r.exec.status().state.is_terminal());
    }
}

/// Planned domain durations of the cooking actions.
pub fn cooking_duration(action: &str, _args: &[String]) -> f64 {
    match action {
        "move" => 3.8,
        "transport" => 8.8,
        "cook" => 21.0,
        _ => 30.0,
    }
}
