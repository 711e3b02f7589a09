mod common;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use planexec::auction::{FeedbackMode, MsgType};
use planexec::bt::{graph_to_bt, ExecStatus, ExecutionContext, TickStatus, UnitEventKind, UnitPhase};
use planexec::executor::RunState;
use planexec::knowledge::{apply, EvalError, KnowledgeBase, KnowledgeState};
use planexec::pddl::{Condition, Effect};
use planexec::plan_graph::build_graph;
use planexec::planner::{event_cmp, GroundedAction, Phase, Plan};

use common::{cooking_domain, cooking_duration, solved_cooking_instance, Rig};

const CASES: u32 = 16;

fn instance(seed: u64) -> (KnowledgeBase, Plan) {
    solved_cooking_instance(&cooking_domain(), &mut ChaCha8Rng::seed_from_u64(seed), 10)
}

/// Runs the plan to completion on simulated performers that take the planned
/// durations.
fn executed(seed: u64) -> (KnowledgeBase, Plan, Rig) {
    let (kb, plan) = instance(seed);
    let mut rig = Rig::new(kb.clone(), FeedbackMode::Quartiles, cooking_duration);
    rig.exec.execute_plan(plan.clone(), 0.0).unwrap();
    rig.run_to_end(plan.makespan() * 3.0 + 20.0);
    (kb, plan, rig)
}

/// Applies every plan effect at its planned time, ends before starts.
fn replay(domain: &planexec::pddl::Domain, initial: &KnowledgeState, plan: &Plan) -> KnowledgeState {
    let grounded: Vec<GroundedAction> = plan.items.iter().map(|i| i.ground(domain, initial).unwrap()).collect();
    let mut events: Vec<(f64, Phase, usize)> = Vec::new();
    for (n, i) in plan.items.iter().enumerate() {
        events.push((i.time, Phase::Start, n));
        events.push((i.time + grounded[n].duration, Phase::End, n));
    }
    events.sort_by(|a, b| event_cmp((a.0, a.1), (b.0, b.1)));
    let mut state = initial.clone();
    for (_, phase, n) in events {
        let effect = if phase == Phase::Start { &grounded[n].eff_start } else { &grounded[n].eff_end };
        apply(effect, &mut state).unwrap();
    }
    state
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(CASES))]

    #[test]
    fn runs_execute_each_action_once_after_its_producers(seed in any::<u64>()) {
        let (kb, plan, rig) = executed(seed);
        prop_assert_eq!(&rig.exec.status().state, &RunState::Succeeded);
        let tree = rig.exec.tree().unwrap();
        let events = tree.events();
        let mut started = vec![0; plan.len()];
        let mut at: HashMap<(usize, UnitEventKind), u64> = HashMap::new();
        for e in events {
            if e.kind == UnitEventKind::ExecutionStarted {
                started[e.unit] += 1;
            }
            at.entry((e.unit, e.kind)).or_insert(e.seq);
        }
        prop_assert!(started.iter().all(|&n| n == 1), "{:?}", started);
        let graph = build_graph(kb.domain(), kb.state(), &plan).unwrap();
        for &(a, b) in &graph.edges {
            let effect = at[&(a, UnitEventKind::EndEffectsApplied)];
            let ready = at[&(b, UnitEventKind::StartReqsMet)];
            prop_assert!(effect < ready, "{} -> {}", a, b);
        }
    }

    #[test]
    fn knowledge_matches_a_replay_of_the_plan(seed in any::<u64>()) {
        let (kb, plan, rig) = executed(seed);
        prop_assert_eq!(&rig.exec.status().state, &RunState::Succeeded);
        let expected = replay(kb.domain(), kb.state(), &plan);
        prop_assert_eq!(rig.exec.kb().state().atoms(), expected.atoms());
    }

    #[test]
    fn idle_performers_confirm_within_one_retry_interval(seed in any::<u64>()) {
        let (_, _, rig) = executed(seed);
        let retry = rig.exec.config().retry_interval;
        let log = rig.hub.history();
        let mut requested: BTreeMap<u64, f64> = BTreeMap::new();
        for e in &log {
            match e.msg.msg_type {
                MsgType::Request => {
                    requested.entry(e.msg.seq).or_insert(e.time);
                }
                MsgType::Confirm => {
                    let t0 = requested.remove(&e.msg.seq).expect("confirm follows a request");
                    prop_assert!(e.time - t0 <= retry + 1e-9);
                }
                _ => {}
            }
        }
        prop_assert!(requested.is_empty(), "{:?}", requested);
    }

    #[test]
    fn every_auction_ends_in_finish_or_cancel(seed in any::<u64>(), disturb in 0u8..3, when in 0.0..1.0f64, victim in any::<prop::sample::Index>()) {
        let (kb, plan) = instance(seed);
        let mut rig = Rig::new(kb, FeedbackMode::Quartiles, cooking_duration);
        let item = victim.get(&plan.items);
        if disturb == 1 {
            rig.performer(&format!("{}-{}", item.args[0], item.action)).work.fail_next = true;
        }
        rig.exec.execute_plan(plan.clone(), 0.0).unwrap();
        let horizon = plan.makespan() * 3.0 + 20.0;
        if disturb == 2 {
            rig.run_until(plan.makespan() * when, |r| r.exec.status().state.is_terminal());
            rig.exec.cancel(rig.now).unwrap();
        }
        rig.run_to_end(horizon);
        let end = rig.now;
        rig.run_until(end + 5.0, |_| false);
        prop_assert!(rig.exec.status().state.is_terminal());

        let mut kinds: BTreeMap<u64, BTreeSet<MsgType>> = BTreeMap::new();
        for e in rig.hub.history() {
            kinds.entry(e.msg.seq).or_default().insert(e.msg.msg_type);
        }
        for (seq, k) in &kinds {
            if k.contains(&MsgType::Request) {
                let finished = k.contains(&MsgType::Confirm) && k.contains(&MsgType::Finish);
                prop_assert!(finished || k.contains(&MsgType::Cancel), "auction {} saw only {:?}", seq, k);
            }
        }
        prop_assert!(rig.performers.iter().all(|(p, _)| p.is_idle()));
    }

    #[test]
    fn aborted_actions_keep_their_start_effects(seed in any::<u64>(), victim in any::<prop::sample::Index>()) {
        let (kb, plan) = instance(seed);
        let mut rig = Rig::new(kb, FeedbackMode::Quartiles, cooking_duration);
        let item = victim.get(&plan.items);
        let id = format!("{}-{}", item.args[0], item.action);
        rig.performer(&id).work.fail_next = true;
        rig.exec.execute_plan(plan.clone(), 0.0).unwrap();
        rig.run_to_end(plan.makespan() * 3.0 + 20.0);

        let RunState::Failed(reason) = rig.exec.status().state.clone() else {
            return Err(TestCaseError::fail(format!("{:?}", rig.exec.status().state)));
        };
        let tree = rig.exec.tree().unwrap();
        let first = tree.events().iter().find(|e| e.kind == UnitEventKind::Failed).expect("a unit failed").unit;
        let action = &tree.actions[first];
        prop_assert!(reason.contains(&action.to_string()), "{} vs {}", reason, action);
        prop_assert_eq!(rig.exec.status().actions[first].phase, UnitPhase::FinishedFail);

        // atoms no other started unit touches keep the aborted start effect
        let touched_elsewhere = |atom: &planexec::pddl::Atom| {
            (0..tree.units.len()).filter(|&u| u != first && tree.units[u].phase != UnitPhase::Pending).any(|u| {
                let a = &tree.actions[u];
                [&a.eff_start, &a.eff_end].iter().any(|e| e.adds().chain(e.dels()).any(|x| x == atom))
            })
        };
        let state = rig.exec.kb().state();
        for a in action.eff_start.adds().filter(|a| !touched_elsewhere(a)) {
            prop_assert!(state.holds(&a.to_ground().unwrap()), "{}", a);
        }
        for a in action.eff_start.dels().filter(|a| !touched_elsewhere(a)) {
            prop_assert!(!state.holds(&a.to_ground().unwrap()), "{}", a);
        }
    }
}

/// Every action takes its planned duration; one chosen unit fails once a
/// fraction of that duration has passed.
struct Failing {
    state: KnowledgeState,
    now: f64,
    started: HashMap<usize, f64>,
    victim: usize,
    at: f64,
}

impl ExecutionContext for Failing {
    fn evaluate(&self, condition: &Condition) -> Result<bool, EvalError> {
        self.state.evaluate(condition)
    }

    fn apply(&mut self, effect: &Effect) -> Result<(), String> {
        self.state.apply(effect).map_err(|e| e.to_string())
    }

    fn execute(&mut self, unit: usize, action: &GroundedAction) -> ExecStatus {
        let start = *self.started.entry(unit).or_insert(self.now);
        let elapsed = self.now - start;
        if unit == self.victim && elapsed + 1e-9 >= self.at * action.duration {
            ExecStatus::Failed("broken".into())
        } else if elapsed + 1e-9 >= action.duration {
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

proptest! {
    #![proptest_config(ProptestConfig::with_cases(CASES))]

    #[test]
    fn a_failing_leaf_fails_the_root_in_the_same_tick(seed in any::<u64>(), victim in any::<prop::sample::Index>(), at in 0.0..1.0f64) {
        let (kb, plan) = instance(seed);
        let graph = build_graph(kb.domain(), kb.state(), &plan).unwrap();
        let mut tree = graph_to_bt(&graph);
        let victim = victim.index(plan.len());
        let mut ctx = Failing { state: kb.state().clone(), now: 0.0, started: HashMap::new(), victim, at };
        let mut ticks = 0;
        loop {
            let seen = tree.events().len();
            let status = tree.tick(&mut ctx);
            let failed_now = tree.events()[seen..].iter().any(|e| e.kind == UnitEventKind::Failed);
            if failed_now {
                prop_assert_eq!(status, TickStatus::Failure);
                break;
            }
            prop_assert_eq!(status, TickStatus::Running, "the victim never ran");
            ticks += 1;
            prop_assert!(ticks < 100_000);
            if tree.events().len() == seen {
                ctx.now += 0.1;
            }
        }
    }
}
