use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use super::*;
use crate::knowledge::{KnowledgeBase, KnowledgeState};
use crate::pddl::{parse_domain, parse_problem, Domain, GroundAtom};
use crate::plan_graph::{build_graph, EdgeReason, GraphNode, PlanGraph};
use crate::planner::parse_plan_file;

struct Ctx {
    state: KnowledgeState,
    now: f64,
    started: HashMap<usize, f64>,
    activations: HashMap<usize, usize>,
    cancelled: Vec<usize>,
    failing: BTreeSet<usize>,
    /// Whether the watched atom held when each unit first executed.
    watch: Option<GroundAtom>,
    seen_at_execute: HashMap<usize, bool>,
}

impl Ctx {
    fn new(state: KnowledgeState) -> Self {
        Ctx {
            state,
            now: 0.0,
            started: HashMap::new(),
            activations: HashMap::new(),
            cancelled: Vec::new(),
            failing: BTreeSet::new(),
            watch: None,
            seen_at_execute: HashMap::new(),
        }
    }
}

impl ExecutionContext for Ctx {
    fn evaluate(&self, condition: &Condition) -> Result<bool, EvalError> {
        self.state.evaluate(condition)
    }

    fn apply(&mut self, effect: &Effect) -> Result<(), String> {
        self.state.apply(effect).map_err(|e| e.to_string())
    }

    fn execute(&mut self, unit: usize, action: &GroundedAction) -> ExecStatus {
        if !self.started.contains_key(&unit) {
            self.started.insert(unit, self.now);
            *self.activations.entry(unit).or_default() += 1;
            if let Some(w) = &self.watch {
                self.seen_at_execute.insert(unit, self.state.holds(w));
            }
        }
        if self.failing.contains(&unit) {
            return ExecStatus::Failed("boom".into());
        }
        let elapsed = self.now - self.started[&unit];
        if elapsed + 1e-9 >= action.duration {
            ExecStatus::Succeeded
        } else {
            ExecStatus::Running { completion: elapsed / action.duration }
        }
    }

    fn cancel(&mut self, unit: usize) {
        self.cancelled.push(unit);
    }

    fn now(&self) -> f64 {
        self.now
    }
}

fn assembly() -> (Domain, KnowledgeState) {
    let d = parse_domain(include_str!("../../fixtures/assembly_domain.pddl")).unwrap();
    let p = parse_problem(include_str!("../../fixtures/assembly_problem.pddl"), &d).unwrap();
    let kb = KnowledgeBase::from_problem(Arc::new(d.clone()), &p).unwrap();
    (d, kb.state().clone())
}

fn listing() -> (PlanGraph, KnowledgeState) {
    let (d, s) = assembly();
    let plan = parse_plan_file(include_str!("../../fixtures/listing1.plan"), &d).unwrap();
    (build_graph(&d, &s, &plan).unwrap(), s)
}

/// Graph over `n` copies of one move action with the given edges.
fn synthetic(n: usize, edges: &[(usize, usize)]) -> PlanGraph {
    let (d, s) = assembly();
    let text: String = (0..n).map(|i| format!("{i}\t(move rb1 assembly_zone wheels_zone)\n")).collect();
    let plan = parse_plan_file(&text, &d).unwrap();
    let nodes = plan.items.iter().map(|it| GraphNode { item: it.clone(), action: it.ground(&d, &s).unwrap() }).collect();
    let reasons = edges
        .iter()
        .map(|&e| (e, BTreeSet::from([EdgeReason::Orders(GroundAtom::parse("(x)").unwrap())])))
        .collect();
    PlanGraph { nodes, edges: edges.iter().copied().collect(), reasons }
}

/// Advances virtual time in `step` increments until the tree finishes.
fn run(tree: &mut BehaviorTree, ctx: &mut Ctx, step: f64, limit: f64) -> TickStatus {
    loop {
        let s = tree.tick_until_quiescent(ctx);
        if s != TickStatus::Running || ctx.now > limit {
            return s;
        }
        ctx.now += step;
    }
}

#[test]
fn listing_root_has_three_branches() {
    let (g, _) = listing();
    let tree = graph_to_bt(&g);
    match &tree.root {
        BtNode::Parallel { children, .. } => assert_eq!(children.len(), 3),
        other => panic!("root is {other:?}"),
    }
}

#[test]
fn every_action_executes_exactly_once_in_the_tree() {
    let (g, _) = listing();
    let tree = graph_to_bt(&g);
    let mut executes: Vec<usize> =
        tree.root.leaves().into_iter().filter(|(k, _)| *k == LeafKind::ExecuteAction).map(|(_, u)| u).collect();
    executes.sort();
    assert_eq!(executes, (0..21).collect::<Vec<_>>());
}

#[test]
fn listing_runs_to_success() {
    let (g, s) = listing();
    let mut tree = graph_to_bt(&g);
    let mut ctx = Ctx::new(s);
    assert_eq!(run(&mut tree, &mut ctx, 0.1, 1000.0), TickStatus::Success);
    assert!(tree.units.iter().all(|u| u.phase == UnitPhase::FinishedOk));
    assert!(ctx.activations.values().all(|&n| n == 1));
    assert_eq!(ctx.activations.len(), 21);
    for c in ["car_1", "car_2", "car_3"] {
        assert!(ctx.state.holds(&GroundAtom::parse(&format!("(car_assembled {c})")).unwrap()));
    }
}

#[test]
fn instant_actions_finish_in_one_instant() {
    let (g, s) = listing();
    let mut tree = graph_to_bt(&g);
    for a in &mut tree.actions {
        a.duration = 0.0;
    }
    let mut ctx = Ctx::new(s);
    assert_eq!(tree.tick_until_quiescent(&mut ctx), TickStatus::Success);
}

#[test]
fn diamond_sink_has_one_unit_and_one_wait() {
    let g = synthetic(4, &[(0, 1), (0, 2), (1, 3), (2, 3)]);
    let tree = graph_to_bt(&g);
    let leaves = tree.root.leaves();
    let count = |kind| leaves.iter().filter(|(k, u)| *k == kind && *u == 3).count();
    assert_eq!(count(LeafKind::ExecuteAction), 1);
    assert_eq!(count(LeafKind::WaitAtStartReqs), 1);
    assert_eq!(count(LeafKind::WaitForCompletion), 1);
}

#[test]
fn single_node_tree_is_its_unit() {
    let g = synthetic(1, &[]);
    assert_eq!(graph_to_bt(&g).root, expand_action_unit(0));
}

#[test]
fn join_starts_after_all_producers() {
    // unit 2 depends on a short and a long producer
    let mut g = synthetic(3, &[(0, 2), (1, 2)]);
    g.nodes[0].action.duration = 1.0;
    g.nodes[1].action.duration = 3.0;
    g.nodes[2].action.duration = 1.0;
    for n in &mut g.nodes {
        n.action.cond_start = Condition::empty();
        n.action.eff_start = Effect::default();
        n.action.eff_end = Effect::default();
    }
    let mut tree = graph_to_bt(&g);
    let (_, s) = assembly();
    let mut ctx = Ctx::new(s);
    assert_eq!(run(&mut tree, &mut ctx, 0.5, 100.0), TickStatus::Success);
    assert!((ctx.started[&2] - 3.0).abs() < 1e-9);
    assert!((ctx.now - 4.0).abs() < 1e-9);
}

#[test]
fn parallel_with_running_child_is_running() {
    let g = synthetic(2, &[]);
    let mut tree = BehaviorTree::new(
        BtNode::parallel(vec![BtNode::leaf(LeafKind::WaitForCompletion, 0), BtNode::leaf(LeafKind::WaitForCompletion, 1)]),
        g.nodes.iter().map(|n| n.action.clone()).collect(),
    );
    tree.units[0].phase = UnitPhase::FinishedOk;
    let (_, s) = assembly();
    assert_eq!(tree.tick(&mut Ctx::new(s)), TickStatus::Running);
}

#[test]
fn sequence_stops_at_first_failure() {
    let g = synthetic(3, &[]);
    let mut tree = BehaviorTree::new(
        BtNode::sequence(vec![
            BtNode::leaf(LeafKind::WaitForCompletion, 0),
            BtNode::leaf(LeafKind::WaitForCompletion, 1),
            BtNode::leaf(LeafKind::ExecuteAction, 2),
        ]),
        g.nodes.iter().map(|n| n.action.clone()).collect(),
    );
    tree.units[0].phase = UnitPhase::FinishedOk;
    tree.units[1].phase = UnitPhase::FinishedFail;
    let (_, s) = assembly();
    let mut ctx = Ctx::new(s);
    assert_eq!(tree.tick(&mut ctx), TickStatus::Failure);
    assert_eq!(tree.units[2].phase, UnitPhase::Pending);
    assert!(ctx.activations.is_empty());
}

#[test]
fn start_effects_are_visible_before_execution() {
    let (g, s) = listing();
    let mut tree = graph_to_bt(&g);
    let mut ctx = Ctx::new(s);
    ctx.watch = Some(GroundAtom::parse("(robot_at rb1 assembly_zone)").unwrap());
    tree.tick_until_quiescent(&mut ctx);
    // unit 0 moves rb1 away and deletes the atom at start
    assert_eq!(ctx.seen_at_execute.get(&0), Some(&false));
}

#[test]
fn end_effects_only_on_success() {
    let (g, s) = listing();
    let mut tree = graph_to_bt(&g);
    let mut ctx = Ctx::new(s);
    ctx.failing.insert(0);
    assert_eq!(run(&mut tree, &mut ctx, 0.1, 100.0), TickStatus::Failure);
    assert!(!ctx.state.holds(&GroundAtom::parse("(robot_at rb1 body_car_zone)").unwrap()));
    assert_eq!(tree.units[0].phase, UnitPhase::FinishedFail);
    assert_eq!(tree.units[0].failure.as_deref(), Some("boom"));
}

#[test]
fn failure_reaches_the_root_and_cancels_siblings() {
    let (g, s) = listing();
    let mut tree = graph_to_bt(&g);
    let mut ctx = Ctx::new(s);
    assert_eq!(tree.tick_until_quiescent(&mut ctx), TickStatus::Running);
    ctx.now = 1.0;
    ctx.failing.insert(1);
    assert_eq!(tree.tick(&mut ctx), TickStatus::Failure);
    let mut cancelled = ctx.cancelled.clone();
    cancelled.sort();
    assert_eq!(cancelled, vec![0, 2]);
    assert!(tree.units[3..].iter().all(|u| u.phase == UnitPhase::Pending));
}

#[test]
fn over_all_violation_cancels_execution() {
    let (g, s) = listing();
    let mut tree = graph_to_bt(&g);
    let mut ctx = Ctx::new(s);
    // run until the first assembly (unit 6) executes
    while tree.units[6].phase != UnitPhase::Executing {
        assert_eq!(tree.tick_until_quiescent(&mut ctx), TickStatus::Running);
        ctx.now += 0.1;
    }
    ctx.state = {
        let mut st = ctx.state.clone();
        st.apply(&Effect::new(vec![crate::pddl::EffectItem::Del(
            GroundAtom::parse("(robot_at rb1 assembly_zone)").unwrap().to_atom(),
        )]))
        .unwrap();
        st
    };
    assert_eq!(tree.tick(&mut ctx), TickStatus::Failure);
    assert!(ctx.cancelled.contains(&6));
    assert!(tree.units[6].failure.as_deref().unwrap().starts_with("over all condition violated"));
}

#[test]
fn start_wait_can_time_out() {
    let (d, s) = assembly();
    let plan = parse_plan_file("0\t(move rb1 wheels_zone assembly_zone)", &d).unwrap();
    let nodes = vec![GraphNode { item: plan.items[0].clone(), action: plan.items[0].ground(&d, &s).unwrap() }];
    let g = PlanGraph { nodes, edges: Default::default(), reasons: Default::default() };
    let mut tree = graph_to_bt(&g).with_config(BtConfig { start_timeout: Some(2.0) });
    let mut ctx = Ctx::new(s);
    assert_eq!(run(&mut tree, &mut ctx, 0.5, 10.0), TickStatus::Failure);
    assert!((ctx.now - 2.0).abs() < 1e-9);
}

#[test]
fn dumps_name_every_unit() {
    let g = synthetic(4, &[(0, 1), (0, 2), (1, 3), (2, 3)]);
    let tree = graph_to_bt(&g);
    let text = tree.to_text();
    assert!(text.starts_with("Sequence\n  Sequence\n    WaitAtStartReqs 0 (move rb1 assembly_zone wheels_zone)\n"));
    assert!(text.contains("\n  Parallel\n"));
    let dot = tree.to_dot();
    assert_eq!(dot.matches("ExecuteAction").count(), 4);
}
