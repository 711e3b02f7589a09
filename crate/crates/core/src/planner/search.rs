//! Greedy best-first search guided by the additive heuristic.
//!
//! A successor applies one durative action in isolation: the start condition
//! must hold, the start effect is applied, then the over-all and end
//! conditions must hold before the end effect is applied. Open-list ties are
//! broken by an estimate of the parallel makespan, so that work spreads
//! across agents, then by the action's printed name, then by insertion order.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use crate::knowledge::KnowledgeState;
use crate::pddl::{Condition, Domain, GroundAtom};

use super::grounding::ground_all;
use super::{GroundedAction, Plan, PlanItem, PlannerError, SolveOutcome, EPSILON};

pub const DEFAULT_NODE_BUDGET: usize = 200_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuiltinSolver {
    /// Maximum number of expanded nodes before giving up with an error.
    pub node_budget: usize,
}

impl Default for BuiltinSolver {
    fn default() -> Self {
        BuiltinSolver { node_budget: DEFAULT_NODE_BUDGET }
    }
}

type AtomId = u32;

#[derive(Default)]
struct AtomTable {
    ids: HashMap<GroundAtom, AtomId>,
}

impl AtomTable {
    fn id(&mut self, atom: GroundAtom) -> AtomId {
        let next = self.ids.len() as AtomId;
        *self.ids.entry(atom).or_insert(next)
    }
}

struct Op {
    grounded: GroundedAction,
    rank: u32,
    start_pos: Vec<AtomId>,
    start_neg: Vec<AtomId>,
    later_pos: Vec<AtomId>,
    later_neg: Vec<AtomId>,
    start_add: Vec<AtomId>,
    start_del: Vec<AtomId>,
    end_add: Vec<AtomId>,
    end_del: Vec<AtomId>,
    /// Relaxed precondition: every positive condition not supplied by the
    /// action's own start effect.
    relaxed_pre: Vec<AtomId>,
    relaxed_add: Vec<AtomId>,
}

fn ids(atoms: impl Iterator<Item = GroundAtom>, table: &mut AtomTable) -> Vec<AtomId> {
    let mut v: Vec<AtomId> = atoms.map(|a| table.id(a)).collect();
    v.sort_unstable();
    v.dedup();
    v
}

fn ground_atoms<'a>(it: impl Iterator<Item = &'a crate::pddl::Atom> + 'a) -> impl Iterator<Item = GroundAtom> + 'a {
    it.map(|a| a.to_ground().expect("grounded actions are ground"))
}

/// Sorted set of true atoms with (ready, release) times per atom.
#[derive(Clone)]
struct Node {
    atoms: Vec<AtomId>,
    times: Vec<(f64, f64)>,
    makespan: f64,
    parent: usize,
    op: usize,
}

fn contains(set: &[AtomId], a: AtomId) -> bool {
    set.binary_search(&a).is_ok()
}

fn all_in(set: &[AtomId], xs: &[AtomId]) -> bool {
    xs.iter().all(|&x| contains(set, x))
}

fn none_in(set: &[AtomId], xs: &[AtomId]) -> bool {
    xs.iter().all(|&x| !contains(set, x))
}

/// Ordered set difference then union; both inputs sorted.
fn apply_sets(set: &[AtomId], del: &[AtomId], add: &[AtomId]) -> Vec<AtomId> {
    let mut out: Vec<AtomId> = set.iter().copied().filter(|a| !del.contains(a)).collect();
    for &a in add {
        if let Err(pos) = out.binary_search(&a) {
            out.insert(pos, a);
        }
    }
    out
}

/// Additive heuristic computed by a generalized Dijkstra sweep over the
/// delete relaxation.
struct Heuristic<'a> {
    ops: &'a [Op],
    goal: &'a [AtomId],
    /// Operators having each atom in their relaxed precondition.
    consumers: Vec<Vec<u32>>,
    free_ops: Vec<u32>,
    cost: Vec<u64>,
    missing: Vec<u32>,
    op_sum: Vec<u64>,
    is_goal: Vec<bool>,
    heap: BinaryHeap<Reverse<(u64, AtomId)>>,
}

impl<'a> Heuristic<'a> {
    fn new(ops: &'a [Op], n_atoms: usize, goal: &'a [AtomId]) -> Self {
        let mut consumers = vec![Vec::new(); n_atoms];
        let mut free_ops = Vec::new();
        for (i, op) in ops.iter().enumerate() {
            if op.relaxed_pre.is_empty() {
                free_ops.push(i as u32);
            }
            for &p in &op.relaxed_pre {
                consumers[p as usize].push(i as u32);
            }
        }
        let mut is_goal = vec![false; n_atoms];
        for &g in goal {
            is_goal[g as usize] = true;
        }
        Heuristic {
            ops,
            goal,
            consumers,
            free_ops,
            cost: vec![0; n_atoms],
            missing: vec![0; ops.len()],
            op_sum: vec![0; ops.len()],
            is_goal,
            heap: BinaryHeap::new(),
        }
    }

    fn relax(&mut self, op: usize, c: u64) {
        for &a in &self.ops[op].relaxed_add {
            if c < self.cost[a as usize] {
                self.cost[a as usize] = c;
                self.heap.push(Reverse((c, a)));
            }
        }
    }

    /// Sum over goal atoms of the relaxed cost of reaching them; `None` when
    /// some goal atom is unreachable even ignoring deletes.
    fn h_add(&mut self, state: &[AtomId]) -> Option<u64> {
        const INF: u64 = u64::MAX;
        self.cost.fill(INF);
        self.op_sum.fill(0);
        for (m, op) in self.missing.iter_mut().zip(self.ops) {
            *m = op.relaxed_pre.len() as u32;
        }
        self.heap.clear();
        for &a in state {
            self.cost[a as usize] = 0;
            self.heap.push(Reverse((0, a)));
        }
        for i in 0..self.free_ops.len() {
            self.relax(self.free_ops[i] as usize, 1);
        }
        let mut goals_left = self.goal.len();
        while let Some(Reverse((c, a))) = self.heap.pop() {
            if c > self.cost[a as usize] {
                continue;
            }
            if self.is_goal[a as usize] {
                goals_left -= 1;
                if goals_left == 0 {
                    break;
                }
            }
            for k in 0..self.consumers[a as usize].len() {
                let op = self.consumers[a as usize][k] as usize;
                self.op_sum[op] = self.op_sum[op].saturating_add(c);
                self.missing[op] -= 1;
                if self.missing[op] == 0 {
                    let oc = self.op_sum[op].saturating_add(1);
                    self.relax(op, oc);
                }
            }
        }
        let mut h: u64 = 0;
        for &g in self.goal {
            let c = self.cost[g as usize];
            if c == INF {
                return None;
            }
            h = h.saturating_add(c);
        }
        Some(h)
    }
}

#[derive(PartialEq, Eq, PartialOrd, Ord)]
struct Key {
    h: u64,
    makespan_ms: u64,
    end_ms: u64,
    rank: u32,
    seq: u64,
}

fn ms(t: f64) -> u64 {
    (t * 1000.0).round() as u64
}

impl BuiltinSolver {
    pub fn solve(&self, domain: &Domain, state: &KnowledgeState) -> Result<SolveOutcome, PlannerError> {
        let goal = state.goal();
        if goal.has_comparisons() {
            return Err(PlannerError::NumericCondition("goal".into()));
        }
        for a in &domain.actions {
            if a.cond_start.has_comparisons() || a.cond_overall.has_comparisons() || a.cond_end.has_comparisons() {
                return Err(PlannerError::NumericCondition(a.name.to_string()));
            }
        }

        let grounded = ground_all(domain, state)?;
        let mut table = AtomTable::default();
        let init: Vec<AtomId> = ids(state.atoms().iter().cloned(), &mut table);
        let goal_pos = ids(ground_atoms(goal.positive_atoms()), &mut table);
        let goal_neg = ids(ground_atoms(goal.negative_atoms()), &mut table);

        let mut names: Vec<(String, usize)> = grounded.iter().enumerate().map(|(i, g)| (g.to_string(), i)).collect();
        names.sort();
        let mut ranks = vec![0u32; grounded.len()];
        for (r, (_, i)) in names.iter().enumerate() {
            ranks[*i] = r as u32;
        }

        let mut ops = Vec::with_capacity(grounded.len());
        for (g, rank) in grounded.into_iter().zip(ranks) {
            let later_cond = Condition::conjunction([g.cond_overall.clone(), g.cond_end.clone()]);
            let start_pos = ids(ground_atoms(g.cond_start.positive_atoms()), &mut table);
            let start_neg = ids(ground_atoms(g.cond_start.negative_atoms()), &mut table);
            let later_pos = ids(ground_atoms(later_cond.positive_atoms()), &mut table);
            let later_neg = ids(ground_atoms(later_cond.negative_atoms()), &mut table);
            let start_add = ids(ground_atoms(g.eff_start.adds()), &mut table);
            let start_del = ids(ground_atoms(g.eff_start.dels()), &mut table);
            let end_add = ids(ground_atoms(g.eff_end.adds()), &mut table);
            let end_del = ids(ground_atoms(g.eff_end.dels()), &mut table);
            let mut relaxed_pre = start_pos.clone();
            relaxed_pre.extend(later_pos.iter().filter(|a| !start_add.contains(a)));
            relaxed_pre.sort_unstable();
            relaxed_pre.dedup();
            let mut relaxed_add = start_add.clone();
            relaxed_add.extend(&end_add);
            relaxed_add.sort_unstable();
            relaxed_add.dedup();
            ops.push(Op {
                grounded: g,
                rank,
                start_pos,
                start_neg,
                later_pos,
                later_neg,
                start_add,
                start_del,
                end_add,
                end_del,
                relaxed_pre,
                relaxed_add,
            });
        }
        let n_atoms = table.ids.len();
        let mut heuristic = Heuristic::new(&ops, n_atoms, &goal_pos);

        let is_goal = |atoms: &[AtomId]| all_in(atoms, &goal_pos) && none_in(atoms, &goal_neg);

        let root = Node { times: vec![(0.0, 0.0); init.len()], atoms: init, makespan: 0.0, parent: usize::MAX, op: usize::MAX };
        let Some(h0) = heuristic.h_add(&root.atoms) else {
            return Ok(SolveOutcome::NoPlan);
        };
        let mut nodes = vec![root];
        // best makespan per reached state; a cheaper duplicate reopens it
        let mut seen: HashMap<Vec<AtomId>, u64> = HashMap::new();
        seen.insert(nodes[0].atoms.clone(), 0);
        let mut open = BinaryHeap::new();
        let mut seq = 0u64;
        open.push(Reverse((Key { h: h0, makespan_ms: 0, end_ms: 0, rank: 0, seq }, 0usize)));
        let mut expanded = 0usize;

        while let Some(Reverse((key, idx))) = open.pop() {
            if seen.get(&nodes[idx].atoms).is_some_and(|&best| best < key.makespan_ms) {
                continue;
            }
            if is_goal(&nodes[idx].atoms) {
                return Ok(SolveOutcome::Plan(extract(&nodes, &ops, idx)));
            }
            if expanded >= self.node_budget {
                return Err(PlannerError::BudgetExhausted { budget: self.node_budget });
            }
            expanded += 1;
            for (oi, op) in ops.iter().enumerate() {
                let node = &nodes[idx];
                let s = &node.atoms;
                if !all_in(s, &op.start_pos) || !none_in(s, &op.start_neg) {
                    continue;
                }
                let mid = apply_sets(s, &op.start_del, &op.start_add);
                if !all_in(&mid, &op.later_pos) || !none_in(&mid, &op.later_neg) {
                    continue;
                }
                let next = apply_sets(&mid, &op.end_del, &op.end_add);
                let (times, end) = schedule(node, op, &next);
                let makespan = node.makespan.max(end);
                if seen.get(&next).is_some_and(|&best| best <= ms(makespan)) {
                    continue;
                }
                let Some(h) = heuristic.h_add(&next) else {
                    seen.insert(next, 0);
                    continue;
                };
                seen.insert(next.clone(), ms(makespan));
                seq += 1;
                let key = Key { h, makespan_ms: ms(makespan), end_ms: ms(end), rank: op.rank, seq };
                nodes.push(Node { atoms: next, times, makespan, parent: idx, op: oi });
                open.push(Reverse((key, nodes.len() - 1)));
            }
        }
        Ok(SolveOutcome::NoPlan)
    }
}

/// Earliest start of `op` after `node` given per-atom ready and release
/// times, and the resulting times for the successor's atoms.
fn schedule(node: &Node, op: &Op, next: &[AtomId]) -> (Vec<(f64, f64)>, f64) {
    let time_of = |a: AtomId| node.atoms.binary_search(&a).ok().map(|i| node.times[i]);
    let mut start: f64 = 0.0;
    for &p in op.start_pos.iter().chain(&op.later_pos) {
        if let Some((ready, _)) = time_of(p) {
            start = start.max(ready);
        }
    }
    for &d in op.start_del.iter().chain(&op.end_del) {
        if let Some((_, release)) = time_of(d) {
            start = start.max(release);
        }
    }
    let end = start + op.grounded.duration;
    let times = next
        .iter()
        .map(|&a| {
            if op.end_add.contains(&a) {
                (end, end)
            } else if op.start_add.contains(&a) && !op.end_del.contains(&a) {
                (start, end)
            } else {
                let (ready, release) = time_of(a).unwrap_or((0.0, 0.0));
                let read = op.start_pos.contains(&a) || op.later_pos.contains(&a);
                (ready, if read { release.max(end) } else { release })
            }
        })
        .collect();
    (times, end)
}

fn extract(nodes: &[Node], ops: &[Op], mut idx: usize) -> Plan {
    let mut chain = Vec::new();
    while nodes[idx].parent != usize::MAX {
        chain.push(nodes[idx].op);
        idx = nodes[idx].parent;
    }
    chain.reverse();
    let mut items = Vec::with_capacity(chain.len());
    let mut t_ms: u64 = 0;
    for oi in chain {
        let g = &ops[oi].grounded;
        let time = t_ms as f64 / 1000.0;
        items.push(PlanItem { time, action: g.name.clone(), args: g.args.clone(), duration: g.duration });
        t_ms = ms(time + g.duration + EPSILON);
    }
    Plan::new(items)
}
