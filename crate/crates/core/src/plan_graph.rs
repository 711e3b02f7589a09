//! Partial-order view of a timed plan.
//!
//! Each plan item becomes a node. An edge `a -> b` means `b` must not start
//! before `a` has completed. Edges come from causal support (the latest
//! event that makes a condition true), from ordering a reader before a later
//! deleter of what it read, and from ordering earlier deleters before the
//! action that re-establishes a fact.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write};

use crate::knowledge::KnowledgeState;
use crate::pddl::{Condition, Domain, GroundAtom};
use crate::planner::{event_cmp, GroundedAction, Phase, Plan, PlanItem, PlannerError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GraphError {
    #[error("item {item}: {source}")]
    Grounding { item: usize, source: PlannerError },
    #[error("item {item}: numeric condition {condition} is not supported in plan graphs")]
    NumericCondition { item: usize, condition: String },
    #[error("item {item}: {literal} is not established")]
    Unsupported { item: usize, literal: String },
    #[error("item {deleter} falsifies {literal} while item {reader} needs it")]
    Threat { reader: usize, deleter: usize, literal: String },
    #[error("items {0:?} form a cycle")]
    Cycle(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphNode {
    pub item: PlanItem,
    pub action: GroundedAction,
}

impl GraphNode {
    pub fn start(&self) -> f64 {
        self.item.time
    }

    pub fn end(&self) -> f64 {
        self.item.time + self.action.duration
    }
}

/// Why an edge exists.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum EdgeReason {
    /// The producer's effect gives the consumer a condition: the atom for a
    /// positive condition, its removal for a negative one.
    Establishes(GroundAtom),
    /// The consumer falsifies something the producer relies on.
    Orders(GroundAtom),
}

impl fmt::Display for EdgeReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EdgeReason::Establishes(a) => write!(f, "establishes {a}"),
            EdgeReason::Orders(a) => write!(f, "orders {a}"),
        }
    }
}

/// Nodes are indexed like the plan's items.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: BTreeSet<(usize, usize)>,
    pub reasons: BTreeMap<(usize, usize), BTreeSet<EdgeReason>>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Need {
    Start,
    OverAll,
    End,
}

/// Something an action does to an atom at a point in time.
struct Touch {
    key: (f64, Phase),
    node: usize,
    value: bool,
}

pub fn build_graph(domain: &Domain, state: &KnowledgeState, plan: &Plan) -> Result<PlanGraph, GraphError> {
    let nodes: Vec<GraphNode> = plan
        .items
        .iter()
        .enumerate()
        .map(|(i, item)| {
            let action = item.ground(domain, state).map_err(|source| GraphError::Grounding { item: i, source })?;
            Ok(GraphNode { item: item.clone(), action })
        })
        .collect::<Result<_, GraphError>>()?;

    let touches_of = |atom: &GroundAtom| -> Vec<Touch> {
        let mut out = Vec::new();
        for (i, n) in nodes.iter().enumerate() {
            for (effect, key) in [(&n.action.eff_start, (n.start(), Phase::Start)), (&n.action.eff_end, (n.end(), Phase::End))] {
                // deletions apply before additions within one effect
                if effect.dels().any(|a| a.to_ground().as_ref() == Some(atom)) {
                    out.push(Touch { key, node: i, value: false });
                }
                if effect.adds().any(|a| a.to_ground().as_ref() == Some(atom)) {
                    out.push(Touch { key, node: i, value: true });
                }
            }
        }
        out.sort_by(|a, b| event_cmp(a.key, b.key));
        out
    };

    let mut reasons: BTreeMap<(usize, usize), BTreeSet<EdgeReason>> = BTreeMap::new();
    let mut add = |from: usize, to: usize, reason: EdgeReason| {
        reasons.entry((from, to)).or_default().insert(reason);
    };
    for (c, node) in nodes.iter().enumerate() {
        let conds = [(&node.action.cond_start, Need::Start), (&node.action.cond_overall, Need::OverAll), (&node.action.cond_end, Need::End)];
        for (cond, need) in conds {
            for lit in cond.literals() {
                let (atom, wanted) = match lit {
                    Condition::Atom(a) => (a, true),
                    Condition::Not(a) => (a, false),
                    other => {
                        return Err(GraphError::NumericCondition {
                            item: c,
                            condition: crate::pddl::print_condition(other),
                        })
                    }
                };
                let atom = atom.to_ground().expect("grounded actions are ground");
                let literal = crate::pddl::print_condition(lit);
                let touches = touches_of(&atom);
                let required = match need {
                    Need::Start | Need::OverAll => (node.start(), Phase::Start),
                    Need::End => (node.end(), Phase::End),
                };
                let self_start = need != Need::Start;
                let before = |t: &Touch| {
                    event_cmp(t.key, required).is_lt() || (self_start && t.node == c && t.key == required)
                };

                // latest touch strictly before the requirement decides the value
                let establisher = touches.iter().filter(|t| before(t)).last();
                let est_key = match establisher {
                    Some(t) if t.value == wanted => {
                        if t.node != c {
                            add(t.node, c, EdgeReason::Establishes(atom.clone()));
                        }
                        Some((t.key, t.node))
                    }
                    Some(_) => return Err(GraphError::Unsupported { item: c, literal }),
                    None if state.holds(&atom) == wanted => None,
                    None => return Err(GraphError::Unsupported { item: c, literal }),
                };

                for t in &touches {
                    if t.value == wanted || t.node == c {
                        continue;
                    }
                    let d = t.node;
                    if before(t) {
                        // earlier falsifier: keep it ahead of the establisher
                        if let Some((key, a)) = est_key {
                            if event_cmp(t.key, key).is_lt() && d != a {
                                if nodes[d].start() <= nodes[a].start() {
                                    add(d, a, EdgeReason::Orders(atom.clone()));
                                } else {
                                    return Err(GraphError::Threat { reader: c, deleter: d, literal: literal.clone() });
                                }
                            }
                        }
                        continue;
                    }
                    if need == Need::OverAll && event_cmp(t.key, (node.end(), Phase::End)).is_lt() {
                        return Err(GraphError::Threat { reader: c, deleter: d, literal: literal.clone() });
                    }
                    // later falsifier: runs after the reader
                    if nodes[d].start() >= node.start() {
                        add(c, d, EdgeReason::Orders(atom.clone()));
                    } else {
                        return Err(GraphError::Threat { reader: c, deleter: d, literal: literal.clone() });
                    }
                }
            }
        }
    }

    let edges = reasons.keys().copied().collect();
    let graph = PlanGraph { nodes, edges, reasons };
    graph.check_acyclic()?;
    Ok(graph)
}

impl PlanGraph {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn predecessors(&self, n: usize) -> Vec<usize> {
        self.edges.iter().filter(|(_, b)| *b == n).map(|(a, _)| *a).collect()
    }

    pub fn successors(&self, n: usize) -> Vec<usize> {
        self.edges.range((n, 0)..(n + 1, 0)).map(|(_, b)| *b).collect()
    }

    /// Nodes without predecessors, in index order.
    pub fn roots(&self) -> Vec<usize> {
        let targets: BTreeSet<usize> = self.edges.iter().map(|(_, b)| *b).collect();
        (0..self.nodes.len()).filter(|n| !targets.contains(n)).collect()
    }

    /// The producer that owns a node in a behavior tree: the smallest index.
    pub fn owner(&self, n: usize) -> Option<usize> {
        self.predecessors(n).into_iter().min()
    }

    pub fn sinks(&self) -> Vec<usize> {
        let sources: BTreeSet<usize> = self.edges.iter().map(|(a, _)| *a).collect();
        (0..self.nodes.len()).filter(|n| !sources.contains(n)).collect()
    }

    /// Every maximal path from a root to a sink.
    pub fn flows(&self) -> Vec<Vec<usize>> {
        fn walk(g: &PlanGraph, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            let last = *path.last().expect("non-empty");
            let next = g.successors(last);
            if next.is_empty() {
                out.push(path.clone());
            }
            for n in next {
                path.push(n);
                walk(g, path, out);
                path.pop();
            }
        }
        let mut out = Vec::new();
        for r in self.roots() {
            walk(self, &mut vec![r], &mut out);
        }
        out
    }

    /// Earliest completion time of every node if each starts as soon as all
    /// predecessors have completed.
    pub fn earliest_finish(&self) -> Vec<f64> {
        let mut finish = vec![0.0; self.nodes.len()];
        for n in self.topological_order() {
            let start = self.predecessors(n).iter().map(|&p| finish[p]).fold(0.0, f64::max);
            finish[n] = start + self.nodes[n].action.duration;
        }
        finish
    }

    /// Length of the longest duration-weighted path.
    pub fn critical_path(&self) -> f64 {
        self.earliest_finish().into_iter().fold(0.0, f64::max)
    }

    fn topological_order(&self) -> Vec<usize> {
        let mut indegree = vec![0usize; self.nodes.len()];
        for (_, b) in &self.edges {
            indegree[*b] += 1;
        }
        let mut ready: BTreeSet<usize> = (0..self.nodes.len()).filter(|&n| indegree[n] == 0).collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(n) = ready.pop_first() {
            order.push(n);
            for s in self.successors(n) {
                indegree[s] -= 1;
                if indegree[s] == 0 {
                    ready.insert(s);
                }
            }
        }
        order
    }

    fn check_acyclic(&self) -> Result<(), GraphError> {
        let order = self.topological_order();
        if order.len() == self.nodes.len() {
            return Ok(());
        }
        let done: BTreeSet<usize> = order.into_iter().collect();
        Err(GraphError::Cycle((0..self.nodes.len()).filter(|n| !done.contains(n)).collect()))
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph plan {\n  rankdir=LR;\n  node [shape=box];\n");
        for (i, n) in self.nodes.iter().enumerate() {
            let _ = writeln!(out, "  n{i} [label=\"{i}: {} @{}\"];", n.item, n.item.time);
        }
        for ((a, b), why) in &self.reasons {
            let label: Vec<String> = why.iter().map(|r| r.to_string()).collect();
            let _ = writeln!(out, "  n{a} -> n{b} [tooltip=\"{}\"];", label.join("; "));
        }
        out.push_str("}\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knowledge::KnowledgeBase;
    use crate::pddl::{parse_domain, parse_problem};
    use crate::planner::parse_plan_file;
    use std::sync::Arc;

    fn listing_graph() -> PlanGraph {
        let d = parse_domain(include_str!("../fixtures/assembly_domain.pddl")).unwrap();
        let p = parse_problem(include_str!("../fixtures/assembly_problem.pddl"), &d).unwrap();
        let kb = KnowledgeBase::from_problem(Arc::new(d.clone()), &p).unwrap();
        let plan = parse_plan_file(include_str!("../fixtures/listing1.plan"), &d).unwrap();
        build_graph(&d, kb.state(), &plan).unwrap()
    }

    #[test]
    fn listing_has_three_roots() {
        let g = listing_graph();
        assert_eq!(g.len(), 21);
        assert_eq!(g.roots(), vec![0, 1, 2]);
    }

    #[test]
    fn causal_edges_follow_the_robots() {
        let g = listing_graph();
        // rb1 moves to the body zone, then transports the body
        assert!(g.edges.contains(&(0, 3)));
        // the first assembly needs all three pieces
        for p in [3, 4, 5] {
            assert!(g.edges.contains(&(p, 6)), "missing {p} -> 6");
        }
        for (a, b) in &g.edges {
            assert!(g.nodes[*a].start() <= g.nodes[*b].start());
            assert_ne!(a, b);
        }
    }

    fn synthetic(edges: &[(usize, usize)], n: usize) -> PlanGraph {
        let d = parse_domain(include_str!("../fixtures/assembly_domain.pddl")).unwrap();
        let p = parse_problem(include_str!("../fixtures/assembly_problem.pddl"), &d).unwrap();
        let kb = KnowledgeBase::from_problem(Arc::new(d.clone()), &p).unwrap();
        let line: String = (0..n).map(|i| format!("{i}\t(move rb1 assembly_zone wheels_zone)\n")).collect();
        let plan = parse_plan_file(&line, &d).unwrap();
        let nodes = plan.items.iter().map(|it| GraphNode { item: it.clone(), action: it.ground(&d, kb.state()).unwrap() }).collect();
        let reasons = edges
            .iter()
            .map(|&e| (e, BTreeSet::from([EdgeReason::Orders(GroundAtom::parse("(x)").unwrap())])))
            .collect();
        PlanGraph { nodes, edges: edges.iter().copied().collect(), reasons }
    }

    #[test]
    fn chain_has_one_flow() {
        let g = synthetic(&[(0, 1), (1, 2)], 3);
        assert_eq!(g.flows(), vec![vec![0, 1, 2]]);
    }

    #[test]
    fn diamond_has_two_flows() {
        let g = synthetic(&[(0, 1), (0, 2), (1, 3), (2, 3)], 4);
        assert_eq!(g.flows(), vec![vec![0, 1, 3], vec![0, 2, 3]]);
        assert_eq!(g.roots(), vec![0]);
        assert_eq!(g.sinks(), vec![3]);
        let dot = g.to_dot();
        assert_eq!(dot.matches(" -> ").count(), 4);
        assert_eq!(dot.matches("[label=").count(), 4);
    }

    #[test]
    fn critical_path_is_at_most_the_plan_makespan() {
        let g = listing_graph();
        assert!(g.critical_path() <= 45.009 + 1e-9);
        assert!(g.critical_path() >= 5.0 * 3.0);
    }

    #[test]
    fn dot_lists_nodes_and_edges() {
        let dot = listing_graph().to_dot();
        assert!(dot.starts_with("digraph plan {"));
        assert!(dot.contains("n0 -> n3 [tooltip=\"establishes (robot_at rb1 body_car_zone); orders (robot_at rb1 assembly_zone)\"];"));
        assert!(dot.contains("n20 [label=\"20: (assemble rb1 assembly_zone whl_3 bc_3 stwhl_3 car_3) @40.008\"];"));
    }

    #[test]
    fn single_action_has_no_edges() {
        let d = parse_domain(include_str!("../fixtures/assembly_domain.pddl")).unwrap();
        let p = parse_problem(include_str!("../fixtures/assembly_problem.pddl"), &d).unwrap();
        let kb = KnowledgeBase::from_problem(Arc::new(d.clone()), &p).unwrap();
        let plan = parse_plan_file("0\t(move rb1 assembly_zone wheels_zone)", &d).unwrap();
        let g = build_graph(&d, kb.state(), &plan).unwrap();
        assert_eq!((g.len(), g.edges.len()), (1, 0));
        assert_eq!(g.to_dot().matches(" -> ").count(), 0);
    }

    #[test]
    fn unsupported_condition_is_an_error() {
        let d = parse_domain(include_str!("../fixtures/assembly_domain.pddl")).unwrap();
        let p = parse_problem(include_str!("../fixtures/assembly_problem.pddl"), &d).unwrap();
        let kb = KnowledgeBase::from_problem(Arc::new(d.clone()), &p).unwrap();
        let plan = parse_plan_file("0\t(transport rb1 bc_1 body_car_zone assembly_zone)", &d).unwrap();
        assert!(matches!(build_graph(&d, kb.state(), &plan), Err(GraphError::Unsupported { item: 0, .. })));
    }
}
