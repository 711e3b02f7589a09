use crate::plan_graph::PlanGraph;

use super::{BehaviorTree, BtNode, LeafKind};

/// The five-step subtree executing one action.
pub fn expand_action_unit(unit: usize) -> BtNode {
    BtNode::sequence(vec![
        BtNode::leaf(LeafKind::WaitAtStartReqs, unit),
        BtNode::leaf(LeafKind::ApplyAtStartEffects, unit),
        BtNode::ReactiveCheckPair {
            check: Box::new(BtNode::leaf(LeafKind::CheckOverAll, unit)),
            body: Box::new(BtNode::leaf(LeafKind::ExecuteAction, unit)),
        },
        BtNode::leaf(LeafKind::CheckAtEndReqs, unit),
        BtNode::leaf(LeafKind::ApplyAtEndEffects, unit),
    ])
}

/// Compiles an acyclic plan graph.
///
/// Each node's unit lives under its owner, the producer with the smallest
/// index; the owner's branch first waits for the node's other producers.
/// Every other producer's branch gets a wait on the node instead. Several
/// successors of one node run under a parallel node.
pub fn graph_to_bt(graph: &PlanGraph) -> BehaviorTree {
    let actions = graph.nodes.iter().map(|n| n.action.clone()).collect();
    let roots = graph.roots();
    let mut branches: Vec<BtNode> = roots.iter().map(|&r| branch(graph, r)).collect();
    let root = if branches.len() == 1 {
        let only = branches.pop().expect("one branch");
        match only {
            BtNode::Sequence { mut children, .. } if children.len() == 1 => children.pop().expect("one child"),
            other => other,
        }
    } else {
        BtNode::parallel(branches)
    };
    BehaviorTree::new(root, actions)
}

fn branch(graph: &PlanGraph, n: usize) -> BtNode {
    let mut seq: Vec<BtNode> = graph
        .predecessors(n)
        .into_iter()
        .skip(1)
        .map(|p| BtNode::leaf(LeafKind::WaitForCompletion, p))
        .collect();
    seq.push(expand_action_unit(n));
    let mut next: Vec<BtNode> = graph
        .successors(n)
        .into_iter()
        .map(|s| if graph.owner(s) == Some(n) { branch(graph, s) } else { BtNode::leaf(LeafKind::WaitForCompletion, s) })
        .collect();
    match next.len() {
        0 => {}
        1 => match next.pop().expect("one successor") {
            BtNode::Sequence { children, .. } if !is_unit(&children) => seq.extend(children),
            other => seq.push(other),
        },
        _ => seq.push(BtNode::parallel(next)),
    }
    BtNode::sequence(seq)
}

/// True for the children of an expanded action unit, which stay grouped.
fn is_unit(children: &[BtNode]) -> bool {
    matches!(children.first(), Some(BtNode::Leaf { kind: LeafKind::WaitAtStartReqs, .. }))
}
