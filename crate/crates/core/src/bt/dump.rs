use std::fmt::Write;

use super::{BehaviorTree, BtNode, LeafKind};

fn label(node: &BtNode, tree: &BehaviorTree) -> String {
    match node {
        BtNode::Sequence { .. } => "Sequence".into(),
        BtNode::Parallel { .. } => "Parallel".into(),
        BtNode::ReactiveCheckPair { .. } => "ReactiveCheckPair".into(),
        BtNode::Leaf { kind, unit, .. } => format!("{kind:?} {unit} {}", tree.actions[*unit]),
    }
}

impl BehaviorTree {
    /// One node per line, two spaces of indentation per level.
    pub fn to_text(&self) -> String {
        fn walk(node: &BtNode, tree: &BehaviorTree, depth: usize, out: &mut String) {
            let _ = writeln!(out, "{}{}", "  ".repeat(depth), label(node, tree));
            for c in node.children() {
                walk(c, tree, depth + 1, out);
            }
        }
        let mut out = String::new();
        walk(&self.root, self, 0, &mut out);
        out
    }

    pub fn to_dot(&self) -> String {
        fn walk(node: &BtNode, tree: &BehaviorTree, next: &mut usize, out: &mut String) -> usize {
            let id = *next;
            *next += 1;
            let shape = match node {
                BtNode::Leaf { kind: LeafKind::ExecuteAction, .. } => "box, style=bold",
                BtNode::Leaf { .. } => "box",
                _ => "ellipse",
            };
            let _ = writeln!(out, "  b{id} [label=\"{}\", shape={shape}];", label(node, tree));
            for c in node.children() {
                let child = walk(c, tree, next, out);
                let _ = writeln!(out, "  b{id} -> b{child};");
            }
            id
        }
        let mut out = String::from("digraph bt {\n");
        walk(&self.root, self, &mut 0, &mut out);
        out.push_str("}\n");
        out
    }
}
