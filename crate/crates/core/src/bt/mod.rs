//! Behavior trees compiled from plan graphs.
//!
//! Every plan action expands into a five-step unit: wait for the start
//! conditions, apply the start effects, execute while monitoring the
//! over-all conditions, check the end conditions, apply the end effects.
//! Units are arranged so that independent flows run in parallel and a node
//! with several producers starts only after all of them have completed.

mod build;
mod dump;

use crate::knowledge::EvalError;
use crate::pddl::{Condition, Effect};
use crate::planner::GroundedAction;

pub use build::{expand_action_unit, graph_to_bt};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TickStatus {
    Success,
    Failure,
    Running,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum UnitPhase {
    Pending,
    Started,
    Executing,
    FinishedOk,
    FinishedFail,
}

impl UnitPhase {
    pub fn is_finished(self) -> bool {
        matches!(self, UnitPhase::FinishedOk | UnitPhase::FinishedFail)
    }
}

/// Shared record of one action's progress through its unit.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionUnitState {
    pub phase: UnitPhase,
    pub completion: f64,
    pub failure: Option<String>,
}

impl Default for ActionUnitState {
    fn default() -> Self {
        ActionUnitState { phase: UnitPhase::Pending, completion: 0.0, failure: None }
    }
}

/// Progress reported by the execution backend.
#[derive(Debug, Clone, PartialEq)]
pub enum ExecStatus {
    Running { completion: f64 },
    Succeeded,
    Failed(String),
}

/// What the tree needs from its surroundings: the knowledge base, an
/// execution backend and a clock.
pub trait ExecutionContext {
    fn evaluate(&self, condition: &Condition) -> Result<bool, EvalError>;
    fn apply(&mut self, effect: &Effect) -> Result<(), String>;
    /// Starts the action on first call for `unit`, then reports its progress.
    fn execute(&mut self, unit: usize, action: &GroundedAction) -> ExecStatus;
    fn cancel(&mut self, unit: usize);
    fn now(&self) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeafKind {
    WaitAtStartReqs,
    ApplyAtStartEffects,
    CheckOverAll,
    ExecuteAction,
    CheckAtEndReqs,
    ApplyAtEndEffects,
    WaitForCompletion,
}

/// A tree node. Control nodes keep the memory needed between ticks.
#[derive(Debug, Clone, PartialEq)]
pub enum BtNode {
    Sequence { children: Vec<BtNode>, cursor: usize },
    Parallel { children: Vec<BtNode>, done: Vec<Option<TickStatus>> },
    ReactiveCheckPair { check: Box<BtNode>, body: Box<BtNode> },
    Leaf { kind: LeafKind, unit: usize, done: Option<TickStatus>, since: Option<f64> },
}

impl BtNode {
    pub fn sequence(children: Vec<BtNode>) -> Self {
        BtNode::Sequence { children, cursor: 0 }
    }

    pub fn parallel(children: Vec<BtNode>) -> Self {
        let done = vec![None; children.len()];
        BtNode::Parallel { children, done }
    }

    pub fn leaf(kind: LeafKind, unit: usize) -> Self {
        BtNode::Leaf { kind, unit, done: None, since: None }
    }

    pub fn children(&self) -> Vec<&BtNode> {
        match self {
            BtNode::Sequence { children, .. } | BtNode::Parallel { children, .. } => children.iter().collect(),
            BtNode::ReactiveCheckPair { check, body } => vec![check, body],
            BtNode::Leaf { .. } => Vec::new(),
        }
    }

    /// All leaves in depth-first order.
    pub fn leaves(&self) -> Vec<(LeafKind, usize)> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<(LeafKind, usize)>) {
        match self {
            BtNode::Leaf { kind, unit, .. } => out.push((*kind, *unit)),
            _ => self.children().into_iter().for_each(|c| c.collect_leaves(out)),
        }
    }
}

/// Something that happened to a unit, in tick order.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitEvent {
    pub seq: u64,
    pub time: f64,
    pub unit: usize,
    pub kind: UnitEventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnitEventKind {
    StartReqsMet,
    StartEffectsApplied,
    ExecutionStarted,
    ExecutionFinished,
    EndEffectsApplied,
    Failed,
    Cancelled,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BtConfig {
    /// Seconds a unit may wait for its start conditions; `None` waits forever.
    pub start_timeout: Option<f64>,
}

/// A compiled tree with one unit record per plan action.
#[derive(Debug, Clone)]
pub struct BehaviorTree {
    pub root: BtNode,
    pub actions: Vec<GroundedAction>,
    pub units: Vec<ActionUnitState>,
    pub config: BtConfig,
    events: Vec<UnitEvent>,
    generation: u64,
    result: Option<TickStatus>,
}

impl BehaviorTree {
    pub fn new(root: BtNode, actions: Vec<GroundedAction>) -> Self {
        let units = vec![ActionUnitState::default(); actions.len()];
        BehaviorTree { root, actions, units, config: BtConfig::default(), events: Vec::new(), generation: 0, result: None }
    }

    pub fn with_config(mut self, config: BtConfig) -> Self {
        self.config = config;
        self
    }

    pub fn events(&self) -> &[UnitEvent] {
        &self.events
    }

    /// Counter bumped by every observable state change.
    pub fn generation(&self) -> u64 {
        self.generation
    }

    /// Final status once the root has finished.
    pub fn result(&self) -> Option<TickStatus> {
        self.result
    }

    /// Ticks the root once. Once finished, the stored result is returned.
    pub fn tick(&mut self, ctx: &mut dyn ExecutionContext) -> TickStatus {
        if let Some(r) = self.result {
            return r;
        }
        let mut root = std::mem::replace(&mut self.root, BtNode::sequence(Vec::new()));
        let status = self.tick_node(&mut root, ctx);
        self.root = root;
        if status != TickStatus::Running {
            self.result = Some(status);
            self.generation += 1;
            if status == TickStatus::Failure {
                self.halt(ctx);
            }
        }
        status
    }

    /// Ticks repeatedly until the tree finishes or a tick changes nothing, so
    /// that everything enabled at the current instant happens at that instant.
    pub fn tick_until_quiescent(&mut self, ctx: &mut dyn ExecutionContext) -> TickStatus {
        loop {
            let before = self.generation;
            let status = self.tick(ctx);
            if status != TickStatus::Running || self.generation == before {
                return status;
            }
        }
    }

    /// Cancels every executing unit and marks started units failed. Units
    /// that never started stay pending.
    pub fn halt(&mut self, ctx: &mut dyn ExecutionContext) {
        let now = ctx.now();
        for i in 0..self.units.len() {
            match self.units[i].phase {
                UnitPhase::Executing => {
                    ctx.cancel(i);
                    self.fail(i, "cancelled", now);
                    self.record(i, UnitEventKind::Cancelled, now);
                }
                UnitPhase::Started => self.fail(i, "cancelled", now),
                _ => {}
            }
        }
        if self.result.is_none() {
            self.result = Some(TickStatus::Failure);
        }
    }

    fn record(&mut self, unit: usize, kind: UnitEventKind, time: f64) {
        self.generation += 1;
        let seq = self.events.len() as u64;
        self.events.push(UnitEvent { seq, time, unit, kind });
    }

    fn set_phase(&mut self, unit: usize, phase: UnitPhase) {
        let u = &mut self.units[unit];
        debug_assert!(phase >= u.phase, "unit phases only move forward");
        if u.phase != phase {
            u.phase = phase;
            self.generation += 1;
        }
    }

    fn fail(&mut self, unit: usize, reason: &str, time: f64) {
        if self.units[unit].phase.is_finished() {
            return;
        }
        self.units[unit].failure = Some(reason.to_string());
        self.set_phase(unit, UnitPhase::FinishedFail);
        self.record(unit, UnitEventKind::Failed, time);
    }

    fn tick_node(&mut self, node: &mut BtNode, ctx: &mut dyn ExecutionContext) -> TickStatus {
        match node {
            BtNode::Sequence { children, cursor } => {
                while *cursor < children.len() {
                    match self.tick_node(&mut children[*cursor], ctx) {
                        TickStatus::Success => {
                            *cursor += 1;
                            self.generation += 1;
                        }
                        other => return other,
                    }
                }
                TickStatus::Success
            }
            BtNode::Parallel { children, done } => {
                let mut running = false;
                for (child, slot) in children.iter_mut().zip(done.iter_mut()) {
                    if let Some(s) = slot {
                        debug_assert_eq!(*s, TickStatus::Success);
                        continue;
                    }
                    match self.tick_node(child, ctx) {
                        TickStatus::Running => running = true,
                        TickStatus::Success => {
                            *slot = Some(TickStatus::Success);
                            self.generation += 1;
                        }
                        TickStatus::Failure => return TickStatus::Failure,
                    }
                }
                if running {
                    TickStatus::Running
                } else {
                    TickStatus::Success
                }
            }
            BtNode::ReactiveCheckPair { check, body } => {
                if let BtNode::Leaf { done: Some(s), .. } = body.as_ref() {
                    return *s;
                }
                let executing = match body.as_ref() {
                    BtNode::Leaf { unit, .. } => self.units[*unit].phase == UnitPhase::Executing,
                    _ => false,
                };
                if self.tick_node(check, ctx) == TickStatus::Failure {
                    if let BtNode::Leaf { kind: LeafKind::ExecuteAction, unit, done, .. } = body.as_mut() {
                        if executing {
                            ctx.cancel(*unit);
                            self.record(*unit, UnitEventKind::Cancelled, ctx.now());
                        }
                        *done = Some(TickStatus::Failure);
                    }
                    return TickStatus::Failure;
                }
                self.tick_node(body, ctx)
            }
            BtNode::Leaf { kind, unit, done, since } => {
                if let Some(s) = done {
                    return *s;
                }
                let status = self.tick_leaf(*kind, *unit, since, ctx);
                // over-all checks are re-evaluated on every tick
                if status != TickStatus::Running && *kind != LeafKind::CheckOverAll {
                    *done = Some(status);
                    self.generation += 1;
                }
                status
            }
        }
    }

    fn tick_leaf(
        &mut self,
        kind: LeafKind,
        unit: usize,
        since: &mut Option<f64>,
        ctx: &mut dyn ExecutionContext,
    ) -> TickStatus {
        let now = ctx.now();
        if kind != LeafKind::WaitForCompletion && self.units[unit].phase == UnitPhase::FinishedFail {
            return TickStatus::Failure;
        }
        match kind {
            LeafKind::WaitAtStartReqs => {
                let cond = self.actions[unit].cond_start.clone();
                match ctx.evaluate(&cond).map_err(|e| e.to_string()) {
                    Ok(true) => {
                        self.record(unit, UnitEventKind::StartReqsMet, now);
                        TickStatus::Success
                    }
                    Ok(false) => {
                        let first = *since.get_or_insert(now);
                        match self.config.start_timeout {
                            Some(limit) if now - first >= limit => {
                                self.fail(unit, "timed out waiting for start conditions", now);
                                TickStatus::Failure
                            }
                            _ => TickStatus::Running,
                        }
                    }
                    Err(e) => {
                        self.fail(unit, &e, now);
                        TickStatus::Failure
                    }
                }
            }
            LeafKind::ApplyAtStartEffects => {
                let effect = self.actions[unit].eff_start.clone();
                match ctx.apply(&effect) {
                    Ok(()) => {
                        self.set_phase(unit, UnitPhase::Started);
                        self.record(unit, UnitEventKind::StartEffectsApplied, now);
                        TickStatus::Success
                    }
                    Err(e) => {
                        self.fail(unit, &e, now);
                        TickStatus::Failure
                    }
                }
            }
            LeafKind::CheckOverAll => {
                let cond = self.actions[unit].cond_overall.clone();
                match ctx.evaluate(&cond).map_err(|e| e.to_string()) {
                    Ok(true) => TickStatus::Success,
                    Ok(false) => {
                        let reason = format!("over all condition violated: {}", crate::pddl::print_condition(&cond));
                        self.fail(unit, &reason, now);
                        TickStatus::Failure
                    }
                    Err(e) => {
                        self.fail(unit, &e, now);
                        TickStatus::Failure
                    }
                }
            }
            LeafKind::ExecuteAction => {
                if self.units[unit].phase < UnitPhase::Executing {
                    self.set_phase(unit, UnitPhase::Executing);
                    self.record(unit, UnitEventKind::ExecutionStarted, now);
                }
                let action = self.actions[unit].clone();
                match ctx.execute(unit, &action) {
                    ExecStatus::Running { completion } => {
                        if completion != self.units[unit].completion {
                            self.units[unit].completion = completion;
                        }
                        TickStatus::Running
                    }
                    ExecStatus::Succeeded => {
                        self.units[unit].completion = 1.0;
                        self.record(unit, UnitEventKind::ExecutionFinished, now);
                        TickStatus::Success
                    }
                    ExecStatus::Failed(reason) => {
                        self.fail(unit, &reason, now);
                        TickStatus::Failure
                    }
                }
            }
            LeafKind::CheckAtEndReqs => {
                let cond = self.actions[unit].cond_end.clone();
                match ctx.evaluate(&cond).map_err(|e| e.to_string()) {
                    Ok(true) => TickStatus::Success,
                    Ok(false) => {
                        let reason = format!("at end condition violated: {}", crate::pddl::print_condition(&cond));
                        self.fail(unit, &reason, now);
                        TickStatus::Failure
                    }
                    Err(e) => {
                        self.fail(unit, &e, now);
                        TickStatus::Failure
                    }
                }
            }
            LeafKind::ApplyAtEndEffects => {
                let effect = self.actions[unit].eff_end.clone();
                match ctx.apply(&effect) {
                    Ok(()) => {
                        self.set_phase(unit, UnitPhase::FinishedOk);
                        self.record(unit, UnitEventKind::EndEffectsApplied, now);
                        TickStatus::Success
                    }
                    Err(e) => {
                        self.fail(unit, &e, now);
                        TickStatus::Failure
                    }
                }
            }
            LeafKind::WaitForCompletion => match self.units[unit].phase {
                UnitPhase::FinishedOk => TickStatus::Success,
                UnitPhase::FinishedFail => TickStatus::Failure,
                _ => TickStatus::Running,
            },
        }
    }
}

#[cfg(test)]
mod tests;
