//! Plans for the knowledge base goal, compiles the plan into a behavior tree
//! and drives it, dispatching each action through an auction.
//!
//! The executor does no I/O of its own besides the transport and keeps no
//! clock: callers pass the current time to every operation. A real-time
//! driver calls [`Executor::tick`] at the configured period, the simulator
//! calls it whenever a message arrives or a deadline passes.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

use serde::Serialize;

use crate::auction::{ActionClient, AuctionMessage, ClientState, Subscription, Transport, TransportError};
use crate::bt::{graph_to_bt, BehaviorTree, BtConfig, ExecStatus, ExecutionContext, TickStatus, UnitPhase};
use crate::knowledge::{EvalError, KnowledgeBase};
use crate::pddl::{Condition, Effect};
use crate::plan_graph::{build_graph, GraphError, PlanGraph};
use crate::planner::{GroundedAction, Plan, PlannerError, SolveOutcome, SolverSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutorConfig {
    pub solver: SolverSpec,
    /// Seconds between ticks when driven in real time.
    pub tick_period: f64,
    /// Seconds an action may wait for its start conditions.
    pub action_wait_timeout: Option<f64>,
    /// Minimum seconds between two completion updates of one action.
    pub feedback_period: f64,
    pub retry_interval: f64,
}

impl Default for ExecutorConfig {
    fn default() -> Self {
        ExecutorConfig {
            solver: SolverSpec::default(),
            tick_period: 0.1,
            action_wait_timeout: None,
            feedback_period: 0.5,
            retry_interval: crate::auction::DEFAULT_RETRY_INTERVAL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum RunState {
    #[default]
    Idle,
    Planning,
    Executing,
    Succeeded,
    Failed(String),
    Cancelled,
}

impl RunState {
    pub fn is_terminal(&self) -> bool {
        matches!(self, RunState::Succeeded | RunState::Failed(_) | RunState::Cancelled)
    }

    pub fn label(&self) -> &'static str {
        match self {
            RunState::Idle => "idle",
            RunState::Planning => "planning",
            RunState::Executing => "executing",
            RunState::Succeeded => "succeeded",
            RunState::Failed(_) => "failed",
            RunState::Cancelled => "cancelled",
        }
    }
}

pub fn phase_label(phase: UnitPhase) -> &'static str {
    match phase {
        UnitPhase::Pending => "pending",
        UnitPhase::Started => "started",
        UnitPhase::Executing => "executing",
        UnitPhase::FinishedOk => "finished_ok",
        UnitPhase::FinishedFail => "finished_fail",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionStatus {
    /// `(name args)`
    pub action: String,
    pub phase: UnitPhase,
    pub completion: f64,
    pub performer: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlanRunStatus {
    pub plan_id: Option<u64>,
    pub state: RunState,
    pub actions: Vec<ActionStatus>,
    pub started_at: Option<f64>,
    pub finished_at: Option<f64>,
}

/// One line of the status stream.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatusEvent {
    pub time: f64,
    pub plan_id: u64,
    #[serde(flatten)]
    pub kind: StatusEventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum StatusEventKind {
    Plan {
        state: &'static str,
        #[serde(skip_serializing_if = "Option::is_none")]
        reason: Option<String>,
    },
    Action {
        index: usize,
        action: String,
        phase: &'static str,
        completion: f64,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum ExecError {
    #[error("a plan is already running")]
    Busy,
    #[error("the knowledge base has no goal")]
    NoGoal,
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Transport(#[from] TransportError),
}

struct Run {
    plan: Plan,
    graph: PlanGraph,
    tree: BehaviorTree,
    clients: BTreeMap<usize, ActionClient>,
    last_completion_event: Vec<f64>,
}

pub struct Executor {
    id: String,
    config: ExecutorConfig,
    kb: KnowledgeBase,
    transport: Arc<dyn Transport>,
    inbox: Subscription,
    next_plan_id: u64,
    next_seq: u64,
    status: PlanRunStatus,
    run: Option<Run>,
    events: Vec<StatusEvent>,
    sink: Option<Box<dyn Write + Send>>,
}

struct Ctx<'a> {
    kb: &'a mut KnowledgeBase,
    clients: &'a mut BTreeMap<usize, ActionClient>,
    outbox: &'a mut Vec<AuctionMessage>,
    id: &'a str,
    next_seq: &'a mut u64,
    retry_interval: f64,
    now: f64,
}

impl ExecutionContext for Ctx<'_> {
    fn evaluate(&self, condition: &Condition) -> Result<bool, EvalError> {
        self.kb.evaluate(condition)
    }

    fn apply(&mut self, effect: &Effect) -> Result<(), String> {
        self.kb.apply(effect).map_err(|e| e.to_string())
    }

    fn execute(&mut self, unit: usize, action: &GroundedAction) -> ExecStatus {
        let Some(client) = self.clients.get(&unit) else {
            let args: Vec<String> = action.args.iter().map(|a| a.to_string()).collect();
            *self.next_seq += 1;
            let (client, req) =
                ActionClient::start(self.id, *self.next_seq, action.name.as_str(), &args, self.retry_interval, self.now);
            self.clients.insert(unit, client);
            self.outbox.push(req);
            return ExecStatus::Running { completion: 0.0 };
        };
        match &client.machine.state {
            ClientState::Auctioning | ClientState::Confirmed { .. } | ClientState::Running { .. } => {
                ExecStatus::Running { completion: client.completion }
            }
            ClientState::Done { success: true, .. } => ExecStatus::Succeeded,
            ClientState::Done { performer, .. } => {
                let status = if client.status.is_empty() { "failed" } else { client.status.as_str() };
                ExecStatus::Failed(format!("{action} failed on {performer}: {status}"))
            }
            ClientState::Cancelled => ExecStatus::Failed(format!("{action} cancelled")),
        }
    }

    fn cancel(&mut self, unit: usize) {
        if let Some(c) = self.clients.get_mut(&unit) {
            self.outbox.extend(c.cancel(self.now));
        }
    }

    fn now(&self) -> f64 {
        self.now
    }
}

impl Executor {
    pub fn new(
        id: &str,
        kb: KnowledgeBase,
        transport: Arc<dyn Transport>,
        config: ExecutorConfig,
    ) -> Result<Self, TransportError> {
        let inbox = transport.subscribe()?;
        Ok(Executor {
            id: id.to_string(),
            config,
            kb,
            transport,
            inbox,
            next_plan_id: 0,
            next_seq: 0,
            status: PlanRunStatus::default(),
            run: None,
            events: Vec::new(),
            sink: None,
        })
    }

    /// Writes every status event as one JSON object per line.
    pub fn set_status_sink(&mut self, sink: Box<dyn Write + Send>) {
        self.sink = Some(sink);
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn config(&self) -> &ExecutorConfig {
        &self.config
    }

    pub fn kb(&self) -> &KnowledgeBase {
        &self.kb
    }

    pub fn kb_mut(&mut self) -> &mut KnowledgeBase {
        &mut self.kb
    }

    pub fn status(&self) -> &PlanRunStatus {
        &self.status
    }

    pub fn is_running(&self) -> bool {
        matches!(self.status.state, RunState::Planning | RunState::Executing)
    }

    pub fn plan(&self) -> Option<&Plan> {
        self.run.as_ref().map(|r| &r.plan)
    }

    pub fn graph(&self) -> Option<&PlanGraph> {
        self.run.as_ref().map(|r| &r.graph)
    }

    pub fn tree(&self) -> Option<&BehaviorTree> {
        self.run.as_ref().map(|r| &r.tree)
    }

    /// Status events produced since the last call.
    pub fn take_events(&mut self) -> Vec<StatusEvent> {
        std::mem::take(&mut self.events)
    }

    /// Solves for the current goal.
    pub fn plan_goal(&self) -> Result<SolveOutcome, ExecError> {
        if self.kb.state().goal().is_empty() {
            return Err(ExecError::NoGoal);
        }
        Ok(self.config.solver.solve(self.kb.domain(), self.kb.state())?)
    }

    /// Plans for the goal and starts executing the plan. Failures after a
    /// plan id is assigned end up in the status as well.
    pub fn execute_goal(&mut self, now: f64) -> Result<u64, ExecError> {
        if self.is_running() {
            return Err(ExecError::Busy);
        }
        if self.kb.state().goal().is_empty() {
            return Err(ExecError::NoGoal);
        }
        let plan_id = self.begin(now);
        self.set_state(RunState::Planning, now);
        match self.config.solver.solve(self.kb.domain(), self.kb.state()) {
            Ok(SolveOutcome::Plan(plan)) => self.launch(plan, now).map(|_| plan_id),
            Ok(SolveOutcome::NoPlan) => {
                self.set_state(RunState::Failed("no plan".into()), now);
                Ok(plan_id)
            }
            Err(e) => {
                self.set_state(RunState::Failed(e.to_string()), now);
                Err(e.into())
            }
        }
    }

    /// Executes a given plan against the current knowledge.
    pub fn execute_plan(&mut self, plan: Plan, now: f64) -> Result<u64, ExecError> {
        if self.is_running() {
            return Err(ExecError::Busy);
        }
        let plan_id = self.begin(now);
        self.launch(plan, now).map(|_| plan_id)
    }

    fn begin(&mut self, now: f64) -> u64 {
        self.next_plan_id += 1;
        self.run = None;
        self.status = PlanRunStatus { plan_id: Some(self.next_plan_id), started_at: Some(now), ..Default::default() };
        self.next_plan_id
    }

    fn launch(&mut self, plan: Plan, now: f64) -> Result<(), ExecError> {
        let graph = match build_graph(self.kb.domain(), self.kb.state(), &plan) {
            Ok(g) => g,
            Err(e) => {
                self.set_state(RunState::Failed(e.to_string()), now);
                return Err(e.into());
            }
        };
        let tree = graph_to_bt(&graph).with_config(BtConfig { start_timeout: self.config.action_wait_timeout });
        self.status.actions = graph
            .nodes
            .iter()
            .map(|n| ActionStatus {
                action: n.action.to_string(),
                phase: UnitPhase::Pending,
                completion: 0.0,
                performer: None,
            })
            .collect();
        let n = graph.nodes.len();
        self.run = Some(Run {
            plan,
            graph,
            tree,
            clients: BTreeMap::new(),
            last_completion_event: vec![f64::NEG_INFINITY; n],
        });
        self.set_state(RunState::Executing, now);
        self.tick(now)?;
        Ok(())
    }

    /// Processes incoming messages, retries and the tree. Returns whether
    /// anything was received or sent.
    pub fn tick(&mut self, now: f64) -> Result<bool, TransportError> {
        let mut outbox = Vec::new();
        let received = self.pump(now, &mut outbox);
        if self.status.state == RunState::Executing {
            let run = self.run.as_mut().expect("executing without a run");
            for c in run.clients.values_mut() {
                outbox.extend(c.poll(now));
            }
            let mut ctx = Ctx {
                kb: &mut self.kb,
                clients: &mut run.clients,
                outbox: &mut outbox,
                id: &self.id,
                next_seq: &mut self.next_seq,
                retry_interval: self.config.retry_interval,
                now,
            };
            let result = if run.tree.actions.is_empty() {
                TickStatus::Success
            } else {
                run.tree.tick_until_quiescent(&mut ctx)
            };
            self.refresh_actions(now);
            match result {
                TickStatus::Running => {}
                TickStatus::Success => {
                    let state = match self.kb.is_goal_satisfied() {
                        Ok(true) => RunState::Succeeded,
                        Ok(false) => RunState::Failed("goal not satisfied after execution".into()),
                        Err(e) => RunState::Failed(e.to_string()),
                    };
                    self.set_state(state, now);
                }
                TickStatus::Failure => {
                    let reason = self.failure_reason();
                    self.set_state(RunState::Failed(reason), now);
                }
            }
        }
        self.publish(&outbox)?;
        Ok(received || !outbox.is_empty())
    }

    fn pump(&mut self, now: f64, outbox: &mut Vec<AuctionMessage>) -> bool {
        let mut received = false;
        while let Some(msg) = self.inbox.try_recv() {
            if msg.recipient != self.id {
                continue;
            }
            received = true;
            if let Some(run) = self.run.as_mut() {
                if let Some(c) = run.clients.values_mut().find(|c| c.machine.seq == msg.seq) {
                    outbox.extend(c.handle(&msg, now));
                }
            }
        }
        received
    }

    fn publish(&self, outbox: &[AuctionMessage]) -> Result<(), TransportError> {
        outbox.iter().try_for_each(|m| self.transport.publish(m))
    }

    /// Earliest auction retry. Start timeouts are only noticed by ticks, so
    /// drivers that use them also tick periodically.
    pub fn next_deadline(&self) -> Option<f64> {
        if self.status.state != RunState::Executing {
            return None;
        }
        let run = self.run.as_ref()?;
        run.clients.values().filter_map(ActionClient::next_deadline).reduce(f64::min)
    }

    /// Cancels the running plan. Returns false when nothing was running.
    pub fn cancel(&mut self, now: f64) -> Result<bool, TransportError> {
        if !self.is_running() {
            return Ok(false);
        }
        let mut outbox = Vec::new();
        if let Some(run) = self.run.as_mut() {
            let mut ctx = Ctx {
                kb: &mut self.kb,
                clients: &mut run.clients,
                outbox: &mut outbox,
                id: &self.id,
                next_seq: &mut self.next_seq,
                retry_interval: self.config.retry_interval,
                now,
            };
            run.tree.halt(&mut ctx);
            for c in run.clients.values_mut() {
                outbox.extend(c.cancel(now));
            }
        }
        self.refresh_actions(now);
        self.set_state(RunState::Cancelled, now);
        self.publish(&outbox)?;
        Ok(true)
    }

    /// Confirm and finish times of every dispatched action of the current run.
    pub fn action_times(&self) -> Vec<(usize, Option<f64>, Option<f64>)> {
        self.run
            .as_ref()
            .map(|r| r.clients.iter().map(|(&u, c)| (u, c.confirmed_at, c.finished_at)).collect())
            .unwrap_or_default()
    }

    fn failure_reason(&self) -> String {
        let Some(run) = &self.run else { return "failed".into() };
        let mut failed: Vec<(u64, usize)> = run
            .tree
            .units
            .iter()
            .enumerate()
            .filter(|(_, u)| u.phase == UnitPhase::FinishedFail)
            .map(|(i, _)| {
                let seq = run.tree.events().iter().find(|e| e.unit == i).map_or(u64::MAX, |e| e.seq);
                (seq, i)
            })
            .collect();
        failed.sort();
        let first = failed
            .iter()
            .map(|&(_, i)| i)
            .find(|&i| run.tree.units[i].failure.as_deref() != Some("cancelled"))
            .or(failed.first().map(|&(_, i)| i));
        match first {
            Some(i) => {
                let why = run.tree.units[i].failure.clone().unwrap_or_else(|| "failed".into());
                format!("{}: {}", run.tree.actions[i], why)
            }
            None => "failed".into(),
        }
    }

    fn refresh_actions(&mut self, now: f64) {
        let Some(run) = self.run.as_mut() else { return };
        let plan_id = self.status.plan_id.unwrap_or(0);
        for (i, unit) in run.tree.units.iter().enumerate() {
            let client = run.clients.get(&i);
            let completion = match (unit.phase, client) {
                (UnitPhase::FinishedOk, _) => 1.0,
                (_, Some(c)) => c.completion,
                _ => unit.completion,
            };
            let performer = client.and_then(|c| c.machine.performer().map(str::to_string));
            let st = &mut self.status.actions[i];
            let phase_changed = st.phase != unit.phase;
            let completion_changed = st.completion != completion;
            st.performer = performer;
            if !phase_changed && !completion_changed {
                continue;
            }
            let due = now - run.last_completion_event[i] >= self.config.feedback_period - 1e-9;
            st.completion = completion;
            if phase_changed || due {
                st.phase = unit.phase;
                run.last_completion_event[i] = now;
                let ev = StatusEvent {
                    time: now,
                    plan_id,
                    kind: StatusEventKind::Action {
                        index: i,
                        action: st.action.clone(),
                        phase: phase_label(unit.phase),
                        completion,
                    },
                };
                Self::emit(&mut self.events, &mut self.sink, ev);
            }
        }
    }

    fn set_state(&mut self, state: RunState, now: f64) {
        if self.status.state == state {
            return;
        }
        if state.is_terminal() {
            self.status.finished_at = Some(now);
        }
        let reason = match &state {
            RunState::Failed(r) => Some(r.clone()),
            _ => None,
        };
        let ev = StatusEvent {
            time: now,
            plan_id: self.status.plan_id.unwrap_or(0),
            kind: StatusEventKind::Plan { state: state.label(), reason },
        };
        self.status.state = state;
        Self::emit(&mut self.events, &mut self.sink, ev);
    }

    fn emit(events: &mut Vec<StatusEvent>, sink: &mut Option<Box<dyn Write + Send>>, ev: StatusEvent) {
        if let Some(s) = sink.as_mut() {
            if let Ok(line) = serde_json::to_string(&ev) {
                let _ = writeln!(s, "{line}");
            }
        }
        events.push(ev);
    }
}
