//! Line-oriented operator shell over a knowledge base, the planner and the
//! executor, with simulated performers on an in-process hub.
//!
//! Execution runs in virtual time, so a script produces the same transcript
//! on every run.
//!
//! ```text
//! get domain
//! get problem [instances|predicates|functions|goals]
//! get model action <name> | get model predicate <name>
//! get plan | get performers | get status
//! set instance <name> <type>       remove instance <name>
//! set predicate (<p> <args>)       remove predicate (<p> <args>)
//! set function (= (<f> <args>) v)  remove function (<f> <args>)
//! set goal <condition>             remove goal
//! run | start | wait [<seconds>] | cancel
//! source <file> | quit
//! ```

use std::cell::RefCell;
use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::rc::Rc;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::auction::{FeedbackMode, Hub, Performer, PerformerSpec, SharedTime, Subscription, TimedWork, Transport};
use crate::executor::{Executor, ExecutorConfig, RunState, StatusEvent, StatusEventKind};
use crate::knowledge::KnowledgeBase;
use crate::pddl::{
    parse_condition, parse_fluent_assignment, parse_ground_atom, print_action, print_condition, print_domain,
    print_predicate, print_problem, ActionName, Domain, ObjectName, TypeName,
};
use crate::planner::{Plan, SolveOutcome};

pub const USAGE: &str = "commands: get domain | get problem [instances|predicates|functions|goals] | \
get model action|predicate <name> | get plan | get performers | get status | \
set|remove instance|predicate|function|goal ... | run | start | wait [<seconds>] | cancel | source <file> | quit";

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub seed: u64,
    /// Relative spread of simulated action durations around the planned ones.
    pub jitter: f64,
    /// Longest a `run` or `wait` may advance virtual time.
    pub max_wait: f64,
    pub executor: ExecutorConfig,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig { seed: 0, jitter: 0.0, max_wait: 3600.0, executor: ExecutorConfig::default() }
    }
}

type Durations = Rc<RefCell<HashMap<(String, Vec<String>), f64>>>;
type SessionWork = TimedWork<Box<dyn FnMut(&[String]) -> f64>>;

struct SimPerformer {
    performer: Performer<SessionWork>,
    inbox: Subscription,
}

/// A knowledge base with an executor and one simulated performer per action
/// and object of the action's first parameter type.
pub struct Session {
    config: SessionConfig,
    time: SharedTime,
    hub: Arc<Hub>,
    exec: Executor,
    performers: Vec<SimPerformer>,
    durations: Durations,
    rng: Rc<RefCell<ChaCha8Rng>>,
    scale: f64,
    now: f64,
}

impl Session {
    pub fn new(kb: KnowledgeBase, config: SessionConfig) -> Self {
        let time = SharedTime::default();
        let hub = Arc::new(Hub::with_clock(time.clone()));
        let exec = Executor::new("executor", kb, hub.clone(), config.executor.clone()).expect("fresh hub");
        let rng = Rc::new(RefCell::new(ChaCha8Rng::seed_from_u64(config.seed)));
        Session { config, time, hub, exec, performers: Vec::new(), durations: Rc::default(), rng, scale: 1.0, now: 0.0 }
    }

    pub fn kb(&self) -> &KnowledgeBase {
        self.exec.kb()
    }

    pub fn kb_mut(&mut self) -> &mut KnowledgeBase {
        self.exec.kb_mut()
    }

    pub fn executor(&self) -> &Executor {
        &self.exec
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    fn domain(&self) -> &Domain {
        self.exec.kb().domain()
    }

    fn objects(&self) -> Vec<(ObjectName, TypeName)> {
        self.kb().state().instances().iter().map(|(o, t)| (o.clone(), t.clone())).collect()
    }

    /// Registers performers for objects that have none yet.
    fn refresh_performers(&mut self) {
        let domain = self.domain().clone();
        let mut objects = self.objects();
        objects.extend(domain.constants.iter().cloned());
        let mut wanted = Vec::new();
        for action in &domain.actions {
            let Some(first) = action.params.first() else {
                wanted.push((format!("{}-performer", action.name), action.name.to_string(), None));
                continue;
            };
            for (o, t) in &objects {
                if domain.is_subtype(t, &first.ty) {
                    wanted.push((format!("{o}-{}", action.name), action.name.to_string(), Some(o.to_string())));
                }
            }
        }
        wanted.sort();
        for (id, action, obj) in wanted {
            if self.performers.iter().any(|p| p.performer.id() == id) {
                continue;
            }
            let durations = self.durations.clone();
            let rng = self.rng.clone();
            let jitter = self.config.jitter;
            let name = action.clone();
            let duration: Box<dyn FnMut(&[String]) -> f64> = Box::new(move |args| {
                let base = durations.borrow().get(&(name.clone(), args.to_vec())).copied().unwrap_or(1.0);
                if jitter > 0.0 {
                    base * (1.0 + rng.borrow_mut().gen_range(-jitter..=jitter))
                } else {
                    base
                }
            });
            let mut spec = PerformerSpec::new(&id, &action);
            if let Some(o) = &obj {
                spec = spec.specialized(&[o.as_str()]);
            }
            let performer = Performer::new(spec, TimedWork::new(duration)).with_feedback(FeedbackMode::Quartiles);
            let inbox = self.hub.subscribe().expect("hub is up");
            self.performers.push(SimPerformer { performer, inbox });
        }
        self.performers.sort_by(|a, b| a.performer.id().cmp(b.performer.id()));
    }

    fn settle(&mut self) -> Result<Vec<StatusEvent>, String> {
        let now = self.now;
        self.time.set(now);
        loop {
            let mut busy = false;
            for p in &mut self.performers {
                for m in p.inbox.drain() {
                    for out in p.performer.handle(&m, now) {
                        self.hub.publish(&out).map_err(|e| e.to_string())?;
                        busy = true;
                    }
                }
                for out in p.performer.poll(now) {
                    self.hub.publish(&out).map_err(|e| e.to_string())?;
                    busy = true;
                }
            }
            busy |= self.exec.tick(now).map_err(|e| e.to_string())?;
            if !busy {
                return Ok(self.exec.take_events());
            }
        }
    }

    /// Plans and starts executing the goal.
    pub fn start(&mut self) -> Result<Vec<StatusEvent>, String> {
        self.refresh_performers();
        self.exec.execute_goal(self.now).map_err(|e| e.to_string())?;
        self.remember_durations();
        self.settle()
    }

    /// Starts executing a given plan instead of planning for the goal.
    pub fn start_plan(&mut self, plan: Plan) -> Result<Vec<StatusEvent>, String> {
        self.refresh_performers();
        self.exec.execute_plan(plan, self.now).map_err(|e| e.to_string())?;
        self.remember_durations();
        self.settle()
    }

    /// Scales all simulated durations, for slower or faster performers.
    pub fn set_duration_scale(&mut self, scale: f64) {
        self.scale = scale;
    }

    fn remember_durations(&mut self) {
        if let Some(plan) = self.exec.plan() {
            let mut d = self.durations.borrow_mut();
            for item in &plan.items {
                let args = item.args.iter().map(|a| a.to_string()).collect();
                d.insert((item.action.to_string(), args), item.duration * self.scale);
            }
        }
    }

    /// Advances virtual time until the run ends or `limit` seconds pass.
    pub fn wait(&mut self, limit: f64) -> Result<Vec<StatusEvent>, String> {
        let end = self.now + limit;
        let mut events = self.settle()?;
        while self.exec.is_running() {
            let next = self
                .performers
                .iter()
                .filter_map(|p| p.performer.next_deadline())
                .chain(self.exec.next_deadline())
                .filter(|&t| t > self.now)
                .reduce(f64::min);
            match next {
                Some(t) if t <= end => self.now = t,
                _ => {
                    self.now = end;
                    events.extend(self.settle()?);
                    break;
                }
            }
            events.extend(self.settle()?);
        }
        Ok(events)
    }

    pub fn cancel(&mut self) -> Result<(bool, Vec<StatusEvent>), String> {
        let cancelled = self.exec.cancel(self.now).map_err(|e| e.to_string())?;
        Ok((cancelled, self.settle()?))
    }
}

/// `[t] (action args) phase completion%` for action updates and a final
/// verdict line for finished runs.
pub fn monitor_line(event: &StatusEvent) -> Option<String> {
    match &event.kind {
        StatusEventKind::Action { action, phase, completion, .. } => {
            Some(format!("[{:.3}] {action} {phase} {}%", event.time, (completion * 100.0).round() as i64))
        }
        StatusEventKind::Plan { state: "succeeded", .. } => Some("SUCCESS".into()),
        StatusEventKind::Plan { state: "cancelled", .. } => Some("CANCELLED".into()),
        StatusEventKind::Plan { state: "failed", reason } => {
            Some(format!("FAILURE: {}", reason.as_deref().unwrap_or("unknown")))
        }
        StatusEventKind::Plan { .. } => None,
    }
}

/// Formats a batch of status events.
pub fn monitor_stream(events: &[StatusEvent]) -> Vec<String> {
    events.iter().filter_map(monitor_line).collect()
}

pub enum Flow {
    Continue,
    Quit,
}

/// Runs commands against a session and writes their output.
pub struct Terminal<W: Write> {
    pub session: Session,
    out: W,
    dirs: Vec<PathBuf>,
    depth: usize,
    /// Number of commands that failed.
    pub errors: usize,
}

impl<W: Write> Terminal<W> {
    pub fn new(session: Session, out: W) -> Self {
        Terminal { session, out, dirs: Vec::new(), depth: 0, errors: 0 }
    }

    pub fn into_output(self) -> W {
        self.out
    }

    fn line(&mut self, s: impl AsRef<str>) -> std::io::Result<()> {
        writeln!(self.out, "{}", s.as_ref())
    }

    fn lines(&mut self, text: &str) -> std::io::Result<()> {
        for l in text.lines() {
            self.line(l)?;
        }
        Ok(())
    }

    /// Executes one command line. Errors are reported as `ERROR: ...`.
    pub fn execute(&mut self, line: &str) -> std::io::Result<Flow> {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            return Ok(Flow::Continue);
        }
        match self.dispatch(line) {
            Ok(flow) => Ok(flow),
            Err(msg) => {
                self.errors += 1;
                self.line(format!("ERROR: {msg}"))?;
                Ok(Flow::Continue)
            }
        }
    }

    fn dispatch(&mut self, line: &str) -> Result<Flow, String> {
        let (verb, rest) = split_word(line);
        let io = |e: std::io::Error| e.to_string();
        match verb {
            "quit" | "exit" => return Ok(Flow::Quit),
            "get" => self.get(rest)?,
            "set" => self.set(rest)?,
            "remove" => self.remove(rest)?,
            "run" => {
                self.report_start()?;
                let limit = self.session.config.max_wait;
                let events = self.session.wait(limit)?;
                self.report(&events).map_err(io)?;
                if self.session.exec.is_running() {
                    self.line(format!("still running after {limit} s")).map_err(io)?;
                }
            }
            "start" => self.report_start()?,
            "wait" => {
                let secs = match rest {
                    "" => self.session.config.max_wait,
                    s => s.parse::<f64>().ok().filter(|v| *v >= 0.0).ok_or(format!("invalid duration `{s}`"))?,
                };
                let events = self.session.wait(secs)?;
                self.report(&events).map_err(io)?;
            }
            "cancel" => {
                let (cancelled, events) = self.session.cancel()?;
                if !cancelled {
                    self.line("no plan is running").map_err(io)?;
                }
                self.report(&events).map_err(io)?;
            }
            "source" => self.source(rest)?,
            "help" => self.line(USAGE).map_err(io)?,
            _ => return Err(format!("unknown command `{verb}`; {USAGE}")),
        }
        Ok(Flow::Continue)
    }

    fn report_start(&mut self) -> Result<(), String> {
        let events = self.session.start()?;
        self.report(&events).map_err(|e| e.to_string())
    }

    fn report(&mut self, events: &[StatusEvent]) -> std::io::Result<()> {
        for l in monitor_stream(events) {
            self.line(l)?;
        }
        Ok(())
    }

    fn get(&mut self, rest: &str) -> Result<(), String> {
        let io = |e: std::io::Error| e.to_string();
        let (what, arg) = split_word(rest);
        match what {
            "domain" => {
                let text = print_domain(self.session.domain());
                self.lines(&text).map_err(io)
            }
            "problem" => {
                let state = self.session.kb().state();
                let text: Vec<String> = match arg {
                    "" => {
                        let p = state.to_problem("problem", self.session.domain());
                        print_problem(&p).lines().map(str::to_string).collect()
                    }
                    "instances" => state.instances().iter().map(|(o, t)| format!("{o} - {t}")).collect(),
                    "predicates" => state.atoms().iter().map(|a| a.to_string()).collect(),
                    "functions" => state.fluents().iter().map(|(f, v)| format!("(= {f} {v})")).collect(),
                    "goals" | "goal" => vec![print_condition(state.goal())],
                    other => return Err(format!("unknown problem section `{other}`")),
                };
                text.iter().try_for_each(|l| self.line(l)).map_err(io)
            }
            "model" => {
                let (kind, name) = split_word(arg);
                let domain = self.session.domain();
                let text = match kind {
                    "action" => {
                        let n = ActionName::new(name).map_err(|e| e.to_string())?;
                        domain.action(&n).map(print_action).ok_or(format!("unknown action `{name}`"))?
                    }
                    "predicate" => domain
                        .predicates
                        .iter()
                        .find(|p| p.name.as_str() == name.to_ascii_lowercase())
                        .map(print_predicate)
                        .ok_or(format!("unknown predicate `{name}`"))?,
                    other => return Err(format!("unknown model kind `{other}`, expected action or predicate")),
                };
                self.lines(&text).map_err(io)
            }
            "plan" => {
                let text = match self.session.exec.plan_goal().map_err(|e| e.to_string())? {
                    SolveOutcome::Plan(p) if p.is_empty() => "empty plan".to_string(),
                    SolveOutcome::Plan(p) => p.to_popf_text(),
                    SolveOutcome::NoPlan => "no plan".to_string(),
                };
                self.lines(&text).map_err(io)
            }
            "performers" => {
                self.session.refresh_performers();
                let rows: Vec<String> = self
                    .session
                    .performers
                    .iter()
                    .map(|p| {
                        let m = &p.performer.machine;
                        let state = match &m.state {
                            crate::auction::PerformerState::Inactive => "inactive",
                            crate::auction::PerformerState::Committed { .. } => "committed",
                            crate::auction::PerformerState::Active { .. } => "active",
                        };
                        format!("{} {} {}", m.spec.id, m.spec.action, state)
                    })
                    .collect();
                rows.iter().try_for_each(|l| self.line(l)).map_err(io)
            }
            "status" => {
                let st = self.session.exec.status().clone();
                let head = match (&st.plan_id, &st.state) {
                    (None, _) => "no plan has run".to_string(),
                    (Some(id), RunState::Failed(r)) => format!("plan {id} failed: {r}"),
                    (Some(id), s) => format!("plan {id} {}", s.label()),
                };
                self.line(head).map_err(io)?;
                for a in &st.actions {
                    let phase = crate::executor::phase_label(a.phase);
                    self.line(format!("{} {phase} {}%", a.action, (a.completion * 100.0).round() as i64))
                        .map_err(io)?;
                }
                Ok(())
            }
            other => Err(format!("cannot get `{other}`")),
        }
    }

    fn set(&mut self, rest: &str) -> Result<(), String> {
        let (what, arg) = split_word(rest);
        let objects = self.session.objects();
        let domain = self.session.domain().clone();
        let kb = self.session.kb_mut();
        let err = |e: &dyn std::fmt::Display| e.to_string();
        match what {
            "instance" => {
                let (name, ty) = split_word(arg);
                if ty.is_empty() || ty.contains(char::is_whitespace) {
                    return Err("usage: set instance <name> <type>".into());
                }
                let name = ObjectName::new(name).map_err(|e| err(&e))?;
                let ty = TypeName::new(ty).map_err(|e| err(&e))?;
                kb.add_instance(name, ty).map_err(|e| err(&e))?;
            }
            "predicate" => {
                let atom = parse_ground_atom(arg, &domain, &objects).map_err(|e| err(&e))?;
                kb.add_atom(atom).map_err(|e| err(&e))?;
            }
            "function" => {
                let (f, v) = parse_fluent_assignment(arg, &domain, &objects).map_err(|e| err(&e))?;
                kb.set_fluent(f, v).map_err(|e| err(&e))?;
            }
            "goal" => {
                let goal = parse_condition(arg, &domain, &objects).map_err(|e| err(&e))?;
                kb.set_goal(goal).map_err(|e| err(&e))?;
            }
            other => return Err(format!("cannot set `{other}`")),
        }
        Ok(())
    }

    fn remove(&mut self, rest: &str) -> Result<(), String> {
        let (what, arg) = split_word(rest);
        let objects = self.session.objects();
        let domain = self.session.domain().clone();
        let kb = self.session.kb_mut();
        let err = |e: &dyn std::fmt::Display| e.to_string();
        match what {
            "instance" => {
                let name = ObjectName::new(arg).map_err(|e| err(&e))?;
                kb.remove_instance(&name).map_err(|e| err(&e))?;
            }
            "predicate" => {
                let atom = parse_ground_atom(arg, &domain, &objects).map_err(|e| err(&e))?;
                if !kb.remove_atom(&atom).map_err(|e| err(&e))? {
                    return Err(format!("{atom} is not set"));
                }
            }
            "function" => {
                let (f, _) = parse_fluent_assignment(&format!("(= {arg} 0)"), &domain, &objects).map_err(|e| err(&e))?;
                if !kb.remove_fluent(&f) {
                    return Err(format!("{f} is not set"));
                }
            }
            "goal" => kb.clear_goal(),
            other => return Err(format!("cannot remove `{other}`")),
        }
        Ok(())
    }

    fn source(&mut self, path: &str) -> Result<(), String> {
        if path.is_empty() {
            return Err("usage: source <file>".into());
        }
        if self.depth >= 16 {
            return Err("source nested too deeply".into());
        }
        let p = Path::new(path);
        let full = match self.dirs.last() {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.to_path_buf(),
        };
        let text = std::fs::read_to_string(&full).map_err(|e| format!("{}: {e}", full.display()))?;
        self.dirs.push(full.parent().map(Path::to_path_buf).unwrap_or_default());
        self.depth += 1;
        let result = self.run_lines(text.lines(), true);
        self.depth -= 1;
        self.dirs.pop();
        match result {
            Ok(_) => Ok(()),
            Err(e) => Err(e.to_string()),
        }
    }

    /// Executes lines, echoing each as `> line` when `echo` is set.
    pub fn run_lines<'a>(&mut self, lines: impl Iterator<Item = &'a str>, echo: bool) -> std::io::Result<Flow> {
        for l in lines {
            let t = l.trim();
            if t.is_empty() || t.starts_with('#') || t.starts_with(';') {
                continue;
            }
            if echo {
                self.line(format!("> {t}"))?;
            }
            if let Flow::Quit = self.execute(t)? {
                return Ok(Flow::Quit);
            }
        }
        Ok(Flow::Continue)
    }
}

fn split_word(s: &str) -> (&str, &str) {
    let s = s.trim();
    match s.find(char::is_whitespace) {
        Some(i) => (&s[..i], s[i..].trim_start()),
        None => (s, ""),
    }
}

/// Reads commands from `input` until `quit` or end of input. With `echo`,
/// every command is copied to the output, as for scripts. Returns the exit
/// code: 0 when every command succeeded, 1 otherwise.
pub fn repl(session: Session, input: impl BufRead, output: impl Write, echo: bool) -> std::io::Result<i32> {
    let mut term = Terminal::new(session, output);
    for line in input.lines() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') || t.starts_with(';') {
            continue;
        }
        if echo {
            term.line(format!("> {t}"))?;
        }
        if let Flow::Quit = term.execute(t)? {
            break;
        }
    }
    term.out.flush()?;
    Ok(if term.errors == 0 { 0 } else { 1 })
}
