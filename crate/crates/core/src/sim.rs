//! Discrete-event cooking experiment.
//!
//! Robots fetch ingredients from three corners, cook in the central kitchen
//! and recharge at the fourth corner. A controller keeps requesting two
//! random dishes, replans when a battery runs out or a plan fails, and
//! collects the metrics of the run.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::rc::Rc;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::auction::{
    FeedbackMode, Hub, LogEntry, MsgType, Performer, PerformerSpec, SharedTime, Subscription, TimedWork, Transport,
    TransportError,
};
use crate::bt::UnitEventKind;
use crate::executor::{ExecError, Executor, ExecutorConfig, RunState};
use crate::knowledge::{KnowledgeBase, KnowledgeError};
use crate::pddl::{
    parse_domain, parse_problem, Atom, Condition, Domain, Effect, EffectItem, GroundAtom, GroundFluent, ObjectName,
    ParseError, TypeName,
};
use crate::runtime::VirtualClock;

pub const COOKING_DOMAIN: &str = include_str!("../fixtures/cooking_domain.pddl");
pub const ROBOTS: [&str; 3] = ["r2d2", "c3po", "bb8"];
pub const DEFAULT_BATTERY_PERIOD: f64 = 900.0;
const ACTIONS: [&str; 4] = ["cook", "move", "recharge", "transport"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// move 3.8 s, transport 8.8 s, cook 21 s.
    Simulated,
    /// move 10 to 15 s, transport 16 to 20 s, cook 21 s.
    Realistic,
}

impl Profile {
    pub fn duration(self, action: &str, rng: &mut impl Rng) -> f64 {
        match (self, action) {
            (_, "cook") => 21.0,
            (_, "recharge") => 10.0,
            (Profile::Simulated, "move") => 3.8,
            (Profile::Simulated, "transport") => 8.8,
            (Profile::Realistic, "move") => rng.gen_range(10.0..=15.0),
            (Profile::Realistic, "transport") => rng.gen_range(16.0..=20.0),
            _ => 1.0,
        }
    }
}

impl FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sim" | "simulated" => Ok(Profile::Simulated),
            "real" | "realistic" => Ok(Profile::Realistic),
            _ => Err(format!("unknown profile `{s}`, expected sim or real")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub robots: Vec<String>,
    pub profile: Profile,
    /// Virtual seconds to run.
    pub horizon: f64,
    /// Seconds of work a full battery lasts; `None` disables battery events.
    pub battery_period: Option<f64>,
    pub seed: u64,
    pub executor: ExecutorConfig,
}

impl SimConfig {
    pub fn new(robots: usize, horizon: f64, seed: u64) -> Self {
        SimConfig {
            robots: ROBOTS.iter().cycle().take(robots).map(|s| s.to_string()).collect(),
            profile: Profile::Simulated,
            horizon,
            battery_period: Some(DEFAULT_BATTERY_PERIOD),
            seed,
            executor: ExecutorConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Metrics {
    pub total_time: f64,
    pub plans: u64,
    pub actions: u64,
    pub efficiency: f64,
    pub fails: u64,
    pub replans: u64,
    pub dishes: u64,
}

impl Metrics {
    pub const LABELS: [&'static str; 7] = ["TotalTime", "Plans", "Actions", "Efficiency", "Fails", "Replans", "Dishes"];

    pub fn values(&self) -> [String; 7] {
        [
            format!("{:.1}", self.total_time),
            self.plans.to_string(),
            self.actions.to_string(),
            format!("{:.2}", self.efficiency),
            self.fails.to_string(),
            self.replans.to_string(),
            self.dishes.to_string(),
        ]
    }
}

impl fmt::Display for Metrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (l, v) in Self::LABELS.iter().zip(self.values()) {
            writeln!(f, "{l:<11}{v}")?;
        }
        Ok(())
    }
}

/// Writes the metrics as one column of a CSV table with one row per metric.
/// An existing table gets the column appended.
pub fn export_metrics(m: &Metrics, label: &str, path: &Path) -> std::io::Result<()> {
    let mut rows: Vec<String> = match std::fs::read_to_string(path) {
        Ok(text) if !text.trim().is_empty() => text.lines().map(str::to_string).collect(),
        Ok(_) => Vec::new(),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(e),
    };
    if rows.len() != Metrics::LABELS.len() + 1 {
        rows = std::iter::once("Metric".to_string()).chain(Metrics::LABELS.iter().map(|s| s.to_string())).collect();
    }
    rows[0].push(',');
    rows[0].push_str(label);
    for (row, v) in rows[1..].iter_mut().zip(m.values()) {
        row.push(',');
        row.push_str(&v);
    }
    std::fs::write(path, rows.join("\n") + "\n")
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("at least one robot is required")]
    NoRobots,
    #[error("horizon must be positive")]
    BadHorizon,
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DishKind {
    Cake,
    Spaghetti,
    Omelet,
}

impl DishKind {
    const ALL: [DishKind; 3] = [DishKind::Cake, DishKind::Spaghetti, DishKind::Omelet];

    fn name(self) -> &'static str {
        match self {
            DishKind::Cake => "cake",
            DishKind::Spaghetti => "spaghetti",
            DishKind::Omelet => "omelet",
        }
    }

    /// Ingredients with the corner each one is stored in.
    fn ingredients(self) -> [(&'static str, &'static str); 2] {
        match self {
            DishKind::Cake => [("flour", "zone_a"), ("eggs", "zone_b")],
            DishKind::Spaghetti => [("pasta", "zone_c"), ("tomato", "zone_a")],
            DishKind::Omelet => [("eggs", "zone_b"), ("potato", "zone_c")],
        }
    }
}

struct Dish {
    name: ObjectName,
    ingredients: [ObjectName; 2],
}

type SimWork = TimedWork<Box<dyn FnMut(&[String]) -> f64>>;

struct Battery {
    level: f64,
    low: bool,
}

/// Everything a finished run leaves behind.
pub struct SimRun {
    pub metrics: Metrics,
    /// Time-stamped copy of every hub message.
    pub log: Vec<LogEntry>,
}

struct Sim {
    cfg: SimConfig,
    domain: Arc<Domain>,
    time: SharedTime,
    hub: Arc<Hub>,
    exec: Executor,
    performers: Vec<(Performer<SimWork>, Subscription)>,
    monitor: Subscription,
    rng: Rc<RefCell<ChaCha8Rng>>,
    metrics: Metrics,
    battery: BTreeMap<String, Battery>,
    request: Vec<Dish>,
    next_dish: u64,
    confirmed: HashMap<(String, u64), f64>,
    executed: f64,
    handled_plan: Option<u64>,
    stopped: bool,
    dot_dir: Option<PathBuf>,
}

fn atom(pred: &str, args: &[&str]) -> GroundAtom {
    GroundAtom::parse(&format!("({pred} {})", args.join(" "))).expect("valid atom")
}

fn name(s: &str) -> ObjectName {
    ObjectName::new(s).expect("valid name")
}

fn inverse(effect: &Effect) -> Effect {
    let items = effect
        .items
        .iter()
        .filter_map(|i| match i {
            EffectItem::Add(a) => Some(EffectItem::Del(a.clone())),
            EffectItem::Del(a) => Some(EffectItem::Add(a.clone())),
            EffectItem::Numeric { .. } => None,
        })
        .collect();
    Effect { items }
}

fn initial_problem(robots: &[String], battery: f64) -> String {
    let mut init = String::new();
    for r in robots {
        init.push_str(&format!("(robot_at {r} kitchen) (battery_ok {r}) (idle {r}) (= (battery_level {r}) {battery})\n"));
    }
    for z in ["zone_a", "zone_b", "zone_c", "charger_zone"] {
        init.push_str(&format!("(connected kitchen {z}) (connected {z} kitchen)\n"));
    }
    format!(
        "(define (problem cooking_stage) (:domain cooking)
  (:objects {} - robot zone_a zone_b zone_c charger_zone - zone)
  (:init {init} (charger charger_zone)))",
        robots.join(" ")
    )
}

impl Sim {
    fn new(cfg: SimConfig, hub_log: Option<Box<dyn Write + Send>>, dot_dir: Option<PathBuf>) -> Result<Self, SimError> {
        if cfg.robots.is_empty() {
            return Err(SimError::NoRobots);
        }
        if !(cfg.horizon > 0.0) {
            return Err(SimError::BadHorizon);
        }
        let domain = Arc::new(parse_domain(COOKING_DOMAIN)?);
        let capacity = cfg.battery_period.unwrap_or(f64::INFINITY);
        let problem = parse_problem(&initial_problem(&cfg.robots, capacity.min(1e9)), &domain)?;
        let kb = KnowledgeBase::from_problem(domain.clone(), &problem)?;
        let time = SharedTime::default();
        let mut hub = Hub::with_clock(time.clone()).record();
        if let Some(sink) = hub_log {
            hub = hub.tee(sink);
        }
        let hub = Arc::new(hub);
        let rng = Rc::new(RefCell::new(ChaCha8Rng::seed_from_u64(cfg.seed)));
        let mut ids: Vec<(String, &str, &String)> = Vec::new();
        for r in &cfg.robots {
            for a in ACTIONS {
                ids.push((format!("{r}-{a}"), a, r));
            }
        }
        ids.sort();
        let mut performers = Vec::new();
        for (id, action, robot) in ids {
            let rng = rng.clone();
            let profile = cfg.profile;
            let duration: Box<dyn FnMut(&[String]) -> f64> =
                Box::new(move |_| profile.duration(action, &mut *rng.borrow_mut()));
            let p = Performer::new(PerformerSpec::new(&id, action).specialized(&[robot]), TimedWork::new(duration))
                .with_feedback(FeedbackMode::Quartiles);
            performers.push((p, hub.subscribe()?));
        }
        let exec = Executor::new("executor", kb, hub.clone(), cfg.executor.clone())?;
        let monitor = hub.subscribe()?;
        let battery =
            cfg.robots.iter().map(|r| (r.clone(), Battery { level: capacity, low: false })).collect();
        Ok(Sim {
            cfg,
            domain,
            time,
            hub,
            exec,
            performers,
            monitor,
            rng,
            metrics: Metrics::default(),
            battery,
            request: Vec::new(),
            next_dish: 0,
            confirmed: HashMap::new(),
            executed: 0.0,
            handled_plan: None,
            stopped: false,
            dot_dir,
        })
    }

    fn run(mut self) -> Result<SimRun, SimError> {
        let mut clock: VirtualClock<()> = VirtualClock::new();
        let horizon = self.cfg.horizon;
        let mut now = 0.0;
        self.start_next(now)?;
        loop {
            self.settle(now)?;
            if self.stopped {
                break;
            }
            let deadlines = self
                .performers
                .iter()
                .filter_map(|(p, _)| p.next_deadline())
                .chain(self.exec.next_deadline())
                .filter(|&t| t > now);
            for t in deadlines {
                clock.schedule(t, ());
            }
            while clock.peek_time().is_some_and(|t| t <= now) {
                clock.pop();
            }
            match clock.pop() {
                Some((t, ())) if t < horizon => now = t,
                _ => break,
            }
        }
        self.time.set(horizon);
        for t in self.confirmed.values() {
            self.executed += horizon - t.min(horizon);
        }
        self.metrics.total_time = horizon;
        self.metrics.efficiency = 100.0 * self.executed / horizon;
        let _ = self.exec.cancel(horizon);
        self.hub.shutdown();
        Ok(SimRun { metrics: self.metrics, log: self.hub.history() })
    }

    /// Delivers messages and reacts until nothing changes at `now`.
    fn settle(&mut self, now: f64) -> Result<(), SimError> {
        self.time.set(now);
        loop {
            let mut busy = false;
            for (p, sub) in &mut self.performers {
                for m in sub.drain() {
                    for out in p.handle(&m, now) {
                        self.hub.publish(&out)?;
                    }
                }
                for out in p.poll(now) {
                    self.hub.publish(&out)?;
                }
            }
            busy |= self.exec.tick(now)?;
            busy |= self.observe(now);
            busy |= self.control(now)?;
            if !busy || self.stopped {
                return Ok(());
            }
        }
    }

    /// Tracks executed time and battery drain from the hub traffic.
    fn observe(&mut self, now: f64) -> bool {
        let msgs = self.monitor.drain();
        for m in &msgs {
            match m.msg_type {
                MsgType::Confirm => {
                    self.confirmed.insert((m.sender.clone(), m.seq), now);
                }
                MsgType::Finish => {
                    let Some(t0) = self.confirmed.remove(&(m.recipient.clone(), m.seq)) else { continue };
                    let dt = now - t0;
                    self.executed += dt;
                    if m.success {
                        self.metrics.actions += 1;
                        if m.action == "cook" {
                            self.metrics.dishes += 1;
                        }
                    }
                    if let (Some(r), Some(_)) = (m.args.first(), self.cfg.battery_period) {
                        if let Some(b) = self.battery.get_mut(r) {
                            b.level -= dt;
                            let f = GroundFluent { function: "battery_level".parse().unwrap(), args: vec![name(r)] };
                            let _ = self.exec.kb_mut().set_fluent(f, b.level);
                        }
                    }
                }
                _ => {}
            }
        }
        !msgs.is_empty()
    }

    fn control(&mut self, now: f64) -> Result<bool, SimError> {
        if self.stopped {
            return Ok(false);
        }
        let capacity = self.cfg.battery_period.unwrap_or(f64::INFINITY);
        for (r, b) in &mut self.battery {
            if b.low && self.exec.kb().state().holds(&atom("battery_ok", &[r])) {
                b.low = false;
                b.level = capacity;
                let f = GroundFluent { function: "battery_level".parse().unwrap(), args: vec![name(r)] };
                self.exec.kb_mut().set_fluent(f, capacity)?;
            }
        }
        let drained: Vec<String> =
            self.battery.iter().filter(|(_, b)| !b.low && b.level <= 0.0).map(|(r, _)| r.clone()).collect();
        if !drained.is_empty() {
            if self.exec.is_running() {
                self.exec.cancel(now)?;
                self.revert_interrupted()?;
            }
            for r in &drained {
                self.battery.get_mut(r).unwrap().low = true;
                self.exec.kb_mut().remove_atom(&atom("battery_ok", &[r]))?;
            }
            self.metrics.replans += 1;
            self.start_next(now)?;
            return Ok(true);
        }
        let status = self.exec.status();
        if status.plan_id == self.handled_plan || !status.state.is_terminal() {
            return Ok(false);
        }
        self.handled_plan = status.plan_id;
        match status.state.clone() {
            RunState::Failed(_) => {
                self.metrics.fails += 1;
                self.metrics.replans += 1;
                self.revert_interrupted()?;
            }
            RunState::Cancelled => self.revert_interrupted()?,
            _ => {}
        }
        self.start_next(now)?;
        Ok(true)
    }

    /// Undoes the start effects of actions that started but did not end, so
    /// that the knowledge matches the robots that stopped.
    fn revert_interrupted(&mut self) -> Result<(), SimError> {
        let Some(tree) = self.exec.tree() else { return Ok(()) };
        let mut started = vec![false; tree.actions.len()];
        for e in tree.events() {
            match e.kind {
                UnitEventKind::StartEffectsApplied => started[e.unit] = true,
                UnitEventKind::EndEffectsApplied => started[e.unit] = false,
                _ => {}
            }
        }
        let undo: Vec<Effect> =
            started.iter().enumerate().filter(|(_, s)| **s).map(|(i, _)| inverse(&tree.actions[i].eff_start)).collect();
        for e in undo {
            self.exec.kb_mut().apply(&e)?;
        }
        Ok(())
    }

    fn new_request(&mut self) -> Result<(), SimError> {
        let kb = self.exec.kb_mut();
        kb.clear_goal();
        for d in self.request.drain(..) {
            for a in kb.state().atoms().clone() {
                if a.args.contains(&d.name) || d.ingredients.iter().any(|i| a.args.contains(i)) {
                    kb.remove_atom(&a)?;
                }
            }
            kb.remove_instance(&d.name)?;
            for i in &d.ingredients {
                kb.remove_instance(i)?;
            }
        }
        for _ in 0..2 {
            let kind = *DishKind::ALL.choose(&mut *self.rng.borrow_mut()).unwrap();
            self.next_dish += 1;
            let n = self.next_dish;
            let dish = name(&format!("{}_{n}", kind.name()));
            kb.add_instance(dish.clone(), TypeName::new(kind.name()).unwrap())?;
            let mut ingredients = Vec::new();
            for (ing, zone) in kind.ingredients() {
                let i = name(&format!("{ing}_{n}"));
                kb.add_instance(i.clone(), TypeName::new("ingredient").unwrap())?;
                kb.add_atom(GroundAtom { predicate: "ingredient_at".parse().unwrap(), args: vec![i.clone(), name(zone)] })?;
                ingredients.push(i);
            }
            let mut args = vec![dish.clone()];
            args.extend(ingredients.iter().cloned());
            kb.add_atom(GroundAtom { predicate: "recipe".parse().unwrap(), args })?;
            self.request.push(Dish { name: dish, ingredients: [ingredients[0].clone(), ingredients[1].clone()] });
        }
        Ok(())
    }

    fn goal(&self) -> Condition {
        let kb = self.exec.kb();
        let mut atoms: Vec<Atom> = self
            .request
            .iter()
            .map(|d| GroundAtom { predicate: "dish_cooked".parse().unwrap(), args: vec![d.name.clone()] })
            .filter(|a| !kb.state().holds(a))
            .map(|a| a.to_atom())
            .collect();
        for (r, b) in &self.battery {
            if b.low {
                atoms.push(atom("battery_ok", &[r]).to_atom());
            }
        }
        Condition::conjunction(atoms.into_iter().map(Condition::Atom))
    }

    /// Sets the next goal and starts executing it.
    fn start_next(&mut self, now: f64) -> Result<(), SimError> {
        let mut goal = self.goal();
        if self.request.is_empty() || (goal.is_empty() && self.battery.values().all(|b| !b.low)) {
            self.new_request()?;
            goal = self.goal();
        }
        self.exec.kb_mut().set_goal(goal)?;
        let plan_id = self.exec.execute_goal(now)?;
        let status = self.exec.status();
        if status.state == RunState::Failed("no plan".into()) {
            self.metrics.fails += 1;
            self.stopped = true;
            return Ok(());
        }
        if !status.actions.is_empty() {
            self.metrics.plans += 1;
        }
        if let (Some(dir), Some(graph), Some(tree)) = (&self.dot_dir, self.exec.graph(), self.exec.tree()) {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join(format!("plan_{plan_id:04}_graph.dot")), graph.to_dot())?;
            std::fs::write(dir.join(format!("plan_{plan_id:04}_bt.dot")), tree.to_dot())?;
        }
        let _ = &self.domain;
        Ok(())
    }
}

/// Runs the experiment and returns its metrics.
pub fn run_experiment(cfg: &SimConfig) -> Result<Metrics, SimError> {
    Ok(run_experiment_with(cfg, None, None)?.metrics)
}

/// Runs the experiment, optionally teeing the hub to `hub_log` and writing
/// the graph and tree of every plan into `dot_dir`.
pub fn run_experiment_with(
    cfg: &SimConfig,
    hub_log: Option<Box<dyn Write + Send>>,
    dot_dir: Option<&Path>,
) -> Result<SimRun, SimError> {
    Sim::new(cfg.clone(), hub_log, dot_dir.map(Path::to_path_buf))?.run()
}

/// Sum of CONFIRM to FINISH intervals in a hub log, cut at `horizon`.
pub fn executed_time(log: &[LogEntry], horizon: f64) -> f64 {
    let mut open: HashMap<(&str, u64), f64> = HashMap::new();
    let mut total = 0.0;
    for e in log {
        match e.msg.msg_type {
            MsgType::Confirm => {
                open.insert((&e.msg.sender, e.msg.seq), e.time);
            }
            MsgType::Finish => {
                if let Some(t0) = open.remove(&(e.msg.recipient.as_str(), e.msg.seq)) {
                    total += e.time - t0;
                }
            }
            _ => {}
        }
    }
    total + open.values().map(|t| horizon - t).sum::<f64>()
}
