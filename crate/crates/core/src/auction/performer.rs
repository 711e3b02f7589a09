use super::message::{AuctionMessage, MsgType};

/// Which actions a performer accepts. Each constraint pins the argument at
/// the same position; `None` accepts anything.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PerformerSpec {
    pub id: String,
    pub action: String,
    pub constraints: Vec<Option<String>>,
}

impl PerformerSpec {
    pub fn new(id: &str, action: &str) -> Self {
        PerformerSpec { id: id.to_string(), action: action.to_string(), constraints: Vec::new() }
    }

    /// Pins the leading arguments, e.g. `["r2d2"]` restricts to one robot.
    pub fn specialized(mut self, prefix: &[&str]) -> Self {
        self.constraints = prefix.iter().map(|s| Some(s.to_string())).collect();
        self
    }

    pub fn matches(&self, action: &str, args: &[String]) -> bool {
        action == self.action
            && self.constraints.len() <= args.len()
            && self.constraints.iter().zip(args).all(|(c, a)| c.as_ref().is_none_or(|c| c == a))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PerformerState {
    Inactive,
    Committed { client: String, seq: u64, args: Vec<String> },
    Active { client: String, seq: u64, args: Vec<String> },
}

/// What the owner of a performer has to do after a message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PerformerNotice {
    StartWork { args: Vec<String> },
    AbortWork,
}

/// Performer side of the protocol, without clocks or work.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PerformerMachine {
    pub spec: PerformerSpec,
    pub state: PerformerState,
}

impl PerformerMachine {
    pub fn new(spec: PerformerSpec) -> Self {
        PerformerMachine { spec, state: PerformerState::Inactive }
    }

    pub fn id(&self) -> &str {
        &self.spec.id
    }

    fn current(&self) -> Option<(&str, u64, &[String])> {
        match &self.state {
            PerformerState::Inactive => None,
            PerformerState::Committed { client, seq, args } | PerformerState::Active { client, seq, args } => {
                Some((client, *seq, args))
            }
        }
    }

    fn reply(&self, t: MsgType) -> AuctionMessage {
        let (client, seq, args) = self.current().expect("reply needs an auction");
        AuctionMessage::new(t, &self.spec.id, client, &self.spec.action, args, seq)
    }

    fn is_current(&self, msg: &AuctionMessage) -> bool {
        self.current().is_some_and(|(c, s, _)| c == msg.sender && s == msg.seq)
    }

    pub fn handle(&mut self, msg: &AuctionMessage) -> (Vec<AuctionMessage>, Option<PerformerNotice>) {
        if !msg.is_for(&self.spec.id) || msg.action != self.spec.action {
            return (Vec::new(), None);
        }
        match (msg.msg_type, &self.state) {
            (MsgType::Request, PerformerState::Inactive) if self.spec.matches(&msg.action, &msg.args) => {
                self.state =
                    PerformerState::Committed { client: msg.sender.clone(), seq: msg.seq, args: msg.args.clone() };
                (vec![self.reply(MsgType::Response)], None)
            }
            (MsgType::Confirm, PerformerState::Committed { .. }) if self.is_current(msg) => {
                let (client, seq, args) = self.current().map(|(c, s, a)| (c.to_string(), s, a.to_vec())).unwrap();
                self.state = PerformerState::Active { client, seq, args: args.clone() };
                (Vec::new(), Some(PerformerNotice::StartWork { args }))
            }
            (MsgType::Reject, PerformerState::Committed { .. }) if self.is_current(msg) => {
                self.state = PerformerState::Inactive;
                (Vec::new(), None)
            }
            (MsgType::Cancel, PerformerState::Committed { .. }) if self.is_current(msg) => {
                self.state = PerformerState::Inactive;
                (Vec::new(), None)
            }
            (MsgType::Cancel, PerformerState::Active { .. }) if self.is_current(msg) => {
                let mut fin = self.reply(MsgType::Finish);
                fin.status = "cancelled".into();
                self.state = PerformerState::Inactive;
                (vec![fin], Some(PerformerNotice::AbortWork))
            }
            _ => (Vec::new(), None),
        }
    }

    /// Gives up a commitment that was never answered.
    pub fn release(&mut self) {
        if matches!(self.state, PerformerState::Committed { .. }) {
            self.state = PerformerState::Inactive;
        }
    }

    pub fn feedback(&self, completion: f64, status: &str) -> Option<AuctionMessage> {
        matches!(self.state, PerformerState::Active { .. }).then(|| {
            let mut m = self.reply(MsgType::Feedback);
            m.completion = completion.clamp(0.0, 1.0);
            m.status = status.to_string();
            m
        })
    }

    pub fn finish(&mut self, success: bool, status: &str) -> Option<AuctionMessage> {
        if !matches!(self.state, PerformerState::Active { .. }) {
            return None;
        }
        let mut m = self.reply(MsgType::Finish);
        m.success = success;
        m.completion = if success { 1.0 } else { 0.0 };
        m.status = status.to_string();
        self.state = PerformerState::Inactive;
        Some(m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WorkStatus {
    Running { completion: f64 },
    Done { success: bool, status: String },
}

/// The domain-specific part of a performer.
pub trait ActionWork {
    /// Starts the work and returns its expected duration, if known.
    fn start(&mut self, args: &[String], now: f64) -> Option<f64>;
    fn progress(&mut self, now: f64) -> WorkStatus;
    fn abort(&mut self, now: f64);
    /// Earliest time at which `progress` may report completion.
    fn next_wakeup(&self) -> Option<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeedbackMode {
    Periodic(f64),
    /// At 25, 50 and 75 percent of the expected duration.
    Quartiles,
}

pub const DEFAULT_FEEDBACK_PERIOD: f64 = 0.5;
pub const DEFAULT_COMMIT_TIMEOUT: f64 = 2.0;

/// A performer machine driven by an [`ActionWork`].
pub struct Performer<W> {
    pub machine: PerformerMachine,
    pub work: W,
    pub feedback: FeedbackMode,
    pub commit_timeout: f64,
    committed_at: f64,
    pending_feedback: Vec<f64>,
    next_periodic: Option<f64>,
}

impl<W: ActionWork> Performer<W> {
    pub fn new(spec: PerformerSpec, work: W) -> Self {
        Performer {
            machine: PerformerMachine::new(spec),
            work,
            feedback: FeedbackMode::Periodic(DEFAULT_FEEDBACK_PERIOD),
            commit_timeout: DEFAULT_COMMIT_TIMEOUT,
            committed_at: 0.0,
            pending_feedback: Vec::new(),
            next_periodic: None,
        }
    }

    pub fn with_feedback(mut self, mode: FeedbackMode) -> Self {
        self.feedback = mode;
        self
    }

    pub fn id(&self) -> &str {
        self.machine.id()
    }

    pub fn is_idle(&self) -> bool {
        self.machine.state == PerformerState::Inactive
    }

    pub fn handle(&mut self, msg: &AuctionMessage, now: f64) -> Vec<AuctionMessage> {
        let (out, notice) = self.machine.handle(msg);
        if matches!(self.machine.state, PerformerState::Committed { .. }) && !out.is_empty() {
            self.committed_at = now;
        }
        match notice {
            Some(PerformerNotice::StartWork { args }) => {
                let expected = self.work.start(&args, now);
                self.pending_feedback.clear();
                self.next_periodic = None;
                match self.feedback {
                    FeedbackMode::Periodic(p) => self.next_periodic = Some(now + p),
                    FeedbackMode::Quartiles => {
                        if let Some(d) = expected {
                            self.pending_feedback = (1..=3).rev().map(|k| now + d * k as f64 / 4.0).collect();
                        }
                    }
                }
            }
            Some(PerformerNotice::AbortWork) => {
                self.work.abort(now);
                self.pending_feedback.clear();
                self.next_periodic = None;
            }
            None => {}
        }
        out
    }

    /// Reports completion or feedback that is due at `now`.
    pub fn poll(&mut self, now: f64) -> Vec<AuctionMessage> {
        match &self.machine.state {
            PerformerState::Inactive => Vec::new(),
            PerformerState::Committed { .. } => {
                if now >= self.committed_at + self.commit_timeout {
                    self.machine.release();
                }
                Vec::new()
            }
            PerformerState::Active { .. } => match self.work.progress(now) {
                WorkStatus::Done { success, status } => {
                    self.pending_feedback.clear();
                    self.next_periodic = None;
                    self.machine.finish(success, &status).into_iter().collect()
                }
                WorkStatus::Running { completion } => {
                    let mut due = false;
                    while self.pending_feedback.last().is_some_and(|&t| t <= now + 1e-9) {
                        self.pending_feedback.pop();
                        due = true;
                    }
                    if let (FeedbackMode::Periodic(p), Some(t)) = (self.feedback, self.next_periodic) {
                        if t <= now + 1e-9 {
                            due = true;
                            let mut next = t;
                            while next <= now + 1e-9 {
                                next += p;
                            }
                            self.next_periodic = Some(next);
                        }
                    }
                    if due {
                        self.machine.feedback(completion, "running").into_iter().collect()
                    } else {
                        Vec::new()
                    }
                }
            },
        }
    }

    pub fn next_deadline(&self) -> Option<f64> {
        match self.machine.state {
            PerformerState::Inactive => None,
            PerformerState::Committed { .. } => Some(self.committed_at + self.commit_timeout),
            PerformerState::Active { .. } => [self.work.next_wakeup(), self.pending_feedback.last().copied(), self.next_periodic]
                .into_iter()
                .flatten()
                .reduce(f64::min),
        }
    }
}

/// Work that takes a fixed time computed at start.
pub struct TimedWork<F> {
    duration: F,
    started: f64,
    end: Option<f64>,
    /// Completes with failure instead of success when set.
    pub fail_next: bool,
}

impl<F: FnMut(&[String]) -> f64> TimedWork<F> {
    pub fn new(duration: F) -> Self {
        TimedWork { duration, started: 0.0, end: None, fail_next: false }
    }
}

impl<F: FnMut(&[String]) -> f64> ActionWork for TimedWork<F> {
    fn start(&mut self, args: &[String], now: f64) -> Option<f64> {
        let d = (self.duration)(args).max(0.0);
        self.started = now;
        self.end = Some(now + d);
        Some(d)
    }

    fn progress(&mut self, now: f64) -> WorkStatus {
        match self.end {
            Some(end) if now + 1e-9 >= end => {
                self.end = None;
                if std::mem::take(&mut self.fail_next) {
                    WorkStatus::Done { success: false, status: "failed".into() }
                } else {
                    WorkStatus::Done { success: true, status: "done".into() }
                }
            }
            Some(end) => {
                let span = end - self.started;
                let c = if span > 0.0 { (now - self.started) / span } else { 1.0 };
                WorkStatus::Running { completion: c.clamp(0.0, 1.0) }
            }
            None => WorkStatus::Done { success: false, status: "not started".into() },
        }
    }

    fn abort(&mut self, _now: f64) {
        self.end = None;
    }

    fn next_wakeup(&self) -> Option<f64> {
        self.end
    }
}
