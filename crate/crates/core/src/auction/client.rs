use super::message::{AuctionMessage, MsgType, BROADCAST};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ClientState {
    Auctioning,
    Confirmed { performer: String },
    Running { performer: String },
    Done { performer: String, success: bool },
    Cancelled,
}

/// Something the owner of a client should know about.
#[derive(Debug, Clone, PartialEq)]
pub enum ClientNotice {
    Confirmed { performer: String },
    Feedback { completion: f64, status: String },
    Finished { success: bool, status: String },
}

/// Client side of one auction. Holds no clock; the owner calls
/// [`retry`](Self::retry) when the retry interval elapses.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ClientMachine {
    pub id: String,
    pub seq: u64,
    pub action: String,
    pub args: Vec<String>,
    pub state: ClientState,
}

impl ClientMachine {
    /// Creates the client and the initial broadcast REQUEST.
    pub fn start(id: &str, seq: u64, action: &str, args: &[String]) -> (Self, AuctionMessage) {
        let m = ClientMachine {
            id: id.to_string(),
            seq,
            action: action.to_string(),
            args: args.to_vec(),
            state: ClientState::Auctioning,
        };
        let req = m.message(MsgType::Request, BROADCAST);
        (m, req)
    }

    fn message(&self, t: MsgType, to: &str) -> AuctionMessage {
        AuctionMessage::new(t, &self.id, to, &self.action, &self.args, self.seq)
    }

    pub fn performer(&self) -> Option<&str> {
        match &self.state {
            ClientState::Confirmed { performer }
            | ClientState::Running { performer }
            | ClientState::Done { performer, .. } => Some(performer),
            _ => None,
        }
    }

    pub fn is_finished(&self) -> bool {
        matches!(self.state, ClientState::Done { .. } | ClientState::Cancelled)
    }

    /// Re-broadcasts the REQUEST while no performer has been confirmed.
    pub fn retry(&self) -> Option<AuctionMessage> {
        (self.state == ClientState::Auctioning).then(|| self.message(MsgType::Request, BROADCAST))
    }

    pub fn handle(&mut self, msg: &AuctionMessage) -> (Vec<AuctionMessage>, Option<ClientNotice>) {
        if msg.recipient != self.id || msg.seq != self.seq {
            return (Vec::new(), None);
        }
        match msg.msg_type {
            MsgType::Response => {
                if self.state == ClientState::Auctioning {
                    let performer = msg.sender.clone();
                    self.state = ClientState::Confirmed { performer: performer.clone() };
                    (vec![self.message(MsgType::Confirm, &performer)], Some(ClientNotice::Confirmed { performer }))
                } else {
                    (vec![self.message(MsgType::Reject, &msg.sender)], None)
                }
            }
            MsgType::Feedback if self.performer() == Some(msg.sender.as_str()) && !self.is_finished() => {
                let performer = msg.sender.clone();
                self.state = ClientState::Running { performer };
                (Vec::new(), Some(ClientNotice::Feedback { completion: msg.completion, status: msg.status.clone() }))
            }
            MsgType::Finish if self.performer() == Some(msg.sender.as_str()) && !self.is_finished() => {
                let performer = msg.sender.clone();
                self.state = ClientState::Done { performer, success: msg.success };
                (Vec::new(), Some(ClientNotice::Finished { success: msg.success, status: msg.status.clone() }))
            }
            _ => (Vec::new(), None),
        }
    }

    /// Aborts the auction or the execution. During the auction the CANCEL is
    /// broadcast so that committed bidders are released.
    pub fn cancel(&mut self) -> Vec<AuctionMessage> {
        let out = match &self.state {
            ClientState::Auctioning => vec![self.message(MsgType::Cancel, BROADCAST)],
            ClientState::Confirmed { performer } | ClientState::Running { performer } => {
                vec![self.message(MsgType::Cancel, performer)]
            }
            ClientState::Done { .. } | ClientState::Cancelled => return Vec::new(),
        };
        self.state = ClientState::Cancelled;
        out
    }
}

/// A client with timing and the latest feedback.
#[derive(Debug, Clone)]
pub struct ActionClient {
    pub machine: ClientMachine,
    pub completion: f64,
    pub status: String,
    pub retry_interval: f64,
    last_request: f64,
    /// Time of CONFIRM and of the end of execution, when known.
    pub confirmed_at: Option<f64>,
    pub finished_at: Option<f64>,
}

impl ActionClient {
    pub fn start(
        id: &str,
        seq: u64,
        action: &str,
        args: &[String],
        retry_interval: f64,
        now: f64,
    ) -> (Self, AuctionMessage) {
        let (machine, req) = ClientMachine::start(id, seq, action, args);
        let c = ActionClient {
            machine,
            completion: 0.0,
            status: String::new(),
            retry_interval,
            last_request: now,
            confirmed_at: None,
            finished_at: None,
        };
        (c, req)
    }

    pub fn handle(&mut self, msg: &AuctionMessage, now: f64) -> Vec<AuctionMessage> {
        let (out, notice) = self.machine.handle(msg);
        match notice {
            Some(ClientNotice::Confirmed { .. }) => self.confirmed_at = Some(now),
            Some(ClientNotice::Feedback { completion, status }) => {
                self.completion = completion;
                self.status = status;
            }
            Some(ClientNotice::Finished { success, status }) => {
                if success {
                    self.completion = 1.0;
                }
                self.status = status;
                self.finished_at = Some(now);
            }
            None => {}
        }
        out
    }

    /// Retries when due.
    pub fn poll(&mut self, now: f64) -> Option<AuctionMessage> {
        if now + 1e-9 < self.last_request + self.retry_interval {
            return None;
        }
        let req = self.machine.retry()?;
        self.last_request = now;
        Some(req)
    }

    pub fn next_deadline(&self) -> Option<f64> {
        (self.machine.state == ClientState::Auctioning).then_some(self.last_request + self.retry_interval)
    }

    pub fn cancel(&mut self, now: f64) -> Vec<AuctionMessage> {
        let out = self.machine.cancel();
        if !out.is_empty() && self.confirmed_at.is_some() {
            self.finished_at = Some(now);
        }
        out
    }
}
