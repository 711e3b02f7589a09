use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

pub const PROTOCOL_VERSION: &str = "PS2A1";
pub const BROADCAST: &str = "*";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MsgType {
    Request,
    Response,
    Confirm,
    Reject,
    Feedback,
    Finish,
    Cancel,
}

impl MsgType {
    pub const ALL: [MsgType; 7] = [
        MsgType::Request,
        MsgType::Response,
        MsgType::Confirm,
        MsgType::Reject,
        MsgType::Feedback,
        MsgType::Finish,
        MsgType::Cancel,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MsgType::Request => "REQUEST",
            MsgType::Response => "RESPONSE",
            MsgType::Confirm => "CONFIRM",
            MsgType::Reject => "REJECT",
            MsgType::Feedback => "FEEDBACK",
            MsgType::Finish => "FINISH",
            MsgType::Cancel => "CANCEL",
        }
    }
}

impl fmt::Display for MsgType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MsgType {
    type Err = CodecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MsgType::ALL.into_iter().find(|t| t.as_str() == s).ok_or_else(|| CodecError::UnknownType(s.to_string()))
    }
}

/// One record on the action hub.
#[derive(Debug, Clone, PartialEq)]
pub struct AuctionMessage {
    pub msg_type: MsgType,
    pub sender: String,
    /// A node id, or [`BROADCAST`].
    pub recipient: String,
    pub action: String,
    pub args: Vec<String>,
    pub seq: u64,
    pub completion: f64,
    pub success: bool,
    pub status: String,
}

// Completion values are always finite, so bitwise identity is equality.
impl Eq for AuctionMessage {}

impl Hash for AuctionMessage {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.msg_type.hash(state);
        self.sender.hash(state);
        self.recipient.hash(state);
        self.action.hash(state);
        self.args.hash(state);
        self.seq.hash(state);
        self.completion.to_bits().hash(state);
        self.success.hash(state);
        self.status.hash(state);
    }
}

impl AuctionMessage {
    pub fn new(msg_type: MsgType, sender: &str, recipient: &str, action: &str, args: &[String], seq: u64) -> Self {
        AuctionMessage {
            msg_type,
            sender: sender.to_string(),
            recipient: recipient.to_string(),
            action: action.to_string(),
            args: args.to_vec(),
            seq,
            completion: 0.0,
            success: false,
            status: String::new(),
        }
    }

    pub fn is_broadcast(&self) -> bool {
        self.recipient == BROADCAST
    }

    pub fn is_for(&self, id: &str) -> bool {
        self.recipient == id || self.is_broadcast()
    }

    /// `(action arg1 arg2)`
    pub fn action_text(&self) -> String {
        let mut s = format!("({}", self.action);
        for a in &self.args {
            s.push(' ');
            s.push_str(a);
        }
        s.push(')');
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    #[error("field `{field}` contains a tab or newline")]
    ForbiddenCharacter { field: &'static str },
    #[error("argument {0:?} is empty or contains a comma")]
    BadArgument(String),
    #[error("completion {0} is outside [0, 1]")]
    BadCompletion(String),
    #[error("record does not end with a newline")]
    MissingNewline,
    #[error("unsupported protocol version `{0}`")]
    BadVersion(String),
    #[error("expected 10 fields, found {0}")]
    FieldCount(usize),
    #[error("unknown message type `{0}`")]
    UnknownType(String),
    #[error("invalid {field} `{value}`")]
    BadField { field: &'static str, value: String },
}

fn check(field: &'static str, value: &str) -> Result<(), CodecError> {
    if value.contains(['\t', '\n', '\r']) {
        Err(CodecError::ForbiddenCharacter { field })
    } else {
        Ok(())
    }
}

/// Serializes one record:
/// `PS2A1 TYPE sender recipient action args seq completion success status`,
/// tab separated, args comma separated, newline terminated.
pub fn encode(m: &AuctionMessage) -> Result<String, CodecError> {
    check("sender", &m.sender)?;
    check("recipient", &m.recipient)?;
    check("action", &m.action)?;
    check("status", &m.status)?;
    if m.sender.is_empty() {
        return Err(CodecError::BadField { field: "sender", value: String::new() });
    }
    if m.recipient.is_empty() {
        return Err(CodecError::BadField { field: "recipient", value: String::new() });
    }
    for a in &m.args {
        check("args", a)?;
        if a.is_empty() || a.contains(',') {
            return Err(CodecError::BadArgument(a.clone()));
        }
    }
    if !(0.0..=1.0).contains(&m.completion) {
        return Err(CodecError::BadCompletion(m.completion.to_string()));
    }
    Ok(format!(
        "{PROTOCOL_VERSION}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
        m.msg_type,
        m.sender,
        m.recipient,
        m.action,
        m.args.join(","),
        m.seq,
        m.completion,
        u8::from(m.success),
        m.status
    ))
}

pub fn decode(record: &str) -> Result<AuctionMessage, CodecError> {
    let body = record.strip_suffix('\n').ok_or(CodecError::MissingNewline)?;
    let fields: Vec<&str> = body.split('\t').collect();
    if fields.first() != Some(&PROTOCOL_VERSION) {
        return Err(CodecError::BadVersion(fields.first().unwrap_or(&"").to_string()));
    }
    if fields.len() != 10 {
        return Err(CodecError::FieldCount(fields.len()));
    }
    if fields[9].contains(['\n', '\r']) {
        return Err(CodecError::ForbiddenCharacter { field: "status" });
    }
    let bad = |field: &'static str, value: &str| CodecError::BadField { field, value: value.to_string() };
    let msg_type: MsgType = fields[1].parse()?;
    for (i, name) in [(2, "sender"), (3, "recipient")] {
        if fields[i].is_empty() {
            return Err(bad(name, fields[i]));
        }
    }
    let args = if fields[5].is_empty() {
        Vec::new()
    } else {
        let parts: Vec<String> = fields[5].split(',').map(str::to_string).collect();
        if parts.iter().any(String::is_empty) {
            return Err(CodecError::BadArgument(fields[5].to_string()));
        }
        parts
    };
    let seq = fields[6].parse().map_err(|_| bad("seq", fields[6]))?;
    let completion: f64 = fields[7].parse().map_err(|_| bad("completion", fields[7]))?;
    if !(0.0..=1.0).contains(&completion) {
        return Err(CodecError::BadCompletion(fields[7].to_string()));
    }
    let success = match fields[8] {
        "0" => false,
        "1" => true,
        other => return Err(bad("success", other)),
    };
    Ok(AuctionMessage {
        msg_type,
        sender: fields[2].to_string(),
        recipient: fields[3].to_string(),
        action: fields[4].to_string(),
        args,
        seq,
        completion,
        success,
        status: fields[9].to_string(),
    })
}
