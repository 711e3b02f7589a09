//! Auction-based dispatch of actions to performers over a broadcast hub.
//!
//! A client broadcasts a REQUEST, the first RESPONSE gets the CONFIRM and
//! later bidders a REJECT. The confirmed performer reports FEEDBACK and a
//! final FINISH. The machines here do no I/O and keep no clocks.

mod client;
mod hub;
mod message;
mod performer;
mod udp;

pub use client::{ActionClient, ClientMachine, ClientNotice, ClientState};
pub use hub::{Hub, LogEntry, SharedTime, Subscription, Transport, TransportError};
pub use message::{decode, encode, AuctionMessage, CodecError, MsgType, BROADCAST, PROTOCOL_VERSION};
pub use performer::{
    ActionWork, FeedbackMode, Performer, PerformerMachine, PerformerNotice, PerformerSpec, PerformerState,
    TimedWork, WorkStatus, DEFAULT_COMMIT_TIMEOUT, DEFAULT_FEEDBACK_PERIOD,
};
pub use udp::UdpTransport;

pub const DEFAULT_RETRY_INTERVAL: f64 = 1.0;
