use std::io::Write;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{channel, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use super::message::{encode, AuctionMessage, CodecError};

#[derive(Debug, thiserror::Error)]
pub enum TransportError {
    #[error("transport is shut down")]
    Shutdown,
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A broadcast medium for auction messages. Every subscriber receives every
/// published message, including its own.
pub trait Transport: Send + Sync {
    fn publish(&self, msg: &AuctionMessage) -> Result<(), TransportError>;
    fn subscribe(&self) -> Result<Subscription, TransportError>;
    fn shutdown(&self);
}

pub struct Subscription {
    rx: Receiver<AuctionMessage>,
}

impl Subscription {
    pub(crate) fn new(rx: Receiver<AuctionMessage>) -> Self {
        Subscription { rx }
    }

    pub fn try_recv(&self) -> Option<AuctionMessage> {
        self.rx.try_recv().ok()
    }

    pub fn recv_timeout(&self, timeout: Duration) -> Option<AuctionMessage> {
        match self.rx.recv_timeout(timeout) {
            Ok(m) => Some(m),
            Err(RecvTimeoutError::Timeout | RecvTimeoutError::Disconnected) => None,
        }
    }

    pub fn drain(&self) -> Vec<AuctionMessage> {
        self.rx.try_iter().collect()
    }
}

/// A clock value shared between threads, in seconds.
#[derive(Debug, Clone, Default)]
pub struct SharedTime(Arc<AtomicU64>);

impl SharedTime {
    pub fn get(&self) -> f64 {
        f64::from_bits(self.0.load(Ordering::Relaxed))
    }

    pub fn set(&self, t: f64) {
        self.0.store(t.to_bits(), Ordering::Relaxed);
    }
}

enum TimeSource {
    Wall(Instant),
    Virtual(SharedTime),
}

/// One logged record.
#[derive(Debug, Clone, PartialEq)]
pub struct LogEntry {
    pub time: f64,
    pub msg: AuctionMessage,
}

struct HubInner {
    subscribers: Vec<Sender<AuctionMessage>>,
    sink: Option<Box<dyn Write + Send>>,
    history: Option<Vec<LogEntry>>,
    down: bool,
}

/// In-process hub. Fan-out happens synchronously in subscription order, so
/// delivery is ordered per sender and deterministic.
pub struct Hub {
    inner: Mutex<HubInner>,
    time: TimeSource,
}

impl Default for Hub {
    fn default() -> Self {
        Hub::new()
    }
}

impl Hub {
    pub fn new() -> Self {
        Hub::with_time(TimeSource::Wall(Instant::now()))
    }

    /// A hub that stamps log records with a virtual clock.
    pub fn with_clock(clock: SharedTime) -> Self {
        Hub::with_time(TimeSource::Virtual(clock))
    }

    fn with_time(time: TimeSource) -> Self {
        Hub {
            inner: Mutex::new(HubInner { subscribers: Vec::new(), sink: None, history: None, down: false }),
            time,
        }
    }

    /// Tees every record, prefixed with its time and a tab, to `sink`.
    pub fn tee(self, sink: Box<dyn Write + Send>) -> Self {
        self.inner.lock().unwrap().sink = Some(sink);
        self
    }

    /// Keeps every published message in memory.
    pub fn record(self) -> Self {
        self.inner.lock().unwrap().history = Some(Vec::new());
        self
    }

    pub fn history(&self) -> Vec<LogEntry> {
        self.inner.lock().unwrap().history.clone().unwrap_or_default()
    }

    pub fn now(&self) -> f64 {
        match &self.time {
            TimeSource::Wall(start) => start.elapsed().as_secs_f64(),
            TimeSource::Virtual(t) => t.get(),
        }
    }
}

impl Transport for Hub {
    fn publish(&self, msg: &AuctionMessage) -> Result<(), TransportError> {
        let record = encode(msg)?;
        let time = self.now();
        let mut inner = self.inner.lock().unwrap();
        if inner.down {
            return Err(TransportError::Shutdown);
        }
        if let Some(sink) = inner.sink.as_mut() {
            write!(sink, "{time:.3}\t{record}")?;
        }
        if let Some(h) = inner.history.as_mut() {
            h.push(LogEntry { time, msg: msg.clone() });
        }
        inner.subscribers.retain(|s| s.send(msg.clone()).is_ok());
        Ok(())
    }

    fn subscribe(&self) -> Result<Subscription, TransportError> {
        let mut inner = self.inner.lock().unwrap();
        if inner.down {
            return Err(TransportError::Shutdown);
        }
        let (tx, rx) = channel();
        inner.subscribers.push(tx);
        Ok(Subscription::new(rx))
    }

    fn shutdown(&self) {
        let mut inner = self.inner.lock().unwrap();
        inner.down = true;
        inner.subscribers.clear();
        if let Some(sink) = inner.sink.as_mut() {
            let _ = sink.flush();
        }
    }
}
