use std::net::{SocketAddr, UdpSocket};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{channel, Sender};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use super::hub::{Subscription, Transport, TransportError};
use super::message::{decode, encode, AuctionMessage};

/// Sends every record as one datagram to each peer address. A reader thread
/// decodes incoming datagrams and fans them out to subscribers; undecodable
/// datagrams are dropped.
pub struct UdpTransport {
    socket: UdpSocket,
    peers: Vec<SocketAddr>,
    subscribers: Arc<Mutex<Vec<Sender<AuctionMessage>>>>,
    down: Arc<AtomicBool>,
    reader: Mutex<Option<JoinHandle<()>>>,
}

impl UdpTransport {
    pub fn bind(addr: SocketAddr, peers: Vec<SocketAddr>) -> Result<Self, TransportError> {
        let socket = UdpSocket::bind(addr)?;
        if let SocketAddr::V4(group) = peers.first().copied().unwrap_or(addr) {
            if group.ip().is_multicast() {
                socket.join_multicast_v4(group.ip(), &std::net::Ipv4Addr::UNSPECIFIED)?;
                socket.set_multicast_loop_v4(true)?;
            }
        }
        socket.set_read_timeout(Some(Duration::from_millis(50)))?;
        let subscribers: Arc<Mutex<Vec<Sender<AuctionMessage>>>> = Arc::default();
        let down = Arc::new(AtomicBool::new(false));
        let reader = {
            let socket = socket.try_clone()?;
            let subscribers = subscribers.clone();
            let down = down.clone();
            std::thread::spawn(move || {
                let mut buf = vec![0u8; 65536];
                while !down.load(Ordering::Relaxed) {
                    let Ok(n) = socket.recv(&mut buf) else { continue };
                    let Ok(text) = std::str::from_utf8(&buf[..n]) else { continue };
                    let Ok(msg) = decode(text) else { continue };
                    subscribers.lock().unwrap().retain(|s| s.send(msg.clone()).is_ok());
                }
            })
        };
        Ok(UdpTransport { socket, peers, subscribers, down, reader: Mutex::new(Some(reader)) })
    }

    pub fn local_addr(&self) -> Result<SocketAddr, TransportError> {
        Ok(self.socket.local_addr()?)
    }
}

impl Transport for UdpTransport {
    fn publish(&self, msg: &AuctionMessage) -> Result<(), TransportError> {
        if self.down.load(Ordering::Relaxed) {
            return Err(TransportError::Shutdown);
        }
        let record = encode(msg)?;
        for peer in &self.peers {
            self.socket.send_to(record.as_bytes(), peer)?;
        }
        Ok(())
    }

    fn subscribe(&self) -> Result<Subscription, TransportError> {
        if self.down.load(Ordering::Relaxed) {
            return Err(TransportError::Shutdown);
        }
        let (tx, rx) = channel();
        self.subscribers.lock().unwrap().push(tx);
        Ok(Subscription::new(rx))
    }

    fn shutdown(&self) {
        self.down.store(true, Ordering::Relaxed);
        self.subscribers.lock().unwrap().clear();
        if let Some(h) = self.reader.lock().unwrap().take() {
            let _ = h.join();
        }
    }
}

impl Drop for UdpTransport {
    fn drop(&mut self) {
        self.shutdown();
    }
}
