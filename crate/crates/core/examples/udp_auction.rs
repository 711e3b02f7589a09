//! Sends an auction request over UDP between two sockets on loopback.
//!
//! `cargo run --example udp_auction`

use std::time::Duration;

use planexec::auction::{AuctionMessage, MsgType, Transport, UdpTransport, BROADCAST};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let performer = UdpTransport::bind("127.0.0.1:0".parse().unwrap(), Vec::new())?;
    let executor = UdpTransport::bind("127.0.0.1:0".parse().unwrap(), vec![performer.local_addr()?])?;
    println!("performer on {}, executor on {}", performer.local_addr()?, executor.local_addr()?);

    let inbox = performer.subscribe()?;
    let args = vec!["rb1".to_string(), "wheels_zone".to_string()];
    let request = AuctionMessage::new(MsgType::Request, "executor", BROADCAST, "move", &args, 1);
    executor.publish(&request)?;
    match inbox.recv_timeout(Duration::from_secs(2)) {
        Some(m) => println!("received {} {} from {}", m.msg_type, m.action_text(), m.sender),
        None => println!("nothing received"),
    }
    executor.shutdown();
    performer.shutdown();
    Ok(())
}
