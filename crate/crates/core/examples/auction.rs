//! One auction on an in-process hub: a client asks for `move`, two
//! performers bid, the first bidder wins and works for three seconds.
//!
//! `cargo run --example auction`

use std::sync::Arc;

use planexec::auction::{
    encode, ActionClient, FeedbackMode, Hub, Performer, PerformerSpec, SharedTime, TimedWork, Transport,
};

fn main() {
    let time = SharedTime::default();
    let hub = Arc::new(Hub::with_clock(time.clone()).record());
    let mut performers: Vec<_> = ["rb1", "rb2"]
        .iter()
        .map(|r| {
            let spec = PerformerSpec::new(&format!("{r}-move"), "move");
            let p = Performer::new(spec, TimedWork::new(|_: &[String]| 3.0)).with_feedback(FeedbackMode::Periodic(1.0));
            (p, hub.subscribe().unwrap())
        })
        .collect();
    let inbox = hub.subscribe().unwrap();
    let args = vec!["assembly_zone".to_string(), "wheels_zone".to_string()];
    let (mut client, request) = ActionClient::start("exec", 1, "move", &args, 1.0, 0.0);
    hub.publish(&request).unwrap();

    let mut now = 0.0;
    while !client.machine.is_finished() && now < 10.0 {
        time.set(now);
        loop {
            let mut out = Vec::new();
            for (p, sub) in &mut performers {
                for m in sub.drain() {
                    out.extend(p.handle(&m, now));
                }
                out.extend(p.poll(now));
            }
            for m in inbox.drain() {
                out.extend(client.handle(&m, now));
            }
            if out.is_empty() {
                break;
            }
            out.iter().for_each(|m| hub.publish(m).unwrap());
        }
        now += 0.5;
    }
    for entry in hub.history() {
        print!("{:6.3}  {}", entry.time, encode(&entry.msg).unwrap());
    }
    println!("performer: {:?}", client.machine.performer());
}
