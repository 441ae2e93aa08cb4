//! Hand-off between network ingestion and the control loop.

use std::sync::{Arc, Mutex};

use super::session::Inbox;
use super::wire::Frame;

#[derive(Debug, Default)]
struct Slots {
    inbox: Inbox,
    /// Interface frames replaced before the control loop consumed them.
    overwritten: u64,
}

/// Single-slot latest-value mailbox for interface frames plus an ordered
/// queue for commands. Cloning shares the same mailbox.
#[derive(Debug, Clone, Default)]
pub struct Mailbox {
    slots: Arc<Mutex<Slots>>,
}

impl Mailbox {
    pub fn new() -> Self {
        Self::default()
    }

    /// Posts a decoded frame. An interface frame only replaces the pending
    /// one if its sequence number is newer; telemetry frames are ignored.
    pub fn post(&self, frame: Frame) {
        let mut s = self.slots.lock().expect("mailbox poisoned");
        match frame {
            Frame::Hello(h) => s.inbox.hello = Some(h),
            Frame::Interface(m) => match &s.inbox.interface {
                Some(pending) if pending.seq >= m.seq => {}
                Some(_) => {
                    s.overwritten += 1;
                    s.inbox.interface = Some(m);
                }
                None => s.inbox.interface = Some(m),
            },
            Frame::Command(c) => s.inbox.commands.push(c),
            Frame::Telemetry(_) => log::debug!("telemetry frame ignored on ingest"),
        }
    }

    /// Takes everything pending, leaving the mailbox empty.
    pub fn take(&self) -> Inbox {
        std::mem::take(&mut self.slots.lock().expect("mailbox poisoned").inbox)
    }

    pub fn overwritten(&self) -> u64 {
        self.slots.lock().expect("mailbox poisoned").overwritten
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::Pose;
    use crate::service::wire::{Buttons, CommandKind, CommandMsg, InterfaceMsg, RawPose};

    fn iface(seq: u32) -> Frame {
        Frame::Interface(InterfaceMsg {
            seq,
            timestamp_ms: seq,
            pose: RawPose::from(&Pose::identity()),
            buttons: Buttons::default(),
        })
    }

    fn command(seq: u32) -> Frame {
        Frame::Command(CommandMsg {
            seq,
            timestamp_ms: 0,
            kind: CommandKind::GripperToggle,
        })
    }

    #[test]
    fn keeps_newest_interface_and_all_commands() {
        let m = Mailbox::new();
        m.post(iface(1));
        m.post(command(1));
        m.post(iface(3));
        m.post(iface(2));
        m.post(command(2));
        let inbox = m.take();
        assert_eq!(inbox.interface.unwrap().seq, 3);
        let seqs: Vec<u32> = inbox.commands.iter().map(|c| c.seq).collect();
        assert_eq!(seqs, vec![1, 2]);
        assert_eq!(m.overwritten(), 1);
        assert!(m.take().is_empty());
    }

    #[test]
    fn shared_across_threads() {
        let m = Mailbox::new();
        let producer = m.clone();
        std::thread::spawn(move || {
            for s in 1..=100 {
                producer.post(iface(s));
            }
        })
        .join()
        .unwrap();
        assert_eq!(m.take().interface.unwrap().seq, 100);
    }
}
