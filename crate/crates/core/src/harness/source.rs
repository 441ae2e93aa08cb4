//! Where a trial's interface frames come from.

use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::error::HarnessError;
use crate::service::{
    decode_prefix, Endpoints, Frame, Inbox, Mailbox, NetService, TelemetryFanout, TelemetryMsg,
};

use super::scenario::SubtaskKind;

/// Trial progress as seen by an input source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Progress {
    /// Index of the subtask being evaluated; equals the subtask count once
    /// the trial is over.
    pub index: usize,
    pub subtask: Option<SubtaskKind>,
    /// Whether the previous subtask ended in a timeout.
    pub previous_failed: bool,
}

pub trait InputSource {
    /// Called once before the first tick with the trial's mailbox and
    /// telemetry fan-out.
    fn start(&mut self, _mailbox: &Mailbox, _telemetry: &Arc<TelemetryFanout>) -> Result<(), HarnessError> {
        Ok(())
    }

    /// Posts every frame that has arrived by `clock`. `view` is the latest
    /// telemetry snapshot, i.e. what an operator watching the UI would see.
    fn poll(
        &mut self,
        clock: f64,
        view: &TelemetryMsg,
        progress: &Progress,
        mailbox: &Mailbox,
    ) -> Result<(), HarnessError>;

    fn label(&self) -> String;
}

/// Serialized frame log: each record is the receive time as a little-endian
/// `f64` followed by one encoded frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Recording {
    bytes: Vec<u8>,
}

impl Recording {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, t: f64, frame: &Frame) {
        self.bytes.extend_from_slice(&t.to_le_bytes());
        self.bytes.extend(frame.encode());
    }

    /// Records the frames of one consumed inbox in consumption order.
    pub fn push_inbox(&mut self, t: f64, inbox: &Inbox) {
        if let Some(h) = inbox.hello {
            self.push(t, &Frame::Hello(h));
        }
        for c in &inbox.commands {
            self.push(t, &Frame::Command(*c));
        }
        if let Some(m) = inbox.interface {
            self.push(t, &Frame::Interface(m));
        }
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }

    pub fn parse(bytes: &[u8]) -> Result<Vec<(f64, Frame)>, HarnessError> {
        let mut out = Vec::new();
        let mut at = 0;
        while at < bytes.len() {
            let Some(t) = bytes.get(at..at + 8) else {
                return Err(HarnessError::InvalidScenario("truncated replay record".into()));
            };
            let t = f64::from_le_bytes(t.try_into().expect("8 bytes"));
            at += 8;
            let Some((frame, used)) = decode_prefix(&bytes[at..])? else {
                return Err(HarnessError::InvalidScenario("truncated replay frame".into()));
            };
            if !t.is_finite() || out.last().is_some_and(|(last, _)| t < *last) {
                return Err(HarnessError::InvalidScenario("replay times out of order".into()));
            }
            out.push((t, frame));
            at += used;
        }
        Ok(out)
    }
}

/// Replays a recording, delivering each frame at its recorded receive time.
#[derive(Debug, Clone)]
pub struct ReplaySource {
    frames: Vec<(f64, Frame)>,
    next: usize,
}

impl ReplaySource {
    pub fn new(frames: Vec<(f64, Frame)>) -> Self {
        Self { frames, next: 0 }
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, HarnessError> {
        Ok(Self::new(Recording::parse(bytes)?))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, HarnessError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

impl InputSource for ReplaySource {
    fn poll(
        &mut self,
        clock: f64,
        _view: &TelemetryMsg,
        _progress: &Progress,
        mailbox: &Mailbox,
    ) -> Result<(), HarnessError> {
        while let Some((t, frame)) = self.frames.get(self.next) {
            if *t > clock {
                break;
            }
            mailbox.post(*frame);
            self.next += 1;
        }
        Ok(())
    }

    fn label(&self) -> String {
        "replay".into()
    }
}

/// Passes another source through until a given subtask starts, then goes
/// silent, as if the interface link froze.
pub struct FrozenSource<S> {
    inner: S,
    freeze_at: SubtaskKind,
    frozen: bool,
}

impl<S: InputSource> FrozenSource<S> {
    pub fn new(inner: S, freeze_at: SubtaskKind) -> Self {
        Self {
            inner,
            freeze_at,
            frozen: false,
        }
    }
}

impl<S: InputSource> InputSource for FrozenSource<S> {
    fn start(&mut self, mailbox: &Mailbox, telemetry: &Arc<TelemetryFanout>) -> Result<(), HarnessError> {
        self.inner.start(mailbox, telemetry)
    }

    fn poll(
        &mut self,
        clock: f64,
        view: &TelemetryMsg,
        progress: &Progress,
        mailbox: &Mailbox,
    ) -> Result<(), HarnessError> {
        self.frozen |= progress.subtask == Some(self.freeze_at);
        if self.frozen {
            return Ok(());
        }
        self.inner.poll(clock, view, progress, mailbox)
    }

    fn label(&self) -> String {
        format!("frozen({})", self.inner.label())
    }
}

/// Frames from the network, with the trial paced to wall-clock time.
pub struct LiveSource {
    endpoints: Endpoints,
    service: Option<NetService>,
    wall_start: Option<Instant>,
}

impl LiveSource {
    pub fn new(endpoints: Endpoints) -> Self {
        Self {
            endpoints,
            service: None,
            wall_start: None,
        }
    }

    pub fn service(&self) -> Option<&NetService> {
        self.service.as_ref()
    }
}

impl InputSource for LiveSource {
    fn start(&mut self, mailbox: &Mailbox, telemetry: &Arc<TelemetryFanout>) -> Result<(), HarnessError> {
        self.service = Some(NetService::start(self.endpoints, mailbox.clone(), telemetry.clone())?);
        Ok(())
    }

    fn poll(
        &mut self,
        clock: f64,
        _view: &TelemetryMsg,
        _progress: &Progress,
        _mailbox: &Mailbox,
    ) -> Result<(), HarnessError> {
        let start = *self.wall_start.get_or_insert_with(Instant::now);
        let due = start + Duration::from_secs_f64(clock.max(0.0));
        let now = Instant::now();
        if due > now {
            std::thread::sleep(due - now);
        }
        Ok(())
    }

    fn label(&self) -> String {
        "live".into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::Pose;
    use crate::service::{Buttons, CommandKind, CommandMsg, HelloMsg, InterfaceMsg, RawPose};

    fn iface(seq: u32) -> InterfaceMsg {
        InterfaceMsg {
            seq,
            timestamp_ms: seq,
            pose: RawPose::from(&Pose::identity()),
            buttons: Buttons::default(),
        }
    }

    #[test]
    fn recording_round_trip() {
        let mut rec = Recording::new();
        let inbox = Inbox {
            hello: Some(HelloMsg { nonce: 1, clock_ms: 0 }),
            interface: Some(iface(3)),
            commands: vec![CommandMsg {
                seq: 1,
                timestamp_ms: 0,
                kind: CommandKind::Detach,
            }],
        };
        rec.push_inbox(0.5, &inbox);
        rec.push(0.6, &Frame::Interface(iface(4)));
        let frames = Recording::parse(rec.as_bytes()).unwrap();
        assert_eq!(frames.len(), 4);
        assert_eq!(frames[0].1, Frame::Hello(inbox.hello.unwrap()));
        assert_eq!(frames[3].0, 0.6);
        assert!(Recording::parse(&rec.as_bytes()[..rec.as_bytes().len() - 1]).is_err());
    }

    #[test]
    fn replay_delivers_by_time() {
        let mut rec = Recording::new();
        rec.push(0.1, &Frame::Interface(iface(1)));
        rec.push(0.2, &Frame::Interface(iface(2)));
        let mut src = ReplaySource::from_bytes(rec.as_bytes()).unwrap();
        let mailbox = Mailbox::new();
        let view = crate::harness::trial::blank_telemetry();
        let p = Progress {
            index: 0,
            subtask: None,
            previous_failed: false,
        };
        src.poll(0.15, &view, &p, &mailbox).unwrap();
        assert_eq!(mailbox.take().interface.unwrap().seq, 1);
        src.poll(0.15, &view, &p, &mailbox).unwrap();
        assert!(mailbox.take().is_empty());
        src.poll(1.0, &view, &p, &mailbox).unwrap();
        assert_eq!(mailbox.take().interface.unwrap().seq, 2);
    }
}
