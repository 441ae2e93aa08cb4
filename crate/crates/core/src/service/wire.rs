//! Binary frame format shared by the datagram, stream and WebSocket transports.
//!
//! Every frame is an 8-byte header `{magic u32, version u8, type u8, length
//! u16}` followed by a fixed-size payload. All fields are little-endian.
//! Floats travel as raw IEEE-754 bits so encode/decode is bit-exact.

use crate::error::WireError;
use crate::kinematics::Pose;
use crate::mapper::{Axis, GripperState, TeleopMode};

use super::session::SessionState;

pub const MAGIC: u32 = 0x4D43_5254;
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 8;

const TYPE_HELLO: u8 = 1;
const TYPE_INTERFACE: u8 = 2;
const TYPE_COMMAND: u8 = 3;
const TYPE_TELEMETRY: u8 = 4;

const HELLO_LEN: usize = 8;
const INTERFACE_LEN: usize = 92;
const COMMAND_LEN: usize = 12;
const TELEMETRY_LEN: usize = 336;

/// Largest encoded frame.
pub const MAX_FRAME_LEN: usize = HEADER_LEN + TELEMETRY_LEN;

/// Pose as sent on the wire: quaternion `(w, x, y, z)` and translation, not
/// renormalized, so a decoded frame re-encodes to the same bytes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawPose {
    pub quat_wxyz: [f64; 4],
    pub translation: [f64; 3],
}

impl RawPose {
    pub fn to_pose(&self) -> Option<Pose> {
        Pose::from_raw(self.quat_wxyz, self.translation)
    }

    fn is_valid(&self) -> bool {
        self.quat_wxyz.iter().chain(&self.translation).all(|v| v.is_finite()) && self.to_pose().is_some()
    }
}

impl From<&Pose> for RawPose {
    fn from(p: &Pose) -> Self {
        Self {
            quat_wxyz: p.quat_wxyz(),
            translation: p.translation.into(),
        }
    }
}

/// Session handshake: the sender's clock at send time, used to map sender
/// timestamps onto the receiver's clock.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HelloMsg {
    pub nonce: u32,
    pub clock_ms: u32,
}

/// Interface-side controls. Toggles are free-running counters so a press is
/// not lost when intermediate frames are dropped. A zero priority or
/// impedance scale means "use the configured default".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Buttons {
    pub mode_toggle: u8,
    pub gripper_toggle: u8,
    pub eta_arm: f64,
    pub eta_base: f64,
    pub impedance_scale: f64,
}

impl Default for Buttons {
    fn default() -> Self {
        Self {
            mode_toggle: 0,
            gripper_toggle: 0,
            eta_arm: 0.0,
            eta_base: 0.0,
            impedance_scale: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfaceMsg {
    pub seq: u32,
    /// Milliseconds since the sender's session start.
    pub timestamp_ms: u32,
    pub pose: RawPose,
    pub buttons: Buttons,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum CommandKind {
    Attach = 1,
    Detach = 2,
    ModeToggle = 3,
    GripperToggle = 4,
    SafetyStop = 5,
    Resume = 6,
}

impl CommandKind {
    pub const ALL: [CommandKind; 6] = [
        CommandKind::Attach,
        CommandKind::Detach,
        CommandKind::ModeToggle,
        CommandKind::GripperToggle,
        CommandKind::SafetyStop,
        CommandKind::Resume,
    ];

    fn from_u8(v: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|k| *k as u8 == v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CommandMsg {
    pub seq: u32,
    pub timestamp_ms: u32,
    pub kind: CommandKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TelemetryMsg {
    pub seq: u32,
    pub clock: f64,
    pub q: [f64; 10],
    pub qd: [f64; 10],
    pub ee: RawPose,
    pub session: SessionState,
    pub mode: Option<TeleopMode>,
    pub gripper: GripperState,
    pub lock_axis: Option<Axis>,
    pub lock_engaged: bool,
    pub flags: u16,
    /// Active wrench `(F, τ)`.
    pub wrench: [f64; 6],
    pub dead_zone: f64,
    pub saturation: f64,
    pub ball: [f64; 3],
    pub drawer_opening: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Frame {
    Hello(HelloMsg),
    Interface(InterfaceMsg),
    Command(CommandMsg),
    Telemetry(TelemetryMsg),
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    fn f64s(&mut self, vs: &[f64]) {
        vs.iter().for_each(|v| self.f64(*v));
    }
    fn pose(&mut self, p: &RawPose) {
        self.f64s(&p.quat_wxyz);
        self.f64s(&p.translation);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take<const N: usize>(&mut self) -> [u8; N] {
        // Callers check the payload length up front.
        let out: [u8; N] = self.buf[self.at..self.at + N].try_into().expect("length checked");
        self.at += N;
        out
    }
    fn u8(&mut self) -> u8 {
        self.take::<1>()[0]
    }
    fn u16(&mut self) -> u16 {
        u16::from_le_bytes(self.take())
    }
    fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.take())
    }
    fn f64(&mut self) -> f64 {
        f64::from_bits(u64::from_le_bytes(self.take()))
    }
    fn f64s<const N: usize>(&mut self) -> [f64; N] {
        std::array::from_fn(|_| self.f64())
    }
    fn pose(&mut self) -> RawPose {
        RawPose {
            quat_wxyz: self.f64s(),
            translation: self.f64s(),
        }
    }
    fn zero(&mut self, n: usize) -> Result<(), WireError> {
        for _ in 0..n {
            if self.u8() != 0 {
                return Err(WireError::MalformedFrame("reserved byte set"));
            }
        }
        Ok(())
    }
}

fn session_code(s: SessionState) -> u8 {
    match s {
        SessionState::Idle => 0,
        SessionState::AttachedLocal => 1,
        SessionState::DetachedManipulation => 2,
        SessionState::DetachedLocomotion => 3,
        SessionState::SafetyStop => 4,
    }
}

fn session_from(v: u8) -> Result<SessionState, WireError> {
    Ok(match v {
        0 => SessionState::Idle,
        1 => SessionState::AttachedLocal,
        2 => SessionState::DetachedManipulation,
        3 => SessionState::DetachedLocomotion,
        4 => SessionState::SafetyStop,
        _ => return Err(WireError::MalformedFrame("unknown session state")),
    })
}

fn mode_code(m: Option<TeleopMode>) -> u8 {
    match m {
        None => 0,
        Some(TeleopMode::DetachedManipulation) => 1,
        Some(TeleopMode::DetachedLocomotion) => 2,
        Some(TeleopMode::AttachedLocal) => 3,
    }
}

fn mode_from(v: u8) -> Result<Option<TeleopMode>, WireError> {
    Ok(match v {
        0 => None,
        1 => Some(TeleopMode::DetachedManipulation),
        2 => Some(TeleopMode::DetachedLocomotion),
        3 => Some(TeleopMode::AttachedLocal),
        _ => return Err(WireError::MalformedFrame("unknown mode")),
    })
}

fn axis_code(a: Option<Axis>) -> u8 {
    match a {
        None => 0,
        Some(Axis::X) => 1,
        Some(Axis::Y) => 2,
        Some(Axis::Yaw) => 3,
    }
}

fn axis_from(v: u8) -> Result<Option<Axis>, WireError> {
    Ok(match v {
        0 => None,
        1 => Some(Axis::X),
        2 => Some(Axis::Y),
        3 => Some(Axis::Yaw),
        _ => return Err(WireError::MalformedFrame("unknown axis")),
    })
}

fn bool_from(v: u8) -> Result<bool, WireError> {
    match v {
        0 => Ok(false),
        1 => Ok(true),
        _ => Err(WireError::MalformedFrame("bad boolean")),
    }
}

fn non_negative(v: f64) -> bool {
    v.is_finite() && v >= 0.0
}

impl Frame {
    fn type_code(&self) -> u8 {
        match self {
            Frame::Hello(_) => TYPE_HELLO,
            Frame::Interface(_) => TYPE_INTERFACE,
            Frame::Command(_) => TYPE_COMMAND,
            Frame::Telemetry(_) => TYPE_TELEMETRY,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer(Vec::with_capacity(MAX_FRAME_LEN));
        w.u32(MAGIC);
        w.u8(VERSION);
        w.u8(self.type_code());
        w.u16(0);
        match self {
            Frame::Hello(h) => {
                w.u32(h.nonce);
                w.u32(h.clock_ms);
            }
            Frame::Interface(m) => {
                w.u32(m.seq);
                w.u32(m.timestamp_ms);
                w.pose(&m.pose);
                w.u8(m.buttons.mode_toggle);
                w.u8(m.buttons.gripper_toggle);
                w.u16(0);
                w.f64(m.buttons.eta_arm);
                w.f64(m.buttons.eta_base);
                w.f64(m.buttons.impedance_scale);
            }
            Frame::Command(c) => {
                w.u32(c.seq);
                w.u32(c.timestamp_ms);
                w.u8(c.kind as u8);
                w.u8(0);
                w.u16(0);
            }
            Frame::Telemetry(t) => {
                w.u32(t.seq);
                w.u32(0);
                w.f64(t.clock);
                w.f64s(&t.q);
                w.f64s(&t.qd);
                w.pose(&t.ee);
                w.u8(session_code(t.session));
                w.u8(mode_code(t.mode));
                w.u8(matches!(t.gripper, GripperState::Closed) as u8);
                w.u8(axis_code(t.lock_axis));
                w.u8(t.lock_engaged as u8);
                w.u8(0);
                w.u16(t.flags);
                w.f64s(&t.wrench);
                w.f64(t.dead_zone);
                w.f64(t.saturation);
                w.f64s(&t.ball);
                w.f64(t.drawer_opening);
            }
        }
        let len = (w.0.len() - HEADER_LEN) as u16;
        w.0[6..8].copy_from_slice(&len.to_le_bytes());
        w.0
    }

    /// Decodes exactly one frame occupying all of `bytes`.
    pub fn decode(bytes: &[u8]) -> Result<Frame, WireError> {
        match decode_prefix(bytes)? {
            Some((frame, used)) if used == bytes.len() => Ok(frame),
            Some(_) => Err(WireError::MalformedFrame("trailing bytes")),
            None => Err(WireError::MalformedFrame("truncated")),
        }
    }
}

fn payload_len(type_code: u8) -> Result<usize, WireError> {
    match type_code {
        TYPE_HELLO => Ok(HELLO_LEN),
        TYPE_INTERFACE => Ok(INTERFACE_LEN),
        TYPE_COMMAND => Ok(COMMAND_LEN),
        TYPE_TELEMETRY => Ok(TELEMETRY_LEN),
        _ => Err(WireError::MalformedFrame("unknown frame type")),
    }
}

/// Validates the header at the front of `bytes`. Returns the total frame
/// length, or `None` if fewer than `HEADER_LEN` bytes are available.
pub fn check_header(bytes: &[u8]) -> Result<Option<usize>, WireError> {
    let n = bytes.len().min(HEADER_LEN);
    // Reject a bad magic as early as its first byte so stream readers do not
    // wait on garbage.
    if bytes[..n.min(4)] != MAGIC.to_le_bytes()[..n.min(4)] {
        return Err(WireError::MalformedFrame("bad magic"));
    }
    if n < HEADER_LEN {
        return Ok(None);
    }
    if bytes[4] != VERSION {
        return Err(WireError::MalformedFrame("unsupported version"));
    }
    let expected = payload_len(bytes[5])?;
    let len = u16::from_le_bytes([bytes[6], bytes[7]]) as usize;
    if len != expected {
        return Err(WireError::MalformedFrame("length does not match frame type"));
    }
    Ok(Some(HEADER_LEN + len))
}

/// Decodes the frame at the front of `bytes`, returning it with the number of
/// bytes consumed, or `None` if the frame is not complete yet.
pub fn decode_prefix(bytes: &[u8]) -> Result<Option<(Frame, usize)>, WireError> {
    let Some(total) = check_header(bytes)? else {
        return Ok(None);
    };
    if bytes.len() < total {
        return Ok(None);
    }
    let mut r = Reader {
        buf: &bytes[..total],
        at: HEADER_LEN,
    };
    let frame = match bytes[5] {
        TYPE_HELLO => Frame::Hello(HelloMsg {
            nonce: r.u32(),
            clock_ms: r.u32(),
        }),
        TYPE_INTERFACE => {
            let seq = r.u32();
            let timestamp_ms = r.u32();
            let pose = r.pose();
            let mode_toggle = r.u8();
            let gripper_toggle = r.u8();
            r.zero(2)?;
            let buttons = Buttons {
                mode_toggle,
                gripper_toggle,
                eta_arm: r.f64(),
                eta_base: r.f64(),
                impedance_scale: r.f64(),
            };
            if !pose.is_valid() {
                return Err(WireError::MalformedFrame("invalid pose"));
            }
            if ![buttons.eta_arm, buttons.eta_base, buttons.impedance_scale]
                .into_iter()
                .all(non_negative)
            {
                return Err(WireError::MalformedFrame("invalid button scalar"));
            }
            Frame::Interface(InterfaceMsg {
                seq,
                timestamp_ms,
                pose,
                buttons,
            })
        }
        TYPE_COMMAND => {
            let seq = r.u32();
            let timestamp_ms = r.u32();
            let kind = CommandKind::from_u8(r.u8())
                .ok_or(WireError::MalformedFrame("unknown command"))?;
            r.zero(3)?;
            Frame::Command(CommandMsg {
                seq,
                timestamp_ms,
                kind,
            })
        }
        TYPE_TELEMETRY => {
            let seq = r.u32();
            r.zero(4)?;
            let clock = r.f64();
            let q = r.f64s();
            let qd = r.f64s();
            let ee = r.pose();
            let session = session_from(r.u8())?;
            let mode = mode_from(r.u8())?;
            let gripper = if bool_from(r.u8())? {
                GripperState::Closed
            } else {
                GripperState::Open
            };
            let lock_axis = axis_from(r.u8())?;
            let lock_engaged = bool_from(r.u8())?;
            r.zero(1)?;
            let flags = r.u16();
            let t = TelemetryMsg {
                seq,
                clock,
                q,
                qd,
                ee,
                session,
                mode,
                gripper,
                lock_axis,
                lock_engaged,
                flags,
                wrench: r.f64s(),
                dead_zone: r.f64(),
                saturation: r.f64(),
                ball: r.f64s(),
                drawer_opening: r.f64(),
            };
            let finite = [t.clock, t.dead_zone, t.saturation, t.drawer_opening]
                .iter()
                .chain(&t.q)
                .chain(&t.qd)
                .chain(&t.wrench)
                .chain(&t.ball)
                .all(|v| v.is_finite());
            if !finite || !t.ee.is_valid() {
                return Err(WireError::MalformedFrame("non-finite telemetry"));
            }
            Frame::Telemetry(t)
        }
        _ => unreachable!("type checked in header"),
    };
    debug_assert_eq!(r.at, total);
    Ok(Some((frame, total)))
}

/// Reassembles frames from a byte stream (TCP or any ordered transport).
#[derive(Debug, Default)]
pub struct FrameReader {
    buf: Vec<u8>,
}

impl FrameReader {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn extend(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    /// Next complete frame, if any. After an error the stream cannot be
    /// resynchronized and should be closed.
    pub fn next_frame(&mut self) -> Result<Option<Frame>, WireError> {
        if self.buf.is_empty() {
            return Ok(None);
        }
        match decode_prefix(&self.buf)? {
            Some((frame, used)) => {
                self.buf.drain(..used);
                Ok(Some(frame))
            }
            None => Ok(None),
        }
    }

    pub fn buffered(&self) -> usize {
        self.buf.len()
    }
}
