//! Interface-to-robot bridge: wire protocol, session state machine,
//! latest-value mailbox, telemetry fan-out and network transports.

mod mailbox;
mod net;
mod session;
mod telemetry;
mod wire;

pub use mailbox::Mailbox;
pub use net::{Endpoints, NetService, NetStats, TelemetryBytes, TelemetryFanout};
pub use session::{
    session_step, Inbox, RobotFeedback, Session, SessionOutput, SessionParams, SessionState,
};
pub use telemetry::{Subscription, TelemetryHub};
pub use wire::{
    check_header, decode_prefix, Buttons, CommandKind, CommandMsg, Frame, FrameReader, HelloMsg,
    InterfaceMsg, RawPose, TelemetryMsg, HEADER_LEN, MAGIC, MAX_FRAME_LEN, VERSION,
};
