//! Transports: datagram ingest, a stream-framed TCP endpoint and a WebSocket
//! endpoint for browsers. All three carry the same binary frames; the stream
//! endpoints also push telemetry back to the client.

use std::io::{self, ErrorKind, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, UdpSocket};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use tungstenite::Message;

use super::mailbox::Mailbox;
use super::telemetry::{Subscription, TelemetryHub};
use super::wire::{Frame, FrameReader, MAX_FRAME_LEN};

/// Encoded telemetry frame shared between subscribers.
pub type TelemetryBytes = Arc<[u8]>;
pub type TelemetryFanout = TelemetryHub<TelemetryBytes>;

const POLL: Duration = Duration::from_millis(20);

/// Where each endpoint should listen; `None` disables it.
#[derive(Debug, Clone, Copy, Default)]
pub struct Endpoints {
    pub udp: Option<SocketAddr>,
    pub tcp: Option<SocketAddr>,
    pub ws: Option<SocketAddr>,
}

#[derive(Debug, Default)]
pub struct NetStats {
    pub frames: AtomicU64,
    pub malformed: AtomicU64,
    pub connections: AtomicU64,
}

/// Running transport threads. Dropping the handle stops them.
#[derive(Debug)]
pub struct NetService {
    stop: Arc<AtomicBool>,
    threads: Vec<JoinHandle<()>>,
    pub stats: Arc<NetStats>,
    pub udp_addr: Option<SocketAddr>,
    pub tcp_addr: Option<SocketAddr>,
    pub ws_addr: Option<SocketAddr>,
}

#[derive(Clone)]
struct Shared {
    mailbox: Mailbox,
    hub: Arc<TelemetryFanout>,
    stop: Arc<AtomicBool>,
    stats: Arc<NetStats>,
}

impl Shared {
    fn ingest(&self, frame: Frame) {
        self.stats.frames.fetch_add(1, Ordering::Relaxed);
        self.mailbox.post(frame);
    }

    fn malformed(&self, why: impl std::fmt::Display) {
        self.stats.malformed.fetch_add(1, Ordering::Relaxed);
        log::debug!("dropping malformed input: {why}");
    }

    fn stopped(&self) -> bool {
        self.stop.load(Ordering::Relaxed)
    }
}

fn is_timeout(e: &io::Error) -> bool {
    matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut)
}

impl NetService {
    pub fn start(
        endpoints: Endpoints,
        mailbox: Mailbox,
        hub: Arc<TelemetryFanout>,
    ) -> io::Result<Self> {
        let shared = Shared {
            mailbox,
            hub,
            stop: Arc::new(AtomicBool::new(false)),
            stats: Arc::new(NetStats::default()),
        };
        let mut service = NetService {
            stop: shared.stop.clone(),
            threads: Vec::new(),
            stats: shared.stats.clone(),
            udp_addr: None,
            tcp_addr: None,
            ws_addr: None,
        };
        if let Some(addr) = endpoints.udp {
            let socket = UdpSocket::bind(addr)?;
            socket.set_read_timeout(Some(POLL))?;
            service.udp_addr = Some(socket.local_addr()?);
            let s = shared.clone();
            service
                .threads
                .push(std::thread::spawn(move || udp_loop(socket, s)));
        }
        if let Some(addr) = endpoints.tcp {
            let listener = TcpListener::bind(addr)?;
            listener.set_nonblocking(true)?;
            service.tcp_addr = Some(listener.local_addr()?);
            let s = shared.clone();
            service
                .threads
                .push(std::thread::spawn(move || accept_loop(listener, s, tcp_session)));
        }
        if let Some(addr) = endpoints.ws {
            let listener = TcpListener::bind(addr)?;
            listener.set_nonblocking(true)?;
            service.ws_addr = Some(listener.local_addr()?);
            let s = shared.clone();
            service
                .threads
                .push(std::thread::spawn(move || accept_loop(listener, s, ws_session)));
        }
        log::info!(
            "transport up: udp {:?}, tcp {:?}, ws {:?}",
            service.udp_addr,
            service.tcp_addr,
            service.ws_addr
        );
        Ok(service)
    }

    pub fn shutdown(mut self) {
        self.stop_and_join();
    }

    fn stop_and_join(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

impl Drop for NetService {
    fn drop(&mut self) {
        self.stop_and_join();
    }
}

fn udp_loop(socket: UdpSocket, shared: Shared) {
    let mut buf = vec![0u8; MAX_FRAME_LEN + 1];
    while !shared.stopped() {
        match socket.recv_from(&mut buf) {
            Ok((n, _)) => match Frame::decode(&buf[..n]) {
                Ok(frame) => shared.ingest(frame),
                Err(e) => shared.malformed(e),
            },
            Err(e) if is_timeout(&e) => {}
            Err(e) => {
                log::warn!("udp receive failed: {e}");
                std::thread::sleep(POLL);
            }
        }
    }
}

fn accept_loop(listener: TcpListener, shared: Shared, handler: fn(TcpStream, Shared)) {
    let mut workers: Vec<JoinHandle<()>> = Vec::new();
    while !shared.stopped() {
        match listener.accept() {
            Ok((stream, peer)) => {
                log::info!("client connected from {peer}");
                shared.stats.connections.fetch_add(1, Ordering::Relaxed);
                let s = shared.clone();
                workers.push(std::thread::spawn(move || handler(stream, s)));
            }
            Err(e) if is_timeout(&e) => std::thread::sleep(POLL),
            Err(e) => {
                log::warn!("accept failed: {e}");
                std::thread::sleep(POLL);
            }
        }
        workers.retain(|w| !w.is_finished());
    }
    for w in workers {
        let _ = w.join();
    }
}

/// Pushes pending telemetry; returns false once the peer is gone.
fn drain_telemetry(sub: &Subscription<TelemetryBytes>, mut send: impl FnMut(&[u8]) -> bool) -> bool {
    while let Some(frame) = sub.try_recv() {
        if !send(&frame) {
            return false;
        }
    }
    true
}

fn tcp_session(stream: TcpStream, shared: Shared) {
    let sub = shared.hub.subscribe();
    let mut stream = stream;
    if stream.set_read_timeout(Some(POLL)).is_err() || stream.set_nodelay(true).is_err() {
        return;
    }
    let mut reader = FrameReader::new();
    let mut buf = [0u8; 4096];
    while !shared.stopped() {
        let alive = drain_telemetry(&sub, |bytes| stream.write_all(bytes).is_ok());
        if !alive {
            break;
        }
        match stream.read(&mut buf) {
            Ok(0) => break,
            Ok(n) => {
                reader.extend(&buf[..n]);
                loop {
                    match reader.next_frame() {
                        Ok(Some(frame)) => shared.ingest(frame),
                        Ok(None) => break,
                        Err(e) => {
                            // A byte stream cannot resynchronize after garbage.
                            shared.malformed(e);
                            return;
                        }
                    }
                }
            }
            Err(e) if is_timeout(&e) => {}
            Err(_) => break,
        }
    }
}

fn ws_session(stream: TcpStream, shared: Shared) {
    if stream.set_nonblocking(false).is_err()
        || stream.set_read_timeout(Some(Duration::from_secs(2))).is_err()
    {
        return;
    }
    let mut ws = match tungstenite::accept(stream) {
        Ok(ws) => ws,
        Err(e) => {
            log::debug!("websocket handshake failed: {e}");
            return;
        }
    };
    if ws.get_ref().set_read_timeout(Some(POLL)).is_err() {
        return;
    }
    let sub = shared.hub.subscribe();
    while !shared.stopped() {
        let alive = drain_telemetry(&sub, |bytes| {
            ws.send(Message::binary(bytes.to_vec())).is_ok()
        });
        if !alive {
            break;
        }
        match ws.read() {
            Ok(Message::Binary(payload)) => {
                // One message may carry several frames back to back.
                let mut reader = FrameReader::new();
                reader.extend(&payload);
                loop {
                    match reader.next_frame() {
                        Ok(Some(frame)) => shared.ingest(frame),
                        Ok(None) => {
                            if reader.buffered() > 0 {
                                shared.malformed("truncated websocket frame");
                            }
                            break;
                        }
                        Err(e) => {
                            shared.malformed(e);
                            break;
                        }
                    }
                }
            }
            Ok(Message::Close(_)) => break,
            Ok(_) => {}
            Err(tungstenite::Error::Io(e)) if is_timeout(&e) => {}
            Err(_) => break,
        }
    }
    let _ = ws.close(None);
    let _ = ws.flush();
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::Pose;
    use crate::service::wire::{Buttons, CommandKind, CommandMsg, InterfaceMsg, RawPose};
    use std::time::Instant;

    fn local() -> Option<SocketAddr> {
        Some("127.0.0.1:0".parse().unwrap())
    }

    fn wait_for(mut f: impl FnMut() -> bool) -> bool {
        let start = Instant::now();
        while start.elapsed() < Duration::from_secs(5) {
            if f() {
                return true;
            }
            std::thread::sleep(Duration::from_millis(5));
        }
        false
    }

    fn iface(seq: u32) -> Frame {
        Frame::Interface(InterfaceMsg {
            seq,
            timestamp_ms: seq * 10,
            pose: RawPose::from(&Pose::from_translation(0.1, 0.0, 0.0)),
            buttons: Buttons::default(),
        })
    }

    #[test]
    fn udp_ingest_posts_to_mailbox() {
        let mailbox = Mailbox::new();
        let hub = Arc::new(TelemetryFanout::new(8));
        let svc = NetService::start(
            Endpoints {
                udp: local(),
                ..Endpoints::default()
            },
            mailbox.clone(),
            hub,
        )
        .unwrap();
        let client = UdpSocket::bind("127.0.0.1:0").unwrap();
        let to = svc.udp_addr.unwrap();
        client.send_to(b"junk", to).unwrap();
        client.send_to(&iface(4).encode(), to).unwrap();
        assert!(wait_for(|| svc.stats.frames.load(Ordering::Relaxed) == 1));
        assert!(wait_for(|| svc.stats.malformed.load(Ordering::Relaxed) == 1));
        assert_eq!(mailbox.take().interface.unwrap().seq, 4);
        svc.shutdown();
    }

    #[test]
    fn tcp_carries_frames_both_ways() {
        let mailbox = Mailbox::new();
        let hub = Arc::new(TelemetryFanout::new(8));
        let svc = NetService::start(
            Endpoints {
                tcp: local(),
                ..Endpoints::default()
            },
            mailbox.clone(),
            hub.clone(),
        )
        .unwrap();
        let mut client = TcpStream::connect(svc.tcp_addr.unwrap()).unwrap();
        let cmd = Frame::Command(CommandMsg {
            seq: 1,
            timestamp_ms: 0,
            kind: CommandKind::Detach,
        });
        let mut bytes = iface(1).encode();
        bytes.extend(cmd.encode());
        client.write_all(&bytes).unwrap();
        assert!(wait_for(|| svc.stats.frames.load(Ordering::Relaxed) == 2));
        let inbox = mailbox.take();
        assert_eq!(inbox.commands.len(), 1);

        assert!(wait_for(|| hub.subscriber_count() == 1));
        let payload: TelemetryBytes = iface(9).encode().into();
        hub.publish(payload.clone());
        client.set_read_timeout(Some(Duration::from_secs(5))).unwrap();
        let mut got = vec![0u8; payload.len()];
        client.read_exact(&mut got).unwrap();
        assert_eq!(&got[..], &payload[..]);
        svc.shutdown();
    }

    #[test]
    fn websocket_carries_frames_both_ways() {
        let mailbox = Mailbox::new();
        let hub = Arc::new(TelemetryFanout::new(8));
        let svc = NetService::start(
            Endpoints {
                ws: local(),
                ..Endpoints::default()
            },
            mailbox.clone(),
            hub.clone(),
        )
        .unwrap();
        let url = format!("ws://{}/", svc.ws_addr.unwrap());
        let (mut ws, _) = tungstenite::connect(url).unwrap();
        ws.send(Message::binary(iface(2).encode())).unwrap();
        assert!(wait_for(|| svc.stats.frames.load(Ordering::Relaxed) == 1));
        assert_eq!(mailbox.take().interface.unwrap().seq, 2);

        assert!(wait_for(|| hub.subscriber_count() == 1));
        let payload: TelemetryBytes = iface(3).encode().into();
        hub.publish(payload.clone());
        loop {
            match ws.read().unwrap() {
                Message::Binary(b) => {
                    assert_eq!(&b[..], &payload[..]);
                    break;
                }
                _ => continue,
            }
        }
        svc.shutdown();
    }
}
