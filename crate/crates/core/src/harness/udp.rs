//! One handshake over UDP: one encoded message per datagram, no framing.

use std::io::ErrorKind;
use std::net::{SocketAddr, UdpSocket};
use std::time::Duration;

use crate::codec::{looks_like_error, ErrorMessage, MAX_MESSAGE_SIZE};
use crate::error::{Error, Result};
use crate::handshake::{CompletedSession, Initiator, InitiatorPhase, Responder, SessionConfig};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(5);

/// How long an initiator that completed without message 4 keeps listening
/// for an error reply to message 3.
pub const ERROR_GRACE: Duration = Duration::from_millis(300);

fn recv(sock: &UdpSocket, from: Option<SocketAddr>) -> Result<(Vec<u8>, SocketAddr)> {
    let mut buf = vec![0u8; MAX_MESSAGE_SIZE + 1];
    loop {
        match sock.recv_from(&mut buf) {
            Ok((n, addr)) => {
                // Stray datagrams from other hosts are ignored.
                if from.is_some_and(|f| f != addr) {
                    continue;
                }
                return Ok((buf[..n].to_vec(), addr));
            }
            Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => return Err(Error::Timeout),
            Err(e) => return Err(e.into()),
        }
    }
}

/// Runs the initiator against `peer` from an ephemeral local port.
pub fn run_initiator(config: SessionConfig, peer: SocketAddr, timeout: Duration) -> Result<CompletedSession> {
    let local: SocketAddr = if peer.is_ipv4() { "0.0.0.0:0" } else { "[::]:0" }.parse().expect("valid address");
    let sock = UdpSocket::bind(local)?;
    sock.set_read_timeout(Some(timeout))?;
    let (mut init, m1) = Initiator::start(config)?;
    sock.send_to(&m1, peer)?;
    loop {
        let (msg, _) = recv(&sock, Some(peer))?;
        match init.receive(&msg) {
            Ok(Some(m3)) => {
                sock.send_to(&m3, peer)?;
                if let Ok(s) = init.session() {
                    linger_for_error(&sock, peer, timeout.min(ERROR_GRACE))?;
                    return Ok(s);
                }
            }
            Ok(None) => return init.session(),
            Err(Error::ReplayOrOutOfOrder) => continue,
            Err(e) => {
                if let Some(reply) = init.error_reply() {
                    sock.send_to(reply, peer)?;
                }
                return Err(e);
            }
        }
        if init.phase() == InitiatorPhase::Completed {
            return init.session();
        }
    }
}

// Without message 4 the initiator cannot tell whether message 3 was accepted;
// a rejection shows up as an error message shortly after.
fn linger_for_error(sock: &UdpSocket, peer: SocketAddr, grace: Duration) -> Result<()> {
    sock.set_read_timeout(Some(grace))?;
    match recv(sock, Some(peer)) {
        Ok((msg, _)) if looks_like_error(&msg) => Err(ErrorMessage::decode(&msg)?.into_error()),
        Ok(_) | Err(Error::Timeout) => Ok(()),
        Err(e) => Err(e),
    }
}

/// Runs the responder on `bind`, serving the first initiator that writes.
pub fn run_responder(config: SessionConfig, bind: SocketAddr, timeout: Duration) -> Result<CompletedSession> {
    let sock = UdpSocket::bind(bind)?;
    run_responder_on(&sock, config, timeout)
}

/// Same as [`run_responder`] on an already bound socket.
pub fn run_responder_on(sock: &UdpSocket, config: SessionConfig, timeout: Duration) -> Result<CompletedSession> {
    sock.set_read_timeout(Some(timeout))?;
    let mut resp = Responder::new(config)?;
    let mut peer = None;
    loop {
        let (msg, from) = recv(sock, peer)?;
        peer = Some(from);
        match resp.receive(&msg) {
            Ok(Some(reply)) => {
                sock.send_to(&reply, from)?;
            }
            Ok(None) => {}
            Err(Error::ReplayOrOutOfOrder) => continue,
            Err(e) => {
                if let Some(reply) = resp.error_reply() {
                    sock.send_to(reply, from)?;
                }
                return Err(e);
            }
        }
        if let Ok(s) = resp.session() {
            return Ok(s);
        }
    }
}
