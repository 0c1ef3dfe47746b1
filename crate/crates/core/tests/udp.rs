use std::net::UdpSocket;
use std::thread;
use std::time::Duration;

use edhoc_core::creds::TrustStore;
use edhoc_core::harness::fixtures::{credentials, honest_configs};
use edhoc_core::harness::udp::{run_initiator, run_responder_on};
use edhoc_core::handshake::SessionConfig;
use edhoc_core::Error;

const T: Duration = Duration::from_secs(3);

fn listener() -> (UdpSocket, std::net::SocketAddr) {
    let s = UdpSocket::bind("127.0.0.1:0").unwrap();
    let a = s.local_addr().unwrap();
    (s, a)
}

#[test]
fn loopback_agrees() {
    for (method, msg4) in [(0, false), (3, true)] {
        let (ic, rc) = honest_configs(method, 2, 11).unwrap();
        let (sock, addr) = listener();
        let r = thread::spawn(move || run_responder_on(&sock, rc.with_message_4(msg4), T));
        let i = run_initiator(ic.with_message_4(msg4), addr, T).unwrap();
        let r = r.join().unwrap().unwrap();
        assert_eq!(i.prk_out, r.prk_out);
        assert_eq!(i.fingerprint(), r.fingerprint());
        assert_eq!(i.key_confirmed, msg4 || method == 0);
    }
}

#[test]
fn mismatched_trust_rejected() {
    let (i, r) = credentials(0, 2, 1).unwrap();
    let (stranger, _) = credentials(0, 2, 2).unwrap();
    let ic = SessionConfig::initiator(0, vec![2], i.clone(), TrustStore::new(&i, [r.clone()]));
    let rc = SessionConfig::responder(0, vec![2], r.clone(), TrustStore::new(&r, [stranger]));
    let (sock, addr) = listener();
    let rt = thread::spawn(move || run_responder_on(&sock, rc, T));
    let ie = run_initiator(ic, addr, T).unwrap_err();
    assert_eq!(rt.join().unwrap().unwrap_err(), Error::UntrustedPeer);
    assert!(matches!(ie, Error::PeerError { code: 1, .. }), "{ie:?}");
}

#[test]
fn mangling_proxy_aborts() {
    let (ic, rc) = honest_configs(3, 0, 4).unwrap();
    let (sock, upstream) = listener();
    let rt = thread::spawn(move || run_responder_on(&sock, rc, T));

    let (proxy, proxy_addr) = listener();
    proxy.set_read_timeout(Some(Duration::from_millis(800))).unwrap();
    let relay = thread::spawn(move || {
        let mut client = None;
        let mut buf = [0u8; 2048];
        while let Ok((n, from)) = proxy.recv_from(&mut buf) {
            let mut msg = buf[..n].to_vec();
            if from == upstream {
                msg[n / 2] ^= 0x80;
                if let Some(c) = client {
                    let _ = proxy.send_to(&msg, c);
                }
            } else {
                client = Some(from);
                let _ = proxy.send_to(&msg, upstream);
            }
        }
    });
    let ie = run_initiator(ic, proxy_addr, T).unwrap_err();
    let re = rt.join().unwrap().unwrap_err();
    relay.join().unwrap();
    assert_ne!(ie, Error::Timeout);
    assert!(matches!(re, Error::PeerError { .. }), "{re:?}");
}

#[test]
fn silent_peer_times_out() {
    let (ic, _) = honest_configs(0, 0, 1).unwrap();
    let (_sock, addr) = listener();
    assert_eq!(run_initiator(ic, addr, Duration::from_millis(200)).unwrap_err(), Error::Timeout);
}
