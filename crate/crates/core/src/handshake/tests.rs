use rand_chacha::ChaCha20Rng;
use rand_core::SeedableRng;

use super::*;
use crate::codec::{Message1, EAD_PADDING_LABEL};
use crate::suite::SUITES;

struct Peers {
    i: Credential,
    r: Credential,
}

fn peers(method: u8, suite: i32, seed: u64) -> Peers {
    let kinds = method_kinds(method as i64).unwrap();
    let p = lookup_suite(suite as i64).unwrap().primitives().unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    Peers {
        i: Credential::generate("initiator", kinds.initiator, &p, &mut rng),
        r: Credential::generate("responder", kinds.responder, &p, &mut rng),
    }
}

fn configs(method: u8, suite: i32, p: &Peers) -> (SessionConfig, SessionConfig) {
    let ic = SessionConfig::initiator(method, vec![suite], p.i.clone(), TrustStore::new(&p.i, [p.r.clone()]))
        .with_seed([1; 32]);
    let rc = SessionConfig::responder(method, vec![suite], p.r.clone(), TrustStore::new(&p.r, [p.i.clone()]))
        .with_seed([2; 32]);
    (ic, rc)
}

fn run(ic: SessionConfig, rc: SessionConfig) -> Result<(Initiator, Responder, Option<Vec<u8>>)> {
    let (mut i, m1) = Initiator::start(ic)?;
    let mut r = Responder::new(rc)?;
    let m2 = r.handle_message_1(&m1)?;
    let m3 = i.handle_message_2(&m2)?;
    let (_, m4) = r.handle_message_3(&m3)?;
    if let Some(m4) = &m4 {
        i.handle_message_4(m4)?;
    }
    Ok((i, r, m4))
}

fn functional_suites() -> Vec<i32> {
    SUITES.iter().filter(|s| s.is_supported()).map(|s| s.id).collect()
}

#[test]
fn all_methods_all_suites_agree() {
    for suite in functional_suites() {
        for method in 0..=3u8 {
            let p = peers(method, suite, suite as u64 * 10 + method as u64);
            let (ic, rc) = configs(method, suite, &p);
            let (i, r, _) = run(ic, rc).unwrap_or_else(|e| panic!("method {method} suite {suite}: {e}"));
            let (si, sr) = (i.completed_session().unwrap(), r.session().unwrap());
            assert_eq!(si.prk_out, sr.prk_out, "method {method} suite {suite}");
            assert_eq!(si.th_4, sr.th_4);
            assert_eq!(si.peer_identity, b"responder");
            assert_eq!(sr.peer_identity, b"initiator");
            assert_eq!(si.export(1000, b"oscore", 16).unwrap(), sr.export(1000, b"oscore", 16).unwrap());
            assert_eq!(i.secrets().prks, r.secrets().prks);
        }
    }
}

#[test]
fn message_4_confirms_static_dh_initiator() {
    let p = peers(3, 0, 7);
    let (ic, rc) = configs(3, 0, &p);
    let (ic, rc) = (ic.with_message_4(true), rc.with_message_4(true));
    let (mut i, m1) = Initiator::start(ic).unwrap();
    let mut r = Responder::new(rc).unwrap();
    let m3 = i.handle_message_2(&r.handle_message_1(&m1).unwrap()).unwrap();
    assert_eq!(i.session(), Err(Error::NotConfirmed));
    assert!(!i.completed_session().unwrap().key_confirmed);
    let (_, m4) = r.handle_message_3(&m3).unwrap();
    let s = i.handle_message_4(&m4.unwrap()).unwrap();
    assert!(s.key_confirmed);
    assert_eq!(i.session().unwrap().prk_out, r.session().unwrap().prk_out);
    assert_eq!(i.phase(), InitiatorPhase::Completed);
}

#[test]
fn signing_initiator_confirmed_without_message_4() {
    let p = peers(0, 2, 3);
    let (ic, rc) = configs(0, 2, &p);
    let (i, _, m4) = run(ic, rc).unwrap();
    assert!(m4.is_none());
    assert!(i.session().unwrap().key_confirmed);
}

#[test]
fn tampered_message_4_aborts() {
    let p = peers(3, 0, 8);
    let (ic, rc) = configs(3, 0, &p);
    let (mut i, m1) = Initiator::start(ic.with_message_4(true)).unwrap();
    let mut r = Responder::new(rc.with_message_4(true)).unwrap();
    let m3 = i.handle_message_2(&r.handle_message_1(&m1).unwrap()).unwrap();
    let mut m4 = r.handle_message_3(&m3).unwrap().1.unwrap();
    let last = m4.len() - 1;
    m4[last] ^= 1;
    assert_eq!(i.handle_message_4(&m4), Err(Error::AuthenticationFailed));
    assert_eq!(i.phase(), InitiatorPhase::Aborted);
    assert_eq!(i.session(), Err(Error::NotConfirmed));
    assert_eq!(i.handle_message_4(&m4), Err(Error::SessionAborted));
}

#[test]
fn wrong_selected_suite_then_restart() {
    // Suites 0 and 1 share curves, so one credential serves both; the
    // responder only runs suite 1 while the initiator prefers 0.
    let p = peers(0, 0, 99);
    let ic = SessionConfig::initiator(0, vec![0, 1], p.i.clone(), TrustStore::new(&p.i, [p.r.clone()]))
        .with_seed([3; 32]);
    let rc = SessionConfig::responder(0, vec![1, 2], p.r.clone(), TrustStore::new(&p.r, [p.i.clone()]))
        .with_seed([4; 32]);
    let (mut init, m1) = Initiator::start(ic).unwrap();
    let mut resp = Responder::new(rc.clone()).unwrap();
    // The Ed25519 credential does not fit suite 2.
    assert_eq!(resp.supported_suites(), &[1]);
    let err = resp.handle_message_1(&m1).unwrap_err();
    assert_eq!(err, Error::WrongSelectedSuite { selected: 0, supported: vec![1] });
    let reply = resp.error_reply().unwrap().to_vec();
    assert!(matches!(init.handle_message_2(&reply), Err(Error::PeerError { code: 2, .. })));
    assert_eq!(init.peer_error().unwrap().supported_suites().unwrap(), vec![1]);

    let (mut init, m1) = init.restart_after_suite_error().unwrap();
    assert_eq!(Message1::decode(&m1).unwrap().suites_i, vec![1, 0]);
    let mut resp = Responder::new(rc).unwrap();
    let m3 = init.handle_message_2(&resp.handle_message_1(&m1).unwrap()).unwrap();
    let (s, _) = resp.handle_message_3(&m3).unwrap();
    assert_eq!(s.suite, 1);
    assert_eq!(init.session().unwrap().prk_out, s.prk_out);
}

#[test]
fn no_common_suite() {
    let p = peers(0, 0, 11);
    let ic = SessionConfig::initiator(0, vec![0], p.i.clone(), TrustStore::new(&p.i, [p.r.clone()]));
    let rc = SessionConfig::responder(0, vec![1], p.r.clone(), TrustStore::new(&p.r, [p.i.clone()]));
    let (_, m1) = Initiator::start(ic).unwrap();
    let mut r = Responder::new(rc).unwrap();
    assert_eq!(r.handle_message_1(&m1), Err(Error::NoCommonSuite { supported: vec![1] }));
    assert_eq!(r.phase(), ResponderPhase::Aborted);
}

#[test]
fn method_mismatch_rejected() {
    let p = peers(0, 0, 12);
    let (ic, _) = configs(0, 0, &p);
    let p3 = peers(3, 0, 12);
    let rc = SessionConfig::responder(3, vec![0], p3.r.clone(), TrustStore::new(&p3.r, []));
    let (_, m1) = Initiator::start(ic).unwrap();
    let mut r = Responder::new(rc).unwrap();
    assert_eq!(r.handle_message_1(&m1), Err(Error::UnsupportedMethod(0)));
    assert_eq!(r.error_reply().map(|b| b[1]), Some(0x01));
}

#[test]
fn untrusted_and_unintended_peer() {
    let p = peers(0, 0, 13);
    let (ic, rc) = configs(0, 0, &p);
    let empty = SessionConfig::initiator(0, vec![0], p.i.clone(), TrustStore::new(&p.i, []));
    assert_eq!(run(empty, rc.clone()).err(), Some(Error::UntrustedPeer));
    let wrong = ic.with_expected_peer(b"someone-else".to_vec());
    assert_eq!(run(wrong, rc).err(), Some(Error::UnintendedPeer));
}

#[test]
fn critical_ead_rules() {
    let p = peers(0, 0, 14);
    let (ic, rc) = configs(0, 0, &p);
    let ead = OutgoingEad { ead_1: vec![EadItem::new(40, true, b"x".to_vec())], ..Default::default() };
    assert_eq!(run(ic.clone().with_ead(ead.clone()), rc.clone()).err(), Some(Error::CriticalEadUnrecognized(40)));

    let mut rc_ok = rc.clone();
    rc_ok.recognized_ead.insert(40);
    let (_, r, _) = run(ic.clone().with_ead(ead), rc_ok).unwrap();
    assert_eq!(r.session().unwrap().peer_ead[0].value, b"x");

    // Non-critical items are ignored when unknown.
    let ead = OutgoingEad { ead_3: vec![EadItem::new(41, false, vec![1, 2])], ..Default::default() };
    assert!(run(ic.with_ead(ead), rc).is_ok());
}

#[test]
fn padding_aligns_plaintexts() {
    let p = peers(3, 0, 15);
    let (ic, rc) = configs(3, 0, &p);
    let (i, r, _) = run(ic.with_padding(16), rc.with_padding(16)).unwrap();
    assert_eq!(i.completed_session().unwrap().prk_out, r.session().unwrap().prk_out);
    // Keystream length equals the padded PLAINTEXT_2 length.
    assert_eq!(r.secrets().keys.keystream_2.len() % 16, 0);
    let _ = EAD_PADDING_LABEL;
}

#[test]
fn replays_rejected_without_state_change() {
    let p = peers(0, 0, 16);
    let (ic, rc) = configs(0, 0, &p);
    let (mut i, m1) = Initiator::start(ic).unwrap();
    let mut r = Responder::new(rc).unwrap();
    let m2 = r.handle_message_1(&m1).unwrap();
    assert_eq!(r.handle_message_1(&m1), Err(Error::ReplayOrOutOfOrder));
    assert_eq!(r.phase(), ResponderPhase::Msg2Sent);
    let m3 = i.handle_message_2(&m2).unwrap();
    assert_eq!(i.handle_message_2(&m2), Err(Error::ReplayOrOutOfOrder));
    r.handle_message_3(&m3).unwrap();
    assert!(matches!(r.handle_message_3(&m3), Err(Error::ReplayOrOutOfOrder)));
    assert_eq!(r.phase(), ResponderPhase::Completed);
    assert_eq!(r.nonce_ledger().len(), 0);
    assert_eq!(i.nonce_ledger().len(), 1);
}

#[test]
fn nonce_ledger_refuses_reuse() {
    let s = lookup_suite(0).unwrap().primitives().unwrap();
    let mut l = NonceLedger::default();
    l.seal(&s, &[0; 16], &[0; 13], b"", b"a").unwrap();
    assert!(l.contains(&[0; 16], &[0; 13]));
    assert_eq!(l.seal(&s, &[0; 16], &[0; 13], b"", b"b"), Err(Error::NonceReuse));
}

#[test]
fn seeded_runs_are_deterministic() {
    let p = peers(1, 0, 17);
    let (ic, rc) = configs(1, 0, &p);
    let a = run(ic.clone(), rc.clone()).unwrap();
    let b = run(ic, rc).unwrap();
    assert_eq!(a.0.secrets(), b.0.secrets());
    assert_eq!(a.0.message_1(), b.0.message_1());
}

#[test]
fn config_validation() {
    let p = peers(3, 0, 18);
    // A static DH credential cannot be used by a signing initiator.
    let bad = SessionConfig::initiator(0, vec![0], p.i.clone(), TrustStore::new(&p.i, []));
    assert!(matches!(Initiator::start(bad), Err(Error::ConfigError(_))));
    let no_key = SessionConfig::initiator(3, vec![0], p.i.public_part(), TrustStore::new(&p.i, []));
    assert!(matches!(Initiator::start(no_key), Err(Error::ConfigError(_))));
    let mut long_cid = SessionConfig::initiator(3, vec![0], p.i.clone(), TrustStore::new(&p.i, []));
    long_cid.cid_len = 9;
    assert!(matches!(Initiator::start(long_cid), Err(Error::ConfigError(_))));
    let unsupported = SessionConfig::initiator(3, vec![25], p.i.clone(), TrustStore::new(&p.i, []));
    assert!(matches!(Initiator::start(unsupported), Err(Error::ConfigError(_))));
}

#[test]
fn instrumented_trace_records_calls() {
    let p = peers(3, 0, 19);
    let (ic, rc) = configs(3, 0, &p);
    let (i, r, _) = run(ic.instrumented(), rc.instrumented()).unwrap();
    let extracts = |t: &[crate::key_schedule::KdfCall]| {
        t.iter().filter(|c| matches!(c, crate::key_schedule::KdfCall::Extract { .. })).count()
    };
    assert_eq!(extracts(i.kdf_trace()), 3);
    assert_eq!(extracts(r.kdf_trace()), 3);
}
