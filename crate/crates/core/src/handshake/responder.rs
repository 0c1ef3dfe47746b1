use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use super::{
    check_ead, credential_fits, error_reply_for, mac_matches, random_cid, xor, CompletedSession, NonceLedger,
    Role, SessionConfig, SessionSecrets,
};
use crate::codec::{looks_like_error, pad_ead, ErrorMessage, Message1, Message2, Message3, Message4, Plaintext2, Plaintext3, Plaintext4};
use crate::creds::{check_intended_peer, Credential};
use crate::error::{Error, Result};
use crate::key_schedule::{context_2, context_3, signature_payload, KdfCall, KeySchedule};
use crate::suite::{lookup_suite, negotiate, AuthKind, AuthMethod, PrimitiveProvider, SuitePrimitives};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ResponderPhase {
    Start,
    Msg2Sent,
    Completed,
    Aborted,
}

/// Responder side of one handshake.
#[derive(Debug, Clone)]
pub struct Responder {
    config: SessionConfig,
    method: AuthMethod,
    supported: Vec<i32>,
    rng: ChaCha20Rng,
    phase: ResponderPhase,
    suite: Option<SuitePrimitives>,
    ks: Option<KeySchedule>,
    y: Vec<u8>,
    g_x: Vec<u8>,
    c_i: Vec<u8>,
    c_r: Vec<u8>,
    ead_1: Vec<crate::codec::EadItem>,
    secrets: SessionSecrets,
    ledger: NonceLedger,
    session: Option<CompletedSession>,
    error: Option<Error>,
    error_reply: Option<Vec<u8>>,
}

impl Responder {
    pub fn new(config: SessionConfig) -> Result<Self> {
        if config.role != Role::Responder {
            return Err(Error::ConfigError("not a responder configuration".into()));
        }
        let method = config.validate()?;
        // Only suites the own credential can actually be used with.
        let supported: Vec<i32> = config
            .suites
            .iter()
            .copied()
            .filter(|&id| {
                lookup_suite(id as i64)
                    .and_then(|s| s.primitives())
                    .map(|p| credential_fits(&config.own_credential, &p))
                    .unwrap_or(false)
            })
            .collect();
        if supported.is_empty() {
            return Err(Error::ConfigError("own credential fits none of the configured suites".into()));
        }
        let rng = config.rng();
        Ok(Self {
            config,
            method,
            supported,
            rng,
            phase: ResponderPhase::Start,
            suite: None,
            ks: None,
            y: Vec::new(),
            g_x: Vec::new(),
            c_i: Vec::new(),
            c_r: Vec::new(),
            ead_1: Vec::new(),
            secrets: SessionSecrets::default(),
            ledger: NonceLedger::default(),
            session: None,
            error: None,
            error_reply: None,
        })
    }

    pub fn phase(&self) -> ResponderPhase {
        self.phase
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    /// Suites this responder will negotiate.
    pub fn supported_suites(&self) -> &[i32] {
        &self.supported
    }

    pub fn secrets(&self) -> &SessionSecrets {
        &self.secrets
    }

    pub fn kdf_trace(&self) -> &[KdfCall] {
        self.ks.as_ref().map(|k| k.trace()).unwrap_or(&[])
    }

    pub fn nonce_ledger(&self) -> &NonceLedger {
        &self.ledger
    }

    pub fn error(&self) -> Option<&Error> {
        self.error.as_ref()
    }

    pub fn error_reply(&self) -> Option<&[u8]> {
        self.error_reply.as_deref()
    }

    /// Ephemeral private key. Only for adversarial tests that model leakage.
    pub fn reveal_ephemeral(&self) -> &[u8] {
        &self.y
    }

    pub fn session(&self) -> Result<CompletedSession> {
        self.session.clone().ok_or(Error::NotConfirmed)
    }

    /// Dispatches an inbound message by phase. Returns the reply, if any.
    pub fn receive(&mut self, bytes: &[u8]) -> Result<Option<Vec<u8>>> {
        match self.phase {
            ResponderPhase::Start => self.handle_message_1(bytes).map(Some),
            ResponderPhase::Msg2Sent if Message1::decode(bytes).is_ok() => Err(Error::ReplayOrOutOfOrder),
            ResponderPhase::Msg2Sent => self.handle_message_3(bytes).map(|(_, m4)| m4),
            ResponderPhase::Completed => Err(Error::ReplayOrOutOfOrder),
            ResponderPhase::Aborted => Err(Error::SessionAborted),
        }
    }

    /// Negotiates, authenticates to the initiator and produces message 2.
    pub fn handle_message_1(&mut self, bytes: &[u8]) -> Result<Vec<u8>> {
        match self.phase {
            ResponderPhase::Start => {}
            ResponderPhase::Aborted => return Err(Error::SessionAborted),
            _ => return Err(Error::ReplayOrOutOfOrder),
        }
        match self.process_message_1(bytes) {
            Ok(m2) => {
                self.phase = ResponderPhase::Msg2Sent;
                Ok(m2)
            }
            Err(e) => self.fail(e),
        }
    }

    /// Authenticates the initiator. Returns the session and, if configured,
    /// message 4.
    pub fn handle_message_3(&mut self, bytes: &[u8]) -> Result<(CompletedSession, Option<Vec<u8>>)> {
        match self.phase {
            ResponderPhase::Msg2Sent => {}
            ResponderPhase::Aborted => return Err(Error::SessionAborted),
            _ => return Err(Error::ReplayOrOutOfOrder),
        }
        match self.process_message_3(bytes) {
            Ok(r) => {
                self.phase = ResponderPhase::Completed;
                Ok(r)
            }
            Err(e) => self.fail(e),
        }
    }

    fn fail<T>(&mut self, e: Error) -> Result<T> {
        self.phase = ResponderPhase::Aborted;
        self.error_reply = error_reply_for(&e);
        self.error = Some(e.clone());
        Err(e)
    }

    fn process_message_1(&mut self, bytes: &[u8]) -> Result<Vec<u8>> {
        let m1 = Message1::decode(bytes)?;
        if m1.method != self.config.method {
            return Err(Error::UnsupportedMethod(m1.method));
        }
        let chosen = negotiate(&m1.suites_i, &self.supported)?;
        if chosen != m1.selected_suite() {
            let mut supported = self.supported.clone();
            supported.sort_unstable();
            return Err(Error::WrongSelectedSuite { selected: m1.selected_suite(), supported });
        }
        check_ead(&m1.ead_1, &self.config.recognized_ead)?;
        let suite = lookup_suite(chosen as i64)?.primitives()?;
        let profile = *suite.profile();
        if m1.g_x.len() != profile.ecdh_curve.coordinate_len() {
            return Err(Error::InvalidPoint);
        }
        let mut ks = if self.config.instrument {
            KeySchedule::instrumented(profile.hash)?
        } else {
            KeySchedule::new(profile.hash)?
        };

        let (y, g_y) = suite.gen_ephemeral(&mut self.rng);
        let g_xy = suite.ecdh(&y, &m1.g_x)?;
        let mut c_r = random_cid(&mut self.rng, self.config.cid_len);
        while c_r == m1.c_i {
            c_r = random_cid(&mut self.rng, self.config.cid_len);
        }

        let th_2 = ks.compute_th2(&g_y, bytes);
        let prk_2e = ks.derive_prk_2e(&th_2, &g_xy);
        let own = self.config.own_credential.clone();
        let sk = own.private_key().ok_or(Error::InvalidKey)?;
        let kind = self.method.responder;
        let g_rx = match kind {
            AuthKind::StaticDh => Some(suite.ecdh(sk, &m1.g_x)?),
            AuthKind::Signature => None,
        };
        let prk_3e2m = ks.derive_prk_3e2m(&prk_2e, &th_2, g_rx.as_deref(), kind)?;

        let cred_r = own.cred_bytes();
        let auth_len = profile.sig_or_mac_len(kind);
        let ead_2 = match self.config.padding_block {
            Some(block) => pad_ead(&self.config.ead.ead_2, block, |e| {
                Plaintext2 { id_cred_r: own.id_cred().to_vec(), sig_or_mac_2: vec![0; auth_len], ead_2: e.to_vec() }
                    .encode()
            }),
            None => self.config.ead.ead_2.clone(),
        };
        let ctx_2 = context_2(&c_r, own.id_cred(), &th_2, &cred_r, &ead_2);
        let mac_2 = ks.mac_2(&prk_3e2m, &ctx_2, profile.mac_len_for(kind))?;
        let sig_or_mac_2 = match kind {
            AuthKind::Signature => suite.sign(sk, &signature_payload(own.id_cred(), &th_2, &cred_r, &ead_2, &mac_2))?,
            AuthKind::StaticDh => mac_2.clone(),
        };
        let pt2 = Plaintext2 { id_cred_r: own.id_cred().to_vec(), sig_or_mac_2, ead_2 }.encode();
        let keystream_2 = ks.keystream_2(&prk_2e, &th_2, pt2.len())?;
        let ciphertext_2 = xor(&pt2, &keystream_2);
        let th_3 = ks.compute_th3(&th_2, &pt2, &cred_r);
        let (k_3, iv_3) = ks.key_iv_3(&prk_3e2m, &th_3, profile.aead)?;

        let s = &mut self.secrets;
        s.transcript.th_2 = th_2;
        s.transcript.th_3 = th_3;
        s.prks.prk_2e = prk_2e;
        s.prks.prk_3e2m = prk_3e2m;
        s.keys.keystream_2 = keystream_2;
        s.keys.mac_2 = mac_2;
        s.keys.k_3 = k_3;
        s.keys.iv_3 = iv_3;

        self.suite = Some(suite);
        self.ks = Some(ks);
        self.y = y;
        self.g_x = m1.g_x;
        self.c_i = m1.c_i;
        self.c_r = c_r.clone();
        self.ead_1 = m1.ead_1;
        Ok(Message2 { g_y, ciphertext_2, c_r }.encode())
    }

    fn process_message_3(&mut self, bytes: &[u8]) -> Result<(CompletedSession, Option<Vec<u8>>)> {
        if looks_like_error(bytes) {
            return Err(ErrorMessage::decode(bytes)?.into_error());
        }
        let m3 = Message3::decode(bytes)?;
        let suite = self.suite.ok_or(Error::ReplayOrOutOfOrder)?;
        let profile = *suite.profile();
        let th_3 = self.secrets.transcript.th_3.clone();
        let pt3_bytes =
            suite.aead_open(&self.secrets.keys.k_3, &self.secrets.keys.iv_3, &th_3, &m3.ciphertext_3)?;
        let pt3 = Plaintext3::decode(&pt3_bytes)?;
        check_ead(&pt3.ead_3, &self.config.recognized_ead)?;

        let candidates = self.config.trust.resolve(&pt3.id_cred_i);
        if candidates.is_empty() {
            return Err(Error::UntrustedPeer);
        }
        let kind = self.method.initiator;
        let mut verified = None;
        for cand in candidates.iter().filter(|c| c.kind() == kind) {
            if let Some(found) = self.try_initiator(cand, &th_3, &pt3)? {
                verified = Some((cand.clone(), found));
                break;
            }
        }
        let (cred_i, (prk_4e3m, mac_3)) = verified.ok_or(Error::AuthenticationFailed)?;
        check_intended_peer(cred_i.identity(), self.config.expected_peer.as_deref())?;

        let ks = self.ks.as_mut().ok_or(Error::ReplayOrOutOfOrder)?;
        let th_4 = ks.compute_th4(&th_3, &pt3_bytes, &cred_i.cred_bytes());
        let prk_out = ks.derive_prk_out(&prk_4e3m, &th_4)?;
        let (k_4, iv_4) = ks.key_iv_4(&prk_4e3m, &th_4, profile.aead)?;

        let message_4 = if self.config.send_message_4 {
            let pt4 = Plaintext4 { ead_4: self.config.ead.ead_4.clone() }.encode();
            let ciphertext_4 = self.ledger.seal(&suite, &k_4, &iv_4, &th_4, &pt4)?;
            Some(Message4 { ciphertext_4 }.encode())
        } else {
            None
        };

        let s = &mut self.secrets;
        s.transcript.th_4 = th_4.clone();
        s.prks.prk_4e3m = prk_4e3m;
        s.prks.prk_out = prk_out.clone();
        s.keys.k_4 = k_4;
        s.keys.iv_4 = iv_4;
        s.keys.mac_3 = mac_3;

        let mut peer_ead = std::mem::take(&mut self.ead_1);
        peer_ead.extend(pt3.ead_3);
        let session = CompletedSession {
            role: Role::Responder,
            method: self.method.id,
            suite: profile.id,
            c_i: self.c_i.clone(),
            c_r: self.c_r.clone(),
            prk_out,
            th_4,
            peer_identity: cred_i.identity().to_vec(),
            peer_ead,
            // Message 3 proves the initiator derived the same keys.
            key_confirmed: true,
        };
        self.session = Some(session.clone());
        Ok((session, message_4))
    }

    /// Checks message 3's authenticator against one candidate credential.
    /// Returns `PRK_4e3m` and `MAC_3` on success.
    fn try_initiator(
        &mut self,
        cand: &Credential,
        th_3: &[u8],
        pt3: &Plaintext3,
    ) -> Result<Option<(Vec<u8>, Vec<u8>)>> {
        let suite = self.suite.ok_or(Error::ReplayOrOutOfOrder)?;
        let profile = *suite.profile();
        let kind = self.method.initiator;
        let g_iy = match kind {
            AuthKind::StaticDh => match suite.ecdh(&self.y, cand.public_key()) {
                Ok(s) => Some(s),
                Err(_) => return Ok(None),
            },
            AuthKind::Signature => None,
        };
        let ks = self.ks.as_mut().ok_or(Error::ReplayOrOutOfOrder)?;
        let prk_4e3m = ks.derive_prk_4e3m(&self.secrets.prks.prk_3e2m, th_3, g_iy.as_deref(), kind)?;
        let cred_i = cand.cred_bytes();
        let ctx_3 = context_3(&pt3.id_cred_i, th_3, &cred_i, &pt3.ead_3);
        let mac_3 = ks.mac_3(&prk_4e3m, &ctx_3, profile.mac_len_for(kind))?;
        let ok = match kind {
            AuthKind::Signature => suite.verify(
                cand.public_key(),
                &signature_payload(&pt3.id_cred_i, th_3, &cred_i, &pt3.ead_3, &mac_3),
                &pt3.sig_or_mac_3,
            ),
            AuthKind::StaticDh => mac_matches(&mac_3, &pt3.sig_or_mac_3),
        };
        Ok(ok.then_some((prk_4e3m, mac_3)))
    }
}
