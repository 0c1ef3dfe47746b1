use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use super::{
    check_ead, credential_fits, error_reply_for, mac_matches, random_cid, xor, CompletedSession, NonceLedger,
    Role, SessionConfig, SessionSecrets,
};
use crate::codec::{
    looks_like_error, pad_ead, ErrorMessage, Message1, Message2, Message3, Message4, Plaintext2, Plaintext3,
    Plaintext4,
};
use crate::creds::{check_intended_peer, Credential};
use crate::error::{Error, Result};
use crate::key_schedule::{context_2, context_3, signature_payload, KdfCall, KeySchedule};
use crate::suite::{lookup_suite, negotiate, AuthKind, AuthMethod, PrimitiveProvider, SuitePrimitives};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum InitiatorPhase {
    Start,
    Msg1Sent,
    Msg3Sent,
    Completed,
    Aborted,
}

/// Initiator side of one handshake.
#[derive(Debug, Clone)]
pub struct Initiator {
    config: SessionConfig,
    method: AuthMethod,
    suite: SuitePrimitives,
    ks: KeySchedule,
    rng: ChaCha20Rng,
    phase: InitiatorPhase,
    x: Vec<u8>,
    message_1: Vec<u8>,
    c_i: Vec<u8>,
    c_r: Vec<u8>,
    g_y: Vec<u8>,
    secrets: SessionSecrets,
    ledger: NonceLedger,
    session: Option<CompletedSession>,
    peer_error: Option<ErrorMessage>,
    error: Option<Error>,
    error_reply: Option<Vec<u8>>,
}

impl Initiator {
    /// Generates the ephemeral key and connection identifier and emits message 1.
    pub fn start(config: SessionConfig) -> Result<(Self, Vec<u8>)> {
        let rng = config.rng();
        Self::start_with_rng(config, rng)
    }

    fn start_with_rng(config: SessionConfig, mut rng: ChaCha20Rng) -> Result<(Self, Vec<u8>)> {
        if config.role != super::Role::Initiator {
            return Err(Error::ConfigError("not an initiator configuration".into()));
        }
        let method = config.validate()?;
        let selected = config.suites[0];
        let suite = lookup_suite(selected as i64)
            .and_then(|s| s.primitives())
            .map_err(|e| Error::ConfigError(e.to_string()))?;
        if !credential_fits(&config.own_credential, &suite) {
            return Err(Error::ConfigError(format!("own credential does not fit suite {selected}")));
        }
        let ks = if config.instrument {
            KeySchedule::instrumented(suite.profile().hash)?
        } else {
            KeySchedule::new(suite.profile().hash)?
        };

        let (x, g_x) = suite.gen_ephemeral(&mut rng);
        let c_i = random_cid(&mut rng, config.cid_len);
        let message_1 = Message1 {
            method: config.method,
            suites_i: config.suites.clone(),
            g_x,
            c_i: c_i.clone(),
            ead_1: config.ead.ead_1.clone(),
        }
        .encode();

        let me = Self {
            config,
            method,
            suite,
            ks,
            rng,
            phase: InitiatorPhase::Msg1Sent,
            x,
            message_1: message_1.clone(),
            c_i,
            c_r: Vec::new(),
            g_y: Vec::new(),
            secrets: SessionSecrets::default(),
            ledger: NonceLedger::default(),
            session: None,
            peer_error: None,
            error: None,
            error_reply: None,
        };
        Ok((me, message_1))
    }

    /// Starts over after the responder rejected the selected suite,
    /// moving the first mutually supported suite to the front.
    pub fn restart_after_suite_error(&self) -> Result<(Self, Vec<u8>)> {
        let supported = match &self.peer_error {
            Some(e) => e.supported_suites()?,
            None => return Err(Error::ConfigError("no suite rejection received".into())),
        };
        let chosen = negotiate(&self.config.suites, &supported)?;
        let mut config = self.config.clone();
        config.suites.retain(|&s| s != chosen);
        config.suites.insert(0, chosen);
        Self::start_with_rng(config, self.rng.clone())
    }

    pub fn phase(&self) -> InitiatorPhase {
        self.phase
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn message_1(&self) -> &[u8] {
        &self.message_1
    }

    pub fn secrets(&self) -> &SessionSecrets {
        &self.secrets
    }

    pub fn kdf_trace(&self) -> &[KdfCall] {
        self.ks.trace()
    }

    pub fn nonce_ledger(&self) -> &NonceLedger {
        &self.ledger
    }

    pub fn error(&self) -> Option<&Error> {
        self.error.as_ref()
    }

    /// Error message to send to the peer after a failed handler, if any.
    pub fn error_reply(&self) -> Option<&[u8]> {
        self.error_reply.as_deref()
    }

    /// Error message received from the responder, if the run ended with one.
    pub fn peer_error(&self) -> Option<&ErrorMessage> {
        self.peer_error.as_ref()
    }

    /// Ephemeral private key. Only for adversarial tests that model leakage.
    pub fn reveal_ephemeral(&self) -> &[u8] {
        &self.x
    }

    /// The session as it stands, whether or not key confirmation happened.
    pub fn completed_session(&self) -> Option<&CompletedSession> {
        self.session.as_ref()
    }

    /// The session if usable under this configuration: with
    /// `require_message_4`, only after message 4 confirmed the key.
    pub fn session(&self) -> Result<CompletedSession> {
        let s = self.session.as_ref().ok_or(Error::NotConfirmed)?;
        if self.config.require_message_4 && !s.key_confirmed {
            return Err(Error::NotConfirmed);
        }
        Ok(s.clone())
    }

    /// Dispatches an inbound message by phase.
    pub fn receive(&mut self, bytes: &[u8]) -> Result<Option<Vec<u8>>> {
        match self.phase {
            InitiatorPhase::Msg1Sent => self.handle_message_2(bytes).map(Some),
            // A replayed message 2 is not worth aborting over.
            InitiatorPhase::Msg3Sent if Message2::decode(bytes).is_ok() => Err(Error::ReplayOrOutOfOrder),
            InitiatorPhase::Msg3Sent => self.handle_message_4(bytes).map(|_| None),
            InitiatorPhase::Aborted => Err(Error::SessionAborted),
            InitiatorPhase::Start | InitiatorPhase::Completed => Err(Error::ReplayOrOutOfOrder),
        }
    }

    /// Verifies message 2 and produces message 3.
    pub fn handle_message_2(&mut self, bytes: &[u8]) -> Result<Vec<u8>> {
        match self.phase {
            InitiatorPhase::Msg1Sent => {}
            InitiatorPhase::Aborted => return Err(Error::SessionAborted),
            _ => return Err(Error::ReplayOrOutOfOrder),
        }
        match self.process_message_2(bytes) {
            Ok(m3) => {
                self.phase = InitiatorPhase::Msg3Sent;
                Ok(m3)
            }
            Err(e) => self.fail(e),
        }
    }

    /// Opens message 4, which confirms that the responder holds `PRK_4e3m`.
    pub fn handle_message_4(&mut self, bytes: &[u8]) -> Result<CompletedSession> {
        match self.phase {
            InitiatorPhase::Msg3Sent => {}
            InitiatorPhase::Aborted => return Err(Error::SessionAborted),
            _ => return Err(Error::ReplayOrOutOfOrder),
        }
        match self.process_message_4(bytes) {
            Ok(s) => {
                self.phase = InitiatorPhase::Completed;
                Ok(s)
            }
            Err(e) => self.fail(e),
        }
    }

    fn fail<T>(&mut self, e: Error) -> Result<T> {
        self.phase = InitiatorPhase::Aborted;
        self.error_reply = error_reply_for(&e);
        self.error = Some(e.clone());
        Err(e)
    }

    fn check_peer_error(&mut self, bytes: &[u8]) -> Result<()> {
        if looks_like_error(bytes) {
            let em = ErrorMessage::decode(bytes)?;
            self.peer_error = Some(em.clone());
            return Err(em.into_error());
        }
        Ok(())
    }

    fn process_message_2(&mut self, bytes: &[u8]) -> Result<Vec<u8>> {
        self.check_peer_error(bytes)?;
        let m2 = Message2::decode(bytes)?;
        let suite = self.suite;
        let profile = *suite.profile();
        if m2.g_y.len() != profile.ecdh_curve.coordinate_len() {
            return Err(Error::InvalidPoint);
        }
        let g_xy = suite.ecdh(&self.x, &m2.g_y)?;
        let th_2 = self.ks.compute_th2(&m2.g_y, &self.message_1);
        let prk_2e = self.ks.derive_prk_2e(&th_2, &g_xy);
        let keystream_2 = self.ks.keystream_2(&prk_2e, &th_2, m2.ciphertext_2.len())?;
        let pt2_bytes = xor(&m2.ciphertext_2, &keystream_2);
        let pt2 = Plaintext2::decode(&pt2_bytes)?;
        check_ead(&pt2.ead_2, &self.config.recognized_ead)?;

        let candidates = self.config.trust.resolve(&pt2.id_cred_r);
        if candidates.is_empty() {
            return Err(Error::UntrustedPeer);
        }
        let kind = self.method.responder;
        let mut verified = None;
        for cand in candidates.iter().filter(|c| c.kind() == kind) {
            if let Some(found) = self.try_responder(cand, &th_2, &prk_2e, &m2.c_r, &pt2)? {
                verified = Some((cand.clone(), found));
                break;
            }
        }
        let (cred_r, (prk_3e2m, mac_2)) = verified.ok_or(Error::AuthenticationFailed)?;
        check_intended_peer(cred_r.identity(), self.config.expected_peer.as_deref())?;

        let cred_r_bytes = cred_r.cred_bytes();
        let th_3 = self.ks.compute_th3(&th_2, &pt2_bytes, &cred_r_bytes);
        let own = self.config.own_credential.clone();
        let sk = own.private_key().ok_or(Error::InvalidKey)?;
        let g_iy = match self.method.initiator {
            AuthKind::StaticDh => Some(suite.ecdh(sk, &m2.g_y)?),
            AuthKind::Signature => None,
        };
        let prk_4e3m = self.ks.derive_prk_4e3m(&prk_3e2m, &th_3, g_iy.as_deref(), self.method.initiator)?;

        let cred_i_bytes = own.cred_bytes();
        let auth_len = profile.sig_or_mac_len(self.method.initiator);
        let ead_3 = match self.config.padding_block {
            Some(block) => pad_ead(&self.config.ead.ead_3, block, |e| {
                Plaintext3 { id_cred_i: own.id_cred().to_vec(), sig_or_mac_3: vec![0; auth_len], ead_3: e.to_vec() }
                    .encode()
            }),
            None => self.config.ead.ead_3.clone(),
        };
        let ctx_3 = context_3(own.id_cred(), &th_3, &cred_i_bytes, &ead_3);
        let mac_3 = self.ks.mac_3(&prk_4e3m, &ctx_3, profile.mac_len_for(self.method.initiator))?;
        let sig_or_mac_3 = match self.method.initiator {
            AuthKind::Signature => {
                suite.sign(sk, &signature_payload(own.id_cred(), &th_3, &cred_i_bytes, &ead_3, &mac_3))?
            }
            AuthKind::StaticDh => mac_3.clone(),
        };
        let pt3 = Plaintext3 { id_cred_i: own.id_cred().to_vec(), sig_or_mac_3, ead_3 }.encode();
        let (k_3, iv_3) = self.ks.key_iv_3(&prk_3e2m, &th_3, profile.aead)?;
        let ciphertext_3 = self.ledger.seal(&suite, &k_3, &iv_3, &th_3, &pt3)?;

        let th_4 = self.ks.compute_th4(&th_3, &pt3, &cred_i_bytes);
        let prk_out = self.ks.derive_prk_out(&prk_4e3m, &th_4)?;
        let (k_4, iv_4) = self.ks.key_iv_4(&prk_4e3m, &th_4, profile.aead)?;

        self.c_r = m2.c_r.clone();
        self.g_y = m2.g_y;
        let s = &mut self.secrets;
        s.transcript.th_2 = th_2;
        s.transcript.th_3 = th_3;
        s.transcript.th_4 = th_4.clone();
        s.prks.prk_2e = prk_2e;
        s.prks.prk_3e2m = prk_3e2m;
        s.prks.prk_4e3m = prk_4e3m;
        s.prks.prk_out = prk_out.clone();
        s.keys.keystream_2 = keystream_2;
        s.keys.k_3 = k_3;
        s.keys.iv_3 = iv_3;
        s.keys.k_4 = k_4;
        s.keys.iv_4 = iv_4;
        s.keys.mac_2 = mac_2;
        s.keys.mac_3 = mac_3;

        self.session = Some(CompletedSession {
            role: Role::Initiator,
            method: self.method.id,
            suite: profile.id,
            c_i: self.c_i.clone(),
            c_r: m2.c_r,
            prk_out,
            th_4,
            peer_identity: cred_r.identity().to_vec(),
            peer_ead: pt2.ead_2,
            // A signing initiator needs no fourth message for agreement.
            key_confirmed: self.method.initiator == AuthKind::Signature,
        });
        Ok(Message3 { ciphertext_3 }.encode())
    }

    /// Checks message 2's authenticator against one candidate credential.
    /// Returns `PRK_3e2m` and `MAC_2` on success.
    fn try_responder(
        &mut self,
        cand: &Credential,
        th_2: &[u8],
        prk_2e: &[u8],
        c_r: &[u8],
        pt2: &Plaintext2,
    ) -> Result<Option<(Vec<u8>, Vec<u8>)>> {
        let suite = self.suite;
        let profile = *suite.profile();
        let kind = self.method.responder;
        let g_rx = match kind {
            AuthKind::StaticDh => match suite.ecdh(&self.x, cand.public_key()) {
                Ok(s) => Some(s),
                Err(_) => return Ok(None),
            },
            AuthKind::Signature => None,
        };
        let prk_3e2m = self.ks.derive_prk_3e2m(prk_2e, th_2, g_rx.as_deref(), kind)?;
        let cred_r = cand.cred_bytes();
        let ctx_2 = context_2(c_r, &pt2.id_cred_r, th_2, &cred_r, &pt2.ead_2);
        let mac_2 = self.ks.mac_2(&prk_3e2m, &ctx_2, profile.mac_len_for(kind))?;
        let ok = match kind {
            AuthKind::Signature => suite.verify(
                cand.public_key(),
                &signature_payload(&pt2.id_cred_r, th_2, &cred_r, &pt2.ead_2, &mac_2),
                &pt2.sig_or_mac_2,
            ),
            AuthKind::StaticDh => mac_matches(&mac_2, &pt2.sig_or_mac_2),
        };
        Ok(ok.then_some((prk_3e2m, mac_2)))
    }

    fn process_message_4(&mut self, bytes: &[u8]) -> Result<CompletedSession> {
        self.check_peer_error(bytes)?;
        let m4 = Message4::decode(bytes)?;
        let k = &self.secrets.keys;
        let pt = self.suite.aead_open(&k.k_4, &k.iv_4, &self.secrets.transcript.th_4, &m4.ciphertext_4)?;
        let pt4 = Plaintext4::decode(&pt)?;
        check_ead(&pt4.ead_4, &self.config.recognized_ead)?;
        let s = self.session.as_mut().ok_or(Error::ReplayOrOutOfOrder)?;
        s.key_confirmed = true;
        s.peer_ead.extend(pt4.ead_4);
        Ok(s.clone())
    }
}
