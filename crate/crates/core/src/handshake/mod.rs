//! Initiator and responder state machines.
//!
//! ```text
//! Initiator                                   Responder
//!   | message_1: method, suites, G_X, C_I, EAD_1 |
//!   |------------------------------------------>|
//!   | message_2: G_Y, Enc(ID_CRED_R, Sig/MAC_2, EAD_2), C_R
//!   |<------------------------------------------|
//!   | message_3: AEAD(ID_CRED_I, Sig/MAC_3, EAD_3)
//!   |------------------------------------------>|
//!   | message_4: AEAD(EAD_4)        (optional)  |
//!   |<------------------------------------------|
//! ```
//!
//! Every error moves a state machine into a terminal aborted phase; from
//! there on every operation fails with [`Error::SessionAborted`]. The one
//! exception is a message arriving in the wrong phase (a replay, say): it is
//! rejected with [`Error::ReplayOrOutOfOrder`] and the state is left alone.

mod initiator;
mod responder;

pub use initiator::{Initiator, InitiatorPhase};
pub use responder::{Responder, ResponderPhase};

use std::collections::{BTreeSet, HashSet};

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use serde::Serialize;
use subtle::ConstantTimeEq;

use crate::codec::{self, EadItem, ErrorMessage};
use crate::creds::{Credential, TrustStore};
use crate::error::{Error, Result};
use crate::key_schedule::{KeySchedule, MessageKeys, PrkChain, TranscriptHashes};
use crate::suite::{lookup_suite, method_kinds, AuthKind, AuthMethod, PrimitiveProvider, SuitePrimitives};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Role {
    Initiator,
    Responder,
}

/// EAD items each role attaches to the messages it sends.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OutgoingEad {
    pub ead_1: Vec<EadItem>,
    pub ead_2: Vec<EadItem>,
    pub ead_3: Vec<EadItem>,
    pub ead_4: Vec<EadItem>,
}

#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub role: Role,
    /// Proposed method (initiator) or the single accepted method (responder).
    pub method: u8,
    /// Preference order (initiator; the first entry is the selected suite)
    /// or the supported set (responder).
    pub suites: Vec<i32>,
    pub own_credential: Credential,
    pub trust: TrustStore,
    pub expected_peer: Option<Vec<u8>>,
    pub send_message_4: bool,
    pub require_message_4: bool,
    /// Critical EAD labels this peer understands.
    pub recognized_ead: BTreeSet<u64>,
    pub ead: OutgoingEad,
    pub rng_seed: Option<[u8; 32]>,
    /// Pad protected plaintexts to a multiple of this many bytes.
    pub padding_block: Option<usize>,
    pub cid_len: usize,
    /// Record every KDF call for inspection.
    pub instrument: bool,
}

impl SessionConfig {
    pub fn initiator(method: u8, suites: Vec<i32>, own_credential: Credential, trust: TrustStore) -> Self {
        Self::new(Role::Initiator, method, suites, own_credential, trust)
    }

    pub fn responder(method: u8, suites: Vec<i32>, own_credential: Credential, trust: TrustStore) -> Self {
        Self::new(Role::Responder, method, suites, own_credential, trust)
    }

    fn new(role: Role, method: u8, suites: Vec<i32>, own_credential: Credential, trust: TrustStore) -> Self {
        Self {
            role,
            method,
            suites,
            own_credential,
            trust,
            expected_peer: None,
            send_message_4: false,
            require_message_4: false,
            recognized_ead: BTreeSet::new(),
            ead: OutgoingEad::default(),
            rng_seed: None,
            padding_block: None,
            cid_len: 1,
            instrument: false,
        }
    }

    pub fn with_seed(mut self, seed: [u8; 32]) -> Self {
        self.rng_seed = Some(seed);
        self
    }

    pub fn with_expected_peer(mut self, identity: impl Into<Vec<u8>>) -> Self {
        self.expected_peer = Some(identity.into());
        self
    }

    pub fn with_message_4(mut self, on: bool) -> Self {
        match self.role {
            Role::Initiator => self.require_message_4 = on,
            Role::Responder => self.send_message_4 = on,
        }
        self
    }

    pub fn with_ead(mut self, ead: OutgoingEad) -> Self {
        self.ead = ead;
        self
    }

    pub fn with_padding(mut self, block: usize) -> Self {
        self.padding_block = Some(block);
        self
    }

    pub fn instrumented(mut self) -> Self {
        self.instrument = true;
        self
    }

    fn validate(&self) -> Result<AuthMethod> {
        let method = method_kinds(self.method as i64).map_err(|e| Error::ConfigError(e.to_string()))?;
        let kind = match self.role {
            Role::Initiator => method.initiator,
            Role::Responder => method.responder,
        };
        if self.own_credential.kind() != kind {
            return Err(Error::ConfigError(format!(
                "method {} needs a {kind} credential for this role",
                self.method
            )));
        }
        if self.own_credential.private_key().is_none() {
            return Err(Error::ConfigError("own credential has no private key".into()));
        }
        if self.suites.is_empty() {
            return Err(Error::ConfigError("empty suite list".into()));
        }
        if !(codec::MIN_CONNECTION_ID_LEN..=codec::MAX_CONNECTION_ID_LEN).contains(&self.cid_len) {
            return Err(Error::ConfigError("connection identifier length must be 1..=8".into()));
        }
        Ok(method)
    }

    fn rng(&self) -> ChaCha20Rng {
        match self.rng_seed {
            Some(seed) => ChaCha20Rng::from_seed(seed),
            None => ChaCha20Rng::from_entropy(),
        }
    }
}

/// Whether the credential's key pair is usable under `suite`.
pub fn credential_fits(cred: &Credential, suite: &SuitePrimitives) -> bool {
    let Some(sk) = cred.private_key() else { return false };
    let derived = match cred.kind() {
        AuthKind::Signature => suite.signature_public(sk),
        AuthKind::StaticDh => suite.dh_public(sk),
    };
    derived.map(|pk| pk == cred.public_key()).unwrap_or(false)
}

/// Result of a finished handshake.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CompletedSession {
    pub role: Role,
    pub method: u8,
    pub suite: i32,
    #[serde(with = "hex::serde")]
    pub c_i: Vec<u8>,
    #[serde(with = "hex::serde")]
    pub c_r: Vec<u8>,
    #[serde(with = "hex::serde")]
    pub prk_out: Vec<u8>,
    #[serde(with = "hex::serde")]
    pub th_4: Vec<u8>,
    #[serde(with = "hex::serde")]
    pub peer_identity: Vec<u8>,
    pub peer_ead: Vec<EadItem>,
    pub key_confirmed: bool,
}

impl CompletedSession {
    /// Derives application keying material from `PRK_out`.
    pub fn export(&self, label: u64, context: &[u8], length: usize) -> Result<Vec<u8>> {
        let suite = lookup_suite(self.suite as i64)?;
        KeySchedule::new(suite.hash)?.export(&self.prk_out, label, context, length)
    }

    /// First eight bytes of `PRK_out`, hex encoded.
    pub fn fingerprint(&self) -> String {
        hex::encode(&self.prk_out[..self.prk_out.len().min(8)])
    }
}

/// Every (key, nonce) pair handed to the AEAD by one session.
#[derive(Debug, Clone, Default)]
pub struct NonceLedger {
    used: HashSet<(Vec<u8>, Vec<u8>)>,
}

impl NonceLedger {
    pub fn len(&self) -> usize {
        self.used.len()
    }

    pub fn is_empty(&self) -> bool {
        self.used.is_empty()
    }

    pub fn contains(&self, key: &[u8], iv: &[u8]) -> bool {
        self.used.contains(&(key.to_vec(), iv.to_vec()))
    }

    pub fn entries(&self) -> impl Iterator<Item = (&[u8], &[u8])> {
        self.used.iter().map(|(k, n)| (k.as_slice(), n.as_slice()))
    }

    fn seal(&mut self, suite: &SuitePrimitives, key: &[u8], iv: &[u8], aad: &[u8], pt: &[u8]) -> Result<Vec<u8>> {
        if !self.used.insert((key.to_vec(), iv.to_vec())) {
            return Err(Error::NonceReuse);
        }
        suite.aead_seal(key, iv, aad, pt)
    }
}

/// Key material accumulated during a run, exposed for test vectors and
/// instrumentation. Stages not reached yet are empty.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SessionSecrets {
    pub transcript: TranscriptHashes,
    pub prks: PrkChain,
    pub keys: MessageKeys,
}

fn random_cid(rng: &mut ChaCha20Rng, len: usize) -> Vec<u8> {
    let mut c = vec![0u8; len];
    rng.fill_bytes(&mut c);
    c
}

fn xor(data: &[u8], keystream: &[u8]) -> Vec<u8> {
    data.iter().zip(keystream).map(|(a, b)| a ^ b).collect()
}

fn check_ead(items: &[EadItem], recognized: &BTreeSet<u64>) -> Result<()> {
    match items.iter().find(|i| i.critical && !recognized.contains(&i.label)) {
        Some(i) => Err(Error::CriticalEadUnrecognized(i.label)),
        None => Ok(()),
    }
}

fn mac_matches(computed: &[u8], received: &[u8]) -> bool {
    computed.len() == received.len() && bool::from(computed.ct_eq(received))
}

/// Error message sent back when a handler fails, if any. Replays, peer
/// errors and calls on an already aborted session stay silent.
fn error_reply_for(e: &Error) -> Option<Vec<u8>> {
    match e {
        Error::ReplayOrOutOfOrder | Error::PeerError { .. } | Error::SessionAborted => None,
        Error::NoCommonSuite { supported } | Error::WrongSelectedSuite { supported, .. } => {
            Some(ErrorMessage::wrong_suite(supported).encode())
        }
        _ => Some(ErrorMessage::generic().encode()),
    }
}

#[cfg(test)]
mod tests;
