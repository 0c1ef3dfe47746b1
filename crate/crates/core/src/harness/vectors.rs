//! Deterministic regression vectors: every intermediate value of a seeded
//! honest run.

use serde::Serialize;

use super::fixtures::honest_configs;
use super::sim::{simulate, AdversaryScript};
use crate::creds::Credential;
use crate::error::{Error, Result};
use crate::handshake::SessionSecrets;

pub const VECTOR_SEED: u64 = 0x5eed;
pub const VECTOR_SUITES: [i32; 3] = [0, 2, 3];

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CredentialVector {
    pub identity: String,
    #[serde(with = "hex::serde")]
    pub public_key: Vec<u8>,
    #[serde(with = "hex::serde")]
    pub private_key: Vec<u8>,
    #[serde(with = "hex::serde")]
    pub id_cred: Vec<u8>,
    #[serde(with = "hex::serde")]
    pub cred: Vec<u8>,
}

impl From<&Credential> for CredentialVector {
    fn from(c: &Credential) -> Self {
        Self {
            identity: String::from_utf8_lossy(c.identity()).into_owned(),
            public_key: c.public_key().to_vec(),
            private_key: c.private_key().unwrap_or_default().to_vec(),
            id_cred: c.id_cred().to_vec(),
            cred: c.cred_bytes(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HandshakeVector {
    pub method: u8,
    pub suite: i32,
    pub seed: u64,
    pub initiator: CredentialVector,
    pub responder: CredentialVector,
    #[serde(with = "hex::serde")]
    pub message_1: Vec<u8>,
    #[serde(with = "hex::serde")]
    pub message_2: Vec<u8>,
    #[serde(with = "hex::serde")]
    pub message_3: Vec<u8>,
    #[serde(with = "hex::serde")]
    pub message_4: Vec<u8>,
    #[serde(flatten)]
    pub secrets: SessionSecrets,
}

/// Runs a seeded honest handshake (with message 4) and records it.
pub fn vectors(method: u8, suite: i32) -> Result<HandshakeVector> {
    let (ic, rc) = honest_configs(method, suite, VECTOR_SEED)?;
    let (i_cred, r_cred) = (ic.own_credential.clone(), rc.own_credential.clone());
    let sim = simulate(ic.with_message_4(true), rc.with_message_4(true), &AdversaryScript::honest());
    if !sim.outcome.agreed() {
        return Err(sim.outcome.initiator.error().cloned().unwrap_or(Error::AuthenticationFailed));
    }
    let i = sim.initiator.as_ref().expect("initiator ran");
    let r = sim.responder.as_ref().expect("responder ran");
    // Both sides must have derived every value identically.
    if i.secrets() != r.secrets() {
        return Err(Error::AuthenticationFailed);
    }
    let t = &sim.outcome.transcript;
    Ok(HandshakeVector {
        method,
        suite,
        seed: VECTOR_SEED,
        initiator: (&i_cred).into(),
        responder: (&r_cred).into(),
        message_1: t[0].bytes.clone(),
        message_2: t[1].bytes.clone(),
        message_3: t[2].bytes.clone(),
        message_4: t[3].bytes.clone(),
        secrets: i.secrets().clone(),
    })
}

/// Every method under each of [`VECTOR_SUITES`], as pretty JSON.
pub fn all_vectors_json() -> Result<String> {
    let mut all = Vec::new();
    for suite in VECTOR_SUITES {
        for method in 0..=3 {
            all.push(vectors(method, suite)?);
        }
    }
    Ok(serde_json::to_string_pretty(&all).expect("vectors serialize") + "\n")
}
