//! Deterministic credentials and configurations for demos, vectors and scenarios.

use rand_chacha::ChaCha20Rng;
use rand_core::SeedableRng;
use sha2::{Digest, Sha256};

use crate::creds::{Credential, TrustStore};
use crate::error::Result;
use crate::handshake::SessionConfig;
use crate::suite::{lookup_suite, method_kinds};

/// Expands a small seed and a domain tag into a 32-byte RNG seed.
pub fn seed_bytes(seed: u64, tag: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(tag.as_bytes());
    h.update(seed.to_be_bytes());
    h.finalize().into()
}

pub fn rng(seed: u64, tag: &str) -> ChaCha20Rng {
    ChaCha20Rng::from_seed(seed_bytes(seed, tag))
}

/// Long-term credentials for I and R fitting `method` under `suite`.
pub fn credentials(method: u8, suite: i32, seed: u64) -> Result<(Credential, Credential)> {
    let kinds = method_kinds(method as i64)?;
    let p = lookup_suite(suite as i64)?.primitives()?;
    let mut r = rng(seed, "credentials");
    let i = Credential::generate("initiator", kinds.initiator, &p, &mut r);
    let resp = Credential::generate("responder", kinds.responder, &p, &mut r);
    Ok((i, resp))
}

/// A matching, mutually trusting configuration pair.
pub fn honest_configs(method: u8, suite: i32, seed: u64) -> Result<(SessionConfig, SessionConfig)> {
    let (i, r) = credentials(method, suite, seed)?;
    Ok(configs_for(method, vec![suite], &i, &r, seed))
}

pub fn configs_for(
    method: u8,
    suites: Vec<i32>,
    i: &Credential,
    r: &Credential,
    seed: u64,
) -> (SessionConfig, SessionConfig) {
    let ic = SessionConfig::initiator(method, suites.clone(), i.clone(), TrustStore::new(i, [r.clone()]))
        .with_seed(seed_bytes(seed, "initiator"));
    let rc = SessionConfig::responder(method, suites, r.clone(), TrustStore::new(r, [i.clone()]))
        .with_seed(seed_bytes(seed, "responder"));
    (ic, rc)
}
