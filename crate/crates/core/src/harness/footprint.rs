use serde::Serialize;

use super::fixtures::honest_configs;
use super::sim::{simulate, AdversaryScript};
use crate::codec::{Message2, Message3, Plaintext2, Plaintext3};
use crate::error::{Error, Result};
use crate::suite::{lookup_suite, supported_suites, PrimitiveProvider};

/// Wire sizes of an honest run with empty EAD and 1-byte connection ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MessageFootprint {
    pub method: u8,
    pub suite: i32,
    pub message_1: usize,
    pub message_2: usize,
    pub message_3: usize,
    /// Sum of the three mandatory messages.
    pub total: usize,
    /// Length of the signature or MAC carried in message 2 / message 3.
    pub sig_or_mac_2: usize,
    pub sig_or_mac_3: usize,
}

pub fn report_footprint(method: u8, suite: i32) -> Result<MessageFootprint> {
    let primitives = lookup_suite(suite as i64)?.primitives()?;
    let (ic, rc) = honest_configs(method, suite, 0)?;
    let sim = simulate(ic, rc, &AdversaryScript::honest());
    if !sim.outcome.agreed() {
        return Err(sim.outcome.initiator.error().cloned().unwrap_or(Error::AuthenticationFailed));
    }
    let t = &sim.outcome.transcript;
    let (m1, m2, m3) = (&t[0].bytes, &t[1].bytes, &t[2].bytes);

    // Recover the plaintexts with the initiator's keys to measure the
    // authenticator fields.
    let secrets = sim.initiator.as_ref().map(|i| i.secrets().clone()).unwrap_or_default();
    let ct2 = Message2::decode(m2)?.ciphertext_2;
    let pt2: Vec<u8> = ct2.iter().zip(&secrets.keys.keystream_2).map(|(a, b)| a ^ b).collect();
    let pt2 = Plaintext2::decode(&pt2)?;
    let ct3 = Message3::decode(m3)?.ciphertext_3;
    let pt3 = primitives.aead_open(&secrets.keys.k_3, &secrets.keys.iv_3, &secrets.transcript.th_3, &ct3)?;
    let pt3 = Plaintext3::decode(&pt3)?;

    Ok(MessageFootprint {
        method,
        suite,
        message_1: m1.len(),
        message_2: m2.len(),
        message_3: m3.len(),
        total: m1.len() + m2.len() + m3.len(),
        sig_or_mac_2: pt2.sig_or_mac_2.len(),
        sig_or_mac_3: pt3.sig_or_mac_3.len(),
    })
}

/// Footprints for every method under every functional suite.
pub fn footprint_table() -> Result<Vec<MessageFootprint>> {
    let mut rows = Vec::new();
    for suite in supported_suites() {
        for method in 0..=3 {
            rows.push(report_footprint(method, suite)?);
        }
    }
    Ok(rows)
}
