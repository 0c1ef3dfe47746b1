//! Authentication methods, cipher suites and the primitives behind them.

mod primitives;

pub use primitives::{PrimitiveProvider, SuitePrimitives};

use serde::Serialize;
use std::fmt;

use crate::error::{Error, Result};

/// How one side proves possession of its long-term key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum AuthKind {
    Signature,
    StaticDh,
}

impl AuthKind {
    pub fn code(self) -> u64 {
        match self {
            AuthKind::Signature => 0,
            AuthKind::StaticDh => 1,
        }
    }

    pub fn from_code(code: u64) -> Option<Self> {
        match code {
            0 => Some(AuthKind::Signature),
            1 => Some(AuthKind::StaticDh),
            _ => None,
        }
    }
}

impl fmt::Display for AuthKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AuthKind::Signature => "Signature",
            AuthKind::StaticDh => "Static Diffie-Hellman",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct AuthMethod {
    pub id: u8,
    pub initiator: AuthKind,
    pub responder: AuthKind,
}

pub const METHODS: [AuthMethod; 4] = [
    AuthMethod { id: 0, initiator: AuthKind::Signature, responder: AuthKind::Signature },
    AuthMethod { id: 1, initiator: AuthKind::Signature, responder: AuthKind::StaticDh },
    AuthMethod { id: 2, initiator: AuthKind::StaticDh, responder: AuthKind::Signature },
    AuthMethod { id: 3, initiator: AuthKind::StaticDh, responder: AuthKind::StaticDh },
];

pub fn method_kinds(method_id: i64) -> Result<AuthMethod> {
    METHODS
        .iter()
        .find(|m| m.id as i64 == method_id)
        .copied()
        .ok_or(Error::UnknownMethod(method_id))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Aead {
    #[serde(rename = "AES-CCM-16-64-128")]
    AesCcm16_64_128,
    #[serde(rename = "AES-CCM-16-128-128")]
    AesCcm16_128_128,
    #[serde(rename = "ChaCha20/Poly1305")]
    ChaCha20Poly1305,
    A128Gcm,
    A256Gcm,
}

impl Aead {
    pub fn name(self) -> &'static str {
        match self {
            Aead::AesCcm16_64_128 => "AES-CCM-16-64-128",
            Aead::AesCcm16_128_128 => "AES-CCM-16-128-128",
            Aead::ChaCha20Poly1305 => "ChaCha20/Poly1305",
            Aead::A128Gcm => "A128GCM",
            Aead::A256Gcm => "A256GCM",
        }
    }

    pub fn key_len(self) -> usize {
        match self {
            Aead::AesCcm16_64_128 | Aead::AesCcm16_128_128 | Aead::A128Gcm => 16,
            Aead::ChaCha20Poly1305 | Aead::A256Gcm => 32,
        }
    }

    pub fn iv_len(self) -> usize {
        match self {
            Aead::AesCcm16_64_128 | Aead::AesCcm16_128_128 => 13,
            Aead::ChaCha20Poly1305 | Aead::A128Gcm | Aead::A256Gcm => 12,
        }
    }

    pub fn tag_len(self) -> usize {
        match self {
            Aead::AesCcm16_64_128 => 8,
            _ => 16,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum HashAlg {
    #[serde(rename = "SHA-256")]
    Sha256,
    #[serde(rename = "SHA-384")]
    Sha384,
    #[serde(rename = "SHAKE256")]
    Shake256,
}

impl HashAlg {
    pub fn name(self) -> &'static str {
        match self {
            HashAlg::Sha256 => "SHA-256",
            HashAlg::Sha384 => "SHA-384",
            HashAlg::Shake256 => "SHAKE256",
        }
    }

    pub fn output_len(self) -> usize {
        match self {
            HashAlg::Sha256 | HashAlg::Shake256 => 32,
            HashAlg::Sha384 => 48,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Curve {
    X25519,
    #[serde(rename = "P-256")]
    P256,
    #[serde(rename = "P-384")]
    P384,
    X448,
}

impl Curve {
    pub fn name(self) -> &'static str {
        match self {
            Curve::X25519 => "X25519",
            Curve::P256 => "P-256",
            Curve::P384 => "P-384",
            Curve::X448 => "X448",
        }
    }

    /// Length of a public key (u- or x-coordinate) and of the shared secret.
    pub fn coordinate_len(self) -> usize {
        match self {
            Curve::X25519 | Curve::P256 => 32,
            Curve::P384 => 48,
            Curve::X448 => 56,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum SignatureAlg {
    EdDSA,
    ES256,
    ES384,
}

impl SignatureAlg {
    pub fn name(self) -> &'static str {
        match self {
            SignatureAlg::EdDSA => "EdDSA",
            SignatureAlg::ES256 => "ES256",
            SignatureAlg::ES384 => "ES384",
        }
    }

    pub fn signature_len(self) -> usize {
        match self {
            SignatureAlg::EdDSA | SignatureAlg::ES256 => 64,
            SignatureAlg::ES384 => 96,
        }
    }
}

/// One registered cipher suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct CipherSuiteProfile {
    pub id: i32,
    pub aead: Aead,
    pub hash: HashAlg,
    pub mac_length: usize,
    pub ecdh_curve: Curve,
    pub signature: SignatureAlg,
    pub app_aead: Aead,
}

const fn suite(
    id: i32,
    aead: Aead,
    hash: HashAlg,
    mac_length: usize,
    ecdh_curve: Curve,
    signature: SignatureAlg,
    app_aead: Aead,
) -> CipherSuiteProfile {
    CipherSuiteProfile { id, aead, hash, mac_length, ecdh_curve, signature, app_aead }
}

use Aead::*;
use Curve::*;
use HashAlg::*;
use SignatureAlg::*;

pub const SUITES: [CipherSuiteProfile; 9] = [
    suite(0, AesCcm16_64_128, Sha256, 8, X25519, EdDSA, AesCcm16_64_128),
    suite(1, AesCcm16_128_128, Sha256, 16, X25519, EdDSA, AesCcm16_64_128),
    suite(2, AesCcm16_64_128, Sha256, 8, P256, ES256, AesCcm16_64_128),
    suite(3, AesCcm16_128_128, Sha256, 16, P256, ES256, AesCcm16_64_128),
    suite(4, ChaCha20Poly1305, Sha256, 16, X25519, EdDSA, ChaCha20Poly1305),
    suite(5, ChaCha20Poly1305, Sha256, 16, P256, ES256, ChaCha20Poly1305),
    suite(6, A128Gcm, Sha256, 16, X25519, ES256, A128Gcm),
    suite(24, A256Gcm, Sha384, 16, P384, ES384, A256Gcm),
    suite(25, ChaCha20Poly1305, Shake256, 16, X448, EdDSA, ChaCha20Poly1305),
];

/// Private-use suite identifiers. They can be offered on the wire but never resolve.
pub const RESERVED_SUITES: [i32; 4] = [-24, -23, -22, -21];

impl CipherSuiteProfile {
    /// Whether this build carries primitive backends for the suite.
    pub fn is_supported(&self) -> bool {
        self.hash != HashAlg::Shake256 && self.ecdh_curve != Curve::X448
    }

    pub fn primitives(&self) -> Result<SuitePrimitives> {
        SuitePrimitives::new(*self)
    }

    pub fn hash_len(&self) -> usize {
        self.hash.output_len()
    }

    pub fn signature_len(&self) -> usize {
        self.signature.signature_len()
    }

    /// Length of the authenticator carried in plaintext 2/3 for a given kind.
    pub fn sig_or_mac_len(&self, kind: AuthKind) -> usize {
        match kind {
            AuthKind::Signature => self.signature_len(),
            AuthKind::StaticDh => self.mac_length,
        }
    }

    /// Length of MAC_2/MAC_3 as computed: the suite MAC length when the MAC
    /// is sent as-is, the full hash length when it sits under a signature.
    pub fn mac_len_for(&self, kind: AuthKind) -> usize {
        match kind {
            AuthKind::Signature => self.hash_len(),
            AuthKind::StaticDh => self.mac_length,
        }
    }
}

pub fn lookup_suite(id: i64) -> Result<CipherSuiteProfile> {
    if RESERVED_SUITES.iter().any(|&r| r as i64 == id) {
        return Err(Error::ReservedSuite(id));
    }
    SUITES
        .iter()
        .find(|s| s.id as i64 == id)
        .copied()
        .ok_or(Error::UnknownSuite(id))
}

/// Suites with a working primitive backend, in registry order.
pub fn supported_suites() -> Vec<i32> {
    SUITES.iter().filter(|s| s.is_supported()).map(|s| s.id).collect()
}

/// Picks the first suite in the initiator's preference list that the
/// responder supports.
pub fn negotiate(suites_i: &[i32], responder_supported: &[i32]) -> Result<i32> {
    if suites_i.is_empty() {
        return Err(Error::ConfigError("empty suite list".into()));
    }
    suites_i
        .iter()
        .copied()
        .find(|s| responder_supported.contains(s))
        .ok_or_else(|| {
            let mut supported = responder_supported.to_vec();
            supported.sort_unstable();
            supported.dedup();
            Error::NoCommonSuite { supported }
        })
}

/// Method and suite registries as a JSON document keyed by id.
pub fn registry_json() -> serde_json::Value {
    let methods: serde_json::Map<String, serde_json::Value> = METHODS
        .iter()
        .map(|m| {
            (
                m.id.to_string(),
                serde_json::json!({
                    "initiator": m.initiator,
                    "responder": m.responder,
                }),
            )
        })
        .collect();
    let suites: serde_json::Map<String, serde_json::Value> = SUITES
        .iter()
        .map(|s| {
            (
                s.id.to_string(),
                serde_json::json!({
                    "aead": s.aead.name(),
                    "hash": s.hash.name(),
                    "mac_length": s.mac_length,
                    "ecdh_curve": s.ecdh_curve.name(),
                    "signature": s.signature.name(),
                    "app_aead": s.app_aead.name(),
                    "supported": s.is_supported(),
                }),
            )
        })
        .collect();
    serde_json::json!({
        "methods": methods,
        "suites": suites,
        "reserved_suites": RESERVED_SUITES,
    })
}
