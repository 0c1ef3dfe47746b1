//! Long-term credentials and the local trust policy.

use std::path::Path;

use rand_core::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cbor::{Decoder, Encoder};
use crate::error::{Error, Result};
use crate::suite::{AuthKind, PrimitiveProvider, SuitePrimitives};

pub const DEFAULT_ID_CRED_LEN: usize = 4;

/// A raw public-key credential.
///
/// `cred_bytes` is the canonical encoding `[identity, kind, public_key]`;
/// `id_cred` is only a lookup hint and may collide across credentials.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Credential {
    identity: Vec<u8>,
    kind: AuthKind,
    public_key: Vec<u8>,
    private_key: Option<Vec<u8>>,
    id_cred: Vec<u8>,
}

impl Credential {
    pub fn new(identity: impl Into<Vec<u8>>, kind: AuthKind, public_key: impl Into<Vec<u8>>) -> Self {
        let mut c = Self {
            identity: identity.into(),
            kind,
            public_key: public_key.into(),
            private_key: None,
            id_cred: Vec::new(),
        };
        c.id_cred = default_id_cred(&c.cred_bytes());
        c
    }

    /// Fresh key pair for `kind` under the given suite's algorithms.
    pub fn generate<R: RngCore + CryptoRng>(
        identity: impl Into<Vec<u8>>,
        kind: AuthKind,
        suite: &SuitePrimitives,
        rng: &mut R,
    ) -> Self {
        let (private, public) = match kind {
            AuthKind::Signature => suite.gen_signing_key(rng),
            AuthKind::StaticDh => suite.gen_ephemeral(rng),
        };
        Self::new(identity, kind, public).with_private_key(private)
    }

    pub fn with_private_key(mut self, private_key: impl Into<Vec<u8>>) -> Self {
        self.private_key = Some(private_key.into());
        self
    }

    /// Overrides the identifier, e.g. to model colliding identifiers.
    pub fn with_id_cred(mut self, id_cred: impl Into<Vec<u8>>) -> Self {
        self.id_cred = id_cred.into();
        self
    }

    pub fn identity(&self) -> &[u8] {
        &self.identity
    }

    pub fn kind(&self) -> AuthKind {
        self.kind
    }

    pub fn public_key(&self) -> &[u8] {
        &self.public_key
    }

    pub fn private_key(&self) -> Option<&[u8]> {
        self.private_key.as_deref()
    }

    pub fn id_cred(&self) -> &[u8] {
        &self.id_cred
    }

    pub fn cred_bytes(&self) -> Vec<u8> {
        let mut e = Encoder::new();
        e.array(3).bytes(&self.identity).uint(self.kind.code()).bytes(&self.public_key);
        e.into_bytes()
    }

    /// Parses `cred_bytes`; the identifier is recomputed with the default rule.
    pub fn from_cred_bytes(b: &[u8]) -> Result<Self> {
        let mut d = Decoder::new(b);
        d.array_of(3)?;
        let identity = d.bytes()?.to_vec();
        let kind = AuthKind::from_code(d.uint()?).ok_or(Error::MalformedMessage("credential kind"))?;
        let public_key = d.bytes()?.to_vec();
        d.finish()?;
        Ok(Self::new(identity, kind, public_key))
    }

    /// The credential without its private key.
    pub fn public_part(&self) -> Self {
        Self { private_key: None, ..self.clone() }
    }

    pub fn to_file(&self) -> CredentialFile {
        CredentialFile {
            identity: String::from_utf8_lossy(&self.identity).into_owned(),
            kind: self.kind,
            public_key_hex: hex::encode(&self.public_key),
            private_key_hex: self.private_key.as_ref().map(hex::encode),
            id_cred_hex: Some(hex::encode(&self.id_cred)),
        }
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: CredentialFile = serde_json::from_str(&text).map_err(|e| Error::ConfigError(e.to_string()))?;
        file.into_credential()
    }
}

fn default_id_cred(cred_bytes: &[u8]) -> Vec<u8> {
    let digest = Sha256::digest(cred_bytes);
    digest[digest.len() - DEFAULT_ID_CRED_LEN..].to_vec()
}

/// On-disk JSON form of a credential.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CredentialFile {
    pub identity: String,
    #[serde(with = "kind_serde")]
    pub kind: AuthKind,
    pub public_key_hex: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub private_key_hex: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id_cred_hex: Option<String>,
}

impl CredentialFile {
    pub fn into_credential(self) -> Result<Credential> {
        let bad = |e: hex::FromHexError| Error::ConfigError(e.to_string());
        let mut c = Credential::new(
            self.identity.into_bytes(),
            self.kind,
            hex::decode(&self.public_key_hex).map_err(bad)?,
        );
        if let Some(sk) = self.private_key_hex {
            c = c.with_private_key(hex::decode(sk).map_err(bad)?);
        }
        if let Some(id) = self.id_cred_hex {
            c = c.with_id_cred(hex::decode(id).map_err(bad)?);
        }
        Ok(c)
    }
}

mod kind_serde {
    use super::AuthKind;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(k: &AuthKind, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(match k {
            AuthKind::Signature => "signature",
            AuthKind::StaticDh => "static_dh",
        })
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<AuthKind, D::Error> {
        match String::deserialize(d)?.to_ascii_lowercase().as_str() {
            "signature" | "sig" => Ok(AuthKind::Signature),
            "static_dh" | "staticdh" | "sdh" => Ok(AuthKind::StaticDh),
            other => Err(serde::de::Error::custom(format!("unknown credential kind {other}"))),
        }
    }
}

/// Credentials a peer is willing to authenticate. Always contains the
/// local peer's own credential.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrustStore {
    entries: Vec<Credential>,
    own_identity: Vec<u8>,
}

impl TrustStore {
    pub fn new(own: &Credential, entries: impl IntoIterator<Item = Credential>) -> Self {
        let mut entries: Vec<Credential> = entries.into_iter().map(|c| c.public_part()).collect();
        let own_pub = own.public_part();
        if !entries.iter().any(|c| c.cred_bytes() == own_pub.cred_bytes()) {
            entries.push(own_pub);
        }
        Self { entries, own_identity: own.identity.clone() }
    }

    pub fn own_identity(&self) -> &[u8] {
        &self.own_identity
    }

    pub fn entries(&self) -> &[Credential] {
        &self.entries
    }

    pub fn contains(&self, c: &Credential) -> bool {
        let b = c.cred_bytes();
        self.entries.iter().any(|e| e.cred_bytes() == b)
    }

    /// All trusted credentials carrying `id_cred`, in insertion order.
    pub fn resolve(&self, id_cred: &[u8]) -> Vec<Credential> {
        self.entries.iter().filter(|c| c.id_cred == id_cred).cloned().collect()
    }

    /// Loads a JSON array of credential files.
    pub fn load_json(own: &Credential, path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let files: Vec<CredentialFile> =
            serde_json::from_str(&text).map_err(|e| Error::ConfigError(e.to_string()))?;
        let entries = files.into_iter().map(CredentialFile::into_credential).collect::<Result<Vec<_>>>()?;
        Ok(Self::new(own, entries))
    }
}

/// Checks an authenticated identity against the one the caller meant to reach.
pub fn check_intended_peer(authenticated: &[u8], expected: Option<&[u8]>) -> Result<()> {
    match expected {
        Some(e) if e != authenticated => Err(Error::UnintendedPeer),
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cred(name: &str, pk: u8) -> Credential {
        Credential::new(name, AuthKind::Signature, vec![pk; 32])
    }

    #[test]
    fn resolve_returns_every_match() {
        let own = cred("I", 1);
        let r = cred("R", 2).with_id_cred([5]);
        let m = cred("M", 3).with_id_cred([5]);
        let store = TrustStore::new(&own, [r.clone(), m.clone()]);
        assert_eq!(store.resolve(&[5]), vec![r.clone(), m]);
        assert!(store.resolve(&[6]).is_empty());

        let single = TrustStore::new(&own, [r.clone()]);
        assert_eq!(single.resolve(&[5]), vec![r]);
    }

    #[test]
    fn own_credential_inserted() {
        let own = cred("I", 1).with_private_key([9; 32]);
        let store = TrustStore::new(&own, [cred("R", 2)]);
        assert!(store.contains(&own));
        assert_eq!(store.entries().len(), 2);
        assert!(store.entries().iter().all(|c| c.private_key().is_none()));
        // not duplicated when already present
        let store = TrustStore::new(&own, [own.clone()]);
        assert_eq!(store.entries().len(), 1);
    }

    #[test]
    fn intended_peer() {
        assert_eq!(check_intended_peer(b"R", Some(b"R")), Ok(()));
        assert_eq!(check_intended_peer(b"M", Some(b"R")), Err(Error::UnintendedPeer));
        assert_eq!(check_intended_peer(b"M", None), Ok(()));
    }

    #[test]
    fn cred_bytes_canonical() {
        let a = Credential::new("node-a", AuthKind::StaticDh, vec![4; 32]);
        let b = Credential::new("node-a", AuthKind::StaticDh, vec![4; 32]);
        assert_eq!(a.cred_bytes(), b.cred_bytes());
        assert_eq!(Credential::from_cred_bytes(&a.cred_bytes()).unwrap(), a);
        assert_eq!(a.id_cred().len(), DEFAULT_ID_CRED_LEN);
        assert_ne!(a.cred_bytes(), Credential::new("node-b", AuthKind::StaticDh, vec![4; 32]).cred_bytes());
    }

    #[test]
    fn json_file_round_trip() {
        let c = cred("R", 7).with_private_key([1; 32]).with_id_cred([0x05]);
        let json = serde_json::to_string(&c.to_file()).unwrap();
        let back: CredentialFile = serde_json::from_str(&json).unwrap();
        assert_eq!(back.into_credential().unwrap(), c);
        let minimal = r#"{"identity":"x","kind":"static_dh","public_key_hex":"0102"}"#;
        let f: CredentialFile = serde_json::from_str(minimal).unwrap();
        assert_eq!(f.into_credential().unwrap().kind(), AuthKind::StaticDh);
    }
}
