//! Extract/Expand key schedule, transcript hashes and MAC derivation.
//!
//! PRK chain:
//!
//! ```text
//! PRK_2e   = Extract(TH_2, G_XY)
//! PRK_3e2m = PRK_2e                                     (responder signs)
//!          = Extract(Expand(PRK_2e, SALT_3E2M, TH_2), G_RX)   (responder static DH)
//! PRK_4e3m = PRK_3e2m                                   (initiator signs)
//!          = Extract(Expand(PRK_3e2m, SALT_4E3M, TH_3), G_IY) (initiator static DH)
//! PRK_out  = Expand(PRK_4e3m, PRK_OUT, TH_4)
//! ```

use hkdf::Hkdf;
use serde::Serialize;
use sha2::{Digest, Sha256, Sha384};

use crate::cbor::{self, Encoder};
use crate::codec::{encode_ead, EadItem};
use crate::error::{Error, Result};
use crate::suite::{Aead, AuthKind, HashAlg};

/// Expand labels. Exporter labels start at [`labels::EXPORTER_MIN`].
pub mod labels {
    pub const KEYSTREAM_2: u64 = 0;
    pub const SALT_3E2M: u64 = 1;
    pub const MAC_2: u64 = 2;
    pub const K_3: u64 = 3;
    pub const IV_3: u64 = 4;
    pub const SALT_4E3M: u64 = 5;
    pub const MAC_3: u64 = 6;
    pub const PRK_OUT: u64 = 7;
    pub const K_4: u64 = 8;
    pub const IV_4: u64 = 9;
    pub const EXPORTER_MIN: u64 = 1000;
}

/// One recorded KDF invocation. Only populated on instrumented schedules.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum KdfCall {
    Extract {
        #[serde(with = "hex::serde")]
        salt: Vec<u8>,
        ikm_len: usize,
        #[serde(with = "hex::serde")]
        output: Vec<u8>,
    },
    Expand {
        #[serde(with = "hex::serde")]
        prk: Vec<u8>,
        label: u64,
        #[serde(with = "hex::serde")]
        context: Vec<u8>,
        length: usize,
        #[serde(with = "hex::serde")]
        output: Vec<u8>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TranscriptHashes {
    #[serde(with = "hex::serde")]
    pub th_2: Vec<u8>,
    #[serde(with = "hex::serde")]
    pub th_3: Vec<u8>,
    #[serde(with = "hex::serde")]
    pub th_4: Vec<u8>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PrkChain {
    #[serde(with = "hex::serde")]
    pub prk_2e: Vec<u8>,
    #[serde(with = "hex::serde")]
    pub prk_3e2m: Vec<u8>,
    #[serde(with = "hex::serde")]
    pub prk_4e3m: Vec<u8>,
    #[serde(with = "hex::serde")]
    pub prk_out: Vec<u8>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct MessageKeys {
    #[serde(with = "hex::serde")]
    pub keystream_2: Vec<u8>,
    #[serde(with = "hex::serde")]
    pub k_3: Vec<u8>,
    #[serde(with = "hex::serde")]
    pub iv_3: Vec<u8>,
    #[serde(with = "hex::serde")]
    pub k_4: Vec<u8>,
    #[serde(with = "hex::serde")]
    pub iv_4: Vec<u8>,
    #[serde(with = "hex::serde")]
    pub mac_2: Vec<u8>,
    #[serde(with = "hex::serde")]
    pub mac_3: Vec<u8>,
}

/// KDF and hash operations bound to one suite hash, optionally recording
/// every Extract and Expand call.
#[derive(Debug, Clone)]
pub struct KeySchedule {
    hash: HashAlg,
    trace: Option<Vec<KdfCall>>,
}

impl KeySchedule {
    pub fn new(hash: HashAlg) -> Result<Self> {
        match hash {
            HashAlg::Sha256 | HashAlg::Sha384 => Ok(Self { hash, trace: None }),
            HashAlg::Shake256 => Err(Error::ConfigError("SHAKE256 key schedule not available".into())),
        }
    }

    /// Same as [`KeySchedule::new`], but every call is recorded in [`KeySchedule::trace`].
    pub fn instrumented(hash: HashAlg) -> Result<Self> {
        let mut ks = Self::new(hash)?;
        ks.trace = Some(Vec::new());
        Ok(ks)
    }

    pub fn hash_alg(&self) -> HashAlg {
        self.hash
    }

    pub fn hash_len(&self) -> usize {
        self.hash.output_len()
    }

    pub fn trace(&self) -> &[KdfCall] {
        self.trace.as_deref().unwrap_or(&[])
    }

    pub fn hash(&self, data: &[u8]) -> Vec<u8> {
        match self.hash {
            HashAlg::Sha256 => Sha256::digest(data).to_vec(),
            HashAlg::Sha384 => Sha384::digest(data).to_vec(),
            HashAlg::Shake256 => unreachable!(),
        }
    }

    pub fn extract(&mut self, salt: &[u8], ikm: &[u8]) -> Vec<u8> {
        let prk = match self.hash {
            HashAlg::Sha256 => Hkdf::<Sha256>::extract(Some(salt), ikm).0.to_vec(),
            HashAlg::Sha384 => Hkdf::<Sha384>::extract(Some(salt), ikm).0.to_vec(),
            HashAlg::Shake256 => unreachable!(),
        };
        if let Some(t) = self.trace.as_mut() {
            t.push(KdfCall::Extract { salt: salt.to_vec(), ikm_len: ikm.len(), output: prk.clone() });
        }
        prk
    }

    pub fn expand(&mut self, prk: &[u8], label: u64, context: &[u8], length: usize) -> Result<Vec<u8>> {
        let max = 255 * self.hash_len();
        if length > max {
            return Err(Error::LengthTooLarge { requested: length, max });
        }
        let info = expand_info(label, context, length);
        let mut okm = vec![0u8; length];
        match self.hash {
            HashAlg::Sha256 => Hkdf::<Sha256>::from_prk(prk)
                .map_err(|_| Error::InvalidKey)?
                .expand(&info, &mut okm),
            HashAlg::Sha384 => Hkdf::<Sha384>::from_prk(prk)
                .map_err(|_| Error::InvalidKey)?
                .expand(&info, &mut okm),
            HashAlg::Shake256 => unreachable!(),
        }
        .map_err(|_| Error::LengthTooLarge { requested: length, max })?;
        if let Some(t) = self.trace.as_mut() {
            t.push(KdfCall::Expand {
                prk: prk.to_vec(),
                label,
                context: context.to_vec(),
                length,
                output: okm.clone(),
            });
        }
        Ok(okm)
    }

    /// `TH_2 = H(bstr(G_Y) || H(message_1))`. Hashing message 1 first pins
    /// the boundary between the two inputs.
    pub fn compute_th2(&self, g_y: &[u8], message_1: &[u8]) -> Vec<u8> {
        let mut input = cbor::bstr(g_y);
        input.extend_from_slice(&self.hash(message_1));
        self.hash(&input)
    }

    /// `TH_3 = H(TH_2 || PLAINTEXT_2 || CRED_R)`.
    pub fn compute_th3(&self, th_2: &[u8], plaintext_2: &[u8], cred_r: &[u8]) -> Vec<u8> {
        self.hash(&[th_2, plaintext_2, cred_r].concat())
    }

    /// `TH_4 = H(TH_3 || PLAINTEXT_3 || CRED_I)`.
    pub fn compute_th4(&self, th_3: &[u8], plaintext_3: &[u8], cred_i: &[u8]) -> Vec<u8> {
        self.hash(&[th_3, plaintext_3, cred_i].concat())
    }

    pub fn derive_prk_2e(&mut self, th_2: &[u8], g_xy: &[u8]) -> Vec<u8> {
        self.extract(th_2, g_xy)
    }

    pub fn derive_prk_3e2m(
        &mut self,
        prk_2e: &[u8],
        th_2: &[u8],
        g_rx: Option<&[u8]>,
        responder: AuthKind,
    ) -> Result<Vec<u8>> {
        self.static_stage(prk_2e, labels::SALT_3E2M, th_2, g_rx, responder)
    }

    pub fn derive_prk_4e3m(
        &mut self,
        prk_3e2m: &[u8],
        th_3: &[u8],
        g_iy: Option<&[u8]>,
        initiator: AuthKind,
    ) -> Result<Vec<u8>> {
        self.static_stage(prk_3e2m, labels::SALT_4E3M, th_3, g_iy, initiator)
    }

    fn static_stage(
        &mut self,
        prev: &[u8],
        salt_label: u64,
        th: &[u8],
        secret: Option<&[u8]>,
        kind: AuthKind,
    ) -> Result<Vec<u8>> {
        match (kind, secret) {
            (AuthKind::Signature, None) => Ok(prev.to_vec()),
            (AuthKind::StaticDh, Some(s)) => {
                let salt = self.expand(prev, salt_label, th, self.hash_len())?;
                Ok(self.extract(&salt, s))
            }
            _ => Err(Error::MissingStaticSecret),
        }
    }

    pub fn keystream_2(&mut self, prk_2e: &[u8], th_2: &[u8], len: usize) -> Result<Vec<u8>> {
        self.expand(prk_2e, labels::KEYSTREAM_2, th_2, len)
    }

    pub fn key_iv_3(&mut self, prk_3e2m: &[u8], th_3: &[u8], aead: Aead) -> Result<(Vec<u8>, Vec<u8>)> {
        Ok((
            self.expand(prk_3e2m, labels::K_3, th_3, aead.key_len())?,
            self.expand(prk_3e2m, labels::IV_3, th_3, aead.iv_len())?,
        ))
    }

    pub fn key_iv_4(&mut self, prk_4e3m: &[u8], th_4: &[u8], aead: Aead) -> Result<(Vec<u8>, Vec<u8>)> {
        Ok((
            self.expand(prk_4e3m, labels::K_4, th_4, aead.key_len())?,
            self.expand(prk_4e3m, labels::IV_4, th_4, aead.iv_len())?,
        ))
    }

    pub fn mac_2(&mut self, prk_3e2m: &[u8], context_2: &[u8], len: usize) -> Result<Vec<u8>> {
        self.expand(prk_3e2m, labels::MAC_2, context_2, len)
    }

    pub fn mac_3(&mut self, prk_4e3m: &[u8], context_3: &[u8], len: usize) -> Result<Vec<u8>> {
        self.expand(prk_4e3m, labels::MAC_3, context_3, len)
    }

    pub fn derive_prk_out(&mut self, prk_4e3m: &[u8], th_4: &[u8]) -> Result<Vec<u8>> {
        let n = self.hash_len();
        self.expand(prk_4e3m, labels::PRK_OUT, th_4, n)
    }

    /// Application key derivation from `PRK_out`.
    pub fn export(&mut self, prk_out: &[u8], label: u64, context: &[u8], length: usize) -> Result<Vec<u8>> {
        if label < labels::EXPORTER_MIN {
            return Err(Error::InvalidExporterLabel(label));
        }
        self.expand(prk_out, label, context, length)
    }
}

/// `info = [label, bstr context, length]`.
pub fn expand_info(label: u64, context: &[u8], length: usize) -> Vec<u8> {
    let mut e = Encoder::new();
    e.array(3).uint(label).bytes(context).uint(length as u64);
    e.into_bytes()
}

/// `context_2 = [C_R, ID_CRED_R, TH_2, CRED_R, EAD_2]`.
pub fn context_2(c_r: &[u8], id_cred_r: &[u8], th_2: &[u8], cred_r: &[u8], ead_2: &[EadItem]) -> Vec<u8> {
    let mut e = Encoder::new();
    e.array(5).bytes(c_r).bytes(id_cred_r).bytes(th_2).bytes(cred_r).raw(&encode_ead(ead_2));
    e.into_bytes()
}

/// `context_3 = [ID_CRED_I, TH_3, CRED_I, EAD_3]`.
pub fn context_3(id_cred_i: &[u8], th_3: &[u8], cred_i: &[u8], ead_3: &[EadItem]) -> Vec<u8> {
    let mut e = Encoder::new();
    e.array(4).bytes(id_cred_i).bytes(th_3).bytes(cred_i).raw(&encode_ead(ead_3));
    e.into_bytes()
}

/// Data covered by a signature: `[ID_CRED_x, TH || CRED_x || EAD, MAC]`.
/// The MAC is signed but never sent.
pub fn signature_payload(id_cred: &[u8], th: &[u8], cred: &[u8], ead: &[EadItem], mac: &[u8]) -> Vec<u8> {
    let external = [th, cred, &encode_ead(ead)].concat();
    let mut e = Encoder::new();
    e.array(3).bytes(id_cred).bytes(&external).bytes(mac);
    e.into_bytes()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ks() -> KeySchedule {
        KeySchedule::new(HashAlg::Sha256).unwrap()
    }

    #[test]
    fn extract_output_length() {
        assert_eq!(ks().extract(b"s", b"ikm").len(), 32);
        assert_eq!(KeySchedule::new(HashAlg::Sha384).unwrap().extract(b"s", b"ikm").len(), 48);
    }

    #[test]
    fn expand_length_limit() {
        let prk = [7u8; 32];
        assert_eq!(
            ks().expand(&prk, 0, b"", 10_000),
            Err(Error::LengthTooLarge { requested: 10_000, max: 8160 })
        );
        assert_eq!(ks().expand(&prk, 0, b"", 8160).unwrap().len(), 8160);
    }

    #[test]
    fn labels_separate_outputs() {
        let prk = [1u8; 32];
        let mut k = ks();
        let a = k.expand(&prk, 3, b"ctx", 16).unwrap();
        let b = k.expand(&prk, 4, b"ctx", 16).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn signature_stages_pass_through() {
        let mut k = ks();
        let prk = vec![9u8; 32];
        assert_eq!(k.derive_prk_3e2m(&prk, &[0; 32], None, AuthKind::Signature).unwrap(), prk);
        assert_eq!(k.derive_prk_4e3m(&prk, &[0; 32], None, AuthKind::Signature).unwrap(), prk);
    }

    #[test]
    fn static_secret_presence_checked() {
        let mut k = ks();
        let prk = [9u8; 32];
        assert_eq!(
            k.derive_prk_3e2m(&prk, &[0; 32], None, AuthKind::StaticDh),
            Err(Error::MissingStaticSecret)
        );
        assert_eq!(
            k.derive_prk_4e3m(&prk, &[0; 32], Some(&[1; 32]), AuthKind::Signature),
            Err(Error::MissingStaticSecret)
        );
    }

    #[test]
    fn exporter_labels_reserved() {
        let mut k = ks();
        assert_eq!(k.export(&[0; 32], 7, b"", 16), Err(Error::InvalidExporterLabel(7)));
        assert_eq!(k.export(&[0; 32], 1000, b"", 16).unwrap().len(), 16);
    }

    #[test]
    fn trace_records_calls() {
        let mut k = KeySchedule::instrumented(HashAlg::Sha256).unwrap();
        let prk = k.derive_prk_2e(&[3; 32], &[4; 32]);
        k.keystream_2(&prk, &[3; 32], 10).unwrap();
        assert_eq!(k.trace().len(), 2);
        assert!(matches!(&k.trace()[0], KdfCall::Extract { salt, .. } if salt == &[3u8; 32]));
        assert!(ks().trace().is_empty());
    }
}
