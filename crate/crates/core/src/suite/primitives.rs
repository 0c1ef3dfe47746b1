use aes::{Aes128, Aes256};
use aes_gcm::{AesGcm, Aes128Gcm};
use ccm::aead::{generic_array::GenericArray, Aead as _, KeyInit, Payload};
use ccm::consts::{U12, U13, U16, U8};
use ccm::Ccm;
use chacha20poly1305::ChaCha20Poly1305;
use rand_core::{CryptoRng, RngCore};
use sha2::{Digest, Sha256, Sha384};

use super::{Aead, CipherSuiteProfile, Curve, HashAlg, SignatureAlg};
use crate::error::{Error, Result};

type AesCcm8 = Ccm<Aes128, U8, U13>;
type AesCcm16 = Ccm<Aes128, U16, U13>;
type Aes256Gcm = AesGcm<Aes256, U12>;

/// The primitive operations a cipher suite names.
///
/// Public keys for key agreement travel as a single coordinate (the
/// u-coordinate for X25519, the x-coordinate for the NIST curves). Signature
/// verification keys are raw Ed25519 keys or compressed SEC1 points.
pub trait PrimitiveProvider {
    fn hash(&self, data: &[u8]) -> Vec<u8>;
    fn aead_seal(&self, key: &[u8], iv: &[u8], aad: &[u8], plaintext: &[u8]) -> Result<Vec<u8>>;
    fn aead_open(&self, key: &[u8], iv: &[u8], aad: &[u8], ciphertext: &[u8]) -> Result<Vec<u8>>;
    fn ecdh(&self, private: &[u8], public: &[u8]) -> Result<Vec<u8>>;
    fn sign(&self, private: &[u8], payload: &[u8]) -> Result<Vec<u8>>;
    fn verify(&self, public: &[u8], payload: &[u8], signature: &[u8]) -> bool;
    fn gen_ephemeral<R: RngCore + CryptoRng>(&self, rng: &mut R) -> (Vec<u8>, Vec<u8>);
}

/// Primitive backend for one supported cipher suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuitePrimitives {
    profile: CipherSuiteProfile,
}

impl SuitePrimitives {
    pub fn new(profile: CipherSuiteProfile) -> Result<Self> {
        if !profile.is_supported() {
            return Err(Error::UnsupportedSuite(profile.id as i64));
        }
        Ok(Self { profile })
    }

    pub fn profile(&self) -> &CipherSuiteProfile {
        &self.profile
    }

    pub fn hash_len(&self) -> usize {
        self.profile.hash.output_len()
    }

    /// Derives the key-agreement public key for a private scalar.
    pub fn dh_public(&self, private: &[u8]) -> Result<Vec<u8>> {
        match self.profile.ecdh_curve {
            Curve::X25519 => {
                let sk = x25519_secret(private)?;
                Ok(x25519_dalek::PublicKey::from(&sk).as_bytes().to_vec())
            }
            Curve::P256 => {
                let sk = p256::SecretKey::from_slice(private).map_err(|_| Error::InvalidKey)?;
                Ok(p256_x(&sk.public_key()))
            }
            Curve::P384 => {
                let sk = p384::SecretKey::from_slice(private).map_err(|_| Error::InvalidKey)?;
                Ok(p384_x(&sk.public_key()))
            }
            Curve::X448 => Err(Error::UnsupportedSuite(self.profile.id as i64)),
        }
    }

    /// Generates a signing key pair for the suite's signature algorithm.
    pub fn gen_signing_key<R: RngCore + CryptoRng>(&self, rng: &mut R) -> (Vec<u8>, Vec<u8>) {
        let mut seed = vec![0u8; self.scalar_len_for_signature()];
        loop {
            rng.fill_bytes(&mut seed);
            if let Ok(public) = self.signature_public(&seed) {
                return (seed, public);
            }
        }
    }

    fn scalar_len_for_signature(&self) -> usize {
        match self.profile.signature {
            SignatureAlg::EdDSA | SignatureAlg::ES256 => 32,
            SignatureAlg::ES384 => 48,
        }
    }

    pub fn signature_public(&self, private: &[u8]) -> Result<Vec<u8>> {
        match self.profile.signature {
            SignatureAlg::EdDSA => {
                let sk = ed25519_secret(private)?;
                Ok(sk.verifying_key().to_bytes().to_vec())
            }
            SignatureAlg::ES256 => {
                let sk = p256::ecdsa::SigningKey::from_slice(private).map_err(|_| Error::InvalidKey)?;
                Ok(sk.verifying_key().to_encoded_point(true).as_bytes().to_vec())
            }
            SignatureAlg::ES384 => {
                let sk = p384::ecdsa::SigningKey::from_slice(private).map_err(|_| Error::InvalidKey)?;
                Ok(sk.verifying_key().to_encoded_point(true).as_bytes().to_vec())
            }
        }
    }

    fn aead_key_iv(&self, key: &[u8], iv: &[u8]) -> Result<()> {
        let a = self.profile.aead;
        if key.len() != a.key_len() || iv.len() != a.iv_len() {
            return Err(Error::InvalidKey);
        }
        Ok(())
    }
}

fn x25519_secret(private: &[u8]) -> Result<x25519_dalek::StaticSecret> {
    let bytes: [u8; 32] = private.try_into().map_err(|_| Error::InvalidKey)?;
    Ok(x25519_dalek::StaticSecret::from(bytes))
}

fn ed25519_secret(private: &[u8]) -> Result<ed25519_dalek::SigningKey> {
    let bytes: [u8; 32] = private.try_into().map_err(|_| Error::InvalidKey)?;
    Ok(ed25519_dalek::SigningKey::from_bytes(&bytes))
}

fn p256_x(pk: &p256::PublicKey) -> Vec<u8> {
    use p256::elliptic_curve::sec1::ToEncodedPoint;
    pk.to_encoded_point(true).x().expect("not identity").to_vec()
}

fn p384_x(pk: &p384::PublicKey) -> Vec<u8> {
    use p384::elliptic_curve::sec1::ToEncodedPoint;
    pk.to_encoded_point(true).x().expect("not identity").to_vec()
}

/// Lifts an x-coordinate to a curve point. Either square root works for
/// key agreement since only the x-coordinate of the product is used.
fn lift_x(x: &[u8], len: usize) -> Result<Vec<u8>> {
    if x.len() != len {
        return Err(Error::InvalidPoint);
    }
    let mut sec1 = Vec::with_capacity(len + 1);
    sec1.push(0x02);
    sec1.extend_from_slice(x);
    Ok(sec1)
}

macro_rules! aead_call {
    ($cipher:ty, $key:expr, $iv:expr, $method:ident, $payload:expr) => {{
        let c = <$cipher>::new_from_slice($key).map_err(|_| Error::InvalidKey)?;
        c.$method(GenericArray::from_slice($iv), $payload)
            .map_err(|_| Error::AuthenticationFailed)
    }};
}

impl PrimitiveProvider for SuitePrimitives {
    fn hash(&self, data: &[u8]) -> Vec<u8> {
        match self.profile.hash {
            HashAlg::Sha256 => Sha256::digest(data).to_vec(),
            HashAlg::Sha384 => Sha384::digest(data).to_vec(),
            HashAlg::Shake256 => unreachable!("unsupported suites are rejected at construction"),
        }
    }

    fn aead_seal(&self, key: &[u8], iv: &[u8], aad: &[u8], plaintext: &[u8]) -> Result<Vec<u8>> {
        self.aead_key_iv(key, iv)?;
        let p = Payload { msg: plaintext, aad };
        match self.profile.aead {
            Aead::AesCcm16_64_128 => aead_call!(AesCcm8, key, iv, encrypt, p),
            Aead::AesCcm16_128_128 => aead_call!(AesCcm16, key, iv, encrypt, p),
            Aead::ChaCha20Poly1305 => aead_call!(ChaCha20Poly1305, key, iv, encrypt, p),
            Aead::A128Gcm => aead_call!(Aes128Gcm, key, iv, encrypt, p),
            Aead::A256Gcm => aead_call!(Aes256Gcm, key, iv, encrypt, p),
        }
    }

    fn aead_open(&self, key: &[u8], iv: &[u8], aad: &[u8], ciphertext: &[u8]) -> Result<Vec<u8>> {
        self.aead_key_iv(key, iv)?;
        let p = Payload { msg: ciphertext, aad };
        match self.profile.aead {
            Aead::AesCcm16_64_128 => aead_call!(AesCcm8, key, iv, decrypt, p),
            Aead::AesCcm16_128_128 => aead_call!(AesCcm16, key, iv, decrypt, p),
            Aead::ChaCha20Poly1305 => aead_call!(ChaCha20Poly1305, key, iv, decrypt, p),
            Aead::A128Gcm => aead_call!(Aes128Gcm, key, iv, decrypt, p),
            Aead::A256Gcm => aead_call!(Aes256Gcm, key, iv, decrypt, p),
        }
    }

    /// Rejects low-order inputs and the identity: for X25519 these are exactly
    /// the points that yield an all-zero shared secret, and for the NIST
    /// curves the identity has no x-coordinate encoding at all.
    fn ecdh(&self, private: &[u8], public: &[u8]) -> Result<Vec<u8>> {
        match self.profile.ecdh_curve {
            Curve::X25519 => {
                let sk = x25519_secret(private)?;
                let pk: [u8; 32] = public.try_into().map_err(|_| Error::InvalidPoint)?;
                let shared = sk.diffie_hellman(&x25519_dalek::PublicKey::from(pk));
                if !shared.was_contributory() {
                    return Err(Error::InvalidPoint);
                }
                Ok(shared.as_bytes().to_vec())
            }
            Curve::P256 => {
                let sk = p256::SecretKey::from_slice(private).map_err(|_| Error::InvalidKey)?;
                let pk = p256::PublicKey::from_sec1_bytes(&lift_x(public, 32)?)
                    .map_err(|_| Error::InvalidPoint)?;
                let shared = p256::ecdh::diffie_hellman(sk.to_nonzero_scalar(), pk.as_affine());
                Ok(shared.raw_secret_bytes().to_vec())
            }
            Curve::P384 => {
                let sk = p384::SecretKey::from_slice(private).map_err(|_| Error::InvalidKey)?;
                let pk = p384::PublicKey::from_sec1_bytes(&lift_x(public, 48)?)
                    .map_err(|_| Error::InvalidPoint)?;
                let shared = p384::ecdh::diffie_hellman(sk.to_nonzero_scalar(), pk.as_affine());
                Ok(shared.raw_secret_bytes().to_vec())
            }
            Curve::X448 => Err(Error::UnsupportedSuite(self.profile.id as i64)),
        }
    }

    /// ECDSA signatures are emitted in low-S form.
    fn sign(&self, private: &[u8], payload: &[u8]) -> Result<Vec<u8>> {
        use ed25519_dalek::Signer as _;
        match self.profile.signature {
            SignatureAlg::EdDSA => Ok(ed25519_secret(private)?.sign(payload).to_bytes().to_vec()),
            SignatureAlg::ES256 => {
                let sk = p256::ecdsa::SigningKey::from_slice(private).map_err(|_| Error::InvalidKey)?;
                let sig: p256::ecdsa::Signature = sk.sign(payload);
                Ok(sig.normalize_s().unwrap_or(sig).to_bytes().to_vec())
            }
            SignatureAlg::ES384 => {
                let sk = p384::ecdsa::SigningKey::from_slice(private).map_err(|_| Error::InvalidKey)?;
                let sig: p384::ecdsa::Signature = sk.sign(payload);
                Ok(sig.normalize_s().unwrap_or(sig).to_bytes().to_vec())
            }
        }
    }

    /// Strict verification: Ed25519 rejects small-order keys and
    /// non-canonical encodings, ECDSA rejects high-S signatures.
    fn verify(&self, public: &[u8], payload: &[u8], signature: &[u8]) -> bool {
        use p256::ecdsa::signature::Verifier as _;
        match self.profile.signature {
            SignatureAlg::EdDSA => {
                let Ok(pk) = <[u8; 32]>::try_from(public) else { return false };
                let Ok(pk) = ed25519_dalek::VerifyingKey::from_bytes(&pk) else { return false };
                let Ok(sig) = ed25519_dalek::Signature::from_slice(signature) else { return false };
                pk.verify_strict(payload, &sig).is_ok()
            }
            SignatureAlg::ES256 => {
                let Ok(pk) = p256::ecdsa::VerifyingKey::from_sec1_bytes(public) else { return false };
                let Ok(sig) = p256::ecdsa::Signature::from_slice(signature) else { return false };
                sig.normalize_s().is_none() && pk.verify(payload, &sig).is_ok()
            }
            SignatureAlg::ES384 => {
                let Ok(pk) = p384::ecdsa::VerifyingKey::from_sec1_bytes(public) else { return false };
                let Ok(sig) = p384::ecdsa::Signature::from_slice(signature) else { return false };
                sig.normalize_s().is_none() && pk.verify(payload, &sig).is_ok()
            }
        }
    }

    fn gen_ephemeral<R: RngCore + CryptoRng>(&self, rng: &mut R) -> (Vec<u8>, Vec<u8>) {
        let mut private = vec![0u8; self.profile.ecdh_curve.coordinate_len()];
        loop {
            rng.fill_bytes(&mut private);
            if let Ok(public) = self.dh_public(&private) {
                return (private, public);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::suite::lookup_suite;
    use rand_chacha::ChaCha20Rng;
    use rand_core::SeedableRng;

    fn prims(id: i64) -> SuitePrimitives {
        lookup_suite(id).unwrap().primitives().unwrap()
    }

    fn functional() -> Vec<SuitePrimitives> {
        crate::suite::supported_suites().into_iter().map(|s| prims(s as i64)).collect()
    }

    #[test]
    fn unsupported_suite_reported() {
        assert_eq!(lookup_suite(25).unwrap().primitives(), Err(Error::UnsupportedSuite(25)));
    }

    #[test]
    fn dh_symmetry_100_pairs() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        for p in functional() {
            for _ in 0..100 {
                let (x, gx) = p.gen_ephemeral(&mut rng);
                let (y, gy) = p.gen_ephemeral(&mut rng);
                let a = p.ecdh(&x, &gy).unwrap();
                assert_eq!(a, p.ecdh(&y, &gx).unwrap());
                assert_eq!(a.len(), p.profile().ecdh_curve.coordinate_len());
            }
        }
    }

    #[test]
    fn identity_and_low_order_rejected() {
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let x25519 = prims(0);
        let (x, _) = x25519.gen_ephemeral(&mut rng);
        // u = 0 is the identity; u = 1 has order 4; the rest are the
        // remaining small-order points of Curve25519.
        let mut low_order: Vec<[u8; 32]> = vec![[0u8; 32], {
            let mut u = [0u8; 32];
            u[0] = 1;
            u
        }];
        low_order.push(hex_arr("e0eb7a7c3b41b8ae1656e3faf19fc46ada098deb9c32b1fd866205165f49b800"));
        low_order.push(hex_arr("5f9c95bca3508c24b1d0b1559c83ef5b04445cc4581c8e86d8224eddd09f1157"));
        low_order.push(hex_arr("ecffffffffffffffffffffffffffffffffffffffffffffffffffffffffffff7f"));
        for pt in low_order {
            assert_eq!(x25519.ecdh(&x, &pt), Err(Error::InvalidPoint));
        }

        let p256 = prims(2);
        let (x, _) = p256.gen_ephemeral(&mut rng);
        // The identity has no x-coordinate; x = 1 is off the curve and
        // 0xff..ff exceeds the field prime.
        let mut off_curve = [0u8; 32];
        off_curve[31] = 1;
        assert_eq!(p256.ecdh(&x, &off_curve), Err(Error::InvalidPoint));
        assert_eq!(p256.ecdh(&x, &[0xff; 32]), Err(Error::InvalidPoint));
        assert_eq!(p256.ecdh(&x, &[0u8; 31]), Err(Error::InvalidPoint));
    }

    fn hex_arr(s: &str) -> [u8; 32] {
        hex::decode(s).unwrap().try_into().unwrap()
    }

    #[test]
    fn aead_round_trip_and_bit_flips() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        for p in functional() {
            let a = p.profile().aead;
            let mut key = vec![0u8; a.key_len()];
            let mut iv = vec![0u8; a.iv_len()];
            rng.fill_bytes(&mut key);
            rng.fill_bytes(&mut iv);
            let aad = b"header".to_vec();
            let pt = b"edhoc plaintext".to_vec();
            let ct = p.aead_seal(&key, &iv, &aad, &pt).unwrap();
            assert_eq!(ct.len(), pt.len() + a.tag_len());
            assert_eq!(p.aead_open(&key, &iv, &aad, &ct).unwrap(), pt);

            let flip = |v: &[u8], bit: usize| {
                let mut v = v.to_vec();
                v[bit / 8] ^= 1 << (bit % 8);
                v
            };
            for bit in [0, 7, ct.len() * 8 - 1] {
                assert!(p.aead_open(&key, &iv, &aad, &flip(&ct, bit)).is_err());
            }
            assert!(p.aead_open(&key, &iv, &flip(&aad, 3), &ct).is_err());
            assert!(p.aead_open(&flip(&key, 5), &iv, &aad, &ct).is_err());
            assert!(p.aead_open(&key, &flip(&iv, 9), &aad, &ct).is_err());
        }
    }

    #[test]
    fn sign_verify_and_bit_flips() {
        let mut rng = ChaCha20Rng::seed_from_u64(10);
        for id in [0, 2, 24] {
            let p = prims(id);
            let (sk, pk) = p.gen_signing_key(&mut rng);
            let msg = b"MAC-then-Sign payload".to_vec();
            let sig = p.sign(&sk, &msg).unwrap();
            assert_eq!(sig.len(), p.profile().signature_len());
            assert!(p.verify(&pk, &msg, &sig));
            for bit in [0, 100, sig.len() * 8 - 1] {
                let mut s = sig.clone();
                s[bit / 8] ^= 1 << (bit % 8);
                assert!(!p.verify(&pk, &msg, &s));
            }
            for bit in [0, 50] {
                let mut m = msg.clone();
                m[bit / 8] ^= 1 << (bit % 8);
                assert!(!p.verify(&pk, &m, &sig));
            }
        }
    }

    #[test]
    fn high_s_ecdsa_rejected() {
        use p256::elliptic_curve::ops::Neg;
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let p = prims(2);
        let (sk, pk) = p.gen_signing_key(&mut rng);
        let msg = b"malleable";
        let sig = p256::ecdsa::Signature::from_slice(&p.sign(&sk, msg).unwrap()).unwrap();
        let (r, s) = sig.split_scalars();
        let high = p256::ecdsa::Signature::from_scalars(r, s.as_ref().neg()).unwrap();
        assert!(!p.verify(&pk, msg, &high.to_bytes()));
    }
}
