mod common;

use common::{hkdf_expand, hkdf_extract, info, Hash};
use edhoc_core::codec::Message1;
use edhoc_core::key_schedule::KeySchedule;
use edhoc_core::suite::{lookup_suite, HashAlg, PrimitiveProvider};
use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

fn ks(h: Hash) -> KeySchedule {
    KeySchedule::new(match h {
        Hash::Sha256 => HashAlg::Sha256,
        Hash::Sha384 => HashAlg::Sha384,
    })
    .unwrap()
}

fn bytes(rng: &mut ChaCha20Rng, max: usize) -> Vec<u8> {
    let mut b = vec![0u8; rng.next_u32() as usize % (max + 1)];
    rng.fill_bytes(&mut b);
    b
}

#[test]
fn kdf_matches_reference_on_random_inputs() {
    for h in [Hash::Sha256, Hash::Sha384] {
        let mut rng = ChaCha20Rng::seed_from_u64(0x0dac1e);
        for _ in 0..100 {
            let salt = bytes(&mut rng, 80);
            let ikm = bytes(&mut rng, 80);
            let context = bytes(&mut rng, 300);
            let label = match rng.next_u32() % 3 {
                0 => rng.next_u64() % 24,
                1 => rng.next_u64() % 70_000,
                _ => rng.next_u64(),
            };
            let len = 1 + rng.next_u32() as usize % (4 * h.len());
            let mut k = ks(h);
            let prk = k.extract(&salt, &ikm);
            assert_eq!(prk, hkdf_extract(h, &salt, &ikm));
            assert_eq!(k.expand(&prk, label, &context, len).unwrap(), hkdf_expand(h, &prk, &info(label, &context, len), len));
        }
    }
}

#[test]
fn reference_hmac_matches_known_answer() {
    // HKDF-SHA256 extract, the first published HKDF test case.
    let ikm = [0x0b; 22];
    let salt: Vec<u8> = (0..=0x0c).collect();
    assert_eq!(
        hex::encode(hkdf_extract(Hash::Sha256, &salt, &ikm)),
        "077709362c2e32df0ddc3f0dc47bba6390b6c73bb50f9c3122ec844ad7c2b3e5"
    );
}

// Frozen values below were computed with Python's hmac/hashlib and the
// `cryptography` package.

#[test]
fn frozen_kdf_values() {
    let salt: Vec<u8> = (0..32).collect();
    let ikm = b"edhoc oracle ikm";
    let cases = [
        (
            HashAlg::Sha256,
            16,
            "6df72cffeebe6c2ffe4ee1e33ab2ff810bdeaaac56b6a2d322a75a6ebb21819a",
            "492500087fe6f8545ea14a8c3d4cd35d",
        ),
        (
            HashAlg::Sha384,
            48,
            "d9fae3fac8cb3f50913ea202f96abea317422c163358dfd73796758a9ce0dedb5a98a6d899b72e969eeaaf025ff9d9a1",
            "6d3e7104bb576a3679537d3ccdb768c2ce32dc6909a43b17f87d726586fcfaa819ff5b2b4e363edeaaf6ad74ffd6403e",
        ),
    ];
    for (hash, len, prk_hex, okm_hex) in cases {
        let mut k = KeySchedule::new(hash).unwrap();
        let prk = k.extract(&salt, ikm);
        assert_eq!(hex::encode(&prk), prk_hex);
        assert_eq!(hex::encode(k.expand(&prk, 3, b"ctx", len).unwrap()), okm_hex);
    }

    // Multi-byte label, context and length heads.
    let mut k = KeySchedule::new(HashAlg::Sha256).unwrap();
    let prk = k.extract(&salt, ikm);
    assert_eq!(
        hex::encode(k.expand(&prk, 1000, &[0u8; 300], 100).unwrap()),
        "4a83621df04c218c1569ed2be022709b9e3c8e0ee26d14aa850b28328668e6e21d163c66b128b042d17924853c5f8627b72d1de65f7b738d5eaff567b0e26fd0d6a82035cbe850ef370f741fcd357f65221e7dd68f0c127f56b3133ea5f6a34bd10b1661"
    );
}

#[test]
fn frozen_message_1_and_th_2() {
    let m1 = Message1 { method: 3, suites_i: vec![2], g_x: vec![0; 32], c_i: vec![0x0a], ead_1: vec![] }.encode();
    let mut expected = vec![0x85, 0x03, 0x81, 0x02, 0x58, 0x20];
    expected.extend([0u8; 32]);
    expected.extend([0x41, 0x0a, 0x80]);
    assert_eq!(m1, expected);

    let k = KeySchedule::new(HashAlg::Sha256).unwrap();
    assert_eq!(
        hex::encode(k.compute_th2(&[1u8; 32], &m1)),
        "56892e7cda4db301e26c232b99c4fd57ca6b95b091d0b653bca3257c566623d6"
    );
}

#[test]
fn frozen_x25519() {
    let p = lookup_suite(0).unwrap().primitives().unwrap();
    let sk = hex::decode("77076d0a7318a57d3c16c17251b26645df4c2f87ebc0992ab177fba51db92c2a").unwrap();
    let peer = hex::decode("de9edb7d7b7dc1b4d35b61c2ece435373f8343c85b78674dadfc7e146f882b4f").unwrap();
    assert_eq!(hex::encode(p.dh_public(&sk).unwrap()), "8520f0098930a754748b7ddcb43ef75a0dbf3a0d26381af4eba4a98eaa9b4e6a");
    assert_eq!(hex::encode(p.ecdh(&sk, &peer).unwrap()), "4a5d9d5ba4ce2de1728e3bf480350f25e07e21c947d19e3376f09b3c1e161742");
}
