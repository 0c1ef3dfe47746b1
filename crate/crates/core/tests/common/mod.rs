//! Reference HMAC/HKDF written straight from the definitions, sharing no code
//! with the crate beyond the raw hash functions.

#![allow(dead_code)]

use sha2::{Digest, Sha256, Sha384};

#[derive(Clone, Copy, Debug)]
pub enum Hash {
    Sha256,
    Sha384,
}

impl Hash {
    fn block(self) -> usize {
        match self {
            Hash::Sha256 => 64,
            Hash::Sha384 => 128,
        }
    }

    pub fn len(self) -> usize {
        match self {
            Hash::Sha256 => 32,
            Hash::Sha384 => 48,
        }
    }

    fn digest(self, parts: &[&[u8]]) -> Vec<u8> {
        match self {
            Hash::Sha256 => {
                let mut h = Sha256::new();
                parts.iter().for_each(|p| h.update(p));
                h.finalize().to_vec()
            }
            Hash::Sha384 => {
                let mut h = Sha384::new();
                parts.iter().for_each(|p| h.update(p));
                h.finalize().to_vec()
            }
        }
    }
}

pub fn hmac(h: Hash, key: &[u8], msg: &[u8]) -> Vec<u8> {
    let mut k = if key.len() > h.block() { h.digest(&[key]) } else { key.to_vec() };
    k.resize(h.block(), 0);
    let ipad: Vec<u8> = k.iter().map(|b| b ^ 0x36).collect();
    let opad: Vec<u8> = k.iter().map(|b| b ^ 0x5c).collect();
    let inner = h.digest(&[&ipad, msg]);
    h.digest(&[&opad, &inner])
}

pub fn hkdf_extract(h: Hash, salt: &[u8], ikm: &[u8]) -> Vec<u8> {
    hmac(h, salt, ikm)
}

pub fn hkdf_expand(h: Hash, prk: &[u8], info: &[u8], len: usize) -> Vec<u8> {
    let mut okm = Vec::new();
    let mut t = Vec::new();
    let mut counter = 1u8;
    while okm.len() < len {
        t = hmac(h, prk, &[&t[..], info, &[counter]].concat());
        okm.extend_from_slice(&t);
        counter += 1;
    }
    okm.truncate(len);
    okm
}

fn head(major: u8, n: u64) -> Vec<u8> {
    let m = major << 5;
    match n {
        0..=23 => vec![m | n as u8],
        24..=0xff => vec![m | 24, n as u8],
        0x100..=0xffff => [&[m | 25][..], &(n as u16).to_be_bytes()].concat(),
        0x1_0000..=0xffff_ffff => [&[m | 26][..], &(n as u32).to_be_bytes()].concat(),
        _ => [&[m | 27][..], &n.to_be_bytes()].concat(),
    }
}

/// `info = [label, bstr context, length]` encoded by hand.
pub fn info(label: u64, context: &[u8], len: usize) -> Vec<u8> {
    let mut out = head(4, 3);
    out.extend(head(0, label));
    out.extend(head(2, context.len() as u64));
    out.extend_from_slice(context);
    out.extend(head(0, len as u64));
    out
}
