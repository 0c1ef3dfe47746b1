//! Wire encoding of the handshake messages, their inner plaintexts and the
//! error message.
//!
//! Every object is a fixed-arity array of its fields, so truncation always
//! surfaces as a decoding error. EAD items are two-element arrays whose label
//! is encoded as a negative integer when the item is critical.

use serde::Serialize;

use crate::cbor::{Decoder, Encoder, Int};
use crate::error::{Error, Result};

/// Upper bound on any encoded message accepted by a decoder.
pub const MAX_MESSAGE_SIZE: usize = 64 * 1024;

pub const MIN_CONNECTION_ID_LEN: usize = 1;
pub const MAX_CONNECTION_ID_LEN: usize = 8;

/// Generic abort.
pub const ERR_GENERIC: u64 = 1;
/// The initiator's selected suite was not acceptable.
pub const ERR_WRONG_SUITE: u64 = 2;

/// EAD label reserved for padding; never critical.
pub const EAD_PADDING_LABEL: u64 = 0;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct EadItem {
    pub label: u64,
    pub critical: bool,
    #[serde(with = "hex::serde")]
    pub value: Vec<u8>,
}

impl EadItem {
    pub fn new(label: u64, critical: bool, value: impl Into<Vec<u8>>) -> Self {
        Self { label, critical, value: value.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message1 {
    pub method: u8,
    pub suites_i: Vec<i32>,
    pub g_x: Vec<u8>,
    pub c_i: Vec<u8>,
    pub ead_1: Vec<EadItem>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message2 {
    pub g_y: Vec<u8>,
    pub ciphertext_2: Vec<u8>,
    pub c_r: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plaintext2 {
    pub id_cred_r: Vec<u8>,
    pub sig_or_mac_2: Vec<u8>,
    pub ead_2: Vec<EadItem>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message3 {
    pub ciphertext_3: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plaintext3 {
    pub id_cred_i: Vec<u8>,
    pub sig_or_mac_3: Vec<u8>,
    pub ead_3: Vec<EadItem>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message4 {
    pub ciphertext_4: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plaintext4 {
    pub ead_4: Vec<EadItem>,
}

/// Unprotected error message. Codes and payload layout are local
/// conventions: code 2 carries the responder's supported suites.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorMessage {
    code: u64,
    info: Vec<u8>,
}

impl ErrorMessage {
    pub fn new(code: u64, info: Vec<u8>) -> Result<Self> {
        match code {
            ERR_GENERIC | ERR_WRONG_SUITE => Ok(Self { code, info }),
            _ => Err(Error::InvalidErrorCode(code)),
        }
    }

    pub fn wrong_suite(supported: &[i32]) -> Self {
        Self { code: ERR_WRONG_SUITE, info: encode_suite_list(supported) }
    }

    pub fn generic() -> Self {
        Self { code: ERR_GENERIC, info: Vec::new() }
    }

    pub fn code(&self) -> u64 {
        self.code
    }

    pub fn info(&self) -> &[u8] {
        &self.info
    }

    /// For code 2, the suites the responder supports.
    pub fn supported_suites(&self) -> Result<Vec<i32>> {
        if self.code != ERR_WRONG_SUITE {
            return Err(Error::MalformedMessage("not a suite rejection"));
        }
        decode_suite_list(&self.info)
    }

    pub fn into_error(self) -> Error {
        Error::PeerError { code: self.code, info: self.info }
    }
}

fn check_size(b: &[u8]) -> Result<()> {
    if b.len() > MAX_MESSAGE_SIZE {
        return Err(Error::MalformedMessage("message exceeds maximum size"));
    }
    Ok(())
}

fn put_ead(e: &mut Encoder, items: &[EadItem]) {
    e.array(items.len());
    for item in items {
        e.array(2);
        if item.critical {
            e.nint_arg(item.label);
        } else {
            e.uint(item.label);
        }
        e.bytes(&item.value);
    }
}

fn get_ead(d: &mut Decoder<'_>) -> Result<Vec<EadItem>> {
    let n = d.array()?;
    let mut items = Vec::with_capacity(n);
    for _ in 0..n {
        d.array_of(2)?;
        let (label, critical) = match d.int()? {
            Int::Unsigned(l) => (l, false),
            Int::Negative(l) => (l, true),
        };
        let value = d.bytes()?.to_vec();
        items.push(EadItem { label, critical, value });
    }
    Ok(items)
}

/// Canonical encoding of an EAD list, as embedded in MAC contexts.
pub fn encode_ead(items: &[EadItem]) -> Vec<u8> {
    let mut e = Encoder::new();
    put_ead(&mut e, items);
    e.into_bytes()
}

fn get_cid(d: &mut Decoder<'_>) -> Result<Vec<u8>> {
    let c = d.bytes()?;
    if !(MIN_CONNECTION_ID_LEN..=MAX_CONNECTION_ID_LEN).contains(&c.len()) {
        return Err(Error::MalformedMessage("connection identifier length"));
    }
    Ok(c.to_vec())
}

pub fn encode_suite_list(suites: &[i32]) -> Vec<u8> {
    let mut e = Encoder::new();
    put_suites(&mut e, suites);
    e.into_bytes()
}

fn put_suites(e: &mut Encoder, suites: &[i32]) {
    e.array(suites.len());
    for &s in suites {
        e.int(s as i64);
    }
}

fn get_suites(d: &mut Decoder<'_>) -> Result<Vec<i32>> {
    let n = d.array()?;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let v = d.int()?.to_i64()?;
        out.push(i32::try_from(v).map_err(|_| Error::MalformedMessage("suite id out of range"))?);
    }
    Ok(out)
}

pub fn decode_suite_list(b: &[u8]) -> Result<Vec<i32>> {
    check_size(b)?;
    let mut d = Decoder::new(b);
    let suites = get_suites(&mut d)?;
    d.finish()?;
    Ok(suites)
}

impl Message1 {
    pub fn encode(&self) -> Vec<u8> {
        let mut e = Encoder::new();
        e.array(5).uint(self.method as u64);
        put_suites(&mut e, &self.suites_i);
        e.bytes(&self.g_x).bytes(&self.c_i);
        put_ead(&mut e, &self.ead_1);
        e.into_bytes()
    }

    pub fn decode(b: &[u8]) -> Result<Self> {
        check_size(b)?;
        let mut d = Decoder::new(b);
        d.array_of(5)?;
        let method = d.uint()?;
        if method > 3 {
            return Err(Error::MalformedMessage("method out of range"));
        }
        let suites_i = get_suites(&mut d)?;
        if suites_i.is_empty() {
            return Err(Error::MalformedMessage("empty suite list"));
        }
        let g_x = d.bytes()?.to_vec();
        let c_i = get_cid(&mut d)?;
        let ead_1 = get_ead(&mut d)?;
        d.finish()?;
        Ok(Self { method: method as u8, suites_i, g_x, c_i, ead_1 })
    }

    /// The suite whose curve the ephemeral key belongs to.
    pub fn selected_suite(&self) -> i32 {
        self.suites_i[0]
    }
}

impl Message2 {
    pub fn encode(&self) -> Vec<u8> {
        let mut e = Encoder::new();
        e.array(3).bytes(&self.g_y).bytes(&self.ciphertext_2).bytes(&self.c_r);
        e.into_bytes()
    }

    pub fn decode(b: &[u8]) -> Result<Self> {
        check_size(b)?;
        let mut d = Decoder::new(b);
        d.array_of(3)?;
        let g_y = d.bytes()?.to_vec();
        let ciphertext_2 = d.bytes()?.to_vec();
        let c_r = get_cid(&mut d)?;
        d.finish()?;
        Ok(Self { g_y, ciphertext_2, c_r })
    }
}

impl Plaintext2 {
    pub fn encode(&self) -> Vec<u8> {
        let mut e = Encoder::new();
        e.array(3).bytes(&self.id_cred_r).bytes(&self.sig_or_mac_2);
        put_ead(&mut e, &self.ead_2);
        e.into_bytes()
    }

    pub fn decode(b: &[u8]) -> Result<Self> {
        check_size(b)?;
        let mut d = Decoder::new(b);
        d.array_of(3)?;
        let id_cred_r = d.bytes()?.to_vec();
        let sig_or_mac_2 = d.bytes()?.to_vec();
        let ead_2 = get_ead(&mut d)?;
        d.finish()?;
        Ok(Self { id_cred_r, sig_or_mac_2, ead_2 })
    }
}

impl Message3 {
    pub fn encode(&self) -> Vec<u8> {
        let mut e = Encoder::new();
        e.array(1).bytes(&self.ciphertext_3);
        e.into_bytes()
    }

    pub fn decode(b: &[u8]) -> Result<Self> {
        Ok(Self { ciphertext_3: decode_single_bstr(b)? })
    }
}

impl Plaintext3 {
    pub fn encode(&self) -> Vec<u8> {
        let mut e = Encoder::new();
        e.array(3).bytes(&self.id_cred_i).bytes(&self.sig_or_mac_3);
        put_ead(&mut e, &self.ead_3);
        e.into_bytes()
    }

    pub fn decode(b: &[u8]) -> Result<Self> {
        check_size(b)?;
        let mut d = Decoder::new(b);
        d.array_of(3)?;
        let id_cred_i = d.bytes()?.to_vec();
        let sig_or_mac_3 = d.bytes()?.to_vec();
        let ead_3 = get_ead(&mut d)?;
        d.finish()?;
        Ok(Self { id_cred_i, sig_or_mac_3, ead_3 })
    }
}

impl Message4 {
    pub fn encode(&self) -> Vec<u8> {
        let mut e = Encoder::new();
        e.array(1).bytes(&self.ciphertext_4);
        e.into_bytes()
    }

    pub fn decode(b: &[u8]) -> Result<Self> {
        Ok(Self { ciphertext_4: decode_single_bstr(b)? })
    }
}

impl Plaintext4 {
    pub fn encode(&self) -> Vec<u8> {
        let mut e = Encoder::new();
        e.array(1);
        put_ead(&mut e, &self.ead_4);
        e.into_bytes()
    }

    pub fn decode(b: &[u8]) -> Result<Self> {
        check_size(b)?;
        let mut d = Decoder::new(b);
        d.array_of(1)?;
        let ead_4 = get_ead(&mut d)?;
        d.finish()?;
        Ok(Self { ead_4 })
    }
}

fn decode_single_bstr(b: &[u8]) -> Result<Vec<u8>> {
    check_size(b)?;
    let mut d = Decoder::new(b);
    d.array_of(1)?;
    let v = d.bytes()?.to_vec();
    d.finish()?;
    Ok(v)
}

impl ErrorMessage {
    pub fn encode(&self) -> Vec<u8> {
        let mut e = Encoder::new();
        e.array(2).uint(self.code).bytes(&self.info);
        e.into_bytes()
    }

    pub fn decode(b: &[u8]) -> Result<Self> {
        check_size(b)?;
        let mut d = Decoder::new(b);
        d.array_of(2)?;
        let code = d.uint()?;
        let info = d.bytes()?.to_vec();
        d.finish()?;
        Self::new(code, info).map_err(|_| Error::MalformedMessage("undefined error code"))
    }
}

/// Whether `b` has the shape of an error message (a two-element array).
pub fn looks_like_error(b: &[u8]) -> bool {
    b.first() == Some(&0x82)
}

/// Appends a padding EAD item so the encoded plaintext length becomes a
/// multiple of `block`. `encode` must produce the plaintext for a given EAD
/// list.
pub fn pad_ead(ead: &[EadItem], block: usize, encode: impl Fn(&[EadItem]) -> Vec<u8>) -> Vec<EadItem> {
    if block <= 1 {
        return ead.to_vec();
    }
    if encode(ead).len().is_multiple_of(block) {
        return ead.to_vec();
    }
    let mut padded = ead.to_vec();
    padded.push(EadItem::new(EAD_PADDING_LABEL, false, Vec::new()));
    // Growing the pad by one byte grows the encoding by one byte, except
    // where the byte-string head widens; retry until aligned.
    for n in 0..(block * 3) {
        padded.last_mut().unwrap().value = vec![0u8; n];
        if encode(&padded).len().is_multiple_of(block) {
            return padded;
        }
    }
    padded
}
