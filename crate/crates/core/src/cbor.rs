//! Strict definite-length CBOR subset.
//!
//! Only four major types are understood: unsigned integers (0), negative
//! integers (1), byte strings (2) and arrays (4). Every head must use the
//! shortest possible form and indefinite lengths are rejected, so each value
//! has exactly one encoding.

use crate::error::{Error, Result};

const MAJOR_UINT: u8 = 0;
const MAJOR_NINT: u8 = 1;
const MAJOR_BSTR: u8 = 2;
const MAJOR_ARRAY: u8 = 4;

/// Appends canonical CBOR items to a byte buffer.
#[derive(Debug, Default, Clone)]
pub struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new() -> Self {
        Self::default()
    }

    fn head(&mut self, major: u8, arg: u64) -> &mut Self {
        let m = major << 5;
        match arg {
            0..=23 => self.buf.push(m | arg as u8),
            24..=0xff => self.buf.extend_from_slice(&[m | 24, arg as u8]),
            0x100..=0xffff => {
                self.buf.push(m | 25);
                self.buf.extend_from_slice(&(arg as u16).to_be_bytes());
            }
            0x1_0000..=0xffff_ffff => {
                self.buf.push(m | 26);
                self.buf.extend_from_slice(&(arg as u32).to_be_bytes());
            }
            _ => {
                self.buf.push(m | 27);
                self.buf.extend_from_slice(&arg.to_be_bytes());
            }
        }
        self
    }

    pub fn uint(&mut self, v: u64) -> &mut Self {
        self.head(MAJOR_UINT, v)
    }

    pub fn int(&mut self, v: i64) -> &mut Self {
        if v >= 0 {
            self.head(MAJOR_UINT, v as u64)
        } else {
            // -1 - n, computed without overflow for i64::MIN
            self.head(MAJOR_NINT, !(v as u64))
        }
    }

    /// Encodes a negative integer given its CBOR argument, i.e. the value `-1 - arg`.
    pub fn nint_arg(&mut self, arg: u64) -> &mut Self {
        self.head(MAJOR_NINT, arg)
    }

    pub fn bytes(&mut self, b: &[u8]) -> &mut Self {
        self.head(MAJOR_BSTR, b.len() as u64);
        self.buf.extend_from_slice(b);
        self
    }

    pub fn array(&mut self, len: usize) -> &mut Self {
        self.head(MAJOR_ARRAY, len as u64)
    }

    /// Appends bytes that are already a complete CBOR item.
    pub fn raw(&mut self, item: &[u8]) -> &mut Self {
        self.buf.extend_from_slice(item);
        self
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }
}

/// Integer item as it appeared on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Int {
    Unsigned(u64),
    /// Negative integer carrying its raw argument: the value is `-1 - arg`.
    Negative(u64),
}

impl Int {
    pub fn to_i64(self) -> Result<i64> {
        match self {
            Int::Unsigned(v) => i64::try_from(v).map_err(|_| Error::MalformedMessage("integer overflow")),
            Int::Negative(a) => i64::try_from(a)
                .map(|a| -1 - a)
                .map_err(|_| Error::MalformedMessage("integer overflow")),
        }
    }
}

/// Cursor over a byte slice that only accepts canonical items.
#[derive(Debug, Clone)]
pub struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::MalformedMessage("truncated"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn peek_major(&self) -> Result<u8> {
        self.buf
            .get(self.pos)
            .map(|b| b >> 5)
            .ok_or(Error::MalformedMessage("truncated"))
    }

    fn head(&mut self) -> Result<(u8, u64)> {
        let initial = self.take(1)?[0];
        let major = initial >> 5;
        let info = initial & 0x1f;
        let (arg, min) = match info {
            0..=23 => (info as u64, 0),
            24 => (self.take(1)?[0] as u64, 24),
            25 => {
                let b = self.take(2)?;
                (u16::from_be_bytes([b[0], b[1]]) as u64, 0x100)
            }
            26 => {
                let b = self.take(4)?;
                (u32::from_be_bytes([b[0], b[1], b[2], b[3]]) as u64, 0x1_0000)
            }
            27 => {
                let b = self.take(8)?;
                let mut a = [0u8; 8];
                a.copy_from_slice(b);
                (u64::from_be_bytes(a), 0x1_0000_0000)
            }
            31 => return Err(Error::MalformedMessage("indefinite length")),
            _ => return Err(Error::MalformedMessage("reserved additional info")),
        };
        if arg < min {
            return Err(Error::MalformedMessage("non-canonical integer head"));
        }
        Ok((major, arg))
    }

    fn expect_head(&mut self, major: u8, what: &'static str) -> Result<u64> {
        let (m, arg) = self.head()?;
        if m != major {
            return Err(Error::MalformedMessage(what));
        }
        Ok(arg)
    }

    pub fn uint(&mut self) -> Result<u64> {
        self.expect_head(MAJOR_UINT, "expected unsigned integer")
    }

    pub fn int(&mut self) -> Result<Int> {
        match self.peek_major()? {
            MAJOR_UINT => Ok(Int::Unsigned(self.head()?.1)),
            MAJOR_NINT => Ok(Int::Negative(self.head()?.1)),
            _ => Err(Error::MalformedMessage("expected integer")),
        }
    }

    pub fn bytes(&mut self) -> Result<&'a [u8]> {
        let len = self.expect_head(MAJOR_BSTR, "expected byte string")?;
        let len = usize::try_from(len).map_err(|_| Error::MalformedMessage("truncated"))?;
        self.take(len)
    }

    /// Reads an array head. The announced length is bounded by the remaining
    /// input, since every element takes at least one byte.
    pub fn array(&mut self) -> Result<usize> {
        let len = self.expect_head(MAJOR_ARRAY, "expected array")?;
        if len > self.remaining() as u64 {
            return Err(Error::MalformedMessage("array longer than input"));
        }
        Ok(len as usize)
    }

    pub fn array_of(&mut self, len: usize) -> Result<()> {
        if self.array()? != len {
            return Err(Error::MalformedMessage("wrong array arity"));
        }
        Ok(())
    }

    /// Skips one item of any supported type, nested arrays included.
    pub fn skip(&mut self) -> Result<()> {
        self.skip_depth(0)
    }

    fn skip_depth(&mut self, depth: usize) -> Result<()> {
        if depth > MAX_NESTING {
            return Err(Error::MalformedMessage("nesting too deep"));
        }
        match self.peek_major()? {
            MAJOR_UINT | MAJOR_NINT => self.int().map(|_| ()),
            MAJOR_BSTR => self.bytes().map(|_| ()),
            MAJOR_ARRAY => {
                for _ in 0..self.array()? {
                    self.skip_depth(depth + 1)?;
                }
                Ok(())
            }
            _ => Err(Error::MalformedMessage("unsupported major type")),
        }
    }

    pub fn finish(self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(Error::MalformedMessage("trailing bytes"));
        }
        Ok(())
    }
}

const MAX_NESTING: usize = 16;

/// Splits a top-level array into the raw encodings of its items.
pub fn array_items(b: &[u8]) -> Result<Vec<&[u8]>> {
    let mut d = Decoder::new(b);
    let n = d.array()?;
    let mut items = Vec::with_capacity(n);
    for _ in 0..n {
        let start = d.position();
        // The enclosing array counts as the first level.
        d.skip_depth(1)?;
        items.push(&b[start..d.position()]);
    }
    d.finish()?;
    Ok(items)
}

/// Canonical encoding of a single byte string.
pub fn bstr(b: &[u8]) -> Vec<u8> {
    let mut e = Encoder::new();
    e.bytes(b);
    e.into_bytes()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn array_items_split() {
        let mut e = Encoder::new();
        e.array(3).uint(3).array(2).int(-1).bytes(&[1, 2]).bytes(&[]);
        let b = e.into_bytes();
        let items = array_items(&b).unwrap();
        assert_eq!(items, vec![&[0x03][..], &[0x82, 0x20, 0x42, 1, 2][..], &[0x40][..]]);
        assert!(array_items(&[0x82, 0x01]).is_err());
        let mut ok = vec![0x81; 16];
        ok.push(0x00);
        assert!(array_items(&ok).is_ok());
        // 17 levels of nesting
        let mut deep = vec![0x81; 17];
        deep.push(0x00);
        assert!(array_items(&deep).is_err());
    }

    #[test]
    fn shortest_form_heads() {
        let mut e = Encoder::new();
        e.uint(23).uint(24).uint(255).uint(256).uint(65536);
        assert_eq!(
            e.into_bytes(),
            [0x17, 0x18, 0x18, 0x18, 0xff, 0x19, 0x01, 0x00, 0x1a, 0x00, 0x01, 0x00, 0x00]
        );
    }

    #[test]
    fn negative_integers() {
        let mut e = Encoder::new();
        e.int(-1).int(-24).int(-25).int(i64::MIN);
        let b = e.into_bytes();
        assert_eq!(&b[..4], &[0x20, 0x37, 0x38, 0x18]);
        let mut d = Decoder::new(&b);
        assert_eq!(d.int().unwrap().to_i64().unwrap(), -1);
        assert_eq!(d.int().unwrap().to_i64().unwrap(), -24);
        assert_eq!(d.int().unwrap().to_i64().unwrap(), -25);
        assert_eq!(d.int().unwrap().to_i64().unwrap(), i64::MIN);
        d.finish().unwrap();
    }

    #[test]
    fn rejects_non_canonical_head() {
        // 5 encoded with a one-byte argument
        assert!(matches!(
            Decoder::new(&[0x18, 0x05]).uint(),
            Err(Error::MalformedMessage(_))
        ));
        assert!(Decoder::new(&[0x19, 0x00, 0xff]).uint().is_err());
    }

    #[test]
    fn rejects_indefinite_and_reserved() {
        assert!(Decoder::new(&[0x9f, 0xff]).array().is_err());
        assert!(Decoder::new(&[0x5f]).bytes().is_err());
        assert!(Decoder::new(&[0x1c]).uint().is_err());
    }

    #[test]
    fn array_length_bounded_by_input() {
        // claims 2^32 elements with nothing following
        assert!(Decoder::new(&[0x9a, 0xff, 0xff, 0xff, 0xff]).array().is_err());
    }

    #[test]
    fn trailing_bytes_detected() {
        let mut d = Decoder::new(&[0x01, 0x02]);
        d.uint().unwrap();
        assert!(d.finish().is_err());
    }
}
