//! Packed bit sequences with an explicit length.
//!
//! Bits are stored MSB-first within each byte; unused trailing bits of the
//! last byte are always zero. This is the single packing convention shared by
//! conditioning, ingest and the battery.

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, Default)]
pub struct BitStream {
    bytes: Vec<u8>,
    len_bits: usize,
}

impl BitStream {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(bits: usize) -> Self {
        Self {
            bytes: Vec::with_capacity(bits.div_ceil(8)),
            len_bits: 0,
        }
    }

    /// Wraps already packed bytes. Padding bits past `len_bits` are cleared.
    pub fn from_packed(mut bytes: Vec<u8>, len_bits: usize) -> Result<Self> {
        let need = len_bits.div_ceil(8);
        if bytes.len() < need {
            return Err(Error::insufficient(format!(
                "{len_bits} bits need {need} bytes, got {}",
                bytes.len()
            )));
        }
        bytes.truncate(need);
        let rem = len_bits % 8;
        if rem != 0 {
            if let Some(last) = bytes.last_mut() {
                *last &= 0xFFu8 << (8 - rem);
            }
        }
        Ok(Self { bytes, len_bits })
    }

    /// Every bit of every byte, MSB-first.
    pub fn from_bytes(bytes: Vec<u8>) -> Self {
        let len_bits = bytes.len() * 8;
        Self { bytes, len_bits }
    }

    /// Parses a string of `'0'`/`'1'` characters; whitespace is ignored.
    pub fn from_ascii(s: &str) -> Result<Self> {
        let mut out = BitStream::with_capacity(s.len());
        for c in s.chars() {
            match c {
                '0' => out.push(false),
                '1' => out.push(true),
                c if c.is_whitespace() => {}
                other => return Err(Error::invalid(format!("not a bit: {other:?}"))),
            }
        }
        Ok(out)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len_bits
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len_bits == 0
    }

    #[inline]
    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }

    #[inline]
    pub fn push(&mut self, bit: bool) {
        let off = self.len_bits % 8;
        if off == 0 {
            self.bytes.push(0);
        }
        if bit {
            *self.bytes.last_mut().unwrap() |= 0x80 >> off;
        }
        self.len_bits += 1;
    }

    /// Appends the low `count` bits of `value`, most significant first.
    pub fn push_bits(&mut self, value: u64, count: u32) {
        debug_assert!(count <= 64);
        for i in (0..count).rev() {
            self.push((value >> i) & 1 == 1);
        }
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len_bits, "bit index {i} out of range");
        (self.bytes[i / 8] >> (7 - i % 8)) & 1 == 1
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len_bits).map(move |i| (self.bytes[i / 8] >> (7 - i % 8)) & 1 == 1)
    }

    pub fn count_ones(&self) -> u64 {
        // padding bits are zero
        self.bytes.iter().map(|b| b.count_ones() as u64).sum()
    }

    /// One `u8` per bit (0 or 1).
    pub fn to_unpacked(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.len_bits);
        for &b in &self.bytes {
            for s in (0..8).rev() {
                out.push((b >> s) & 1);
            }
        }
        out.truncate(self.len_bits);
        out
    }

    pub fn from_unpacked(bits: &[u8]) -> Self {
        let mut bytes = vec![0u8; bits.len().div_ceil(8)];
        for (i, &b) in bits.iter().enumerate() {
            if b != 0 {
                bytes[i / 8] |= 0x80 >> (i % 8);
            }
        }
        Self {
            bytes,
            len_bits: bits.len(),
        }
    }

    /// Copies `len` bits starting at `start`.
    pub fn slice(&self, start: usize, len: usize) -> BitStream {
        assert!(start + len <= self.len_bits, "slice out of range");
        if start.is_multiple_of(8) {
            let b = self.bytes[start / 8..(start + len).div_ceil(8)].to_vec();
            return BitStream::from_packed(b, len).expect("length checked");
        }
        let mut out = BitStream::with_capacity(len);
        for i in start..start + len {
            out.push(self.get(i));
        }
        out
    }

    /// Reads `width <= 32` bits starting at bit `pos`, MSB-first.
    #[inline]
    pub fn read_bits(&self, pos: usize, width: u32) -> u32 {
        debug_assert!(width <= 32 && pos + width as usize <= self.len_bits);
        let first = pos / 8;
        let mut acc: u64 = 0;
        for k in 0..5 {
            acc = (acc << 8) | *self.bytes.get(first + k).unwrap_or(&0) as u64;
        }
        let shift = 40 - (pos % 8) as u32 - width;
        ((acc >> shift) & ((1u64 << width) - 1)) as u32
    }
}

impl std::fmt::Debug for BitStream {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BitStream")
            .field("len_bits", &self.len_bits)
            .field("ones", &self.count_ones())
            .finish()
    }
}

impl FromIterator<bool> for BitStream {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        let mut out = BitStream::new();
        for b in iter {
            out.push(b);
        }
        out
    }
}
