//! Packed bitstrings.
//!
//! One representation serves every bit-level object in the crate: nonces,
//! keys, hash inputs/outputs, Toeplitz strips, and survivor bitsets. Bit
//! order is little-endian throughout: bit `i` is stored at
//! `words[i / 64] >> (i % 64) & 1`, and byte dumps place bit `i` at
//! `byte[i / 8]` bit `i % 8`. Hex rendering is numeric (bit `i` weighs
//! `2^i`), zero-padded to `ceil(len / 4)` digits, most significant first.

use crate::rng::Rng;

/// A fixed-length string of bits packed into 64-bit words.
///
/// All bits beyond `len` are kept zero so equality, hashing and popcounts
/// work directly on the word representation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Bits {
    words: Vec<u64>,
    len: usize,
}

fn words_for(len: usize) -> usize {
    len.div_ceil(64)
}

impl Bits {
    /// All-zero string of `len` bits.
    pub fn zeros(len: usize) -> Self {
        Bits { words: vec![0; words_for(len)], len }
    }

    /// The low `len` bits of `value` (`len` <= 64).
    pub fn from_u64(value: u64, len: usize) -> Self {
        assert!(len <= 64, "from_u64 takes at most 64 bits");
        let mut b = Bits::zeros(len);
        if len > 0 {
            b.words[0] = value & mask_low(len);
        }
        b
    }

    /// Uniformly random string of `len` bits.
    pub fn random(rng: &mut Rng, len: usize) -> Self {
        let mut b = Bits::zeros(len);
        for w in b.words.iter_mut() {
            *w = rng.next_u64();
        }
        b.mask_tail();
        b
    }

    pub fn from_bools(bools: &[bool]) -> Self {
        let mut b = Bits::zeros(bools.len());
        for (i, &v) in bools.iter().enumerate() {
            b.set(i, v);
        }
        b
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range (len {})", self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit index {i} out of range (len {})", self.len);
        let (w, s) = (i / 64, i % 64);
        if value {
            self.words[w] |= 1u64 << s;
        } else {
            self.words[w] &= !(1u64 << s);
        }
    }

    /// Backing words; bits beyond `len` are zero.
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Numeric value of the string (`len` <= 64).
    pub fn as_u64(&self) -> u64 {
        assert!(self.len <= 64, "as_u64 requires at most 64 bits");
        self.words.first().copied().unwrap_or(0)
    }

    /// `self || other` (self occupies the low positions).
    pub fn concat(&self, other: &Bits) -> Bits {
        let mut out = Bits::zeros(self.len + other.len);
        out.words[..self.words.len()].copy_from_slice(&self.words);
        out.overwrite(self.len, other);
        out
    }

    /// Bitwise xor; lengths must match.
    pub fn xor(&self, other: &Bits) -> Bits {
        assert_eq!(self.len, other.len, "xor length mismatch");
        let mut out = self.clone();
        for (w, o) in out.words.iter_mut().zip(&other.words) {
            *w ^= o;
        }
        out
    }

    /// In-place bitwise and; lengths must match.
    pub fn and_assign(&mut self, other: &Bits) {
        assert_eq!(self.len, other.len, "and length mismatch");
        for (w, o) in self.words.iter_mut().zip(&other.words) {
            *w &= o;
        }
    }

    /// Overwrite `width` <= 64 bits starting at `offset` with the low bits of `value`.
    pub fn set_range_u64(&mut self, offset: usize, width: usize, value: u64) {
        assert!(width <= 64 && offset + width <= self.len, "range out of bounds");
        if width == 0 {
            return;
        }
        let value = value & mask_low(width);
        let (w, s) = (offset / 64, offset % 64);
        self.words[w] = (self.words[w] & !(mask_low(width) << s)) | (value << s);
        let spill = (s + width).saturating_sub(64);
        if spill > 0 {
            let hi = value >> (width - spill);
            self.words[w + 1] = (self.words[w + 1] & !mask_low(spill)) | hi;
        }
    }

    /// Overwrite bits starting at `offset` with the contents of `src`.
    pub fn overwrite(&mut self, offset: usize, src: &Bits) {
        assert!(offset + src.len <= self.len, "overwrite out of bounds");
        let mut done = 0;
        while done < src.len {
            let chunk = (src.len - done).min(64);
            let value = src.read_range_u64(done, chunk);
            self.set_range_u64(offset + done, chunk, value);
            done += chunk;
        }
    }

    /// Read `width` <= 64 bits starting at `offset`.
    pub fn read_range_u64(&self, offset: usize, width: usize) -> u64 {
        assert!(width <= 64 && offset + width <= self.len, "range out of bounds");
        if width == 0 {
            return 0;
        }
        let (w, s) = (offset / 64, offset % 64);
        let mut value = self.words[w] >> s;
        let taken = 64 - s;
        if taken < width {
            value |= self.words[w + 1] << taken;
        }
        value & mask_low(width)
    }

    /// Bytes in little-endian bit order (bit `i` at `byte[i / 8]` bit `i % 8`);
    /// trailing bits of the last byte are zero.
    pub fn to_bytes_le(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.len.div_ceil(8)];
        for (i, byte) in out.iter_mut().enumerate() {
            let width = (self.len - i * 8).min(8);
            *byte = self.read_range_u64(i * 8, width) as u8;
        }
        out
    }

    /// Inverse of [`Bits::to_bytes_le`]; excess bits in `bytes` must be zero.
    pub fn from_bytes_le(len: usize, bytes: &[u8]) -> Option<Bits> {
        if bytes.len() != len.div_ceil(8) {
            return None;
        }
        let mut b = Bits::zeros(len);
        for (i, &byte) in bytes.iter().enumerate() {
            let width = (len - i * 8).min(8);
            if width < 8 && byte >> width != 0 {
                return None;
            }
            b.set_range_u64(i * 8, width, byte as u64);
        }
        Some(b)
    }

    /// Numeric hex rendering, most significant nibble first.
    pub fn to_hex(&self) -> String {
        let nibbles = self.len.div_ceil(4);
        let mut s = String::with_capacity(nibbles);
        for n in (0..nibbles).rev() {
            let width = (self.len - n * 4).min(4);
            let v = self.read_range_u64(n * 4, width);
            s.push(char::from_digit(v as u32, 16).unwrap());
        }
        s
    }

    /// Inverse of [`Bits::to_hex`] for a known bit length.
    pub fn from_hex(len: usize, hex: &str) -> Option<Bits> {
        if hex.len() != len.div_ceil(4) {
            return None;
        }
        let mut b = Bits::zeros(len);
        for (n, c) in hex.chars().rev().enumerate() {
            let v = c.to_digit(16)? as u64;
            let width = (len - n * 4).min(4);
            if v >> width != 0 {
                return None;
            }
            b.set_range_u64(n * 4, width, v);
        }
        Some(b)
    }

    fn mask_tail(&mut self) {
        let tail = self.len % 64;
        if tail != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= mask_low(tail);
            }
        }
    }
}

fn mask_low(n: usize) -> u64 {
    debug_assert!((1..=64).contains(&n));
    u64::MAX >> (64 - n)
}

impl std::fmt::Display for Bits {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.to_hex())
    }
}
