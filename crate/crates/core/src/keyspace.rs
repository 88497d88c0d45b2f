//! Candidate key spaces and survivor sets.
//!
//! The adversary's exhaustive loops run over a [`KeySpace`]; the keys still
//! consistent with her observations form a [`SurvivorSet`] backed by a packed
//! bitset (one bit per candidate, so `key_len = 24` costs 2 MiB). Exhaustive
//! spaces enumerate in ascending numeric order; candidate index `i` is the key
//! whose bits are the binary digits of `i` (bit `j` of the key is bit `j` of
//! `i`).

use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Default refusal threshold for exhaustive enumeration (2^24 candidates).
pub const DEFAULT_ENUMERATION_CAP: usize = 24;

/// A secret key: a fixed-length bitstring.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Key {
    bits: Bits,
}

impl Key {
    pub fn from_bits(bits: Bits) -> Key {
        Key { bits }
    }

    /// Key of `len` <= 64 bits whose numeric value is `value`.
    pub fn from_value(value: u64, len: usize) -> Key {
        Key { bits: Bits::from_u64(value, len) }
    }

    pub fn random(rng: &mut Rng, len: usize) -> Key {
        Key { bits: Bits::random(rng, len) }
    }

    pub fn bits(&self) -> &Bits {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn value(&self) -> u64 {
        self.bits.as_u64()
    }

    pub fn to_hex(&self) -> String {
        self.bits.to_hex()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Kind {
    Exhaustive,
    ExplicitList(Vec<Key>),
}

/// The space K of candidate keys.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeySpace {
    key_len: usize,
    kind: Kind,
    cap: usize,
}

impl KeySpace {
    /// All `2^key_len` keys, with the default enumeration cap.
    pub fn exhaustive(key_len: usize) -> KeySpace {
        KeySpace::exhaustive_with_cap(key_len, DEFAULT_ENUMERATION_CAP)
    }

    /// All `2^key_len` keys with an explicit cap (set from `QIA_KEYLEN_CAP`
    /// by the CLI). The cap is checked when enumeration begins, not here.
    pub fn exhaustive_with_cap(key_len: usize, cap: usize) -> KeySpace {
        assert!((1..=63).contains(&key_len), "exhaustive key_len must be in 1..=63");
        KeySpace { key_len, kind: Kind::Exhaustive, cap }
    }

    /// A dictionary of candidate keys; all must share one length and be distinct.
    pub fn explicit(keys: Vec<Key>) -> Result<KeySpace> {
        let key_len = keys.first().map(|k| k.len()).unwrap_or(0);
        let mut seen = std::collections::HashSet::new();
        for k in &keys {
            if k.len() != key_len {
                return Err(Error::InvalidParams("explicit key list mixes key lengths".into()));
            }
            if !seen.insert(k.clone()) {
                return Err(Error::InvalidParams("explicit key list contains duplicates".into()));
            }
        }
        Ok(KeySpace { key_len, kind: Kind::ExplicitList(keys), cap: DEFAULT_ENUMERATION_CAP })
    }

    pub fn key_len(&self) -> usize {
        self.key_len
    }

    pub fn is_exhaustive(&self) -> bool {
        self.kind == Kind::Exhaustive
    }

    /// |K|.
    pub fn member_count(&self) -> u64 {
        match &self.kind {
            Kind::Exhaustive => 1u64 << self.key_len,
            Kind::ExplicitList(keys) => keys.len() as u64,
        }
    }

    /// Cap check performed before any exhaustive sweep; refusing here is what
    /// keeps a mistyped `--key-len 56` from looping for months.
    pub fn ensure_enumerable(&self) -> Result<()> {
        if self.kind == Kind::Exhaustive && self.key_len > self.cap {
            return Err(Error::KeyLenCapExceeded { key_len: self.key_len, cap: self.cap });
        }
        Ok(())
    }

    /// Every key exactly once, in stable (ascending numeric / list) order.
    pub fn enumerate(&self) -> Result<impl Iterator<Item = Key> + '_> {
        self.ensure_enumerable()?;
        Ok((0..self.member_count()).map(move |i| self.key_at(i)))
    }

    /// Candidate at enumeration index `i`.
    pub fn key_at(&self, index: u64) -> Key {
        match &self.kind {
            Kind::Exhaustive => Key::from_value(index, self.key_len),
            Kind::ExplicitList(keys) => keys[index as usize].clone(),
        }
    }

    /// Enumeration index of `key`, if it is a member.
    pub fn index_of(&self, key: &Key) -> Option<u64> {
        if key.len() != self.key_len {
            return None;
        }
        match &self.kind {
            Kind::Exhaustive => Some(key.value()),
            Kind::ExplicitList(keys) => keys.iter().position(|k| k == key).map(|p| p as u64),
        }
    }

    /// Write candidate `index` into `buf` at `offset` without allocating;
    /// the workhorse of the exhaustive attack loop.
    pub fn fill_candidate(&self, index: u64, offset: usize, buf: &mut Bits) {
        match &self.kind {
            Kind::Exhaustive => buf.set_range_u64(offset, self.key_len, index),
            Kind::ExplicitList(keys) => buf.overwrite(offset, keys[index as usize].bits()),
        }
    }
}

/// The subset S of candidates consistent with an adversary's observations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SurvivorSet {
    parent: KeySpace,
    members: Bits,
}

impl SurvivorSet {
    /// S = K.
    pub fn full(parent: KeySpace) -> SurvivorSet {
        let n = parent.member_count() as usize;
        let mut members = Bits::zeros(n);
        for i in 0..n {
            members.set(i, true);
        }
        SurvivorSet { parent, members }
    }

    /// Build from a membership bitset indexed by enumeration order.
    pub fn from_members(parent: KeySpace, members: Bits) -> SurvivorSet {
        assert_eq!(members.len() as u64, parent.member_count(), "bitset shape");
        SurvivorSet { parent, members }
    }

    pub fn parent(&self) -> &KeySpace {
        &self.parent
    }

    pub fn survivor_count(&self) -> usize {
        self.members.count_ones()
    }

    pub fn contains_index(&self, index: u64) -> bool {
        self.members.get(index as usize)
    }

    pub fn contains(&self, key: &Key) -> bool {
        self.parent.index_of(key).is_some_and(|i| self.contains_index(i))
    }

    /// |S| / |K|.
    pub fn survival_fraction(&self) -> Result<f64> {
        let total = self.parent.member_count();
        if total == 0 {
            return Err(Error::EmptyKeySpace);
        }
        Ok(self.survivor_count() as f64 / total as f64)
    }

    /// Survivor fraction over the |K| - 1 candidates other than `true_key`;
    /// its expectation under the elimination attack is exactly (3/4)^d.
    pub fn nontrue_survival_fraction(&self, true_key: &Key) -> Result<f64> {
        let total = self.parent.member_count();
        if total < 2 {
            return Err(Error::EmptyKeySpace);
        }
        let true_in = self.contains(true_key) as usize;
        Ok((self.survivor_count() - true_in) as f64 / (total - 1) as f64)
    }

    /// Set intersection; both sets must share one key space.
    pub fn intersect(&self, other: &SurvivorSet) -> Result<SurvivorSet> {
        if self.parent != other.parent {
            return Err(Error::KeySpaceMismatch);
        }
        let mut members = self.members.clone();
        members.and_assign(&other.members);
        Ok(SurvivorSet { parent: self.parent.clone(), members })
    }

    /// Surviving keys in enumeration order.
    pub fn keys(&self) -> impl Iterator<Item = Key> + '_ {
        (0..self.parent.member_count())
            .filter(|&i| self.contains_index(i))
            .map(|i| self.parent.key_at(i))
    }

    /// Surviving keys as sorted hex strings (the JSON export payload).
    pub fn member_hex_list(&self) -> Vec<String> {
        self.keys().map(|k| k.to_hex()).collect()
    }

    /// JSON export: `{"key_len": .., "survivors": [..hex..]}`.
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "key_len": self.parent.key_len(),
            "survivors": self.member_hex_list(),
        })
        .to_string()
    }

    /// Binary dump: 8-byte little-endian candidate count, then the membership
    /// bitset in little-endian bit order (candidate `i` at byte `i / 8`,
    /// bit `i % 8`).
    pub fn to_bitset_dump(&self) -> Vec<u8> {
        let mut out = (self.members.len() as u64).to_le_bytes().to_vec();
        out.extend_from_slice(&self.members.to_bytes_le());
        out
    }

    /// Inverse of [`SurvivorSet::to_bitset_dump`] over a known parent.
    pub fn from_bitset_dump(parent: KeySpace, dump: &[u8]) -> Option<SurvivorSet> {
        let header: [u8; 8] = dump.get(..8)?.try_into().ok()?;
        let len = u64::from_le_bytes(header);
        if len != parent.member_count() {
            return None;
        }
        let members = Bits::from_bytes_le(len as usize, dump.get(8..)?)?;
        Some(SurvivorSet { parent, members })
    }
}
