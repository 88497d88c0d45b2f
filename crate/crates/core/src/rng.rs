//! Deterministic, splittable random streams.
//!
//! Every random choice in the simulator is drawn from an [`Rng`] stream that is
//! a pure function of a 64-bit root seed plus a chain of stream labels, so a
//! whole experiment — including multi-process wire runs — replays bit-identically
//! from its `--seed`. The generator is SplitMix64: the state advances by the
//! golden-ratio increment and each output is the finalizer mix of the state.

/// Golden-ratio increment used by SplitMix64.
const GAMMA: u64 = 0x9E3779B97F4A7C15;

/// SplitMix64 finalizer: bijective, full-avalanche 64-bit mix.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Seed of the stream obtained by splitting `root` with `label`.
///
/// Splitting is how per-trial and per-party streams are derived: the root seed
/// is mixed, xored with the independently mixed label, and mixed again, so
/// nearby roots or nearby labels still land on unrelated streams.
pub fn substream_seed(root: u64, label: u64) -> u64 {
    mix64(mix64(root).wrapping_add(GAMMA) ^ mix64(label ^ 0xA5A5_A5A5_5A5A_5A5A))
}

/// A deterministic pseudo-random stream (SplitMix64).
///
/// Identical seeds yield identical output streams. Streams are cheap values;
/// each logical actor (a party in a session, a trial worker) owns its own.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rng {
    state: u64,
}

impl Rng {
    /// Stream rooted directly at `seed`.
    pub fn new(seed: u64) -> Self {
        Rng { state: mix64(seed) }
    }

    /// Stream derived from `root` and a `label`; see [`substream_seed`].
    pub fn stream(root: u64, label: u64) -> Self {
        Rng::new(substream_seed(root, label))
    }

    /// Split a child stream off this one without disturbing this stream.
    pub fn split(&self, label: u64) -> Self {
        Rng::stream(self.state, label)
    }

    /// Next 64 uniform bits.
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        mix64(self.state)
    }

    /// Next uniform bit.
    pub fn next_bool(&mut self) -> bool {
        self.next_u64() & 1 == 1
    }

    /// Next uniform f64 in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
}

/// Stream labels fixed by the protocol so that in-process and wire executions
/// consume randomness identically.
pub mod labels {
    /// Alice (prover) coins: decoy interleaving, decoy state preparation,
    /// and nonce/hash sampling in the Alice-generates-nonce variant.
    pub const ALICE: u64 = 0xA1;
    /// Bob (verifier) coins: nonce/hash sampling and measurement outcomes.
    pub const BOB: u64 = 0xB0;
    /// Eve coins: interception basis choices and measurement outcomes.
    pub const EVE: u64 = 0xE5;
    /// Key material derivation for CLI parties that share a seed.
    pub const KEY: u64 = 0x4B;
}
