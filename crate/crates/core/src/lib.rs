//! Laboratory for a prepare-and-measure quantum identity authentication
//! protocol and its cryptanalysis.
//!
//! The crate simulates honest protocol sessions exactly (the four
//! conjugate-coding states admit a bit-exact model), runs three adversary
//! strategies against them — intercept-measure key-space reduction,
//! quantum-memory replay, and live man-in-the-middle relay — and packages
//! Monte Carlo experiments that measure acceptance rates and key-space
//! survival fractions against their closed-form expectations.
//!
//! Module map:
//!
//! * [`qstate`] — conjugate-coding states, embedding, measurement with collapse.
//! * [`hashfam`] — affine Toeplitz 2-universal hashing and nonces.
//! * [`protocol`] — party state machines, session orchestration, transcripts.
//! * [`adversary`] — interception, elimination, likelihood scoring, replay.
//! * [`keyspace`] — candidate enumeration and survivor bitsets.
//! * [`experiment`] — seeded Monte Carlo drivers and JSON/CSV reports.
//! * [`rng`], [`bits`], [`stats`] — deterministic streams, packed bitstrings,
//!   and aggregate helpers underneath it all.

pub mod adversary;
pub mod bits;
pub mod error;
pub mod experiment;
pub mod hashfam;
pub mod keyspace;
pub mod protocol;
pub mod qstate;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
