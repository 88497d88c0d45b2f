//! Exact simulation of the four conjugate-coding states.
//!
//! Every state this protocol family ever prepares or produces is one of
//! |0>, |1>, |+>, |->, so a state is represented exactly by its preparation
//! pair (basis, value) and measurement statistics are exact without any
//! floating-point amplitudes: measuring in the preparation basis returns the
//! value deterministically, measuring in the conjugate basis returns a fair
//! coin and collapses the state onto the measured pair.
//!
//! No-cloning is modeled as a linear-use contract: a measured record is
//! marked consumed and any further interaction with it is a hard error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Measurement/preparation basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    /// Horizontal/vertical; encoded by basis bit 0.
    #[serde(rename = "rectilinear")]
    Rectilinear,
    /// Diagonal/antidiagonal; encoded by basis bit 1.
    #[serde(rename = "diagonal")]
    Diagonal,
}

impl Basis {
    pub fn from_bit(bit: bool) -> Basis {
        if bit { Basis::Diagonal } else { Basis::Rectilinear }
    }

    pub fn bit(self) -> bool {
        self == Basis::Diagonal
    }
}

/// One conjugate-coding qubit with its linear-use flag.
#[derive(Debug)]
pub struct Qubit {
    basis: Basis,
    value: bool,
    consumed: bool,
}

/// Result of a projective measurement: the classical outcome plus the fresh
/// post-measurement state left on the channel.
#[derive(Debug)]
pub struct Measurement {
    pub outcome: bool,
    pub post_state: Qubit,
}

/// The embedding `Q`: basis bit and value bit to one of the four states.
///
/// `(0,0)` is |0>, `(0,1)` is |1>, `(1,0)` is |+>, `(1,1)` is |->.
pub fn embed(basis_bit: bool, value_bit: bool) -> Qubit {
    Qubit {
        basis: Basis::from_bit(basis_bit),
        value: value_bit,
        consumed: false,
    }
}

/// One of the four states uniformly at random (decoy preparation).
/// Consumes exactly one `u64` from the stream.
pub fn random_qubit(rng: &mut Rng) -> Qubit {
    let w = rng.next_u64();
    embed(w & 1 == 1, w >> 1 & 1 == 1)
}

impl Qubit {
    /// Preparation pair of a live record.
    pub fn observe(&self) -> Result<(Basis, bool)> {
        if self.consumed {
            return Err(Error::QubitConsumed);
        }
        Ok((self.basis, self.value))
    }

    pub fn is_consumed(&self) -> bool {
        self.consumed
    }

    /// Projective measurement with collapse.
    ///
    /// Same-basis measurement returns the stored value and draws nothing from
    /// `rng`; cross-basis measurement draws one fair bit. The record becomes
    /// consumed; the returned post-state is a fresh record prepared as
    /// (measured basis, outcome).
    pub fn measure(&mut self, basis: Basis, rng: &mut Rng) -> Result<Measurement> {
        if self.consumed {
            return Err(Error::QubitConsumed);
        }
        self.consumed = true;
        let outcome = if basis == self.basis {
            self.value
        } else {
            rng.next_bool()
        };
        Ok(Measurement {
            outcome,
            post_state: Qubit { basis, value: outcome, consumed: false },
        })
    }
}

impl std::fmt::Display for Qubit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let ket = match (self.basis, self.value) {
            (Basis::Rectilinear, false) => "|0>",
            (Basis::Rectilinear, true) => "|1>",
            (Basis::Diagonal, false) => "|+>",
            (Basis::Diagonal, true) => "|->",
        };
        write!(f, "{ket}")
    }
}
