//! Length-prefixed binary framing.
//!
//! Frame layout, bit-exact:
//!
//! ```text
//! [length: u32 LE = 1 + payload length][msg_type: u8][payload]
//! ```
//!
//! Message types: `0x01` CHALLENGE, `0x02` QUBITS, `0x03` MODE_ANNOUNCE,
//! `0x04` RESULT, `0x05` NONCE_HASH_FROM_ALICE. All integers little-endian;
//! bitstrings travel as a `u32` bit length followed by packed bytes in
//! little-endian bit order. Hash functions travel as `(seed, in_len, d)` —
//! receivers re-derive the matrix, which is what makes `H` public.
//!
//! Decoding is strict: unknown message types, length mismatches, trailing
//! payload bytes and non-zero reserved bits are all framing errors.

use qia_core::bits::Bits;
use qia_core::hashfam::HashDescriptor;
use qia_core::qstate::Basis;

/// Wire-layer failures.
#[derive(Debug, thiserror::Error)]
pub enum WireError {
    #[error("framing error: {0}")]
    Framing(String),
    #[error("duplicate qubit token {id}: single-consumption contract violated")]
    DuplicateToken { id: u32 },
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("connection closed mid-session")]
    ConnectionClosed,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Core(#[from] qia_core::Error),
}

pub type WireResult<T> = std::result::Result<T, WireError>;

pub const MSG_CHALLENGE: u8 = 0x01;
pub const MSG_QUBITS: u8 = 0x02;
pub const MSG_MODE_ANNOUNCE: u8 = 0x03;
pub const MSG_RESULT: u8 = 0x04;
pub const MSG_NONCE_HASH_FROM_ALICE: u8 = 0x05;

/// Frames larger than this are rejected outright.
pub const MAX_FRAME_LEN: u32 = 1 << 20;

/// A serialized qubit plus its session-unique token id. Honest endpoints
/// accept each id at most once — the wire form of the linear-use contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QubitToken {
    pub id: u32,
    pub basis: Basis,
    pub value: bool,
}

/// MODE_ANNOUNCE payload discriminant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnnounceKind {
    /// Receiver -> sender: transmission received.
    Ack,
    /// Sender -> receiver: the transmission was a decoy.
    Security,
    /// Sender -> receiver: the transmission carried tag bits.
    Authentication,
}

impl AnnounceKind {
    fn to_byte(self) -> u8 {
        match self {
            AnnounceKind::Ack => 0,
            AnnounceKind::Security => 1,
            AnnounceKind::Authentication => 2,
        }
    }

    fn from_byte(b: u8) -> WireResult<AnnounceKind> {
        match b {
            0 => Ok(AnnounceKind::Ack),
            1 => Ok(AnnounceKind::Security),
            2 => Ok(AnnounceKind::Authentication),
            other => Err(WireError::Framing(format!("unknown announce kind {other}"))),
        }
    }
}

/// Everything that can travel in one frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WireMessage {
    Challenge { nonce: Bits, hash: HashDescriptor },
    Qubits { tokens: Vec<QubitToken> },
    ModeAnnounce { index: u32, kind: AnnounceKind },
    Result { accept: bool },
    NonceHashFromAlice { nonce: Bits, hash: HashDescriptor },
}

fn put_bits(out: &mut Vec<u8>, bits: &Bits) {
    out.extend_from_slice(&(bits.len() as u32).to_le_bytes());
    out.extend_from_slice(&bits.to_bytes_le());
}

fn put_hash(out: &mut Vec<u8>, hash: &HashDescriptor) {
    out.extend_from_slice(&hash.seed.to_le_bytes());
    out.extend_from_slice(&hash.in_len.to_le_bytes());
    out.extend_from_slice(&hash.d.to_le_bytes());
}

/// Strict, exactly-consuming payload reader.
struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(data: &'a [u8]) -> Cursor<'a> {
        Cursor { data, pos: 0 }
    }

    fn take(&mut self, n: usize) -> WireResult<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.data.len());
        match end {
            Some(end) => {
                let s = &self.data[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(WireError::Framing("payload truncated".into())),
        }
    }

    fn u8(&mut self) -> WireResult<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> WireResult<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> WireResult<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn bits(&mut self) -> WireResult<Bits> {
        let len = self.u32()? as usize;
        let bytes = self.take(len.div_ceil(8))?;
        Bits::from_bytes_le(len, bytes)
            .ok_or_else(|| WireError::Framing("bitstring has non-zero padding bits".into()))
    }

    fn hash(&mut self) -> WireResult<HashDescriptor> {
        let seed = self.u64()?;
        let in_len = self.u32()?;
        let d = self.u32()?;
        if in_len == 0 || d == 0 {
            return Err(WireError::Framing("hash descriptor requires in_len, d >= 1".into()));
        }
        Ok(HashDescriptor { seed, in_len, d })
    }

    fn finish(self) -> WireResult<()> {
        if self.pos != self.data.len() {
            return Err(WireError::Framing(format!(
                "{} trailing payload bytes",
                self.data.len() - self.pos
            )));
        }
        Ok(())
    }
}

/// Encode a message as one complete frame (length header included).
pub fn encode_frame(msg: &WireMessage) -> Vec<u8> {
    let (msg_type, payload) = encode_payload(msg);
    let mut out = Vec::with_capacity(5 + payload.len());
    out.extend_from_slice(&(1 + payload.len() as u32).to_le_bytes());
    out.push(msg_type);
    out.extend_from_slice(&payload);
    out
}

fn encode_payload(msg: &WireMessage) -> (u8, Vec<u8>) {
    let mut p = Vec::new();
    let t = match msg {
        WireMessage::Challenge { nonce, hash } => {
            put_bits(&mut p, nonce);
            put_hash(&mut p, hash);
            MSG_CHALLENGE
        }
        WireMessage::Qubits { tokens } => {
            p.extend_from_slice(&(tokens.len() as u32).to_le_bytes());
            for tok in tokens {
                p.extend_from_slice(&tok.id.to_le_bytes());
                p.push(tok.basis.bit() as u8 | (tok.value as u8) << 1);
            }
            MSG_QUBITS
        }
        WireMessage::ModeAnnounce { index, kind } => {
            p.extend_from_slice(&index.to_le_bytes());
            p.push(kind.to_byte());
            MSG_MODE_ANNOUNCE
        }
        WireMessage::Result { accept } => {
            p.push(*accept as u8);
            MSG_RESULT
        }
        WireMessage::NonceHashFromAlice { nonce, hash } => {
            put_bits(&mut p, nonce);
            put_hash(&mut p, hash);
            MSG_NONCE_HASH_FROM_ALICE
        }
    };
    (t, p)
}

/// Decode one complete frame (length header included); the exact inverse of
/// [`encode_frame`].
pub fn decode_frame(bytes: &[u8]) -> WireResult<WireMessage> {
    if bytes.len() < 5 {
        return Err(WireError::Framing("frame shorter than header".into()));
    }
    let declared = u32::from_le_bytes(bytes[..4].try_into().unwrap());
    if declared == 0 || declared > MAX_FRAME_LEN {
        return Err(WireError::Framing(format!("frame length {declared} out of range")));
    }
    if bytes.len() != 4 + declared as usize {
        return Err(WireError::Framing(format!(
            "frame length field {declared} disagrees with {} body bytes",
            bytes.len() - 4
        )));
    }
    decode_body(bytes[4], &bytes[5..])
}

pub(crate) fn decode_body(msg_type: u8, payload: &[u8]) -> WireResult<WireMessage> {
    let mut c = Cursor::new(payload);
    let msg = match msg_type {
        MSG_CHALLENGE => WireMessage::Challenge { nonce: c.bits()?, hash: c.hash()? },
        MSG_NONCE_HASH_FROM_ALICE => {
            WireMessage::NonceHashFromAlice { nonce: c.bits()?, hash: c.hash()? }
        }
        MSG_QUBITS => {
            let count = c.u32()? as usize;
            let mut tokens = Vec::with_capacity(count);
            for _ in 0..count {
                let id = c.u32()?;
                let state = c.u8()?;
                if state & !0b11 != 0 {
                    return Err(WireError::Framing(format!(
                        "qubit state byte {state:#04x} has reserved bits set"
                    )));
                }
                tokens.push(QubitToken {
                    id,
                    basis: Basis::from_bit(state & 1 == 1),
                    value: state >> 1 & 1 == 1,
                });
            }
            WireMessage::Qubits { tokens }
        }
        MSG_MODE_ANNOUNCE => {
            let index = c.u32()?;
            let kind = AnnounceKind::from_byte(c.u8()?)?;
            WireMessage::ModeAnnounce { index, kind }
        }
        MSG_RESULT => match c.u8()? {
            0 => WireMessage::Result { accept: false },
            1 => WireMessage::Result { accept: true },
            other => return Err(WireError::Framing(format!("result byte {other} invalid"))),
        },
        other => return Err(WireError::Framing(format!("unknown msg_type {other:#04x}"))),
    };
    c.finish()?;
    Ok(msg)
}
