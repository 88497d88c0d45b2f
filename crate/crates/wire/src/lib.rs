//! Framed wire protocol for running the authentication parties as separate
//! processes, with the adversary as a real interposing proxy.
//!
//! One byte stream carries both channels: classical messages and qubit
//! transmissions are distinguished by frame type, and the quantum channel's
//! no-cloning contract survives process boundaries through single-consumption
//! token ids enforced at honest endpoints. A wire session with the same root
//! seed replays the matching in-process session event for event.

pub mod endpoint;
pub mod frame;
pub mod harness;
pub mod transport;

pub use endpoint::{merge_transcript, run_prover, run_proxy, run_verifier, ProverView, ProxyView, VerifierView};
pub use frame::{decode_frame, encode_frame, AnnounceKind, QubitToken, WireError, WireMessage, WireResult};
pub use harness::{run_duplex_session, run_tcp_session, WireSessionOutput};
pub use transport::{read_frame, write_frame, DuplexPipe, FrameStream, PipeReader, PipeWriter};
