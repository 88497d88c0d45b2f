//! Byte transports and the framed stream wrapper.
//!
//! Endpoints speak frames over anything `Read + Write` — loopback TCP in
//! deployment, an in-memory duplex pipe in tests. [`FrameStream`] adds the
//! honest-receiver guarantee: a qubit token id is accepted at most once per
//! connection; the adversary's proxy reads raw frames instead because she is
//! allowed to delay and re-order tokens.

use std::collections::HashSet;
use std::collections::VecDeque;
use std::io::{Read, Write};
use std::sync::{Arc, Condvar, Mutex};

use crate::frame::{decode_body, encode_frame, WireError, WireMessage, WireResult, MAX_FRAME_LEN};

struct PipeState {
    buf: VecDeque<u8>,
    closed: bool,
}

struct PipeShared {
    state: Mutex<PipeState>,
    cond: Condvar,
}

impl PipeShared {
    fn new() -> Arc<PipeShared> {
        Arc::new(PipeShared {
            state: Mutex::new(PipeState { buf: VecDeque::new(), closed: false }),
            cond: Condvar::new(),
        })
    }

    fn close(&self) {
        self.state.lock().unwrap().closed = true;
        self.cond.notify_all();
    }
}

/// Receiving half of one pipe direction. Dropping it breaks the peer's writes.
pub struct PipeReader {
    shared: Arc<PipeShared>,
}

/// Sending half of one pipe direction. Dropping it is EOF for the peer.
pub struct PipeWriter {
    shared: Arc<PipeShared>,
}

impl Read for PipeReader {
    fn read(&mut self, out: &mut [u8]) -> std::io::Result<usize> {
        if out.is_empty() {
            return Ok(0);
        }
        let mut state = self.shared.state.lock().unwrap();
        loop {
            if !state.buf.is_empty() {
                let n = out.len().min(state.buf.len());
                for slot in out.iter_mut().take(n) {
                    *slot = state.buf.pop_front().unwrap();
                }
                return Ok(n);
            }
            if state.closed {
                return Ok(0); // EOF
            }
            state = self.shared.cond.wait(state).unwrap();
        }
    }
}

impl Write for PipeWriter {
    fn write(&mut self, data: &[u8]) -> std::io::Result<usize> {
        let mut state = self.shared.state.lock().unwrap();
        if state.closed {
            return Err(std::io::Error::new(std::io::ErrorKind::BrokenPipe, "peer closed"));
        }
        state.buf.extend(data.iter().copied());
        self.shared.cond.notify_all();
        Ok(data.len())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

impl Drop for PipeReader {
    fn drop(&mut self) {
        self.shared.close();
    }
}

impl Drop for PipeWriter {
    fn drop(&mut self) {
        self.shared.close();
    }
}

/// One end of an in-memory, blocking, bidirectional byte pipe.
pub struct DuplexPipe {
    reader: PipeReader,
    writer: PipeWriter,
}

impl DuplexPipe {
    /// Two connected ends; what one writes the other reads.
    pub fn pair() -> (DuplexPipe, DuplexPipe) {
        let ab = PipeShared::new();
        let ba = PipeShared::new();
        (
            DuplexPipe {
                reader: PipeReader { shared: ba.clone() },
                writer: PipeWriter { shared: ab.clone() },
            },
            DuplexPipe { reader: PipeReader { shared: ab }, writer: PipeWriter { shared: ba } },
        )
    }

    /// Separate halves, for tasks that read and write on different threads.
    pub fn split(self) -> (PipeReader, PipeWriter) {
        (self.reader, self.writer)
    }
}

impl Read for DuplexPipe {
    fn read(&mut self, out: &mut [u8]) -> std::io::Result<usize> {
        self.reader.read(out)
    }
}

impl Write for DuplexPipe {
    fn write(&mut self, data: &[u8]) -> std::io::Result<usize> {
        self.writer.write(data)
    }

    fn flush(&mut self) -> std::io::Result<()> {
        self.writer.flush()
    }
}

/// Write one frame and flush it.
pub fn write_frame(w: &mut impl Write, msg: &WireMessage) -> WireResult<()> {
    w.write_all(&encode_frame(msg))?;
    w.flush()?;
    Ok(())
}

/// Read one frame; `Ok(None)` on clean close at a frame boundary, framing
/// error on a mid-frame close.
pub fn read_frame(r: &mut impl Read) -> WireResult<Option<WireMessage>> {
    let mut header = [0u8; 4];
    if !read_exact_or_eof(r, &mut header)? {
        return Ok(None);
    }
    let len = u32::from_le_bytes(header);
    if len == 0 || len > MAX_FRAME_LEN {
        return Err(WireError::Framing(format!("frame length {len} out of range")));
    }
    let mut body = vec![0u8; len as usize];
    r.read_exact(&mut body).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            WireError::Framing("frame truncated".into())
        } else {
            WireError::Io(e)
        }
    })?;
    Ok(Some(decode_body(body[0], &body[1..])?))
}

/// Fill `buf` completely (true), or report a clean EOF before the first byte
/// (false). EOF mid-buffer is a framing error.
fn read_exact_or_eof(r: &mut impl Read, buf: &mut [u8]) -> WireResult<bool> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => {
                if filled == 0 {
                    return Ok(false);
                }
                return Err(WireError::Framing("connection closed inside a frame header".into()));
            }
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(WireError::Io(e)),
        }
    }
    Ok(true)
}

/// A framed message stream for honest endpoints: enforces that each qubit
/// token id arrives at most once on this connection.
pub struct FrameStream<T> {
    inner: T,
    seen_tokens: HashSet<u32>,
}

impl<T: Read + Write> FrameStream<T> {
    pub fn new(inner: T) -> FrameStream<T> {
        FrameStream { inner, seen_tokens: HashSet::new() }
    }

    pub fn send(&mut self, msg: &WireMessage) -> WireResult<()> {
        write_frame(&mut self.inner, msg)
    }

    /// Receive one frame; `Ok(None)` on clean close at a frame boundary.
    pub fn recv_opt(&mut self) -> WireResult<Option<WireMessage>> {
        let msg = read_frame(&mut self.inner)?;
        if let Some(WireMessage::Qubits { tokens }) = &msg {
            for tok in tokens {
                if !self.seen_tokens.insert(tok.id) {
                    return Err(WireError::DuplicateToken { id: tok.id });
                }
            }
        }
        Ok(msg)
    }

    /// Receive one frame; a closed connection is an error.
    pub fn recv(&mut self) -> WireResult<WireMessage> {
        self.recv_opt()?.ok_or(WireError::ConnectionClosed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::QubitToken;
    use qia_core::qstate::Basis;

    #[test]
    fn pipe_carries_frames_both_ways() {
        let (a, b) = DuplexPipe::pair();
        let mut left = FrameStream::new(a);
        let mut right = FrameStream::new(b);
        left.send(&WireMessage::Result { accept: true }).unwrap();
        assert_eq!(right.recv().unwrap(), WireMessage::Result { accept: true });
        right.send(&WireMessage::Result { accept: false }).unwrap();
        assert_eq!(left.recv().unwrap(), WireMessage::Result { accept: false });
    }

    #[test]
    fn honest_stream_rejects_duplicate_tokens_raw_reader_allows() {
        let qubits = |id| WireMessage::Qubits {
            tokens: vec![QubitToken { id, basis: Basis::Rectilinear, value: true }],
        };
        let (a, b) = DuplexPipe::pair();
        let mut sender = FrameStream::new(a);
        let mut honest = FrameStream::new(b);
        sender.send(&qubits(7)).unwrap();
        sender.send(&qubits(7)).unwrap();
        assert!(honest.recv().is_ok());
        assert!(matches!(honest.recv(), Err(WireError::DuplicateToken { id: 7 })));

        let (c, d) = DuplexPipe::pair();
        let mut sender = FrameStream::new(c);
        let (mut eve_read, _eve_write) = d.split();
        sender.send(&qubits(9)).unwrap();
        sender.send(&qubits(9)).unwrap();
        assert!(read_frame(&mut eve_read).unwrap().is_some());
        assert!(read_frame(&mut eve_read).unwrap().is_some());
    }

    #[test]
    fn dropping_one_end_yields_clean_eof() {
        let (a, b) = DuplexPipe::pair();
        let mut right = FrameStream::new(b);
        {
            let mut left = FrameStream::new(a);
            left.send(&WireMessage::Result { accept: true }).unwrap();
        }
        assert!(right.recv_opt().unwrap().is_some());
        assert!(right.recv_opt().unwrap().is_none());
        assert!(matches!(right.recv(), Err(WireError::ConnectionClosed)));
    }

    #[test]
    fn truncated_header_is_a_framing_error() {
        let (a, b) = DuplexPipe::pair();
        let mut right = FrameStream::new(b);
        {
            let mut raw = a;
            raw.write_all(&[3, 0]).unwrap(); // half a length header
        }
        assert!(matches!(right.recv(), Err(WireError::Framing(_))));
    }
}
