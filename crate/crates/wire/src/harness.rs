//! Whole-session harnesses: run prover, verifier and optional proxy on
//! separate threads over in-memory pipes or loopback TCP, and reassemble the
//! canonical transcript.

use std::net::{TcpListener, TcpStream};

use qia_core::adversary::AdversaryStrategy;
use qia_core::keyspace::Key;
use qia_core::protocol::{SessionParams, SessionStreams, Transcript};

use crate::endpoint::{
    merge_transcript, run_prover, run_proxy, run_verifier, ProverView, ProxyView, VerifierView,
};
use crate::frame::{WireError, WireResult};
use crate::transport::DuplexPipe;

/// Everything a finished wire session yields.
#[derive(Debug)]
pub struct WireSessionOutput {
    pub transcript: Transcript,
    pub prover: ProverView,
    pub verifier: VerifierView,
    pub proxy: Option<ProxyView>,
}

fn assemble(
    params: &SessionParams,
    session_id: u64,
    prover: WireResult<ProverView>,
    verifier: WireResult<VerifierView>,
    proxy: Option<WireResult<ProxyView>>,
) -> WireResult<WireSessionOutput> {
    let verifier = verifier?;
    let prover = prover?;
    let proxy = proxy.transpose()?;
    let transcript = merge_transcript(params, session_id, &prover, &verifier, proxy.as_ref());
    Ok(WireSessionOutput { transcript, prover, verifier, proxy })
}

/// One full session over in-memory pipes.
pub fn run_duplex_session(
    alice_key: &Key,
    bob_key: &Key,
    params: &SessionParams,
    strategy: Option<&AdversaryStrategy>,
    session_root: u64,
    session_id: u64,
) -> WireResult<WireSessionOutput> {
    let streams = SessionStreams::derive(session_root);
    match strategy {
        None => {
            let (alice_end, bob_end) = DuplexPipe::pair();
            std::thread::scope(|scope| {
                let prover =
                    scope.spawn(|| run_prover(alice_end, alice_key, params, streams.alice));
                let verifier =
                    scope.spawn(|| run_verifier(bob_end, bob_key, params, streams.bob));
                let prover = prover.join().expect("prover thread panicked");
                let verifier = verifier.join().expect("verifier thread panicked");
                assemble(params, session_id, prover, verifier, None)
            })
        }
        Some(strategy) => {
            let (alice_end, eve_alice_end) = DuplexPipe::pair();
            let (eve_bob_end, bob_end) = DuplexPipe::pair();
            std::thread::scope(|scope| {
                let prover =
                    scope.spawn(|| run_prover(alice_end, alice_key, params, streams.alice));
                let verifier =
                    scope.spawn(|| run_verifier(bob_end, bob_key, params, streams.bob));
                let proxy = scope.spawn(|| {
                    let (from_prover, to_prover) = eve_alice_end.split();
                    let (from_verifier, to_verifier) = eve_bob_end.split();
                    run_proxy(from_prover, to_prover, from_verifier, to_verifier, strategy, streams.eve)
                });
                let prover = prover.join().expect("prover thread panicked");
                let verifier = verifier.join().expect("verifier thread panicked");
                let proxy = proxy.join().expect("proxy thread panicked");
                assemble(params, session_id, prover, verifier, Some(proxy))
            })
        }
    }
}

/// One full session over loopback TCP, with the proxy as a real interposed
/// listener when a strategy is given.
pub fn run_tcp_session(
    alice_key: &Key,
    bob_key: &Key,
    params: &SessionParams,
    strategy: Option<&AdversaryStrategy>,
    session_root: u64,
    session_id: u64,
) -> WireResult<WireSessionOutput> {
    let streams = SessionStreams::derive(session_root);
    let bob_listener = TcpListener::bind("127.0.0.1:0")?;
    let bob_addr = bob_listener.local_addr()?;

    match strategy {
        None => std::thread::scope(|scope| {
            let verifier = scope.spawn(|| {
                let (conn, _) = bob_listener.accept()?;
                run_verifier(conn, bob_key, params, streams.bob)
            });
            let prover = scope.spawn(|| {
                let conn = TcpStream::connect(bob_addr)?;
                run_prover(conn, alice_key, params, streams.alice)
            });
            let prover = prover.join().expect("prover thread panicked");
            let verifier = verifier.join().expect("verifier thread panicked");
            assemble(params, session_id, prover, verifier, None)
        }),
        Some(strategy) => {
            let eve_listener = TcpListener::bind("127.0.0.1:0")?;
            let eve_addr = eve_listener.local_addr()?;
            std::thread::scope(|scope| {
                let verifier = scope.spawn(|| {
                    let (conn, _) = bob_listener.accept()?;
                    run_verifier(conn, bob_key, params, streams.bob)
                });
                let proxy = scope.spawn(move || -> WireResult<ProxyView> {
                    let (alice_conn, _) = eve_listener.accept()?;
                    let bob_conn = TcpStream::connect(bob_addr)?;
                    let from_prover = alice_conn.try_clone()?;
                    let from_verifier = bob_conn.try_clone()?;
                    run_proxy(from_prover, alice_conn, from_verifier, bob_conn, strategy, streams.eve)
                });
                let prover = scope.spawn(|| {
                    let conn = TcpStream::connect(eve_addr)?;
                    run_prover(conn, alice_key, params, streams.alice)
                });
                let prover = prover.join().expect("prover thread panicked");
                let verifier = verifier.join().expect("verifier thread panicked");
                let proxy = proxy.join().expect("proxy thread panicked");
                assemble(params, session_id, prover, verifier, Some(proxy))
            })
        }
    }
}

impl From<std::net::AddrParseError> for WireError {
    fn from(e: std::net::AddrParseError) -> WireError {
        WireError::Protocol(format!("bad address: {e}"))
    }
}
