//! Party endpoints: prover, verifier and the interposing proxy, each driving
//! one framed connection.
//!
//! Endpoints reuse the in-process protocol building blocks and draw from the
//! same labeled party streams, so a wire session replays an in-process
//! session exactly; [`merge_transcript`] reassembles the canonical transcript
//! from the three parties' views. Wire endpoints always measure all `d`
//! qubits (short-circuit mode is an in-process experiment feature and is
//! rejected here).

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use qia_core::adversary::{AdversaryStrategy, Observation};
use qia_core::hashfam::{HashDescriptor, HashFunction, Nonce};
use qia_core::keyspace::Key;
use qia_core::protocol::{
    alice_challenge, alice_respond, bob_challenge, hash_tag, hong_mode_flow, measure_decoy,
    verify_one, verify_tag_qubits, AdversaryAction, ClassicalMessage, GroundTruth,
    HongTransmission, Outcome, QuantumEvent, SessionParams, Transcript, TransmissionMode, Variant,
};
use qia_core::qstate::{embed, Basis, Qubit};
use qia_core::rng::Rng;

use crate::frame::{AnnounceKind, QubitToken, WireError, WireMessage, WireResult};
use crate::transport::{read_frame, write_frame, FrameStream};

/// The prover's record of a session: what she prepared and saw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProverView {
    pub classical_messages: Vec<ClassicalMessage>,
    pub prepared: Vec<PreparedRecord>,
    pub outcome: Option<Outcome>,
}

/// Ground truth of one transmission, in sequence order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreparedRecord {
    pub seq: u32,
    pub mode: TransmissionMode,
    pub auth_index: Option<u32>,
    pub ground_truth: GroundTruth,
}

/// The verifier's record of a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifierView {
    pub nonce_hex: String,
    pub hash_seed: u64,
    pub classical_messages: Vec<ClassicalMessage>,
    pub measured: Vec<MeasuredRecord>,
    pub outcome: Option<Outcome>,
}

/// One verifier measurement, in sequence order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasuredRecord {
    pub seq: u32,
    pub mode: TransmissionMode,
    pub auth_index: Option<u32>,
    pub basis: Basis,
    pub outcome: bool,
}

fn reject_short_circuit(params: &SessionParams) -> WireResult<()> {
    if params.short_circuit {
        return Err(WireError::Protocol(
            "short-circuit measurement is not supported over the wire".into(),
        ));
    }
    Ok(())
}

fn check_challenge_shape(
    params: &SessionParams,
    nonce: &qia_core::bits::Bits,
    hash: &HashDescriptor,
) -> WireResult<()> {
    if nonce.len() != params.nonce_len
        || hash.in_len as usize != params.hash_in_len()
        || hash.d as usize != params.d
    {
        return Err(WireError::Protocol(format!(
            "challenge shape (nonce {}, in_len {}, d {}) does not match session parameters",
            nonce.len(),
            hash.in_len,
            hash.d
        )));
    }
    Ok(())
}

fn token_for(id: u32, qubit: &Qubit) -> WireResult<QubitToken> {
    let (basis, value) = qubit.observe()?;
    Ok(QubitToken { id, basis, value })
}

/// Run Alice over a connection to the verifier (or to whoever sits between).
pub fn run_prover<T: Read + Write>(
    transport: T,
    key: &Key,
    params: &SessionParams,
    mut rng: Rng,
) -> WireResult<ProverView> {
    params.validate()?;
    reject_short_circuit(params)?;
    let mut stream = FrameStream::new(transport);
    let mut messages = Vec::new();
    let mut prepared = Vec::new();

    let (nonce, hash) = match params.variant {
        Variant::ZawadzkiAliceNonce => {
            let (nonce, hash) = alice_challenge(params, &mut rng)?;
            stream.send(&WireMessage::NonceHashFromAlice {
                nonce: nonce.bits.clone(),
                hash: hash.descriptor(),
            })?;
            messages.push(ClassicalMessage::NonceHashFromAlice {
                nonce_hex: nonce.to_hex(),
                hash: hash.descriptor(),
            });
            (nonce, hash)
        }
        _ => match stream.recv()? {
            WireMessage::Challenge { nonce, hash } => {
                check_challenge_shape(params, &nonce, &hash)?;
                let nonce = Nonce { bits: nonce };
                messages.push(ClassicalMessage::Challenge {
                    nonce_hex: nonce.to_hex(),
                    hash,
                });
                (nonce, hash.realize())
            }
            other => {
                return Err(WireError::Protocol(format!("expected CHALLENGE, got {other:?}")))
            }
        },
    };

    match params.variant {
        Variant::HongDecoy => {
            let transmissions = hong_mode_flow(key, &nonce, &hash, params, &mut rng)?;
            for (seq, t) in transmissions.into_iter().enumerate() {
                let HongTransmission { qubit, mode, auth_index } = t;
                let seq = seq as u32;
                let token = token_for(seq, &qubit)?;
                prepared.push(PreparedRecord {
                    seq,
                    mode,
                    auth_index: auth_index.map(|i| i as u32),
                    ground_truth: GroundTruth { basis: token.basis, value: token.value },
                });
                stream.send(&WireMessage::Qubits { tokens: vec![token] })?;
                match stream.recv()? {
                    WireMessage::ModeAnnounce { index, kind: AnnounceKind::Ack } if index == seq => {
                        messages.push(ClassicalMessage::ReceiptAck { index: seq });
                    }
                    other => {
                        return Err(WireError::Protocol(format!(
                            "expected reception ack for {seq}, got {other:?}"
                        )))
                    }
                }
                let kind = match mode {
                    TransmissionMode::Authentication => AnnounceKind::Authentication,
                    TransmissionMode::Security => AnnounceKind::Security,
                };
                stream.send(&WireMessage::ModeAnnounce { index: seq, kind })?;
                messages.push(ClassicalMessage::ModeAnnounce { index: seq, mode });
            }
        }
        _ => {
            let qubits = alice_respond(key, &nonce, &hash)?;
            let mut tokens = Vec::with_capacity(qubits.len());
            for (seq, qubit) in qubits.iter().enumerate() {
                let seq = seq as u32;
                let token = token_for(seq, qubit)?;
                prepared.push(PreparedRecord {
                    seq,
                    mode: TransmissionMode::Authentication,
                    auth_index: Some(seq),
                    ground_truth: GroundTruth { basis: token.basis, value: token.value },
                });
                tokens.push(token);
            }
            stream.send(&WireMessage::Qubits { tokens })?;
        }
    }

    let outcome = match stream.recv()? {
        WireMessage::Result { accept } => {
            let outcome = if accept { Outcome::Accept } else { Outcome::Reject };
            messages.push(ClassicalMessage::Result { outcome });
            outcome
        }
        other => return Err(WireError::Protocol(format!("expected RESULT, got {other:?}"))),
    };

    Ok(ProverView { classical_messages: messages, prepared, outcome: Some(outcome) })
}

/// Run Bob over a connection to the prover (or to whoever sits between).
pub fn run_verifier<T: Read + Write>(
    transport: T,
    key: &Key,
    params: &SessionParams,
    mut rng: Rng,
) -> WireResult<VerifierView> {
    params.validate()?;
    reject_short_circuit(params)?;
    let mut stream = FrameStream::new(transport);
    let mut messages = Vec::new();
    let mut measured = Vec::new();

    let (nonce, hash): (Nonce, HashFunction) = match params.variant {
        Variant::ZawadzkiAliceNonce => match stream.recv()? {
            WireMessage::NonceHashFromAlice { nonce, hash } => {
                check_challenge_shape(params, &nonce, &hash)?;
                let nonce = Nonce { bits: nonce };
                messages.push(ClassicalMessage::NonceHashFromAlice {
                    nonce_hex: nonce.to_hex(),
                    hash,
                });
                (nonce, hash.realize())
            }
            other => {
                return Err(WireError::Protocol(format!(
                    "expected NONCE_HASH_FROM_ALICE, got {other:?}"
                )))
            }
        },
        _ => {
            let (nonce, hash) = bob_challenge(params, &mut rng)?;
            stream.send(&WireMessage::Challenge {
                nonce: nonce.bits.clone(),
                hash: hash.descriptor(),
            })?;
            messages.push(ClassicalMessage::Challenge {
                nonce_hex: nonce.to_hex(),
                hash: hash.descriptor(),
            });
            (nonce, hash)
        }
    };

    let tag = hash_tag(key, &nonce, &hash)?;

    let outcome = match params.variant {
        Variant::HongDecoy => {
            let mut auth_count = 0usize;
            let mut passes = 0usize;
            let mut seq = 0u32;
            while auth_count < params.d {
                let mut qubit = match stream.recv()? {
                    WireMessage::Qubits { tokens } if tokens.len() == 1 => {
                        embed(tokens[0].basis.bit(), tokens[0].value)
                    }
                    other => {
                        return Err(WireError::Protocol(format!(
                            "expected a single-qubit QUBITS frame, got {other:?}"
                        )))
                    }
                };
                stream.send(&WireMessage::ModeAnnounce { index: seq, kind: AnnounceKind::Ack })?;
                messages.push(ClassicalMessage::ReceiptAck { index: seq });
                let mode = match stream.recv()? {
                    WireMessage::ModeAnnounce { index, kind } if index == seq => match kind {
                        AnnounceKind::Authentication => TransmissionMode::Authentication,
                        AnnounceKind::Security => TransmissionMode::Security,
                        AnnounceKind::Ack => {
                            return Err(WireError::Protocol(
                                "sender may not ack its own transmission".into(),
                            ))
                        }
                    },
                    other => {
                        return Err(WireError::Protocol(format!(
                            "expected mode announcement for {seq}, got {other:?}"
                        )))
                    }
                };
                messages.push(ClassicalMessage::ModeAnnounce { index: seq, mode });
                match mode {
                    TransmissionMode::Authentication => {
                        let record = verify_one(&tag, auth_count, &mut qubit, &mut rng)?;
                        passes += record.pass as usize;
                        measured.push(MeasuredRecord {
                            seq,
                            mode,
                            auth_index: Some(auth_count as u32),
                            basis: record.basis,
                            outcome: record.outcome,
                        });
                        auth_count += 1;
                    }
                    TransmissionMode::Security => {
                        let (basis, outcome) = measure_decoy(&mut qubit, &mut rng)?;
                        measured.push(MeasuredRecord { seq, mode, auth_index: None, basis, outcome });
                    }
                }
                seq += 1;
            }
            if passes == params.d { Outcome::Accept } else { Outcome::Reject }
        }
        _ => {
            let mut qubits: Vec<Qubit> = match stream.recv()? {
                WireMessage::Qubits { tokens } => {
                    if tokens.len() != params.d {
                        return Err(WireError::Protocol(format!(
                            "expected {} qubits, got {}",
                            params.d,
                            tokens.len()
                        )));
                    }
                    tokens.iter().map(|t| embed(t.basis.bit(), t.value)).collect()
                }
                other => {
                    return Err(WireError::Protocol(format!("expected QUBITS, got {other:?}")))
                }
            };
            let (outcome, records) = verify_tag_qubits(&tag, &mut qubits, false, &mut rng)?;
            for r in records {
                measured.push(MeasuredRecord {
                    seq: r.auth_index as u32,
                    mode: TransmissionMode::Authentication,
                    auth_index: Some(r.auth_index as u32),
                    basis: r.basis,
                    outcome: r.outcome,
                });
            }
            outcome
        }
    };

    stream.send(&WireMessage::Result { accept: outcome == Outcome::Accept })?;
    messages.push(ClassicalMessage::Result { outcome });

    Ok(VerifierView {
        nonce_hex: nonce.to_hex(),
        hash_seed: hash.seed(),
        classical_messages: messages,
        measured,
        outcome: Some(outcome),
    })
}

/// The proxy's record: what she did to each in-flight qubit and which modes
/// were announced past her.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxyView {
    pub actions: Vec<AdversaryAction>,
    pub announced: Vec<(u32, TransmissionMode)>,
}

impl ProxyView {
    /// Eve's usable observations: measured authentication qubits indexed by
    /// authentication position. Without mode announcements every transmission
    /// is an authentication qubit; with them, decoy observations are dropped.
    pub fn observations(&self, session_id: u64) -> Vec<Observation> {
        let mode_of = |seq: u32| {
            self.announced
                .iter()
                .find(|(i, _)| *i == seq)
                .map(|(_, m)| *m)
                .unwrap_or(TransmissionMode::Authentication)
        };
        let mut auth_counter = 0usize;
        let mut out = Vec::new();
        for (seq, action) in self.actions.iter().enumerate() {
            if mode_of(seq as u32) != TransmissionMode::Authentication {
                continue;
            }
            let auth_index = auth_counter;
            auth_counter += 1;
            if let AdversaryAction::Measured { basis, outcome } = action {
                out.push(Observation {
                    qubit_index: auth_index,
                    meas_basis: *basis,
                    outcome: *outcome,
                    session_id,
                });
            }
        }
        out
    }
}

/// Run Eve between the prover side and the verifier side.
///
/// Classical frames relay verbatim in both directions; QUBITS frames relay
/// verbatim under [`AdversaryStrategy::Transparent`] and are measured per
/// policy (forwarding the collapsed states) under
/// [`AdversaryStrategy::InterceptMeasure`]. One session per connection pair.
pub fn run_proxy<RA, WA, RB, WB>(
    mut from_prover: RA,
    mut to_prover: WA,
    mut from_verifier: RB,
    mut to_verifier: WB,
    strategy: &AdversaryStrategy,
    mut rng: Rng,
) -> WireResult<ProxyView>
where
    RA: Read + Send,
    WA: Write + Send,
    RB: Read + Send,
    WB: Write + Send,
{
    std::thread::scope(|scope| {
        // prover -> verifier: the quantum channel flows this way
        let forward = scope.spawn(move || -> WireResult<ProxyView> {
            let mut view = ProxyView { actions: Vec::new(), announced: Vec::new() };
            let mut seq = 0usize;
            while let Some(msg) = read_frame(&mut from_prover)? {
                let out = match msg {
                    WireMessage::Qubits { tokens } => {
                        let mut forwarded = Vec::with_capacity(tokens.len());
                        for token in tokens {
                            match strategy {
                                AdversaryStrategy::Transparent => {
                                    view.actions.push(AdversaryAction::Relayed);
                                    forwarded.push(token);
                                }
                                AdversaryStrategy::InterceptMeasure(policy) => {
                                    let mut qubit = embed(token.basis.bit(), token.value);
                                    let basis = policy.basis_for(seq, &mut rng);
                                    let m = qubit.measure(basis, &mut rng)?;
                                    view.actions.push(AdversaryAction::Measured {
                                        basis,
                                        outcome: m.outcome,
                                    });
                                    let (fb, fv) = m.post_state.observe()?;
                                    forwarded.push(QubitToken { id: token.id, basis: fb, value: fv });
                                }
                            }
                            seq += 1;
                        }
                        WireMessage::Qubits { tokens: forwarded }
                    }
                    WireMessage::ModeAnnounce { index, kind } => {
                        let mode = match kind {
                            AnnounceKind::Authentication => Some(TransmissionMode::Authentication),
                            AnnounceKind::Security => Some(TransmissionMode::Security),
                            AnnounceKind::Ack => None,
                        };
                        if let Some(mode) = mode {
                            view.announced.push((index, mode));
                        }
                        WireMessage::ModeAnnounce { index, kind }
                    }
                    other => other,
                };
                write_frame(&mut to_verifier, &out)?;
            }
            Ok(view)
        });

        // verifier -> prover: classical only, relayed verbatim
        let backward = scope.spawn(move || -> WireResult<()> {
            while let Some(msg) = read_frame(&mut from_verifier)? {
                write_frame(&mut to_prover, &msg)?;
            }
            Ok(())
        });

        let view = forward.join().expect("forward pump panicked")?;
        backward.join().expect("backward pump panicked")?;
        Ok(view)
    })
}

/// Reassemble the canonical session transcript from the parties' views.
pub fn merge_transcript(
    params: &SessionParams,
    session_id: u64,
    prover: &ProverView,
    verifier: &VerifierView,
    proxy: Option<&ProxyView>,
) -> Transcript {
    let events = prover
        .prepared
        .iter()
        .map(|p| {
            let m = verifier.measured.iter().find(|m| m.seq == p.seq);
            QuantumEvent {
                index: p.seq,
                mode: p.mode,
                auth_index: p.auth_index,
                ground_truth: p.ground_truth,
                adversary: proxy.map(|pv| pv.actions[p.seq as usize]),
                measured_basis: m.map(|m| m.basis),
                outcome: m.map(|m| m.outcome),
            }
        })
        .collect();
    Transcript {
        session_id,
        params: params.clone(),
        nonce_hex: verifier.nonce_hex.clone(),
        hash_seed: verifier.hash_seed,
        events,
        outcome: verifier.outcome,
        classical_messages: verifier.classical_messages.clone(),
    }
}
