//! Prover (Alice) and verifier (Bob) state machines and session orchestration.
//!
//! Three protocol variants share one skeleton: a nonce `r` and a public hash
//! function `H` bind the session, the prover hashes `r || k` into `2d` bits,
//! embeds successive bit pairs into `d` conjugate-coding qubits, and the
//! verifier measures each qubit in the basis named by the odd bit of its own
//! hash value and accepts iff every outcome equals the even bit.
//!
//! * `ZawadzkiBobNonce` — the verifier generates `(r, H)` and challenges.
//! * `ZawadzkiAliceNonce` — the prover generates `(r, H)` herself, which is
//!   what makes offline replay possible.
//! * `HongDecoy` — authentication qubits are interleaved with random decoy
//!   states; each transmission's mode is announced only after the receiver
//!   acknowledges it.
//!
//! Sessions are fully deterministic given (keys, params, root seed): every
//! party draws from its own labeled stream, so an in-process run and a
//! three-process wire run replay identically.

use serde::{Deserialize, Serialize};

use crate::adversary::AdversaryStrategy;
use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::hashfam::{sample_hash, sample_nonce, HashDescriptor, HashFunction, Nonce};
use crate::keyspace::Key;
use crate::qstate::{embed, random_qubit, Basis, Qubit};
use crate::rng::{labels, Rng};

/// Protocol variant under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    ZawadzkiBobNonce,
    ZawadzkiAliceNonce,
    HongDecoy,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Variant::ZawadzkiBobNonce => "ZawadzkiBobNonce",
            Variant::ZawadzkiAliceNonce => "ZawadzkiAliceNonce",
            Variant::HongDecoy => "HongDecoy",
        };
        write!(f, "{name}")
    }
}

/// Session parameters; the hash input length is always `nonce_len + key_len`
/// and the output length is `2d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionParams {
    pub key_len: usize,
    pub nonce_len: usize,
    pub d: usize,
    pub variant: Variant,
    /// Probability that a Hong transmission is a decoy; ignored elsewhere.
    #[serde(default = "default_decoy_prob")]
    pub decoy_prob: f64,
    /// Stop measuring at the first mismatch instead of measuring all d qubits.
    #[serde(default)]
    pub short_circuit: bool,
}

fn default_decoy_prob() -> f64 {
    0.5
}

impl SessionParams {
    /// Defaults: 16-bit keys, 128-bit nonces, d = 16, full measurement.
    pub fn new(variant: Variant) -> SessionParams {
        SessionParams {
            key_len: 16,
            nonce_len: 128,
            d: 16,
            variant,
            decoy_prob: default_decoy_prob(),
            short_circuit: false,
        }
    }

    pub fn hash_in_len(&self) -> usize {
        self.nonce_len + self.key_len
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 1 || self.key_len < 1 || self.nonce_len < 1 {
            return Err(Error::InvalidParams("d, key_len and nonce_len must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.decoy_prob) {
            return Err(Error::InvalidParams("decoy_prob must lie in [0, 1]".into()));
        }
        if self.variant == Variant::HongDecoy && self.decoy_prob >= 1.0 {
            return Err(Error::InvalidParams(
                "decoy_prob = 1 never emits an authentication qubit".into(),
            ));
        }
        Ok(())
    }
}

/// Verifier decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Accept,
    Reject,
}

/// Mode of one Hong transmission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransmissionMode {
    Authentication,
    Security,
}

/// Everything that travels over the classical channel, in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClassicalMessage {
    /// Bob -> Alice: fresh nonce and hash function.
    Challenge { nonce_hex: String, hash: HashDescriptor },
    /// Alice -> Bob under `ZawadzkiAliceNonce`.
    NonceHashFromAlice { nonce_hex: String, hash: HashDescriptor },
    /// Bob -> Alice: confirms reception of one transmission (HongDecoy).
    ReceiptAck { index: u32 },
    /// Alice -> Bob: reveals the mode of an acknowledged transmission.
    ModeAnnounce { index: u32, mode: TransmissionMode },
    /// Bob -> Alice: final decision.
    Result { outcome: Outcome },
}

/// Prepared state of one transmission — simulation-only ground truth, never
/// serialized onto the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub basis: Basis,
    pub value: bool,
}

/// What the adversary did to one in-flight qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum AdversaryAction {
    Relayed,
    Measured { basis: Basis, outcome: bool },
}

/// Per-transmission record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumEvent {
    /// Transmission sequence number.
    pub index: u32,
    pub mode: TransmissionMode,
    /// Position within the d authentication qubits, for authentication mode.
    pub auth_index: Option<u32>,
    pub ground_truth: GroundTruth,
    pub adversary: Option<AdversaryAction>,
    /// Bob's measurement basis; absent if short-circuit mode skipped this qubit.
    pub measured_basis: Option<Basis>,
    /// Bob's outcome s_i; absent if short-circuit mode skipped this qubit.
    pub outcome: Option<bool>,
}

/// Full record of one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub session_id: u64,
    pub params: SessionParams,
    pub nonce_hex: String,
    pub hash_seed: u64,
    pub events: Vec<QuantumEvent>,
    /// Present iff the session ran to completion.
    pub outcome: Option<Outcome>,
    pub classical_messages: Vec<ClassicalMessage>,
}

impl Transcript {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("transcript serializes")
    }

    pub fn from_json(s: &str) -> std::result::Result<Transcript, serde_json::Error> {
        serde_json::from_str(s)
    }

    pub fn nonce(&self) -> Nonce {
        Nonce {
            bits: Bits::from_hex(self.params.nonce_len, &self.nonce_hex)
                .expect("transcript nonce_hex matches nonce_len"),
        }
    }

    pub fn hash(&self) -> HashFunction {
        HashFunction::from_seed(self.hash_seed, self.params.hash_in_len(), self.params.d)
    }
}

/// Per-party random streams of one session, split from a session root seed.
#[derive(Debug, Clone, Copy)]
pub struct SessionStreams {
    pub alice: Rng,
    pub bob: Rng,
    pub eve: Rng,
}

impl SessionStreams {
    pub fn derive(session_root: u64) -> SessionStreams {
        SessionStreams {
            alice: Rng::stream(session_root, labels::ALICE),
            bob: Rng::stream(session_root, labels::BOB),
            eve: Rng::stream(session_root, labels::EVE),
        }
    }
}

/// Fresh `(r, H)` drawn by the verifier. Rejected under `ZawadzkiAliceNonce`,
/// where the prover generates them instead.
pub fn bob_challenge(params: &SessionParams, rng: &mut Rng) -> Result<(Nonce, HashFunction)> {
    if params.variant == Variant::ZawadzkiAliceNonce {
        return Err(Error::WrongVariant { variant: params.variant.to_string() });
    }
    Ok(generate_challenge(params, rng))
}

/// Fresh `(r, H)` drawn by the prover under `ZawadzkiAliceNonce`.
pub fn alice_challenge(params: &SessionParams, rng: &mut Rng) -> Result<(Nonce, HashFunction)> {
    if params.variant != Variant::ZawadzkiAliceNonce {
        return Err(Error::WrongVariant { variant: params.variant.to_string() });
    }
    Ok(generate_challenge(params, rng))
}

pub(crate) fn generate_challenge(params: &SessionParams, rng: &mut Rng) -> (Nonce, HashFunction) {
    let nonce = sample_nonce(rng, params.nonce_len);
    let hash = sample_hash(rng, params.hash_in_len(), params.d);
    (nonce, hash)
}

/// `H(r || k)`: the session tag a party derives from its key.
pub fn hash_tag(key: &Key, nonce: &Nonce, hash: &HashFunction) -> Result<Bits> {
    let input = nonce.bits.concat(key.bits());
    hash.eval(&input)
}

/// Embed successive bit pairs of a `2d`-bit tag into `d` qubits:
/// qubit `i` is `Q(tag[2i], tag[2i+1])`.
pub fn prepare_qubits(tag: &Bits) -> Vec<Qubit> {
    assert!(tag.len().is_multiple_of(2), "tag length must be even");
    (0..tag.len() / 2).map(|i| embed(tag.get(2 * i), tag.get(2 * i + 1))).collect()
}

/// Alice's response to a challenge: hash, embed, send.
pub fn alice_respond(alice_key: &Key, nonce: &Nonce, hash: &HashFunction) -> Result<Vec<Qubit>> {
    Ok(prepare_qubits(&hash_tag(alice_key, nonce, hash)?))
}

/// One verifier measurement on an authentication qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MeasurementRecord {
    pub auth_index: usize,
    pub basis: Basis,
    pub outcome: bool,
    pub pass: bool,
}

/// Measure authentication qubit `auth_index` in the basis named by the tag
/// and compare the outcome against the tag's value bit.
pub fn verify_one(
    tag: &Bits,
    auth_index: usize,
    qubit: &mut Qubit,
    rng: &mut Rng,
) -> Result<MeasurementRecord> {
    let basis = Basis::from_bit(tag.get(2 * auth_index));
    let expected = tag.get(2 * auth_index + 1);
    let m = qubit.measure(basis, rng)?;
    Ok(MeasurementRecord { auth_index, basis, outcome: m.outcome, pass: m.outcome == expected })
}

/// Verify a full batch of `d` qubits against a precomputed tag.
///
/// In full-measurement mode (the default) all `d` qubits are measured even
/// after a mismatch; in short-circuit mode measurement stops at the first
/// mismatch and the remaining qubits are left untouched.
pub fn verify_tag_qubits(
    tag: &Bits,
    qubits: &mut [Qubit],
    short_circuit: bool,
    rng: &mut Rng,
) -> Result<(Outcome, Vec<MeasurementRecord>)> {
    let d = tag.len() / 2;
    if qubits.len() != d {
        return Err(Error::QubitCount { expected: d, got: qubits.len() });
    }
    let mut records = Vec::with_capacity(d);
    let mut all_pass = true;
    for (i, qubit) in qubits.iter_mut().enumerate() {
        let record = verify_one(tag, i, qubit, rng)?;
        all_pass &= record.pass;
        records.push(record);
        if short_circuit && !all_pass {
            break;
        }
    }
    let outcome = if all_pass && records.len() == d { Outcome::Accept } else { Outcome::Reject };
    Ok((outcome, records))
}

/// Bob's whole verification step: compute the tag, measure, decide.
pub fn bob_verify(
    bob_key: &Key,
    nonce: &Nonce,
    hash: &HashFunction,
    qubits: &mut [Qubit],
    rng: &mut Rng,
) -> Result<Outcome> {
    let tag = hash_tag(bob_key, nonce, hash)?;
    Ok(verify_tag_qubits(&tag, qubits, false, rng)?.0)
}

/// Measure a decoy in a fresh random basis (outcome is discarded by the caller).
pub fn measure_decoy(qubit: &mut Qubit, rng: &mut Rng) -> Result<(Basis, bool)> {
    let basis = Basis::from_bit(rng.next_bool());
    let m = qubit.measure(basis, rng)?;
    Ok((basis, m.outcome))
}

/// One Hong transmission as generated by the prover.
#[derive(Debug)]
pub struct HongTransmission {
    pub qubit: Qubit,
    pub mode: TransmissionMode,
    /// Index into the d authentication qubits, for authentication mode.
    pub auth_index: Option<usize>,
}

/// The Hong prover's transmission schedule: before each send she flips a
/// `decoy_prob` coin; security mode sends a random decoy state,
/// authentication mode sends the next tag pair. Exactly `d` authentication
/// qubits are emitted; the mode of each transmission is revealed to the
/// verifier only after reception is acknowledged.
pub fn hong_mode_flow(
    alice_key: &Key,
    nonce: &Nonce,
    hash: &HashFunction,
    params: &SessionParams,
    rng: &mut Rng,
) -> Result<Vec<HongTransmission>> {
    if params.variant != Variant::HongDecoy {
        return Err(Error::WrongVariant { variant: params.variant.to_string() });
    }
    params.validate()?;
    let tag = hash_tag(alice_key, nonce, hash)?;
    let d = hash.d();
    let mut out = Vec::with_capacity(2 * d);
    let mut auth_sent = 0;
    while auth_sent < d {
        if rng.next_f64() < params.decoy_prob {
            out.push(HongTransmission {
                qubit: random_qubit(rng),
                mode: TransmissionMode::Security,
                auth_index: None,
            });
        } else {
            out.push(HongTransmission {
                qubit: embed(tag.get(2 * auth_sent), tag.get(2 * auth_sent + 1)),
                mode: TransmissionMode::Authentication,
                auth_index: Some(auth_sent),
            });
            auth_sent += 1;
        }
    }
    Ok(out)
}

/// Pass one in-flight qubit through the adversary, if any. Returns what she
/// did plus the qubit actually delivered downstream; interception delivers
/// the collapsed post-measurement state, never the original.
fn apply_adversary(
    mut qubit: Qubit,
    seq: usize,
    adversary: Option<&AdversaryStrategy>,
    eve: &mut Rng,
) -> Result<(Option<AdversaryAction>, Qubit)> {
    match adversary {
        None => Ok((None, qubit)),
        Some(AdversaryStrategy::Transparent) => Ok((Some(AdversaryAction::Relayed), qubit)),
        Some(AdversaryStrategy::InterceptMeasure(policy)) => {
            let basis = policy.basis_for(seq, eve);
            let m = qubit.measure(basis, eve)?;
            Ok((Some(AdversaryAction::Measured { basis, outcome: m.outcome }), m.post_state))
        }
    }
}

/// Run one complete session and return its transcript.
///
/// Party streams are split from `session_root` with fixed labels, so the same
/// root replays the same session whether parties run in-process or as
/// separate wire endpoints. An adversary, when present, sits on the quantum
/// channel between the parties.
pub fn run_session(
    alice_key: &Key,
    bob_key: &Key,
    params: &SessionParams,
    adversary: Option<&AdversaryStrategy>,
    session_root: u64,
    session_id: u64,
) -> Result<Transcript> {
    params.validate()?;
    if alice_key.len() != params.key_len {
        return Err(Error::KeyLength { expected: params.key_len, got: alice_key.len() });
    }
    if bob_key.len() != params.key_len {
        return Err(Error::KeyLength { expected: params.key_len, got: bob_key.len() });
    }
    if let Some(AdversaryStrategy::InterceptMeasure(policy)) = adversary {
        policy.check_len(params.d)?;
    }

    let mut streams = SessionStreams::derive(session_root);
    let mut messages = Vec::new();

    let (nonce, hash) = match params.variant {
        Variant::ZawadzkiAliceNonce => {
            let (nonce, hash) = alice_challenge(params, &mut streams.alice)?;
            messages.push(ClassicalMessage::NonceHashFromAlice {
                nonce_hex: nonce.to_hex(),
                hash: hash.descriptor(),
            });
            (nonce, hash)
        }
        _ => {
            let (nonce, hash) = bob_challenge(params, &mut streams.bob)?;
            messages.push(ClassicalMessage::Challenge {
                nonce_hex: nonce.to_hex(),
                hash: hash.descriptor(),
            });
            (nonce, hash)
        }
    };

    let bob_tag = hash_tag(bob_key, &nonce, &hash)?;
    let mut events = Vec::new();

    let outcome = match params.variant {
        Variant::HongDecoy => {
            let transmissions = hong_mode_flow(alice_key, &nonce, &hash, params, &mut streams.alice)?;
            let mut passes = 0;
            let mut mismatch = false;
            for (seq, t) in transmissions.into_iter().enumerate() {
                let HongTransmission { qubit, mode, auth_index } = t;
                let (gt_basis, gt_value) = qubit.observe()?;
                let (action, mut forwarded) =
                    apply_adversary(qubit, seq, adversary, &mut streams.eve)?;
                messages.push(ClassicalMessage::ReceiptAck { index: seq as u32 });
                messages.push(ClassicalMessage::ModeAnnounce { index: seq as u32, mode });
                let (measured_basis, outcome_bit) = match mode {
                    TransmissionMode::Authentication => {
                        let record = verify_one(
                            &bob_tag,
                            auth_index.expect("authentication transmissions carry an index"),
                            &mut forwarded,
                            &mut streams.bob,
                        )?;
                        if record.pass {
                            passes += 1;
                        } else {
                            mismatch = true;
                        }
                        (record.basis, record.outcome)
                    }
                    TransmissionMode::Security => measure_decoy(&mut forwarded, &mut streams.bob)?,
                };
                events.push(QuantumEvent {
                    index: seq as u32,
                    mode,
                    auth_index: auth_index.map(|i| i as u32),
                    ground_truth: GroundTruth { basis: gt_basis, value: gt_value },
                    adversary: action,
                    measured_basis: Some(measured_basis),
                    outcome: Some(outcome_bit),
                });
                if params.short_circuit && mismatch {
                    break;
                }
            }
            if passes == params.d { Outcome::Accept } else { Outcome::Reject }
        }
        _ => {
            let qubits = alice_respond(alice_key, &nonce, &hash)?;
            let mut forwarded = Vec::with_capacity(qubits.len());
            let mut prepared = Vec::with_capacity(qubits.len());
            for (seq, qubit) in qubits.into_iter().enumerate() {
                let (gt_basis, gt_value) = qubit.observe()?;
                let (action, fwd) = apply_adversary(qubit, seq, adversary, &mut streams.eve)?;
                prepared.push((GroundTruth { basis: gt_basis, value: gt_value }, action));
                forwarded.push(fwd);
            }
            let (outcome, records) =
                verify_tag_qubits(&bob_tag, &mut forwarded, params.short_circuit, &mut streams.bob)?;
            for (i, (ground_truth, action)) in prepared.into_iter().enumerate() {
                let record = records.get(i);
                events.push(QuantumEvent {
                    index: i as u32,
                    mode: TransmissionMode::Authentication,
                    auth_index: Some(i as u32),
                    ground_truth,
                    adversary: action,
                    measured_basis: record.map(|r| r.basis),
                    outcome: record.map(|r| r.outcome),
                });
            }
            outcome
        }
    };

    messages.push(ClassicalMessage::Result { outcome });

    Ok(Transcript {
        session_id,
        params: params.clone(),
        nonce_hex: nonce.to_hex(),
        hash_seed: hash.seed(),
        events,
        outcome: Some(outcome),
        classical_messages: messages,
    })
}
