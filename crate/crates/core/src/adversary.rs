//! Eve's strategies: intercept-measure with key-space elimination, likelihood
//! scoring, quantum-memory replay, and live man-in-the-middle relay.
//!
//! The elimination kernel is a single certainty: measuring an in-flight qubit
//! in basis b' and reading v' rules out preparation (b', 1 xor v'). A
//! candidate key whose hash would have prepared that impossible pair at any
//! observed position cannot be the sender's key. One session therefore
//! eliminates each wrong candidate independently with probability 1/4 per
//! observed qubit, leaving a survivor set of expected size (3/4)^d |K| that
//! always contains the true key. Sessions intersect; likelihood scoring
//! refines the survivor set into strata by how many cross-basis coin flips a
//! candidate needs to explain the record.

use serde::{Deserialize, Serialize};

use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::hashfam::{HashFunction, Nonce};
use crate::keyspace::{Key, KeySpace, SurvivorSet};
use crate::protocol::{
    alice_respond, bob_verify, generate_challenge, hong_mode_flow, run_session, AdversaryAction,
    Outcome, SessionParams, Transcript, TransmissionMode, Variant,
};
use crate::qstate::{Basis, Qubit};
use crate::rng::Rng;

/// One intercepted measurement, indexed by authentication-qubit position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub qubit_index: usize,
    pub meas_basis: Basis,
    pub outcome: bool,
    pub session_id: u64,
}

/// How Eve chooses her measurement basis per in-flight qubit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum BasisPolicy {
    AllRectilinear,
    AllDiagonal,
    UniformRandomPerQubit,
    FixedPattern(Vec<Basis>),
}

impl BasisPolicy {
    /// Basis for the `seq`-th transmission. A fixed pattern is indexed by
    /// transmission sequence (modulo its length, for decoy-padded sessions);
    /// the uniform policy draws one coin.
    pub fn basis_for(&self, seq: usize, rng: &mut Rng) -> Basis {
        match self {
            BasisPolicy::AllRectilinear => Basis::Rectilinear,
            BasisPolicy::AllDiagonal => Basis::Diagonal,
            BasisPolicy::UniformRandomPerQubit => Basis::from_bit(rng.next_bool()),
            BasisPolicy::FixedPattern(pattern) => pattern[seq % pattern.len()],
        }
    }

    pub fn check_len(&self, d: usize) -> Result<()> {
        if let BasisPolicy::FixedPattern(pattern) = self {
            if pattern.len() != d {
                return Err(Error::PatternLength { expected: d, got: pattern.len() });
            }
        }
        Ok(())
    }
}

/// What Eve does inside a live session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum AdversaryStrategy {
    /// Relay everything untouched (live store-and-forward MITM).
    Transparent,
    /// Measure every in-flight qubit per policy and forward the collapsed state.
    InterceptMeasure(BasisPolicy),
}

/// Measure-and-forward a batch of in-flight qubits.
///
/// The forwarded states are the post-measurement collapses; the originals are
/// consumed — the linear-use contract is what stands in for no-cloning.
pub fn intercept_measure(
    qubits: Vec<Qubit>,
    policy: &BasisPolicy,
    rng: &mut Rng,
    session_id: u64,
) -> Result<(Vec<Observation>, Vec<Qubit>)> {
    let mut observations = Vec::with_capacity(qubits.len());
    let mut forwarded = Vec::with_capacity(qubits.len());
    for (i, mut qubit) in qubits.into_iter().enumerate() {
        let basis = policy.basis_for(i, rng);
        let m = qubit.measure(basis, rng)?;
        observations.push(Observation {
            qubit_index: i,
            meas_basis: basis,
            outcome: m.outcome,
            session_id,
        });
        forwarded.push(m.post_state);
    }
    Ok((observations, forwarded))
}

/// Eve's usable record of one session, extracted from its transcript:
/// authentication qubits she measured, keyed by authentication index. Decoy
/// observations are dropped once the mode announcements identify them.
pub fn observations_from_transcript(t: &Transcript) -> Vec<Observation> {
    t.events
        .iter()
        .filter_map(|e| match (e.mode, e.auth_index, e.adversary) {
            (
                TransmissionMode::Authentication,
                Some(auth_index),
                Some(AdversaryAction::Measured { basis, outcome }),
            ) => Some(Observation {
                qubit_index: auth_index as usize,
                meas_basis: basis,
                outcome,
                session_id: t.session_id,
            }),
            _ => None,
        })
        .collect()
}

/// The public values plus observations Eve holds for one attacked session.
#[derive(Debug, Clone)]
pub struct SessionEvidence {
    pub hash: HashFunction,
    pub nonce: Nonce,
    pub observations: Vec<Observation>,
}

impl SessionEvidence {
    pub fn from_transcript(t: &Transcript) -> SessionEvidence {
        SessionEvidence {
            hash: t.hash(),
            nonce: t.nonce(),
            observations: observations_from_transcript(t),
        }
    }
}

fn check_observations(hash: &HashFunction, obs: &[Observation]) -> Result<()> {
    let d = hash.d();
    for o in obs {
        if o.qubit_index >= d {
            return Err(Error::ObservationIndex { index: o.qubit_index, d });
        }
    }
    Ok(())
}

/// Remove every candidate whose hash puts an impossible (basis, value) pair
/// at an observed position: candidate k is out iff for some observation i,
/// tag(k) has basis bit equal to Eve's measurement basis and value bit equal
/// to the negated outcome. Everything else — including every candidate that
/// merely needs cross-basis luck — survives, so the true key always does.
pub fn eliminate(
    keyspace: &KeySpace,
    hash: &HashFunction,
    nonce: &Nonce,
    obs: &[Observation],
) -> Result<SurvivorSet> {
    keyspace.ensure_enumerable()?;
    check_observations(hash, obs)?;
    let expected = nonce.len() + keyspace.key_len();
    if hash.in_len() != expected {
        return Err(Error::HashInputLength { expected: hash.in_len(), got: expected });
    }

    let mut input = Bits::zeros(hash.in_len());
    input.overwrite(0, &nonce.bits);
    let mut tag = Bits::zeros(hash.out_len());

    let total = keyspace.member_count();
    let mut members = Bits::zeros(total as usize);
    for idx in 0..total {
        keyspace.fill_candidate(idx, nonce.len(), &mut input);
        hash.eval_into(&input, &mut tag)?;
        let survives = obs.iter().all(|o| {
            let basis_bit = tag.get(2 * o.qubit_index);
            let value_bit = tag.get(2 * o.qubit_index + 1);
            !(basis_bit == o.meas_basis.bit() && value_bit == !o.outcome)
        });
        members.set(idx as usize, survives);
    }
    Ok(SurvivorSet::from_members(keyspace.clone(), members))
}

/// Convenience form of [`eliminate`] over extracted evidence.
pub fn eliminate_evidence(keyspace: &KeySpace, evidence: &SessionEvidence) -> Result<SurvivorSet> {
    eliminate(keyspace, &evidence.hash, &evidence.nonce, &evidence.observations)
}

/// Intersection of survivor sets from repeated sessions; the key lives in all
/// of them, so the intersection only shrinks.
pub fn intersect_sessions(subsets: &[SurvivorSet]) -> Result<SurvivorSet> {
    let (first, rest) = subsets
        .split_first()
        .ok_or_else(|| Error::InvalidParams("intersect_sessions needs at least one subset".into()))?;
    let mut acc = first.clone();
    for s in rest {
        acc = acc.intersect(s)?;
    }
    Ok(acc)
}

/// Per-candidate log2-likelihood of Eve's observations across sessions.
///
/// Per observed qubit a candidate's hash pair explains the outcome with
/// probability 1 (same basis, matching value), 0 (same basis, mismatching
/// value — the impossible pair), or 1/2 (cross basis). Scores are in log2:
/// 0 is the maximum, each cross-basis pair costs 1, an impossible pair sinks
/// the candidate to -inf. Result is sorted by descending score, candidates of
/// equal score in enumeration order. The score-0 stratum under an
/// all-rectilinear policy is exactly the survivor set whose members match
/// Eve's basis everywhere.
pub fn likelihood_score(
    keyspace: &KeySpace,
    sessions: &[SessionEvidence],
) -> Result<Vec<(Key, f64)>> {
    keyspace.ensure_enumerable()?;
    for s in sessions {
        check_observations(&s.hash, &s.observations)?;
        let expected = s.nonce.len() + keyspace.key_len();
        if s.hash.in_len() != expected {
            return Err(Error::HashInputLength { expected: s.hash.in_len(), got: expected });
        }
    }

    let total = keyspace.member_count();
    let mut scored = Vec::with_capacity(total as usize);
    let mut tag = Bits::zeros(sessions.first().map_or(2, |s| s.hash.out_len()));
    for idx in 0..total {
        let mut score = 0.0f64;
        'sessions: for s in sessions {
            let mut input = Bits::zeros(s.hash.in_len());
            input.overwrite(0, &s.nonce.bits);
            keyspace.fill_candidate(idx, s.nonce.len(), &mut input);
            if tag.len() != s.hash.out_len() {
                tag = Bits::zeros(s.hash.out_len());
            }
            s.hash.eval_into(&input, &mut tag)?;
            for o in &s.observations {
                let basis_bit = tag.get(2 * o.qubit_index);
                let value_bit = tag.get(2 * o.qubit_index + 1);
                if basis_bit == o.meas_basis.bit() {
                    if value_bit != o.outcome {
                        score = f64::NEG_INFINITY;
                        break 'sessions;
                    }
                } else {
                    score -= 1.0;
                }
            }
        }
        scored.push((keyspace.key_at(idx), score));
    }
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("scores are never NaN"));
    Ok(scored)
}

/// CSV export of likelihood scores: `key_hex,log2_likelihood`, eliminated
/// candidates rendered as `-inf`.
pub fn scores_to_csv(scores: &[(Key, f64)]) -> String {
    let mut out = String::from("key_hex,log2_likelihood\n");
    for (key, score) in scores {
        out.push_str(&key.to_hex());
        out.push(',');
        if *score == f64::NEG_INFINITY {
            out.push_str("-inf");
        } else {
            out.push_str(&format!("{score}"));
        }
        out.push('\n');
    }
    out
}

/// Material Eve banked by posing as the challenger: the public `(r, H)` plus
/// the authentication qubits held unmeasured in quantum memory.
#[derive(Debug)]
pub struct StoredSession {
    pub params: SessionParams,
    pub nonce: Nonce,
    pub hash: HashFunction,
    pub qubits: Vec<Qubit>,
}

/// Ask Alice to authenticate and store her transmission without measuring.
///
/// Under `ZawadzkiAliceNonce` Alice volunteers `(r, H)`; under the other
/// variants Eve issues her own challenge — nonce and hash are public coins,
/// no key is needed to produce them. Under `HongDecoy` Eve keeps only the
/// qubits announced as authentication mode.
pub fn capture_from_alice(
    alice_key: &Key,
    params: &SessionParams,
    rng: &mut Rng,
) -> Result<StoredSession> {
    params.validate()?;
    let (nonce, hash) = generate_challenge(params, rng);
    let qubits = match params.variant {
        Variant::HongDecoy => hong_mode_flow(alice_key, &nonce, &hash, params, rng)?
            .into_iter()
            .filter(|t| t.mode == TransmissionMode::Authentication)
            .map(|t| t.qubit)
            .collect(),
        _ => alice_respond(alice_key, &nonce, &hash)?,
    };
    Ok(StoredSession { params: params.clone(), nonce, hash, qubits })
}

/// Replay stored material at a fresh verifier holding `verifier_key`.
///
/// Under `ZawadzkiAliceNonce` the verifier takes Alice's `(r, H)` at face
/// value, so the stored qubits check out and the forgery always succeeds.
/// Under the verifier-challenges variants the verifier issues a fresh
/// `(r, H)` that the stored qubits know nothing about, and each pair passes
/// only by coin luck.
pub fn replay_attack(
    mut stored: StoredSession,
    verifier_key: &Key,
    rng: &mut Rng,
) -> Result<Outcome> {
    match stored.params.variant {
        Variant::ZawadzkiAliceNonce => {
            bob_verify(verifier_key, &stored.nonce, &stored.hash, &mut stored.qubits, rng)
        }
        _ => {
            let (fresh_nonce, fresh_hash) = generate_challenge(&stored.params, rng);
            bob_verify(verifier_key, &fresh_nonce, &fresh_hash, &mut stored.qubits, rng)
        }
    }
}

/// Live man-in-the-middle relay: Eve sits between two online parties and
/// forwards everything within the session. Succeeds whenever the keys match.
pub fn live_relay(
    alice_key: &Key,
    bob_key: &Key,
    params: &SessionParams,
    session_root: u64,
    session_id: u64,
) -> Result<Outcome> {
    let t = run_session(
        alice_key,
        bob_key,
        params,
        Some(&AdversaryStrategy::Transparent),
        session_root,
        session_id,
    )?;
    Ok(t.outcome.expect("relayed session runs to completion"))
}
