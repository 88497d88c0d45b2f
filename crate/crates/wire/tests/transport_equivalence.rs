//! The wire execution must replay the in-process execution exactly: same
//! events, same classical messages, same outcome, for every variant and
//! strategy, over in-memory pipes and over loopback TCP.

use qia_core::adversary::{AdversaryStrategy, BasisPolicy, SessionEvidence};
use qia_core::keyspace::{Key, KeySpace};
use qia_core::protocol::{run_session, Outcome, SessionParams, Variant};
use qia_core::rng::{labels, Rng};
use qia_wire::{run_duplex_session, run_tcp_session, WireError};

fn params_for(variant: Variant) -> SessionParams {
    SessionParams { key_len: 8, nonce_len: 32, d: 6, ..SessionParams::new(variant) }
}

fn strategies(d: usize) -> Vec<Option<AdversaryStrategy>> {
    let pattern = (0..d)
        .map(|i| if i % 2 == 0 { qia_core::qstate::Basis::Rectilinear } else { qia_core::qstate::Basis::Diagonal })
        .collect();
    vec![
        None,
        Some(AdversaryStrategy::Transparent),
        Some(AdversaryStrategy::InterceptMeasure(BasisPolicy::AllRectilinear)),
        Some(AdversaryStrategy::InterceptMeasure(BasisPolicy::UniformRandomPerQubit)),
        Some(AdversaryStrategy::InterceptMeasure(BasisPolicy::FixedPattern(pattern))),
    ]
}

#[test]
fn duplex_sessions_replay_in_process_sessions() {
    for variant in [Variant::ZawadzkiBobNonce, Variant::ZawadzkiAliceNonce, Variant::HongDecoy] {
        let params = params_for(variant);
        for strategy in strategies(params.d) {
            for seed in 0..25u64 {
                let mut key_rng = Rng::stream(seed, labels::KEY);
                let key = Key::random(&mut key_rng, params.key_len);
                let reference =
                    run_session(&key, &key, &params, strategy.as_ref(), seed, seed).unwrap();
                let wire =
                    run_duplex_session(&key, &key, &params, strategy.as_ref(), seed, seed).unwrap();
                assert_eq!(
                    wire.transcript, reference,
                    "variant {variant:?} strategy {strategy:?} seed {seed}"
                );
            }
        }
    }
}

#[test]
fn duplex_equivalence_holds_over_random_session_shapes() {
    // random (key_len, nonce_len, d) shapes drawn from a seeded stream
    let mut shape_rng = Rng::new(0x5AFE);
    for case in 0..60u64 {
        let key_len = 1 + (shape_rng.next_u64() % 20) as usize;
        let nonce_len = 1 + (shape_rng.next_u64() % 150) as usize;
        let d = 1 + (shape_rng.next_u64() % 12) as usize;
        let variant = [Variant::ZawadzkiBobNonce, Variant::ZawadzkiAliceNonce, Variant::HongDecoy]
            [(shape_rng.next_u64() % 3) as usize];
        let params = SessionParams { key_len, nonce_len, d, ..SessionParams::new(variant) };
        let strategy = AdversaryStrategy::InterceptMeasure(BasisPolicy::UniformRandomPerQubit);
        let mut key_rng = Rng::stream(case, labels::KEY);
        let key = Key::random(&mut key_rng, key_len);
        let reference = run_session(&key, &key, &params, Some(&strategy), case, case).unwrap();
        let wire = run_duplex_session(&key, &key, &params, Some(&strategy), case, case).unwrap();
        assert_eq!(wire.transcript, reference, "case {case}: {params:?}");
    }
}

#[test]
fn tcp_sessions_replay_in_process_sessions() {
    for variant in [Variant::ZawadzkiBobNonce, Variant::ZawadzkiAliceNonce, Variant::HongDecoy] {
        let params = params_for(variant);
        for strategy in strategies(params.d) {
            for seed in 0..5u64 {
                let mut key_rng = Rng::stream(seed, labels::KEY);
                let key = Key::random(&mut key_rng, params.key_len);
                let reference =
                    run_session(&key, &key, &params, strategy.as_ref(), seed, seed).unwrap();
                let wire =
                    run_tcp_session(&key, &key, &params, strategy.as_ref(), seed, seed).unwrap();
                assert_eq!(
                    wire.transcript, reference,
                    "variant {variant:?} strategy {strategy:?} seed {seed}"
                );
            }
        }
    }
}

#[test]
fn proxy_observations_match_transcript_extraction() {
    let params = params_for(Variant::HongDecoy);
    let strategy = AdversaryStrategy::InterceptMeasure(BasisPolicy::AllRectilinear);
    for seed in 0..25u64 {
        let mut key_rng = Rng::stream(seed, labels::KEY);
        let key = Key::random(&mut key_rng, params.key_len);
        let wire = run_duplex_session(&key, &key, &params, Some(&strategy), seed, seed).unwrap();
        let from_proxy = wire.proxy.as_ref().unwrap().observations(seed);
        let from_transcript =
            qia_core::adversary::observations_from_transcript(&wire.transcript);
        assert_eq!(from_proxy, from_transcript, "seed {seed}");
    }
}

#[test]
fn wire_attack_statistics_match_in_process() {
    // Same seeds, same elimination: survivor sets from wire sessions must be
    // identical to those from in-process sessions.
    let params = SessionParams { key_len: 8, nonce_len: 16, d: 4, ..params_for(Variant::ZawadzkiBobNonce) };
    let keyspace = KeySpace::exhaustive(8);
    let strategy = AdversaryStrategy::InterceptMeasure(BasisPolicy::AllRectilinear);
    for seed in 0..20u64 {
        let mut key_rng = Rng::stream(seed, labels::KEY);
        let key = Key::random(&mut key_rng, params.key_len);
        let wire = run_duplex_session(&key, &key, &params, Some(&strategy), seed, seed).unwrap();
        let reference = run_session(&key, &key, &params, Some(&strategy), seed, seed).unwrap();
        let wire_set = qia_core::adversary::eliminate_evidence(
            &keyspace,
            &SessionEvidence::from_transcript(&wire.transcript),
        )
        .unwrap();
        let ref_set = qia_core::adversary::eliminate_evidence(
            &keyspace,
            &SessionEvidence::from_transcript(&reference),
        )
        .unwrap();
        assert_eq!(wire_set, ref_set);
        assert!(wire_set.contains(&key));
    }
}

#[test]
fn transparent_relay_is_neutral() {
    let params = params_for(Variant::ZawadzkiBobNonce);
    for seed in 0..50u64 {
        let mut key_rng = Rng::stream(seed, labels::KEY);
        let key = Key::random(&mut key_rng, params.key_len);
        let direct = run_duplex_session(&key, &key, &params, None, seed, seed).unwrap();
        let relayed = run_duplex_session(
            &key,
            &key,
            &params,
            Some(&AdversaryStrategy::Transparent),
            seed,
            seed,
        )
        .unwrap();
        assert_eq!(direct.transcript.outcome, Some(Outcome::Accept));
        assert_eq!(relayed.transcript.outcome, Some(Outcome::Accept));
        // identical except for the recorded adversary pass-through
        assert_eq!(direct.transcript.classical_messages, relayed.transcript.classical_messages);
        assert_eq!(direct.transcript.nonce_hex, relayed.transcript.nonce_hex);
        for (d, r) in direct.transcript.events.iter().zip(&relayed.transcript.events) {
            assert_eq!(d.ground_truth, r.ground_truth);
            assert_eq!(d.outcome, r.outcome);
        }
    }
}

#[test]
fn prover_and_verifier_record_the_same_classical_channel() {
    for variant in [Variant::ZawadzkiBobNonce, Variant::ZawadzkiAliceNonce, Variant::HongDecoy] {
        let params = params_for(variant);
        for seed in 0..10u64 {
            let mut key_rng = Rng::stream(seed, labels::KEY);
            let key = Key::random(&mut key_rng, params.key_len);
            let wire = run_duplex_session(&key, &key, &params, Some(&AdversaryStrategy::Transparent), seed, seed)
                .unwrap();
            assert_eq!(wire.prover.classical_messages, wire.verifier.classical_messages);
        }
    }
}

#[test]
fn short_circuit_params_are_rejected_on_the_wire() {
    let mut params = params_for(Variant::ZawadzkiBobNonce);
    params.short_circuit = true;
    let key = Key::from_value(1, 8);
    assert!(matches!(
        run_duplex_session(&key, &key, &params, None, 0, 0),
        Err(WireError::Protocol(_))
    ));
}
