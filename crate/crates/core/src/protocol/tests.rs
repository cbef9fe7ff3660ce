use super::*;
use crate::channel::{simulate, Mobility, ScenarioConfig};
use crate::wire::Body;
use alloc::vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_streams(rng: &mut ChaCha8Rng, m: usize, len: usize) -> Vec<BitStream> {
    (0..m)
        .map(|_| BitStream::new((0..len).map(|_| rng.random()).collect()))
        .collect()
}

fn flip(s: &BitStream, positions: &[usize]) -> BitStream {
    let mut b = s.clone();
    for &p in positions {
        b.bits_mut()[p] ^= true;
    }
    b
}

#[test]
fn identical_streams_match_directly() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = random_streams(&mut rng, 4, 200);
    let r = reconcile_streams(a.clone(), a.clone(), &AgreementParams::default()).unwrap();
    assert!(r.succeeded());
    assert_eq!(r.matched_via, Some(MatchedVia::Direct(0)));
    assert_eq!(r.key.as_ref().unwrap().bits(), &a[0].bits()[..128]);
    assert_eq!(r.transcript.len(), 2);
    assert_eq!(r.secret_bits(), 800);
}

#[test]
fn short_matching_streams_are_not_eligible() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut a = random_streams(&mut rng, 3, 200);
    a[0] = BitStream::new(a[0].bits()[..100].to_vec());
    let mut b = a.clone();
    b[1] = flip(&a[1], &[5]);
    let r = reconcile_streams(a.clone(), b, &AgreementParams::default()).unwrap();
    assert_eq!(r.matched_via, Some(MatchedVia::Direct(2)));
}

#[test]
fn recombination_avoids_a_corrupted_stream() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = random_streams(&mut rng, 3, 300);
    let b: Vec<BitStream> = a
        .iter()
        .enumerate()
        .map(|(i, s)| {
            if i == 0 {
                flip(s, &[7, 90, 201])
            } else {
                flip(s, &[11 + 50 * i])
            }
        })
        .collect();
    let params = AgreementParams {
        max_rounds: 40,
        ..AgreementParams::default()
    };
    let r = reconcile_streams(a, b, &params).unwrap();
    assert!(r.keys_agree);
    if r.succeeded() {
        assert_eq!(r.matched_via, Some(MatchedVia::Recombination));
        assert_eq!(r.key.as_ref().unwrap().len(), 128);
    }
    // TAGS, VERDICT, two DIFF_VECTORs, then three per round.
    assert_eq!(r.transcript.len(), 4 + 3 * r.rounds_used as usize);
    assert_eq!(r.transcript[2].kind(), MessageType::DiffVector);
    assert_eq!(r.transcript[3].direction(), Direction::BobToAlice);
}

#[test]
fn zero_rounds_stop_after_the_verdict() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a = random_streams(&mut rng, 2, 200);
    let b: Vec<BitStream> = a.iter().map(|s| flip(s, &[0])).collect();
    let params = AgreementParams {
        max_rounds: 0,
        ..AgreementParams::default()
    };
    let r = reconcile_streams(a, b, &params).unwrap();
    assert!(r.key.is_none());
    assert!(r.keys_agree);
    assert_eq!(r.transcript.len(), 2);
}

#[test]
fn insufficient_material_is_an_error() {
    let a = vec![BitStream::new(vec![true; 40]), BitStream::new(vec![false; 40])];
    let err = reconcile_streams(a.clone(), a, &AgreementParams::default()).unwrap_err();
    assert_eq!(
        err,
        ProtocolError::InsufficientBits {
            available: 80,
            needed: 128
        }
    );
}

#[test]
fn mismatched_theta_is_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = random_streams(&mut rng, 2, 200);
    let b: Vec<BitStream> = a.iter().map(|s| flip(s, &[3])).collect();
    let mut alice = Endpoint::from_streams(Party::Alice, a, &AgreementParams::default()).unwrap();
    let bob_params = AgreementParams {
        theta: 7,
        ..AgreementParams::default()
    };
    let mut bob = Endpoint::from_streams(Party::Bob, b, &bob_params).unwrap();
    assert_eq!(
        run_session(&mut alice, &mut bob),
        Err(ProtocolError::ParameterMismatch("theta"))
    );
}

#[test]
fn out_of_order_messages_are_rejected() {
    let mut bob = Endpoint::from_streams(Party::Bob, Vec::new(), &AgreementParams::default()).unwrap();
    let msg = ProtocolMessage::new(Direction::AliceToBob, &Body::RecombSeed(1));
    assert!(matches!(bob.receive(&msg), Err(ProtocolError::Unexpected { .. })));
    let own = ProtocolMessage::new(Direction::BobToAlice, &Body::RecombSeed(1));
    assert_eq!(bob.receive(&own), Err(ProtocolError::WrongDirection));
    assert_eq!(bob.start(), Err(ProtocolError::InvalidStart));
    assert!(Endpoint::from_streams(Party::Eve, Vec::new(), &AgreementParams::default()).is_err());
}

#[test]
fn full_session_from_traces() {
    let cfg = ScenarioConfig {
        probe_count: 200,
        subcarriers: 8,
        ..ScenarioConfig::new(Mobility::Static, 11)
    };
    let traces = simulate(&cfg).unwrap();
    let params = AgreementParams {
        alpha: 0.2,
        ..AgreementParams::default()
    };
    let (r, view) = run_key_agreement(&traces, &params).unwrap();
    assert!(r.keys_agree);
    assert_eq!(r.stream_lengths.len(), 8);

    let probes = r.counters.get(MessageType::Probe, Direction::AliceToBob).messages;
    assert_eq!(probes, 200);
    assert_eq!(r.counters.get(MessageType::Probe, Direction::BobToAlice).messages, 200);
    assert_eq!(r.counters.get(MessageType::DropList, Direction::AliceToBob).messages, 1);
    assert_eq!(r.counters.get(MessageType::DropList, Direction::BobToAlice).messages, 1);

    // Every message is counted exactly once, with its framed size.
    let total = r.counters.total();
    assert_eq!(total.messages, r.transcript.len());
    assert_eq!(total.bytes, r.transcript.iter().map(|m| m.frame_len()).sum::<usize>());
    assert_eq!(r.counters.reconciliation_messages(), r.transcript.len() - 400);

    // No secret bits travel in clear.
    for secret in r.matched_streams.iter().chain(&r.key) {
        assert_eq!(scan_transcript(&r.transcript, secret, 64).hits, 0);
    }

    let mut alice = Endpoint::from_trace(Party::Alice, &traces.alice, &params).unwrap();
    let mut bob = Endpoint::from_trace(Party::Bob, &traces.bob, &params).unwrap();
    let truth = run_session(&mut alice, &mut bob).unwrap().alice.streams;
    let eve = eve_attempt(&view, &truth);
    assert_eq!(eve.streams.len(), 8);
    for (e, t) in eve.streams.iter().zip(&truth) {
        assert_eq!(e.len(), t.len());
    }
}

#[test]
fn leak_scanner_finds_planted_bits() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let s = random_streams(&mut rng, 2, 100);
    let msg = ProtocolMessage::new(
        Direction::AliceToBob,
        &Body::DiffVector {
            theta: 5,
            residues: vec![1, 2, 3],
            reference: s[0].clone(),
        },
    );
    // The reference follows a 10-byte prefix, so each of its
    // 69 windows of 32 bits shows up once.
    assert_eq!(scan_transcript(core::slice::from_ref(&msg), &s[0], 32).hits, 69);
    let clean = scan_transcript(&[msg], &s[1], 32);
    assert_eq!(clean.hits, 0);
    assert!(clean.expected < 1e-4);
}

#[test]
fn noiseless_traces_match_on_the_first_stream() {
    let cfg = ScenarioConfig {
        probe_count: 300,
        subcarriers: 6,
        noise_std_db: 0.0,
        half_duplex_offset_s: 0.0,
        ..ScenarioConfig::new(Mobility::Mobile, 3)
    };
    let traces = simulate(&cfg).unwrap();
    let (r, view) = run_key_agreement(&traces, &AgreementParams::default()).unwrap();
    assert!(r.succeeded());
    assert_eq!(r.matched_via, Some(MatchedVia::Direct(0)));
    assert_eq!(r.rounds_used, 0);
    assert_eq!(r.matched_streams.len(), 6);

    // Eve holding Alice's own channel reproduces her streams exactly.
    let degenerate = EveView {
        trace: traces.alice.relabeled(Party::Eve),
        ..view
    };
    let report = eve_attempt(&degenerate, &r.matched_streams);
    for c in &report.correlations {
        assert!((c.unwrap() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn fixed_seeds_give_identical_transcripts() {
    let cfg = ScenarioConfig {
        probe_count: 150,
        subcarriers: 5,
        ..ScenarioConfig::new(Mobility::Mobile, 21)
    };
    let params = AgreementParams {
        alpha: 0.1,
        seed: 9,
        ..AgreementParams::default()
    };
    let run = || {
        let (r, _) = run_key_agreement(&simulate(&cfg).unwrap(), &params).unwrap();
        r.transcript.iter().flat_map(wire::encode).collect::<Vec<u8>>()
    };
    assert_eq!(run(), run());
}

#[test]
fn false_acceptance_follows_the_tag_length() {
    // A 6-bit tag lets a differing stream or key through with probability
    // 2^-6 per comparison, so equality only holds up to that rate. Every
    // stream differs here: 10 comparisons in the direct check plus one per
    // round. Stopping at the first acceptance only lowers the count.
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (mut accepted, mut wrong) = (0usize, 0usize);
    let mut rounds = 0usize;
    for t in 0..400 {
        let a = random_streams(&mut rng, 10, 300);
        let b: Vec<BitStream> = a.iter().map(|s| flip(s, &[rng.random_range(0..300)])).collect();
        let params = AgreementParams {
            key_length: 300,
            max_rounds: 5,
            seed: t,
            ..AgreementParams::default()
        };
        let r = reconcile_streams(a, b, &params).unwrap();
        rounds += 10 + r.rounds_used as usize;
        if r.key.is_some() {
            accepted += 1;
            if !r.keys_agree {
                wrong += 1;
            }
        }
    }
    assert!(accepted > 0);
    let expected = rounds as f64 / 64.0;
    assert!(wrong > 0);
    assert!(
        (wrong as f64) < expected + 4.0 * libm::sqrt(expected),
        "{wrong} wrong of {rounds} checks"
    );
}
