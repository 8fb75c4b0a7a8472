//! An equivocating sender cannot obtain proofs for two values of one
//! provable-broadcast instance, whatever the delivery schedule.

use proptest::prelude::*;
use vaba_core::provable_broadcast::{signed_payload, PbMessage, PbReceiver};
use vaba_core::{Dealer, PartyId, SignatureShare, Term, Value};

/// Outcome of one schedule: which of the two values became provable.
fn provable(n: usize, f: usize, schedule: &[(usize, usize)]) -> [bool; 2] {
    let dealer = Dealer::setup(n, f, 99).unwrap();
    let verifier = dealer.verifier();
    let sender = PartyId((n - 1) as u32);
    let instance = Term::tuple([Term::bytes("pb"), Term::Int(1)]);
    let values = [Value::plain(10), Value::plain(12)];
    let honest: Vec<PartyId> = (0..n - f).map(PartyId::from).collect();
    let mut receivers: Vec<PbReceiver<()>> = honest.iter().map(|_| PbReceiver::new(instance.clone(), sender)).collect();

    let mut collected: Vec<SignatureShare> = Vec::new();
    for &(r, which) in schedule {
        let msg = PbMessage { value: values[which].clone(), proof: () };
        if let Some(d) = receivers[r].on_send(&dealer.party_keys(honest[r]), sender, &msg, |_| true) {
            collected.push(d.ack);
        }
    }
    // Corrupted parties sign both values freely.
    for c in n - f..n {
        let keys = dealer.party_keys(PartyId::from(c));
        for v in &values {
            collected.push(keys.share_sign(&signed_payload(&instance, v)));
        }
    }

    let mut out = [false; 2];
    for (slot, v) in out.iter_mut().zip(&values) {
        let payload = signed_payload(&instance, v);
        let digest = payload.digest();
        let matching: Vec<&SignatureShare> = collected.iter().filter(|s| s.message_digest == digest).collect();
        // every subset, not just the full set
        *slot = (1u32..1 << matching.len()).any(|mask| {
            let subset = matching.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, s)| *s);
            verifier.threshold_sign(subset).is_ok_and(|sig| verifier.threshold_validate(&payload, &sig))
        });
    }
    out
}

/// All orderings of all subsets of `items`.
fn arrangements(items: &[(usize, usize)]) -> Vec<Vec<(usize, usize)>> {
    let mut out = vec![Vec::new()];
    for (i, &item) in items.iter().enumerate() {
        let rest: Vec<_> = items.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &x)| x).collect();
        for mut tail in arrangements(&rest) {
            tail.insert(0, item);
            out.push(tail);
        }
    }
    out
}

#[test]
fn exhaustive_schedules_n4() {
    // Both values offered to each of the three honest receivers.
    let sends: Vec<(usize, usize)> = (0..3).flat_map(|r| [(r, 0), (r, 1)]).collect();
    let mut schedules = arrangements(&sends);
    schedules.sort();
    schedules.dedup();
    assert_eq!(schedules.len(), 1957, "sum over k of 6!/(6-k)!");

    let mut either = [0usize; 2];
    for s in &schedules {
        let p = provable(4, 1, s);
        assert!(!(p[0] && p[1]), "conflicting proofs under schedule {s:?}");
        either[0] += p[0] as usize;
        either[1] += p[1] as usize;
    }
    assert!(either[0] > 0 && either[1] > 0, "both values provable under some schedule: {either:?}");
}

proptest! {
    #[test]
    fn random_schedules(
        (n, f) in prop_oneof![Just((4usize, 1usize)), Just((7, 2))],
        raw in prop::collection::vec((0usize..16, 0usize..2), 0..24),
    ) {
        let schedule: Vec<(usize, usize)> = raw.into_iter().map(|(r, w)| (r % (n - f), w)).collect();
        let p = provable(n, f, &schedule);
        prop_assert!(!(p[0] && p[1]));
    }
}
