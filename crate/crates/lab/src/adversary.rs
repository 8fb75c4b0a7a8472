//! Adversary strategies: corruption, scheduling preferences and the
//! Byzantine rewriting of corrupted parties' traffic.
//!
//! The adversary sees every envelope that is sent and may hold key material
//! of the parties it corrupted. It never sees honest keys, honest internal
//! state or the coin master; it only gets the public [`Verifier`].

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use vaba_core::message::{election_id, skip_payload};
use vaba_core::provable_broadcast::signed_payload;
use vaba_core::staged_broadcast::stage_instance;
use vaba_core::{
    CoinShare, Envelope, KeyProof, Message, PartyId, PartyKeys, Quorum, SignatureShare, Slot, Term,
    Value, Verifier, View,
};

use crate::config::AdversaryKind;

/// What a corrupted party does with its protocol state machine.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Behavior {
    /// Sends nothing.
    Silent,
    /// Runs the protocol with an adversary-chosen input.
    Puppet,
    /// Runs the protocol but equivocates in its own broadcast and adds
    /// invalid certificates.
    Equivocator,
}

pub struct Adversary {
    kind: AdversaryKind,
    quorum: Quorum,
    session: Term,
    verifier: Arc<Verifier>,
    rng: ChaCha8Rng,
    corrupted: BTreeMap<PartyId, Behavior>,
    corrupted_keys: BTreeMap<PartyId, PartyKeys>,
    skip_seen: BTreeSet<View>,
    targets: BTreeMap<View, BTreeSet<PartyId>>,
    coin_shares: BTreeMap<View, BTreeMap<PartyId, CoinShare>>,
    known_leaders: BTreeMap<View, PartyId>,
    junk_sent: BTreeSet<(PartyId, View)>,
    equivocation: BTreeMap<(PartyId, View), EquivocationLog>,
    conflicts: u64,
}

/// Acks an equivocating sender collected for its two stage-1 values.
#[derive(Default)]
struct EquivocationLog {
    values: Vec<Value>,
    shares: Vec<SignatureShare>,
}

impl Adversary {
    pub fn new(
        kind: AdversaryKind,
        quorum: Quorum,
        session: Term,
        verifier: Arc<Verifier>,
        rng: ChaCha8Rng,
    ) -> Self {
        Adversary {
            kind,
            quorum,
            session,
            verifier,
            rng,
            corrupted: BTreeMap::new(),
            corrupted_keys: BTreeMap::new(),
            skip_seen: BTreeSet::new(),
            targets: BTreeMap::new(),
            coin_shares: BTreeMap::new(),
            known_leaders: BTreeMap::new(),
            junk_sent: BTreeSet::new(),
            equivocation: BTreeMap::new(),
            conflicts: 0,
        }
    }

    pub fn kind(&self) -> AdversaryKind {
        self.kind
    }

    /// Parties corrupted before the run starts, with their behavior.
    pub fn initial_corruption(&mut self) -> Vec<(PartyId, Behavior)> {
        let behavior = match self.kind {
            AdversaryKind::Fair | AdversaryKind::Adaptive => return Vec::new(),
            AdversaryKind::Crash => Behavior::Silent,
            AdversaryKind::Equivocate => Behavior::Equivocator,
            AdversaryKind::DelayLeader => Behavior::Puppet,
        };
        let mut picked: Vec<PartyId> = sample(&mut self.rng, self.quorum.n, self.quorum.f)
            .into_iter()
            .map(PartyId::from)
            .collect();
        picked.sort();
        for &p in &picked {
            self.corrupted.insert(p, behavior);
        }
        picked.into_iter().map(|p| (p, behavior)).collect()
    }

    /// Hands over the key material of a corrupted party.
    pub fn take_keys(&mut self, keys: PartyKeys) {
        assert!(self.corrupted.contains_key(&keys.id()), "adversary only holds corrupted keys");
        self.corrupted_keys.insert(keys.id(), keys);
    }

    pub fn is_corrupted(&self, p: PartyId) -> bool {
        self.corrupted.contains_key(&p)
    }

    pub fn corrupted(&self) -> impl Iterator<Item = PartyId> + '_ {
        self.corrupted.keys().copied()
    }

    /// Number of times an equivocating sender obtained valid threshold
    /// signatures on two different values of one instance.
    pub fn provability_conflicts(&self) -> u64 {
        self.conflicts
    }

    /// Input a corrupted proposer uses: even, distinct from honest inputs.
    pub fn byzantine_payload(p: PartyId) -> u64 {
        5000 + 2 * p.0 as u64
    }

    /// A blind guess at the leader of `view`. Without `f + 1` coin shares
    /// the adversary can do no better than this.
    pub fn predict_leader(&mut self, _view: View) -> PartyId {
        PartyId(self.rng.gen_range(0..self.quorum.n as u32))
    }

    /// Observes an envelope as it is sent. Returns a party to corrupt now,
    /// if the strategy wants one.
    pub fn observe_sent(&mut self, env: &Envelope) -> Option<PartyId> {
        match &env.message {
            Message::Skip { view, .. } => {
                self.skip_seen.insert(*view);
                None
            }
            Message::CoinShare { view, share } if self.kind == AdversaryKind::Adaptive => {
                let view = *view;
                if self.known_leaders.contains_key(&view) {
                    return None;
                }
                let name = election_id(&self.session, view);
                if !self.verifier.coin_share_validate(&name, env.from, share) {
                    return None;
                }
                let shares = self.coin_shares.entry(view).or_default();
                shares.insert(env.from, share.clone());
                let leader = self.verifier.coin_toss(&name, shares.values()).ok()?;
                self.known_leaders.insert(view, leader);
                if self.corrupted.len() < self.quorum.f && !self.corrupted.contains_key(&leader) {
                    self.corrupted.insert(leader, Behavior::Silent);
                    return Some(leader);
                }
                None
            }
            _ => None,
        }
    }

    /// Whether the scheduler should hold `env` back for now.
    pub fn defers(&mut self, env: &Envelope) -> bool {
        if self.kind != AdversaryKind::DelayLeader {
            return false;
        }
        let (sender, view) = match &env.message {
            Message::Send { sender, view, stage: 4, .. } | Message::Ack { sender, view, stage: 4, .. } => {
                (*sender, *view)
            }
            _ => return false,
        };
        if self.skip_seen.contains(&view) {
            return false;
        }
        self.targets_for(view).contains(&sender)
    }

    /// The honest broadcasts whose completion is starved in `view`: a fresh
    /// random guess of `f` honest parties per view.
    fn targets_for(&mut self, view: View) -> &BTreeSet<PartyId> {
        if !self.targets.contains_key(&view) {
            let honest: Vec<PartyId> = PartyId::all(self.quorum.n)
                .filter(|p| !self.corrupted.contains_key(p))
                .collect();
            let k = self.quorum.f.min(honest.len());
            let picked = sample(&mut self.rng, honest.len(), k).into_iter().map(|i| honest[i]).collect();
            self.targets.insert(view, picked);
        }
        &self.targets[&view]
    }

    /// Records an envelope delivered to a corrupted party.
    pub fn observe_delivered(&mut self, env: &Envelope) {
        if let Message::Ack { sender, view, stage: 1, share } = &env.message {
            if let Some(log) = self.equivocation.get_mut(&(*sender, *view)) {
                log.shares.push(share.clone());
                self.check_conflicts(*sender);
            }
        }
    }

    /// Rewrites what corrupted party `p`'s state machine wants to send.
    pub fn rewrite(&mut self, p: PartyId, out: Vec<Envelope>) -> Vec<Envelope> {
        match self.corrupted.get(&p) {
            None | Some(Behavior::Silent) => Vec::new(),
            Some(Behavior::Puppet) => out,
            Some(Behavior::Equivocator) => self.equivocate(p, out),
        }
    }

    fn equivocate(&mut self, p: PartyId, out: Vec<Envelope>) -> Vec<Envelope> {
        let mut result = Vec::with_capacity(out.len());
        for mut env in out {
            if let Message::Send { sender, view, stage: 1, message } = &mut env.message {
                if *sender == p {
                    let view = *view;
                    let log = self.equivocation.entry((p, view)).or_default();
                    if log.values.is_empty() {
                        let alt = Value { payload: message.value.payload + 2, tag: None };
                        log.values = vec![message.value.clone(), alt];
                    }
                    // The upper half of the parties sees the alternative value.
                    if env.to.index() >= self.quorum.n / 2 {
                        message.value = log.values[1].clone();
                    }
                    if self.junk_sent.insert((p, view)) {
                        result.extend(self.junk(p, view));
                    }
                }
            }
            result.push(env);
        }
        result
    }

    /// Invalid certificates a corrupted party sprays once per view.
    fn junk(&self, p: PartyId, view: View) -> Vec<Envelope> {
        let keys = &self.corrupted_keys[&p];
        let wrong_skip = keys.share_sign(&skip_payload(&self.session, view.next()));
        let own_skip = keys.share_sign(&skip_payload(&self.session, view));
        let lone = self
            .verifier
            .threshold_sign([&own_skip])
            .expect("single share on one payload");
        let value = Value::plain(Self::byzantine_payload(p) + 1);
        let bogus = Slot { value: value.clone(), proof: lone.clone() };
        let messages = [
            Message::SkipShare { view, share: wrong_skip },
            Message::Skip { view, proof: lone.clone() },
            Message::Done { view, value, key: KeyProof::NONE, proof: lone },
        ];
        let mut out: Vec<Envelope> = PartyId::all(self.quorum.n)
            .flat_map(|to| messages.iter().map(move |m| Envelope { from: p, to, message: m.clone() }))
            .collect();
        // A report with a forged commit; it still counts toward the barrier.
        out.extend(PartyId::all(self.quorum.n).map(|to| Envelope {
            from: p,
            to,
            message: Message::ViewChange { view, key: None, lock: Some(bogus.clone()), commit: Some(bogus.clone()) },
        }));
        out
    }

    fn check_conflicts(&mut self, p: PartyId) {
        let keys = &self.corrupted_keys[&p];
        for ((sender, view), log) in &mut self.equivocation {
            if *sender != p || log.values.len() != 2 {
                continue;
            }
            let base = vaba_core::message::broadcast_base(&self.session, p, *view);
            let inst = stage_instance(&base, 1);
            let formed = log.values.iter().filter(|v| {
                let payload = signed_payload(&inst, v);
                let own = keys.share_sign(&payload);
                let shares: Vec<&SignatureShare> = log
                    .shares
                    .iter()
                    .filter(|s| s.message_digest == payload.digest())
                    .chain(std::iter::once(&own))
                    .collect();
                self.verifier
                    .threshold_sign(shares)
                    .is_ok_and(|sig| self.verifier.threshold_validate(&payload, &sig))
            });
            if formed.count() == 2 {
                self.conflicts += 1;
                log.values.clear();
            }
        }
    }
}
