//! The per-party agreement state machine.
//!
//! Each view runs three phases:
//!
//! 1. **Broadcast.** Every party runs a staged broadcast of its current
//!    proposal and key. A sender whose broadcast completes announces it with
//!    a `done` message. `2f + 1` valid `done`s trigger a skip share, and
//!    `2f + 1` skip shares combine into a `skip` certificate that is echoed
//!    once.
//! 2. **Election.** On `skip` a party abandons every broadcast of the view
//!    and contributes its coin share.
//! 3. **View change.** Once the leader is known a party reports the leader's
//!    key / lock / commit deliveries. Received reports update `LOCK` and
//!    `KEY` and decide on a valid commit. After `2f + 1` reports the party
//!    moves on with `KEY.value`.
//!
//! Messages for views the party has not reached yet are buffered until it
//! enters them. View-change reports that arrive before the local election
//! resolves are held until it does.
//!
//! [`Party`] is sans-IO: [`Party::start`] and [`Party::handle`] return the
//! envelopes to send and the observable [`Event`]s.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use crate::crypto::{PartyKeys, SignatureShare, ThresholdSignature, Verifier};
use crate::encoding::Term;
use crate::ids::{PartyId, Quorum, View};
use crate::leader_election::Election;
use crate::message::{
    broadcast_base, election_id, skip_payload, Envelope, KeyProof, Message, Proposal, Slot,
};
use crate::staged_broadcast::{
    stage_proof_valid, SenderProgress, StageKind, StagedReceiver, StagedSender,
};
use crate::value::{AppValidator, Value};

/// `KEY = <view, value, proof>`; view 0 means "no key".
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyRecord {
    pub view: View,
    pub value: Value,
    pub proof: Option<ThresholdSignature>,
}

impl KeyRecord {
    pub fn as_proof(&self) -> KeyProof {
        KeyProof { view: self.view, proof: self.proof.clone() }
    }
}

/// Observable state changes, in the order they happened.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Event {
    EnteredView(View),
    /// Key / lock / commit delivery from `sender`'s broadcast of `view`.
    Delivered { view: View, sender: PartyId, kind: StageKind },
    /// Our own staged broadcast of `view` returned its completion proof.
    BroadcastCompleted(View),
    SkipSet(View),
    ElectionInvoked(View),
    LeaderElected { view: View, leader: PartyId },
    LockRaised(View),
    KeyAdopted { view: View, value: Value },
    /// A valid commit report was processed. The first one is the decision.
    CommitObserved { view: View, value: Value },
    Decided { view: View, value: Value },
}

#[derive(Debug, Default)]
pub struct Step {
    pub messages: Vec<Envelope>,
    pub events: Vec<Event>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Broadcast,
    Election,
    ViewChange,
    Finished,
}

#[derive(Clone, Debug)]
struct Report {
    key: Option<Slot>,
    lock: Option<Slot>,
    commit: Option<Slot>,
}

struct ViewState {
    phase: Phase,
    proposal: Value,
    proposal_key: KeyProof,
    sender: StagedSender<KeyProof>,
    receivers: Vec<StagedReceiver<KeyProof>>,
    done_from: BTreeSet<PartyId>,
    skip_share_sent: bool,
    skip_shares: BTreeMap<PartyId, SignatureShare>,
    skip: bool,
    skip_sent: bool,
    election: Election,
    d_key: BTreeMap<PartyId, Slot>,
    d_lock: BTreeMap<PartyId, Slot>,
    d_commit: BTreeMap<PartyId, Slot>,
    reports_from: BTreeSet<PartyId>,
    held_reports: Vec<(PartyId, Report)>,
}

#[derive(Clone, Debug)]
pub struct PartyConfig {
    pub id: PartyId,
    pub quorum: Quorum,
    /// Agreement instance id; prefixes every signed tuple.
    pub session: Term,
    pub input: Value,
}

pub struct Party {
    id: PartyId,
    quorum: Quorum,
    session: Term,
    keys: PartyKeys,
    verifier: Arc<Verifier>,
    app: Arc<dyn AppValidator>,
    input: Value,
    lock: View,
    key: KeyRecord,
    view: View,
    decided: Option<(View, Value)>,
    views: BTreeMap<View, ViewState>,
    leaders: BTreeMap<View, PartyId>,
    future: BTreeMap<View, Vec<(PartyId, Message)>>,
}

/// Read-only inputs of the key-locking check, borrowed apart from the
/// mutable view table.
struct KeyCheck<'a> {
    verifier: &'a Verifier,
    app: &'a dyn AppValidator,
    session: &'a Term,
    leaders: &'a BTreeMap<View, PartyId>,
    lock: View,
    current: View,
}

impl KeyCheck<'_> {
    fn check(&self, value: &Value, key: &KeyProof) -> bool {
        if !self.app.validate(value) {
            return false;
        }
        if key.view == View::NONE {
            return key.proof.is_none() && key.view >= self.lock;
        }
        // A key names a past view whose leader we already know.
        if key.view >= self.current {
            return false;
        }
        let (Some(leader), Some(proof)) = (self.leaders.get(&key.view), key.proof.as_ref()) else {
            return false;
        };
        let base = broadcast_base(self.session, *leader, key.view);
        stage_proof_valid(self.verifier, &base, 1, value, proof) && key.view >= self.lock
    }
}

impl Party {
    pub fn new(
        config: PartyConfig,
        keys: PartyKeys,
        verifier: Arc<Verifier>,
        app: Arc<dyn AppValidator>,
    ) -> Self {
        assert_eq!(keys.id(), config.id, "key material belongs to another party");
        let key = KeyRecord { view: View::NONE, value: config.input.clone(), proof: None };
        Party {
            id: config.id,
            quorum: config.quorum,
            session: config.session,
            keys,
            verifier,
            app,
            input: config.input,
            lock: View::NONE,
            key,
            view: View::NONE,
            decided: None,
            views: BTreeMap::new(),
            leaders: BTreeMap::new(),
            future: BTreeMap::new(),
        }
    }

    pub fn id(&self) -> PartyId {
        self.id
    }

    pub fn input(&self) -> &Value {
        &self.input
    }

    pub fn lock(&self) -> View {
        self.lock
    }

    pub fn key(&self) -> &KeyRecord {
        &self.key
    }

    pub fn view(&self) -> View {
        self.view
    }

    pub fn decided(&self) -> Option<&(View, Value)> {
        self.decided.as_ref()
    }

    pub fn leader(&self, view: View) -> Option<PartyId> {
        self.leaders.get(&view).copied()
    }

    pub fn phase(&self) -> Option<Phase> {
        self.views.get(&self.view).map(|s| s.phase)
    }

    pub fn skip_set(&self, view: View) -> bool {
        self.views.get(&view).is_some_and(|s| s.skip)
    }

    /// External validity of a proposal `<v, <j_key, sigma>>` for the
    /// current view, including the key-locking rule.
    pub fn ex_bc_validation(&self, value: &Value, key: &KeyProof) -> bool {
        self.key_check().check(value, key)
    }

    fn key_check(&self) -> KeyCheck<'_> {
        KeyCheck {
            verifier: &self.verifier,
            app: &*self.app,
            session: &self.session,
            leaders: &self.leaders,
            lock: self.lock,
            current: self.view,
        }
    }

    /// Enters view 1 with the party's input and an empty key.
    pub fn start(&mut self) -> Step {
        let mut step = Step::default();
        if self.view == View::NONE {
            let mut queue = VecDeque::new();
            self.enter_view(View::FIRST, self.input.clone(), KeyProof::NONE, &mut step, &mut queue);
            self.drain(queue, &mut step);
        }
        step
    }

    pub fn handle(&mut self, from: PartyId, message: Message) -> Step {
        let mut step = Step::default();
        self.drain(VecDeque::from([(from, message)]), &mut step);
        step
    }

    fn drain(&mut self, mut queue: VecDeque<(PartyId, Message)>, step: &mut Step) {
        while let Some((from, message)) = queue.pop_front() {
            self.dispatch(from, message, step, &mut queue);
        }
    }

    fn dispatch(
        &mut self,
        from: PartyId,
        message: Message,
        step: &mut Step,
        queue: &mut VecDeque<(PartyId, Message)>,
    ) {
        if from.index() >= self.quorum.n {
            return;
        }
        let view = message.view();
        if view == View::NONE {
            return;
        }
        if view > self.view {
            self.future.entry(view).or_default().push((from, message));
            return;
        }
        let current = view == self.view;
        match message {
            Message::Send { sender, stage, message, .. } if current => {
                self.on_send(from, sender, view, stage, &message, step)
            }
            Message::Ack { sender, stage, share, .. } if current && sender == self.id => {
                self.on_ack(from, view, stage, &share, step)
            }
            Message::Done { value, key, proof, .. } if current => {
                self.on_done(from, view, value, key, &proof, step)
            }
            Message::SkipShare { share, .. } if current => self.on_skip_share(from, view, &share, step),
            // Skip echo is served for the current and the previous view.
            Message::Skip { proof, .. } if view.0 + 1 >= self.view.0 => self.on_skip(view, proof, step, queue),
            Message::CoinShare { share, .. } if current => {
                let leader = self
                    .views
                    .get_mut(&view)
                    .and_then(|s| s.election.on_share(&self.verifier, from, &share));
                if let Some(leader) = leader {
                    self.on_leader(view, leader, step, queue);
                }
            }
            Message::ViewChange { key, lock, commit, .. } => {
                self.on_view_change(from, view, Report { key, lock, commit }, step, queue)
            }
            _ => {}
        }
    }

    fn send_all(&self, message: Message, step: &mut Step) {
        for to in PartyId::all(self.quorum.n) {
            step.messages.push(Envelope { from: self.id, to, message: message.clone() });
        }
    }

    fn enter_view(
        &mut self,
        view: View,
        value: Value,
        key: KeyProof,
        step: &mut Step,
        queue: &mut VecDeque<(PartyId, Message)>,
    ) {
        self.view = view;
        step.events.push(Event::EnteredView(view));
        let receivers = PartyId::all(self.quorum.n)
            .map(|k| StagedReceiver::new(broadcast_base(&self.session, k, view), k))
            .collect();
        let (sender, first) = StagedSender::start(
            broadcast_base(&self.session, self.id, view),
            value.clone(),
            key.clone(),
            &self.verifier,
        );
        self.views.insert(
            view,
            ViewState {
                phase: Phase::Broadcast,
                proposal: value,
                proposal_key: key,
                sender,
                receivers,
                done_from: BTreeSet::new(),
                skip_share_sent: false,
                skip_shares: BTreeMap::new(),
                skip: false,
                skip_sent: false,
                election: Election::new(election_id(&self.session, view), &self.verifier),
                d_key: BTreeMap::new(),
                d_lock: BTreeMap::new(),
                d_commit: BTreeMap::new(),
                reports_from: BTreeSet::new(),
                held_reports: Vec::new(),
            },
        );
        self.send_all(Message::Send { sender: self.id, view, stage: 1, message: first }, step);
        if let Some(buffered) = self.future.remove(&view) {
            queue.extend(buffered);
        }
    }

    fn on_send(
        &mut self,
        from: PartyId,
        sender: PartyId,
        view: View,
        stage: u8,
        message: &Proposal,
        step: &mut Step,
    ) {
        let check = KeyCheck {
            verifier: &self.verifier,
            app: &*self.app,
            session: &self.session,
            leaders: &self.leaders,
            lock: self.lock,
            current: self.view,
        };
        let Some(state) = self.views.get_mut(&view) else { return };
        let Some(receiver) = state.receivers.get_mut(sender.index()) else { return };
        let Some(acked) = receiver.on_send(&self.keys, &self.verifier, stage, from, message, |v, k| {
            check.check(v, k)
        }) else {
            return;
        };
        if let Some(delivery) = acked.delivery {
            let slot = Slot { value: delivery.value, proof: delivery.proof };
            let table = match delivery.kind {
                StageKind::Key => &mut state.d_key,
                StageKind::Lock => &mut state.d_lock,
                StageKind::Commit => &mut state.d_commit,
            };
            table.insert(sender, slot);
            step.events.push(Event::Delivered { view, sender, kind: delivery.kind });
        }
        step.messages.push(Envelope {
            from: self.id,
            to: sender,
            message: Message::Ack { sender, view, stage, share: acked.ack },
        });
    }

    fn on_ack(&mut self, from: PartyId, view: View, stage: u8, share: &SignatureShare, step: &mut Step) {
        let Some(state) = self.views.get_mut(&view) else { return };
        if state.phase != Phase::Broadcast {
            return;
        }
        match state.sender.on_ack(&self.verifier, stage, from, share) {
            Some(SenderProgress::NextStage { stage, message }) => {
                self.send_all(Message::Send { sender: self.id, view, stage, message }, step);
            }
            Some(SenderProgress::Completed(proof)) => {
                step.events.push(Event::BroadcastCompleted(view));
                if !state.skip {
                    let done = Message::Done {
                        view,
                        value: state.proposal.clone(),
                        key: state.proposal_key.clone(),
                        proof,
                    };
                    self.send_all(done, step);
                }
            }
            None => {}
        }
    }

    fn on_done(
        &mut self,
        from: PartyId,
        view: View,
        value: Value,
        _key: KeyProof,
        proof: &ThresholdSignature,
        step: &mut Step,
    ) {
        let base = broadcast_base(&self.session, from, view);
        let Some(state) = self.views.get_mut(&view) else { return };
        if state.done_from.contains(&from) || !stage_proof_valid(&self.verifier, &base, 4, &value, proof) {
            return;
        }
        state.done_from.insert(from);
        if state.done_from.len() == self.quorum.strong() && !state.skip_share_sent {
            state.skip_share_sent = true;
            let share = self.keys.share_sign(&skip_payload(&self.session, view));
            self.send_all(Message::SkipShare { view, share }, step);
        }
    }

    fn on_skip_share(&mut self, from: PartyId, view: View, share: &SignatureShare, step: &mut Step) {
        let payload = skip_payload(&self.session, view);
        let Some(state) = self.views.get_mut(&view) else { return };
        if state.skip_shares.contains_key(&from) || !self.verifier.share_validate(&payload, from, share) {
            return;
        }
        state.skip_shares.insert(from, share.clone());
        if state.skip_shares.len() == self.quorum.strong() && !state.skip_sent {
            state.skip_sent = true;
            let proof = self
                .verifier
                .threshold_sign(state.skip_shares.values())
                .expect("validated shares on one payload");
            self.send_all(Message::Skip { view, proof }, step);
        }
    }

    fn on_skip(
        &mut self,
        view: View,
        proof: ThresholdSignature,
        step: &mut Step,
        queue: &mut VecDeque<(PartyId, Message)>,
    ) {
        if !self.verifier.threshold_validate(&skip_payload(&self.session, view), &proof) {
            return;
        }
        let Some(state) = self.views.get_mut(&view) else { return };
        let echo = !std::mem::replace(&mut state.skip_sent, true);
        let newly_set = !std::mem::replace(&mut state.skip, true);
        let enter = newly_set && view == self.view && state.phase == Phase::Broadcast;
        if echo {
            self.send_all(Message::Skip { view, proof }, step);
        }
        if newly_set {
            step.events.push(Event::SkipSet(view));
        }
        if enter {
            self.enter_election(view, step, queue);
        }
    }

    fn enter_election(&mut self, view: View, step: &mut Step, queue: &mut VecDeque<(PartyId, Message)>) {
        let state = self.views.get_mut(&view).expect("current view has state");
        state.phase = Phase::Election;
        for r in &mut state.receivers {
            r.abandon();
        }
        state.sender.halt();
        step.events.push(Event::ElectionInvoked(view));
        let invocation = state
            .election
            .invoke(&self.keys, &self.verifier)
            .expect("election invoked once per view");
        for to in PartyId::all(self.quorum.n).filter(|&p| p != self.id) {
            step.messages.push(Envelope {
                from: self.id,
                to,
                message: Message::CoinShare { view, share: invocation.share.clone() },
            });
        }
        // Resolves here when enough coin shares arrived ahead of our own.
        if let Some(leader) = invocation.leader {
            self.on_leader(view, leader, step, queue);
        }
    }

    fn on_leader(
        &mut self,
        view: View,
        leader: PartyId,
        step: &mut Step,
        queue: &mut VecDeque<(PartyId, Message)>,
    ) {
        self.leaders.insert(view, leader);
        step.events.push(Event::LeaderElected { view, leader });
        let state = self.views.get_mut(&view).expect("current view has state");
        state.phase = Phase::ViewChange;
        let report = Message::ViewChange {
            view,
            key: state.d_key.get(&leader).cloned(),
            lock: state.d_lock.get(&leader).cloned(),
            commit: state.d_commit.get(&leader).cloned(),
        };
        let held = std::mem::take(&mut state.held_reports);
        self.send_all(report, step);
        for (from, report) in held {
            self.on_view_change(from, view, report, step, queue);
        }
    }

    fn on_view_change(
        &mut self,
        from: PartyId,
        view: View,
        report: Report,
        step: &mut Step,
        queue: &mut VecDeque<(PartyId, Message)>,
    ) {
        let Some(leader) = self.leaders.get(&view).copied() else {
            if let Some(state) = self.views.get_mut(&view) {
                state.held_reports.push((from, report));
            }
            return;
        };
        let Some(state) = self.views.get(&view) else { return };
        if state.reports_from.contains(&from) {
            return;
        }
        let base = broadcast_base(&self.session, leader, view);
        let valid = |slot: &Option<Slot>, stage: u8| {
            slot.as_ref()
                .filter(|s| stage_proof_valid(&self.verifier, &base, stage, &s.value, &s.proof))
                .cloned()
        };
        let commit = valid(&report.commit, 3);
        let lock = valid(&report.lock, 2);
        let key = valid(&report.key, 1);

        if let Some(slot) = commit {
            step.events.push(Event::CommitObserved { view, value: slot.value.clone() });
            if self.decided.is_none() {
                self.decided = Some((view, slot.value.clone()));
                step.events.push(Event::Decided { view, value: slot.value });
            }
        }
        if lock.is_some() && view > self.lock {
            self.lock = view;
            step.events.push(Event::LockRaised(view));
        }
        if let Some(slot) = key {
            if view > self.key.view {
                self.key = KeyRecord { view, value: slot.value.clone(), proof: Some(slot.proof) };
                step.events.push(Event::KeyAdopted { view, value: slot.value });
            } else if view == self.key.view {
                debug_assert_eq!(slot.value, self.key.value, "two keys for one view");
            }
        }

        let state = self.views.get_mut(&view).expect("checked above");
        state.reports_from.insert(from);
        if view == self.view
            && state.phase == Phase::ViewChange
            && state.reports_from.len() >= self.quorum.strong()
        {
            state.phase = Phase::Finished;
            let value = self.key.value.clone();
            let key = self.key.as_proof();
            self.enter_view(view.next(), value, key, step, queue);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::Dealer;
    use crate::message::Slot;
    use crate::provable_broadcast::signed_payload;
    use crate::staged_broadcast::stage_instance;
    use crate::value::{AlwaysValid, EvenPayload};

    fn session() -> Term {
        Term::bytes("vaba")
    }

    fn party(d: &Dealer, i: u32, input: u64, app: Arc<dyn AppValidator>) -> Party {
        let config = PartyConfig {
            id: PartyId(i),
            quorum: d.quorum(),
            session: session(),
            input: Value::plain(input),
        };
        Party::new(config, d.party_keys(PartyId(i)), Arc::new(d.verifier()), app)
    }

    /// Stage-`stage` signature on `value` for `sender`'s broadcast of `view`.
    fn stage_sig(d: &Dealer, sender: u32, view: u64, stage: u8, value: u64) -> ThresholdSignature {
        let base = broadcast_base(&session(), PartyId(sender), View(view));
        let payload = signed_payload(&stage_instance(&base, stage), &Value::plain(value));
        let shares: Vec<_> = (0..3).map(|i| d.party_keys(PartyId(i)).share_sign(&payload)).collect();
        d.verifier().threshold_sign(&shares).unwrap()
    }

    /// Runs all parties with FIFO delivery until quiet or everyone decided.
    fn run_fifo(parties: &mut [Party]) -> usize {
        let mut queue: VecDeque<Envelope> = VecDeque::new();
        for p in parties.iter_mut() {
            queue.extend(p.start().messages);
        }
        let mut delivered = 0;
        while let Some(env) = queue.pop_front() {
            delivered += 1;
            let step = parties[env.to.index()].handle(env.from, env.message);
            queue.extend(step.messages);
            if parties.iter().all(|p| p.decided().is_some()) {
                break;
            }
            assert!(delivered < 100_000, "no progress");
        }
        delivered
    }

    #[test]
    fn fifo_run_decides() {
        let d = Dealer::setup(4, 1, 21).unwrap();
        let app: Arc<dyn AppValidator> = Arc::new(EvenPayload);
        let mut parties: Vec<_> = (0..4).map(|i| party(&d, i, 10 + 2 * i as u64, app.clone())).collect();
        run_fifo(&mut parties);
        let decisions: Vec<_> = parties.iter().map(|p| p.decided().unwrap().1.clone()).collect();
        assert!(decisions.windows(2).all(|w| w[0] == w[1]));
        assert!(decisions[0].payload % 2 == 0);
    }

    #[test]
    fn view_one_key_validation() {
        let d = Dealer::setup(4, 1, 3).unwrap();
        let mut p = party(&d, 0, 2, Arc::new(EvenPayload));
        p.start();
        assert!(p.ex_bc_validation(&Value::plain(4), &KeyProof::NONE));
        assert!(!p.ex_bc_validation(&Value::plain(5), &KeyProof::NONE));
        // no key may not smuggle a proof
        let stray = KeyProof { view: View::NONE, proof: Some(stage_sig(&d, 1, 1, 1, 4)) };
        assert!(!p.ex_bc_validation(&Value::plain(4), &stray));
        // a key naming the current (unfinished) view is never valid
        let early = KeyProof { view: View(1), proof: Some(stage_sig(&d, 1, 1, 1, 4)) };
        assert!(!p.ex_bc_validation(&Value::plain(4), &early));
    }

    /// Drives party 0 through views 1..=3 by hand with crafted
    /// view-change reports and leaders, then checks key validation.
    fn party_in_view_3(d: &Dealer, lock_at: Option<u64>) -> Party {
        let mut p = party(d, 0, 2, Arc::new(AlwaysValid));
        p.start();
        for view in 1..=2u64 {
            force_leader(d, &mut p, view);
            let l = p.leader(View(view)).unwrap().0;
            let lock = (lock_at == Some(view)).then(|| Slot { value: Value::plain(4), proof: stage_sig(d, l, view, 2, 4) });
            let key = Some(Slot { value: Value::plain(4), proof: stage_sig(d, l, view, 1, 4) });
            for from in 0..3 {
                p.handle(
                    PartyId(from),
                    Message::ViewChange { view: View(view), key: key.clone(), lock: lock.clone(), commit: None },
                );
            }
            assert_eq!(p.view(), View(view + 1));
        }
        p
    }

    /// Completes the election of `view` at `p`: delivers a skip
    /// certificate and one foreign coin share. The leader is whatever the
    /// coin says; callers read it back with `p.leader(view)`.
    fn force_leader(d: &Dealer, p: &mut Party, view: u64) {
        let payload = skip_payload(&session(), View(view));
        let shares: Vec<_> = (0..3).map(|i| d.party_keys(PartyId(i)).share_sign(&payload)).collect();
        let skip = d.verifier().threshold_sign(&shares).unwrap();
        p.handle(PartyId(1), Message::Skip { view: View(view), proof: skip });
        let eid = election_id(&session(), View(view));
        let share = d.party_keys(PartyId(1)).coin_share(&eid);
        p.handle(PartyId(1), Message::CoinShare { view: View(view), share });
        assert!(p.leader(View(view)).is_some());
    }

    #[test]
    fn key_validation_uses_key_view_leader_and_lock() {
        let d = Dealer::setup(4, 1, 3).unwrap();
        let p = party_in_view_3(&d, Some(2));
        assert_eq!(p.lock(), View(2));
        let l1 = p.leader(View(1)).unwrap().0;
        let l2 = p.leader(View(2)).unwrap().0;
        let key = |view: u64, leader: u32, stage: u8| KeyProof {
            view: View(view),
            proof: Some(stage_sig(&d, leader, view, stage, 4)),
        };
        // key of view 2 (>= LOCK) from view 2's leader
        assert!(p.ex_bc_validation(&Value::plain(4), &key(2, l2, 1)));
        // key view 1 < LOCK = 2
        assert!(!p.ex_bc_validation(&Value::plain(4), &key(1, l1, 1)));
        // stage-2 signature instead of stage-1
        assert!(!p.ex_bc_validation(&Value::plain(4), &key(2, l2, 2)));
        // signature from a non-leader's broadcast
        let other = (l2 + 1) % 4;
        assert!(!p.ex_bc_validation(&Value::plain(4), &key(2, other, 1)));
        // key on a different value
        assert!(!p.ex_bc_validation(&Value::plain(6), &key(2, l2, 1)));
        assert!(!p.ex_bc_validation(&Value::plain(4), &KeyProof::NONE));
    }

    #[test]
    fn lock_and_key_monotone_under_stale_reports() {
        let d = Dealer::setup(4, 1, 3).unwrap();
        let mut p = party_in_view_3(&d, Some(2));
        let (lock, key_view) = (p.lock(), p.key().view);
        assert_eq!(key_view, View(2));
        let l1 = p.leader(View(1)).unwrap().0;
        // a late view-1 report from the fourth party must not lower anything
        p.handle(
            PartyId(3),
            Message::ViewChange {
                view: View(1),
                key: Some(Slot { value: Value::plain(4), proof: stage_sig(&d, l1, 1, 1, 4) }),
                lock: Some(Slot { value: Value::plain(4), proof: stage_sig(&d, l1, 1, 2, 4) }),
                commit: None,
            },
        );
        assert_eq!((p.lock(), p.key().view), (lock, key_view));
    }

    #[test]
    fn commit_report_decides_and_bad_slots_ignored() {
        let d = Dealer::setup(4, 1, 3).unwrap();
        let mut p = party(&d, 0, 2, Arc::new(AlwaysValid));
        p.start();
        force_leader(&d, &mut p, 1);
        let l = p.leader(View(1)).unwrap().0;
        // commit slot carrying a stage-2 proof is rejected
        let step = p.handle(
            PartyId(1),
            Message::ViewChange {
                view: View(1),
                key: None,
                lock: None,
                commit: Some(Slot { value: Value::plain(8), proof: stage_sig(&d, l, 1, 2, 8) }),
            },
        );
        assert!(p.decided().is_none());
        assert!(!step.events.iter().any(|e| matches!(e, Event::Decided { .. })));
        let step = p.handle(
            PartyId(2),
            Message::ViewChange {
                view: View(1),
                key: None,
                lock: None,
                commit: Some(Slot { value: Value::plain(8), proof: stage_sig(&d, l, 1, 3, 8) }),
            },
        );
        assert_eq!(p.decided(), Some(&(View(1), Value::plain(8))));
        assert!(step.events.contains(&Event::Decided { view: View(1), value: Value::plain(8) }));
    }

    #[test]
    fn reports_held_until_leader_known() {
        let d = Dealer::setup(4, 1, 3).unwrap();
        let mut p = party(&d, 0, 2, Arc::new(AlwaysValid));
        p.start();
        for from in 1..4 {
            p.handle(PartyId(from), Message::ViewChange { view: View(1), key: None, lock: None, commit: None });
        }
        assert_eq!(p.view(), View(1));
        force_leader(&d, &mut p, 1);
        assert_eq!(p.view(), View(2));
    }

    #[test]
    fn future_messages_buffered() {
        let d = Dealer::setup(4, 1, 3).unwrap();
        let mut p = party(&d, 0, 2, Arc::new(AlwaysValid));
        p.start();
        let msg = Message::Send {
            sender: PartyId(1),
            view: View(2),
            stage: 1,
            message: Proposal {
                value: Value::plain(4),
                proof: crate::staged_broadcast::StagedProof { external: KeyProof::NONE, internal: None },
            },
        };
        assert!(p.handle(PartyId(1), msg).messages.is_empty());
    }

    #[test]
    fn skip_echoed_once_and_forgery_ignored() {
        let d = Dealer::setup(4, 1, 3).unwrap();
        let mut p = party(&d, 0, 2, Arc::new(AlwaysValid));
        p.start();
        let payload = skip_payload(&session(), View(1));
        let two: Vec<_> = (0..2).map(|i| d.party_keys(PartyId(i)).share_sign(&payload)).collect();
        let forged = d.verifier().threshold_sign(&two).unwrap();
        let step = p.handle(PartyId(1), Message::Skip { view: View(1), proof: forged });
        assert!(step.messages.is_empty());
        assert!(!p.skip_set(View(1)));

        let three: Vec<_> = (0..3).map(|i| d.party_keys(PartyId(i)).share_sign(&payload)).collect();
        let skip = d.verifier().threshold_sign(&three).unwrap();
        let step = p.handle(PartyId(1), Message::Skip { view: View(1), proof: skip.clone() });
        let skips = step.messages.iter().filter(|e| e.message.kind() == "skip").count();
        assert_eq!(skips, 4);
        assert!(step.events.contains(&Event::ElectionInvoked(View(1))));
        let coins = step.messages.iter().filter(|e| e.message.kind() == "coin-share").count();
        assert_eq!(coins, 3);
        let again = p.handle(PartyId(2), Message::Skip { view: View(1), proof: skip });
        assert!(again.messages.is_empty());
    }

    #[test]
    fn done_counting() {
        let d = Dealer::setup(4, 1, 3).unwrap();
        let mut p = party(&d, 0, 2, Arc::new(AlwaysValid));
        p.start();
        let done = |from: u32, stage: u8| Message::Done {
            view: View(1),
            value: Value::plain(6),
            key: KeyProof::NONE,
            proof: stage_sig(&d, from, 1, stage, 6),
        };
        let count = |s: &Step| s.messages.iter().filter(|e| e.message.kind() == "skip-share").count();
        assert_eq!(count(&p.handle(PartyId(1), done(1, 4))), 0);
        assert_eq!(count(&p.handle(PartyId(1), done(1, 4))), 0);
        // stage-3 proof is not a completion proof
        assert_eq!(count(&p.handle(PartyId(2), done(2, 3))), 0);
        assert_eq!(count(&p.handle(PartyId(2), done(2, 4))), 0);
        // proof from another sender's broadcast
        assert_eq!(count(&p.handle(PartyId(3), done(1, 4))), 0);
        assert_eq!(count(&p.handle(PartyId(3), done(3, 4))), 4);
        assert_eq!(count(&p.handle(PartyId(0), done(0, 4))), 0);
    }
}
