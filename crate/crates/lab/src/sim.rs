//! The event loop: one run owns every party, the pending-envelope pool,
//! the scheduler rng and the adversary.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use vaba_core::engine::Step;
use vaba_core::staged_broadcast::StageKind;
use vaba_core::{
    AppValidator, Dealer, Envelope, Event, Party, PartyConfig, PartyId, Quorum, Term, Value, View,
};

use crate::adversary::{Adversary, Behavior};
use crate::config::{AdversaryKind, ExperimentConfig};
use crate::metrics::{RunMetrics, Violations};
use crate::SimError;

/// One delivered envelope.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TraceRecord {
    pub t: u64,
    pub view: u64,
    pub kind: &'static str,
    pub from: u32,
    pub to: u32,
    pub words: u64,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub metrics: RunMetrics,
    /// Empty unless tracing was requested.
    pub trace: Vec<TraceRecord>,
}

struct Pending {
    sent_at: u64,
    envelope: Envelope,
}

/// Input of honest party `p`.
pub fn honest_payload(p: PartyId) -> u64 {
    1000 + 2 * p.0 as u64
}

pub fn session(seed: u64) -> Term {
    Term::tuple([Term::bytes("vaba-lab"), Term::Int(seed)])
}

/// Runs one execution. Deterministic in `(config, seed)`.
pub fn run_one(config: &ExperimentConfig, seed: u64, trace: bool) -> Result<RunOutcome, SimError> {
    let quorum = config.validate()?;
    Sim::new(config, quorum, seed, trace)?.run()
}

struct Sim {
    quorum: Quorum,
    seed: u64,
    budget: u64,
    max_age: u64,
    tracing: bool,
    rng: ChaCha8Rng,
    app: Arc<dyn AppValidator>,
    adversary: Adversary,
    parties: Vec<Party>,
    /// Parties that proposed as corrupted; later corruptions proposed honestly.
    initially_corrupted: BTreeSet<PartyId>,
    pending: Vec<Pending>,
    t: u64,
    max_delay: u64,
    trace: Vec<TraceRecord>,
    words: BTreeMap<u64, u64>,
    // ground truth
    lock_seen: Vec<View>,
    key_seen: Vec<View>,
    decisions: BTreeMap<PartyId, (View, Value)>,
    last_decision_at: u64,
    agreed: Option<Value>,
    entered: BTreeMap<View, BTreeSet<PartyId>>,
    commits: BTreeMap<(View, PartyId), BTreeSet<PartyId>>,
    elections_checked: BTreeSet<View>,
    elections: u64,
    violations: Violations,
}

impl Sim {
    fn new(config: &ExperimentConfig, quorum: Quorum, seed: u64, tracing: bool) -> Result<Self, SimError> {
        let mut master = ChaCha8Rng::seed_from_u64(seed);
        let dealer = Dealer::setup(quorum.n, quorum.f, master.gen())?;
        let verifier = Arc::new(dealer.verifier());
        let app = config.validator.build(&verifier);
        let session = session(seed);
        let mut adversary = Adversary::new(
            config.adversary,
            quorum,
            session.clone(),
            verifier.clone(),
            ChaCha8Rng::seed_from_u64(master.gen()),
        );
        let rng = ChaCha8Rng::seed_from_u64(master.gen());

        let corrupted: BTreeMap<PartyId, Behavior> = adversary.initial_corruption().into_iter().collect();
        let value = |payload| match config.validator {
            vaba_core::ValidatorKind::Signed => dealer.tagged_value(payload),
            _ => Value::plain(payload),
        };
        let mut parties = Vec::with_capacity(quorum.n);
        for p in PartyId::all(quorum.n) {
            let input = if corrupted.contains_key(&p) {
                adversary.take_keys(dealer.party_keys(p));
                value(Adversary::byzantine_payload(p))
            } else {
                value(honest_payload(p))
            };
            let cfg = PartyConfig { id: p, quorum, session: session.clone(), input };
            parties.push(Party::new(cfg, dealer.party_keys(p), verifier.clone(), app.clone()));
        }

        Ok(Sim {
            quorum,
            seed,
            budget: config.halt.event_budget,
            max_age: config.halt.max_age(quorum.n),
            tracing,
            rng,
            app,
            adversary,
            initially_corrupted: corrupted.keys().copied().collect(),
            parties,
            pending: Vec::new(),
            t: 0,
            max_delay: 0,
            trace: Vec::new(),
            words: BTreeMap::new(),
            lock_seen: vec![View::NONE; quorum.n],
            key_seen: vec![View::NONE; quorum.n],
            decisions: BTreeMap::new(),
            last_decision_at: 0,
            agreed: None,
            entered: BTreeMap::new(),
            commits: BTreeMap::new(),
            elections_checked: BTreeSet::new(),
            elections: 0,
            violations: Violations::default(),
        })
    }

    fn honest(&self, p: PartyId) -> bool {
        !self.adversary.is_corrupted(p)
    }

    fn all_decided(&self) -> bool {
        PartyId::all(self.quorum.n).filter(|&p| self.honest(p)).all(|p| self.decisions.contains_key(&p))
    }

    fn run(mut self) -> Result<RunOutcome, SimError> {
        for p in PartyId::all(self.quorum.n) {
            let step = self.parties[p.index()].start();
            self.absorb(p, step);
        }
        while !self.all_decided() {
            if self.t >= self.budget {
                return Err(SimError::BudgetExhausted { seed: self.seed, budget: self.budget });
            }
            let Some(index) = self.next_index() else {
                return Err(SimError::Quiescent { seed: self.seed, events: self.t });
            };
            let Pending { sent_at, envelope } = self.pending.remove(index);
            self.t += 1;
            self.max_delay = self.max_delay.max(self.t - sent_at);
            if self.tracing {
                self.trace.push(TraceRecord {
                    t: self.t,
                    view: envelope.message.view().0,
                    kind: envelope.message.kind(),
                    from: envelope.from.0,
                    to: envelope.to.0,
                    words: envelope.words(),
                });
            }
            self.deliver(envelope);
        }
        Ok(self.finish())
    }

    /// Oldest envelope past the aging bound first; otherwise uniform among
    /// envelopes the strategy does not hold back.
    fn next_index(&mut self) -> Option<usize> {
        let oldest = self.pending.first()?;
        if self.t - oldest.sent_at > self.max_age {
            return Some(0);
        }
        if self.adversary.kind() != AdversaryKind::DelayLeader {
            return Some(self.rng.gen_range(0..self.pending.len()));
        }
        let open: Vec<usize> = (0..self.pending.len())
            .filter(|&i| !self.adversary.defers(&self.pending[i].envelope))
            .collect();
        if open.is_empty() {
            Some(self.rng.gen_range(0..self.pending.len()))
        } else {
            Some(open[self.rng.gen_range(0..open.len())])
        }
    }

    fn deliver(&mut self, envelope: Envelope) {
        let to = envelope.to;
        if !self.honest(to) {
            self.adversary.observe_delivered(&envelope);
        }
        let step = self.parties[to.index()].handle(envelope.from, envelope.message);
        self.absorb(to, step);
    }

    fn absorb(&mut self, p: PartyId, step: Step) {
        let Step { messages, events } = step;
        let honest = self.honest(p);
        if honest {
            for event in &events {
                self.check_event(p, event);
            }
            self.check_monotone(p);
        }
        let messages = if honest { messages } else { self.adversary.rewrite(p, messages) };
        for envelope in messages {
            if honest {
                *self.words.entry(envelope.message.view().0).or_default() += envelope.words();
            }
            self.adversary.observe_sent(&envelope);
            self.pending.push(Pending { sent_at: self.t, envelope });
        }
    }

    fn check_monotone(&mut self, p: PartyId) {
        let party = &self.parties[p.index()];
        let i = p.index();
        if party.lock() < self.lock_seen[i] || party.key().view < self.key_seen[i] {
            self.violations.monotonicity += 1;
        }
        self.lock_seen[i] = party.lock();
        self.key_seen[i] = party.key().view;
    }

    fn check_event(&mut self, p: PartyId, event: &Event) {
        let weak = self.quorum.weak();
        match event {
            Event::EnteredView(view) => {
                if view.0 >= 3 {
                    let moved = self.entered.get(&View(view.0 - 1)).map_or(0, |s| s.len());
                    if moved < weak {
                        self.violations.view_skipping += 1;
                    }
                }
                self.entered.entry(*view).or_default().insert(p);
            }
            Event::Delivered { view, sender, kind: StageKind::Commit } => {
                self.commits.entry((*view, *sender)).or_default().insert(p);
            }
            Event::ElectionInvoked(view) => {
                if self.elections_checked.insert(*view) {
                    self.elections += 1;
                    let completed = self
                        .commits
                        .range((*view, PartyId(0))..=(*view, PartyId(u32::MAX)))
                        .filter(|(_, receivers)| receivers.len() >= weak)
                        .count();
                    if completed < self.quorum.strong() {
                        self.violations.pre_election += 1;
                    }
                }
            }
            Event::CommitObserved { value, .. } => self.check_agreement(value),
            Event::Decided { view, value } => {
                self.check_agreement(value);
                if !self.app.validate(value) {
                    self.violations.validity += 1;
                }
                self.decisions.insert(p, (*view, value.clone()));
                self.last_decision_at = self.t;
            }
            _ => {}
        }
    }

    fn check_agreement(&mut self, value: &Value) {
        match &self.agreed {
            None => self.agreed = Some(value.clone()),
            Some(v) if v != value => self.violations.agreement += 1,
            Some(_) => {}
        }
    }

    fn finish(mut self) -> RunOutcome {
        self.violations.provability += self.adversary.provability_conflicts();
        let honest: Vec<PartyId> = PartyId::all(self.quorum.n).filter(|&p| self.honest(p)).collect();
        let decision_views: BTreeMap<PartyId, u64> =
            honest.iter().map(|p| (*p, self.decisions[p].0 .0)).collect();
        let decided_values: BTreeMap<PartyId, Value> =
            honest.iter().map(|p| (*p, self.decisions[p].1.clone())).collect();
        let views_to_decide = decision_views.values().copied().max().unwrap_or(0);
        let quality = decided_values.values().all(|v| self.honest_input(v));
        let duration = if self.max_delay == 0 { 0.0 } else { self.last_decision_at as f64 / self.max_delay as f64 };
        let metrics = RunMetrics {
            seed: self.seed,
            n: self.quorum.n,
            f: self.quorum.f,
            words_per_view: self.words,
            decision_views,
            views_to_decide,
            decided_values,
            quality,
            duration,
            events: self.t,
            max_delay: self.max_delay,
            elections_checked: self.elections,
            corrupted: self.adversary.corrupted().collect(),
            violations: self.violations,
        };
        RunOutcome { metrics, trace: self.trace }
    }

    fn honest_input(&self, v: &Value) -> bool {
        PartyId::all(self.quorum.n)
            .filter(|p| !self.initially_corrupted.contains(p))
            .any(|p| self.parties[p.index()].input() == v)
    }
}
