//! Four chained provable broadcasts with key / lock / commit deliveries.
//!
//! Stage `j` runs on instance `<id, j>`. The stage-1 message is checked by
//! the caller's external validator; each later stage carries the previous
//! stage's threshold signature as its internal proof and is accepted iff that
//! signature validates `<<id, j-1>, v>`. Deliveries in stages 2, 3 and 4 are
//! reported as key, lock and commit, each carrying the internal proof.

use serde::Serialize;

use crate::crypto::{PartyKeys, SignatureShare, ThresholdSignature, Verifier};
use crate::encoding::Term;
use crate::ids::PartyId;
use crate::provable_broadcast::{signed_payload, PbMessage, PbReceiver, PbSender};
use crate::value::Value;

pub const STAGES: u8 = 4;

/// `<sigma_ex, sigma_in>`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StagedProof<E> {
    pub external: E,
    pub internal: Option<ThresholdSignature>,
}

pub type StagedMessage<E> = PbMessage<StagedProof<E>>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StageKind {
    Key,
    Lock,
    Commit,
}

impl StageKind {
    pub fn stage(self) -> u8 {
        match self {
            StageKind::Key => 2,
            StageKind::Lock => 3,
            StageKind::Commit => 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StageDelivery {
    pub kind: StageKind,
    pub instance: Term,
    pub value: Value,
    pub proof: ThresholdSignature,
}

/// `<id, stage>`.
pub fn stage_instance(base: &Term, stage: u8) -> Term {
    Term::tuple([base.clone(), Term::Int(stage as u64)])
}

/// Whether `sig` is a valid stage-`stage` output for `value` under `base`.
pub fn stage_proof_valid(
    verifier: &Verifier,
    base: &Term,
    stage: u8,
    value: &Value,
    sig: &ThresholdSignature,
) -> bool {
    verifier.threshold_validate(&signed_payload(&stage_instance(base, stage), value), sig)
}

/// The validator each stage's provable broadcast runs.
pub fn staged_validator<E>(
    verifier: &Verifier,
    base: &Term,
    stage: u8,
    message: &StagedMessage<E>,
    external: impl FnOnce(&Value, &E) -> bool,
) -> bool {
    match stage {
        1 => external(&message.value, &message.proof.external),
        2..=STAGES => message
            .proof
            .internal
            .as_ref()
            .is_some_and(|sig| stage_proof_valid(verifier, base, stage - 1, &message.value, sig)),
        _ => false,
    }
}

/// Maps a stage delivery onto the key / lock / commit events.
pub fn on_delivery<E>(base: &Term, stage: u8, message: &StagedMessage<E>) -> Option<StageDelivery> {
    let kind = match stage {
        2 => StageKind::Key,
        3 => StageKind::Lock,
        4 => StageKind::Commit,
        _ => return None,
    };
    Some(StageDelivery {
        kind,
        instance: base.clone(),
        value: message.value.clone(),
        proof: message.proof.internal.clone()?,
    })
}

/// What the sender must do after an ack.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SenderProgress<E> {
    /// Start stage `stage` by sending `message` to every party.
    NextStage { stage: u8, message: StagedMessage<E> },
    /// Stage 4 finished; the completion proof.
    Completed(ThresholdSignature),
}

#[derive(Debug)]
pub struct StagedSender<E> {
    base: Term,
    stage: u8,
    current: PbSender<StagedProof<E>>,
    completion: Option<ThresholdSignature>,
    halted: bool,
}

impl<E: Clone> StagedSender<E> {
    /// Starts stage 1; the returned message goes to every party.
    pub fn start(
        base: Term,
        value: Value,
        external: E,
        verifier: &Verifier,
    ) -> (Self, StagedMessage<E>) {
        let message = PbMessage { value, proof: StagedProof { external, internal: None } };
        let (current, out) = PbSender::broadcast(stage_instance(&base, 1), message, verifier);
        (StagedSender { base, stage: 1, current, completion: None, halted: false }, out)
    }

    pub fn base(&self) -> &Term {
        &self.base
    }

    pub fn stage(&self) -> u8 {
        self.stage
    }

    pub fn completion(&self) -> Option<&ThresholdSignature> {
        self.completion.as_ref()
    }

    /// Stops driving further stages. Acks arriving afterwards are ignored.
    pub fn halt(&mut self) {
        self.halted = true;
    }

    pub fn on_ack(
        &mut self,
        verifier: &Verifier,
        stage: u8,
        from: PartyId,
        share: &SignatureShare,
    ) -> Option<SenderProgress<E>> {
        if self.halted || self.completion.is_some() || stage != self.stage {
            return None;
        }
        let sig = self.current.on_ack(verifier, from, share)?;
        if self.stage == STAGES {
            self.completion = Some(sig.clone());
            return Some(SenderProgress::Completed(sig));
        }
        self.stage += 1;
        let prev = self.current.message();
        let message = PbMessage {
            value: prev.value.clone(),
            proof: StagedProof { external: prev.proof.external.clone(), internal: Some(sig) },
        };
        let (next, out) =
            PbSender::broadcast(stage_instance(&self.base, self.stage), message, verifier);
        self.current = next;
        Some(SenderProgress::NextStage { stage: self.stage, message: out })
    }
}

/// One party's receiver side of all four stages of a single sender.
#[derive(Debug)]
pub struct StagedReceiver<E> {
    base: Term,
    stages: [PbReceiver<StagedProof<E>>; STAGES as usize],
}

/// Result of a stage delivery: the ack for the sender plus the optional
/// key/lock/commit event.
#[derive(Clone, Debug)]
pub struct StagedAck {
    pub stage: u8,
    pub ack: SignatureShare,
    pub delivery: Option<StageDelivery>,
}

impl<E: Clone> StagedReceiver<E> {
    pub fn new(base: Term, sender: PartyId) -> Self {
        let stages = [1, 2, 3, 4].map(|j| PbReceiver::new(stage_instance(&base, j), sender));
        StagedReceiver { base, stages }
    }

    pub fn base(&self) -> &Term {
        &self.base
    }

    pub fn on_send(
        &mut self,
        keys: &PartyKeys,
        verifier: &Verifier,
        stage: u8,
        from: PartyId,
        message: &StagedMessage<E>,
        external: impl FnOnce(&Value, &E) -> bool,
    ) -> Option<StagedAck> {
        if !(1..=STAGES).contains(&stage) {
            return None;
        }
        let base = &self.base;
        let receiver = &mut self.stages[stage as usize - 1];
        let delivered = receiver.on_send(keys, from, message, |m| {
            staged_validator(verifier, base, stage, m, external)
        })?;
        Some(StagedAck {
            stage,
            ack: delivered.ack,
            delivery: on_delivery(base, stage, &delivered.message),
        })
    }

    pub fn abandon(&mut self) {
        for r in &mut self.stages {
            r.abandon();
        }
    }

    pub fn is_abandoned(&self) -> bool {
        self.stages.iter().all(|r| r.is_stopped())
    }

    pub fn delivered(&self, stage: u8) -> Option<&StagedMessage<E>> {
        self.stages.get(stage.checked_sub(1)? as usize)?.delivered()
    }
}
