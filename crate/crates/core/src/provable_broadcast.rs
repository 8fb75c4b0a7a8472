//! f+1-provable broadcast.
//!
//! The sender disseminates `<v, proof>` and collects `2f + 1` signature
//! shares on `<id, v>`; the combined threshold signature proves that at
//! least `f + 1` honest parties delivered `v`. Receivers deliver at most
//! once, only if the caller's validator accepts the message, and never after
//! `abandon`.
//!
//! Both halves are sans-IO: they return what must be sent and the caller
//! routes it.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::crypto::{PartyKeys, SignatureShare, ThresholdSignature, Verifier};
use crate::encoding::Term;
use crate::ids::PartyId;
use crate::value::Value;

/// Instance identifier; structural equality.
pub type PbInstanceId = Term;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PbMessage<P> {
    pub value: Value,
    pub proof: P,
}

/// The tuple `<id, v>` acks sign.
pub fn signed_payload(instance: &PbInstanceId, value: &Value) -> Term {
    Term::tuple([instance.clone(), value.to_term()])
}

#[derive(Debug)]
pub struct PbSender<P> {
    instance: PbInstanceId,
    message: PbMessage<P>,
    payload: Term,
    shares: BTreeMap<PartyId, SignatureShare>,
    threshold: usize,
    output: Option<ThresholdSignature>,
}

impl<P: Clone> PbSender<P> {
    /// Starts a broadcast. The returned message goes to every party,
    /// the sender included.
    pub fn broadcast(
        instance: PbInstanceId,
        message: PbMessage<P>,
        verifier: &Verifier,
    ) -> (Self, PbMessage<P>) {
        let payload = signed_payload(&instance, &message.value);
        let out = message.clone();
        let sender = PbSender {
            instance,
            message,
            payload,
            shares: BTreeMap::new(),
            threshold: verifier.quorum().strong(),
            output: None,
        };
        (sender, out)
    }
}

impl<P> PbSender<P> {
    pub fn instance(&self) -> &PbInstanceId {
        &self.instance
    }

    pub fn message(&self) -> &PbMessage<P> {
        &self.message
    }

    pub fn share_count(&self) -> usize {
        self.shares.len()
    }

    pub fn output(&self) -> Option<&ThresholdSignature> {
        self.output.as_ref()
    }

    /// Returns the threshold signature exactly once, when the `2f+1`-th
    /// distinct valid share arrives.
    pub fn on_ack(
        &mut self,
        verifier: &Verifier,
        from: PartyId,
        share: &SignatureShare,
    ) -> Option<ThresholdSignature> {
        if self.output.is_some() || self.shares.contains_key(&from) {
            return None;
        }
        if !verifier.share_validate(&self.payload, from, share) {
            return None;
        }
        self.shares.insert(from, share.clone());
        if self.shares.len() == self.threshold {
            let sig = verifier
                .threshold_sign(self.shares.values())
                .expect("shares validated on one payload");
            self.output = Some(sig.clone());
            return Some(sig);
        }
        None
    }
}

/// Receiver side of one instance.
#[derive(Debug)]
pub struct PbReceiver<P> {
    instance: PbInstanceId,
    sender: PartyId,
    stop: bool,
    delivered: Option<PbMessage<P>>,
}

/// A delivery together with the ack to return to the sender.
#[derive(Clone, Debug)]
pub struct PbDelivery<P> {
    pub message: PbMessage<P>,
    pub ack: SignatureShare,
}

impl<P: Clone> PbReceiver<P> {
    pub fn new(instance: PbInstanceId, sender: PartyId) -> Self {
        PbReceiver { instance, sender, stop: false, delivered: None }
    }

    pub fn instance(&self) -> &PbInstanceId {
        &self.instance
    }

    pub fn sender(&self) -> PartyId {
        self.sender
    }

    pub fn is_stopped(&self) -> bool {
        self.stop
    }

    pub fn delivered(&self) -> Option<&PbMessage<P>> {
        self.delivered.as_ref()
    }

    /// Handles a `send` from `from`. Delivers on the first message from the
    /// designated sender that `validator` accepts; everything else is
    /// silently ignored.
    pub fn on_send(
        &mut self,
        keys: &PartyKeys,
        from: PartyId,
        message: &PbMessage<P>,
        validator: impl FnOnce(&PbMessage<P>) -> bool,
    ) -> Option<PbDelivery<P>> {
        if self.stop || from != self.sender || !validator(message) {
            return None;
        }
        self.stop = true;
        self.delivered = Some(message.clone());
        let ack = keys.share_sign(&signed_payload(&self.instance, &message.value));
        Some(PbDelivery { message: message.clone(), ack })
    }

    pub fn abandon(&mut self) {
        self.stop = true;
    }
}
