//! Wire messages exchanged by agreement parties.

use serde::Serialize;
use serde_json::json;

use crate::crypto::{CoinShare, SignatureShare, ThresholdSignature};
use crate::encoding::Term;
use crate::ids::{PartyId, View};
use crate::staged_broadcast::{stage_instance, StagedMessage};
use crate::value::Value;

/// The external proof carried by every proposal: `<KEY.view, KEY.proof>`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct KeyProof {
    pub view: View,
    pub proof: Option<ThresholdSignature>,
}

impl KeyProof {
    pub const NONE: KeyProof = KeyProof { view: View::NONE, proof: None };
}

pub type Proposal = StagedMessage<KeyProof>;

/// A reported delivery `<v, sigma_in>` in a view-change message.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Slot {
    pub value: Value,
    pub proof: ThresholdSignature,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Message {
    /// Stage `stage` of `sender`'s broadcast in `view`.
    Send { sender: PartyId, view: View, stage: u8, message: Proposal },
    /// Ack for stage `stage` of `sender`'s broadcast; addressed to `sender`.
    Ack { sender: PartyId, view: View, stage: u8, share: SignatureShare },
    Done { view: View, value: Value, key: KeyProof, proof: ThresholdSignature },
    SkipShare { view: View, share: SignatureShare },
    Skip { view: View, proof: ThresholdSignature },
    CoinShare { view: View, share: CoinShare },
    ViewChange { view: View, key: Option<Slot>, lock: Option<Slot>, commit: Option<Slot> },
}

impl Message {
    pub fn view(&self) -> View {
        match self {
            Message::Send { view, .. }
            | Message::Ack { view, .. }
            | Message::Done { view, .. }
            | Message::SkipShare { view, .. }
            | Message::Skip { view, .. }
            | Message::CoinShare { view, .. }
            | Message::ViewChange { view, .. } => *view,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Message::Send { .. } => "send",
            Message::Ack { .. } => "ack",
            Message::Done { .. } => "done",
            Message::SkipShare { .. } => "skip-share",
            Message::Skip { .. } => "skip",
            Message::CoinShare { .. } => "coin-share",
            Message::ViewChange { .. } => "view-change",
        }
    }

    /// Every message carries a constant number of values and proofs.
    pub fn words(&self) -> u64 {
        1
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Envelope {
    pub from: PartyId,
    pub to: PartyId,
    pub message: Message,
}

impl Envelope {
    pub fn words(&self) -> u64 {
        self.message.words()
    }

    /// Provable-broadcast wire shape for `send`/`ack` envelopes:
    /// `{instance, kind, from, to, payload, words}`.
    pub fn pb_wire_json(&self, session: &Term) -> Option<serde_json::Value> {
        let (sender, view, stage, payload) = match &self.message {
            Message::Send { sender, view, stage, message } => {
                (*sender, *view, *stage, serde_json::to_value(message).ok()?)
            }
            Message::Ack { sender, view, stage, share } => {
                (*sender, *view, *stage, serde_json::to_value(share).ok()?)
            }
            _ => return None,
        };
        let instance = stage_instance(&broadcast_base(session, sender, view), stage);
        Some(json!({
            "instance": instance,
            "kind": self.message.kind(),
            "from": self.from,
            "to": self.to,
            "payload": payload,
            "words": self.words(),
        }))
    }
}

/// `<id, k, j>`: base id of party `k`'s staged broadcast in view `j`.
pub fn broadcast_base(session: &Term, sender: PartyId, view: View) -> Term {
    Term::tuple([session.clone(), sender.into(), view.into()])
}

/// `<id, skip, j>`.
pub fn skip_payload(session: &Term, view: View) -> Term {
    Term::tuple([session.clone(), Term::bytes("skip"), view.into()])
}

/// `<id, j>`: coin name of view `j`'s election.
pub fn election_id(session: &Term, view: View) -> Term {
    Term::tuple([session.clone(), view.into()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::Dealer;

    #[test]
    fn pb_wire_shape() {
        let d = Dealer::setup(4, 1, 0).unwrap();
        let session = Term::bytes("s");
        let share = d.party_keys(PartyId(2)).share_sign(&Term::Int(0));
        let env = Envelope {
            from: PartyId(2),
            to: PartyId(1),
            message: Message::Ack { sender: PartyId(1), view: View(3), stage: 2, share },
        };
        let v = env.pb_wire_json(&session).unwrap();
        assert_eq!(v["instance"], json!([["73", 1, 3], 2]));
        assert_eq!(v["kind"], "ack");
        assert_eq!(v["from"], 2);
        assert_eq!(v["to"], 1);
        assert_eq!(v["words"], 1);
        assert_eq!(v["payload"]["signer"], 2);

        let skip = Envelope {
            from: PartyId(0),
            to: PartyId(0),
            message: Message::SkipShare { view: View(1), share: d.party_keys(PartyId(0)).share_sign(&Term::Int(1)) },
        };
        assert!(skip.pb_wire_json(&session).is_none());
        assert_eq!(skip.message.kind(), "skip-share");
    }

    #[test]
    fn distinct_signed_tuples() {
        let s = Term::bytes("s");
        let ids = [
            skip_payload(&s, View(1)).digest(),
            election_id(&s, View(1)).digest(),
            broadcast_base(&s, PartyId(0), View(1)).digest(),
            broadcast_base(&s, PartyId(1), View(0)).digest(),
        ];
        for i in 0..ids.len() {
            for j in i + 1..ids.len() {
                assert_ne!(ids[i], ids[j]);
            }
        }
    }
}
