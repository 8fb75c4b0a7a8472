//! Threshold-coin leader election for one `<id, j>`.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::crypto::{CoinShare, PartyKeys, Verifier};
use crate::encoding::Term;
use crate::ids::PartyId;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ElectionError {
    #[error("elect() already invoked for this election")]
    AlreadyInvoked,
}

#[derive(Debug)]
pub struct Election {
    id: Term,
    shares: BTreeMap<PartyId, CoinShare>,
    threshold: usize,
    invoked: bool,
    result: Option<PartyId>,
}

/// Output of [`Election::invoke`].
#[derive(Debug, Clone)]
pub struct Invocation {
    /// Our share; the caller sends it to every other party.
    pub share: CoinShare,
    /// Set if enough shares had already arrived.
    pub leader: Option<PartyId>,
}

impl Election {
    pub fn new(id: Term, verifier: &Verifier) -> Self {
        Election {
            id,
            shares: BTreeMap::new(),
            threshold: verifier.quorum().weak(),
            invoked: false,
            result: None,
        }
    }

    pub fn id(&self) -> &Term {
        &self.id
    }

    pub fn is_invoked(&self) -> bool {
        self.invoked
    }

    pub fn result(&self) -> Option<PartyId> {
        self.result
    }

    pub fn share_count(&self) -> usize {
        self.shares.len()
    }

    /// Shares that arrive before invocation are kept; the result is only
    /// computed once we have invoked.
    pub fn invoke(&mut self, keys: &PartyKeys, verifier: &Verifier) -> Result<Invocation, ElectionError> {
        if self.invoked {
            return Err(ElectionError::AlreadyInvoked);
        }
        self.invoked = true;
        let share = keys.coin_share(&self.id);
        let leader = self.on_share(verifier, keys.id(), &share);
        Ok(Invocation { share, leader })
    }

    /// Returns the leader exactly once, when it becomes known.
    pub fn on_share(&mut self, verifier: &Verifier, from: PartyId, share: &CoinShare) -> Option<PartyId> {
        if !self.shares.contains_key(&from) && verifier.coin_share_validate(&self.id, from, share) {
            self.shares.insert(from, share.clone());
        }
        if self.invoked && self.result.is_none() && self.shares.len() >= self.threshold {
            let leader = verifier
                .coin_toss(&self.id, self.shares.values())
                .expect("threshold reached with validated shares");
            self.result = Some(leader);
            return Some(leader);
        }
        None
    }
}
