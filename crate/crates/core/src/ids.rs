use std::fmt;

use serde::{Deserialize, Serialize};

use crate::encoding::Term;

/// Index of a party in `[0, n)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PartyId(pub u32);

impl PartyId {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// All parties `0..n`.
    pub fn all(n: usize) -> impl Iterator<Item = PartyId> + Clone {
        (0..n as u32).map(PartyId)
    }
}

impl From<usize> for PartyId {
    fn from(i: usize) -> Self {
        PartyId(i as u32)
    }
}

impl From<PartyId> for Term {
    fn from(p: PartyId) -> Self {
        Term::Int(p.0 as u64)
    }
}

impl fmt::Display for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

/// Agreement view number. View 0 is reserved for "no key".
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct View(pub u64);

impl View {
    pub const NONE: View = View(0);
    pub const FIRST: View = View(1);

    pub fn next(self) -> View {
        View(self.0 + 1)
    }
}

impl From<View> for Term {
    fn from(v: View) -> Self {
        Term::Int(v.0)
    }
}

impl fmt::Display for View {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Fault parameters `(n, f)` with `n >= 3f + 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quorum {
    pub n: usize,
    pub f: usize,
}

impl Quorum {
    pub fn new(n: usize, f: usize) -> Option<Self> {
        (n >= 1 && n > 3 * f).then_some(Quorum { n, f })
    }

    /// `2f + 1`: signature threshold and every "wait for" barrier.
    pub fn strong(&self) -> usize {
        2 * self.f + 1
    }

    /// `f + 1`: coin threshold.
    pub fn weak(&self) -> usize {
        self.f + 1
    }
}
