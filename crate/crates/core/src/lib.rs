//! Validated asynchronous Byzantine agreement with expected `O(n^2)` words.
//!
//! The crate is layered bottom-up:
//!
//! * [`encoding`]: canonical tuples that every signature binds to.
//! * [`crypto`]: dealer-based test-grade threshold signatures and coin.
//! * [`provable_broadcast`]: single-sender broadcast with a threshold proof
//!   of delivery.
//! * [`staged_broadcast`]: four chained provable broadcasts giving key,
//!   lock and commit deliveries.
//! * [`leader_election`]: coin-based election of one party per view.
//! * [`engine`]: the per-party agreement state machine.
//!
//! All protocol state machines are sans-IO. They consume messages and return
//! the envelopes to send, so a simulator or a real transport can drive them.

pub mod crypto;
pub mod encoding;
pub mod engine;
pub mod ids;
pub mod leader_election;
pub mod message;
pub mod provable_broadcast;
pub mod staged_broadcast;
pub mod value;

pub use crypto::{CoinShare, CryptoError, Dealer, PartyKeys, SignatureShare, ThresholdSignature, Verifier};
pub use encoding::{Digest, Term};
pub use engine::{Event, KeyRecord, Party, PartyConfig, Phase, Step};
pub use ids::{PartyId, Quorum, View};
pub use message::{Envelope, KeyProof, Message, Slot};
pub use value::{AppValidator, Value, ValidatorKind};
