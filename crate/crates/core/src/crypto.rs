//! Dealer-based test-grade threshold signatures and threshold coin.
//!
//! Shares are HMAC-SHA256 tags under per-party keys derived from a dealer
//! seed. A [`ThresholdSignature`] carries its contributing shares and
//! validation re-checks every one of them, so an aggregate can only be
//! produced from `2f + 1` distinct signers' real shares. Forgery is
//! structurally impossible: signing needs a [`PartyKeys`], which only the
//! [`Dealer`] hands out, while [`Verifier`] exposes predicates only.
//!
//! The coin is `G(s) = HMAC(coin_master, s) mod n`. The coin master lives
//! inside the [`Verifier`] and is reachable only through
//! [`Verifier::coin_toss`], which refuses to answer without `f + 1` valid
//! distinct shares on `s`.

use hmac::{Hmac, Mac};
use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

use crate::encoding::{Digest, Term};
use crate::ids::{PartyId, Quorum};
use crate::value::Value;

type HmacSha256 = Hmac<Sha256>;

type Key = [u8; 32];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CryptoError {
    #[error("need n >= 3f + 1 and n >= 1, got n = {n}, f = {f}")]
    InvalidParameters { n: usize, f: usize },
    #[error("signature shares reference different messages")]
    MixedMessages,
    #[error("no shares supplied")]
    Empty,
    #[error("coin toss needs {need} valid distinct shares, got {have}")]
    InsufficientShares { have: usize, need: usize },
    #[error("fixture does not match dealer derived from its seed")]
    FixtureMismatch,
    #[error("malformed fixture: {0}")]
    Fixture(String),
}

fn mac(key: &Key, data: &[u8]) -> [u8; 32] {
    let mut m = HmacSha256::new_from_slice(key).expect("hmac accepts any key length");
    m.update(data);
    m.finalize().into_bytes().into()
}

fn derive(label: &str, secret: &[u8], index: Option<u32>) -> Key {
    let mut h = Sha256::new();
    h.update(label.as_bytes());
    h.update(secret);
    if let Some(i) = index {
        h.update(i.to_be_bytes());
    }
    h.finalize().into()
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct SignatureShare {
    pub signer: PartyId,
    pub message_digest: Digest,
    #[serde(with = "hex_bytes")]
    tag: [u8; 32],
}

/// An aggregate proof. Always one word regardless of how it is carried.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct ThresholdSignature {
    pub message_digest: Digest,
    shares: Vec<SignatureShare>,
}

impl ThresholdSignature {
    pub const WORD_SIZE: usize = 1;

    pub fn signers(&self) -> impl Iterator<Item = PartyId> + '_ {
        self.shares.iter().map(|s| s.signer)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct CoinShare {
    pub signer: PartyId,
    pub coin_name: Digest,
    #[serde(with = "hex_bytes")]
    tag: [u8; 32],
}

/// Private signing capability of one party.
#[derive(Clone)]
pub struct PartyKeys {
    id: PartyId,
    sign_key: Key,
    coin_key: Key,
}

impl PartyKeys {
    pub fn id(&self) -> PartyId {
        self.id
    }

    pub fn share_sign(&self, message: &Term) -> SignatureShare {
        let message_digest = message.digest();
        SignatureShare {
            signer: self.id,
            message_digest,
            tag: mac(&self.sign_key, message_digest.as_bytes()),
        }
    }

    pub fn coin_share(&self, name: &Term) -> CoinShare {
        let coin_name = name.digest();
        CoinShare {
            signer: self.id,
            coin_name,
            tag: mac(&self.coin_key, coin_name.as_bytes()),
        }
    }
}

impl std::fmt::Debug for PartyKeys {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PartyKeys").field("id", &self.id).finish_non_exhaustive()
    }
}

/// Public verification capabilities shared by every party.
pub struct Verifier {
    quorum: Quorum,
    sign_keys: Vec<Key>,
    coin_keys: Vec<Key>,
    coin_master: Key,
    value_tag_key: Key,
}

impl Verifier {
    pub fn quorum(&self) -> Quorum {
        self.quorum
    }

    pub fn share_validate(&self, message: &Term, signer: PartyId, share: &SignatureShare) -> bool {
        share.signer == signer && share.message_digest == message.digest() && self.share_ok(share)
    }

    fn share_ok(&self, share: &SignatureShare) -> bool {
        self.sign_keys
            .get(share.signer.index())
            .is_some_and(|k| mac(k, share.message_digest.as_bytes()) == share.tag)
    }

    /// Combines shares. Below-threshold or duplicate-signer sets still
    /// produce a signature; it just fails [`Verifier::threshold_validate`].
    pub fn threshold_sign<'a>(
        &self,
        shares: impl IntoIterator<Item = &'a SignatureShare>,
    ) -> Result<ThresholdSignature, CryptoError> {
        let mut shares: Vec<SignatureShare> = shares.into_iter().cloned().collect();
        let digest = shares.first().ok_or(CryptoError::Empty)?.message_digest;
        if shares.iter().any(|s| s.message_digest != digest) {
            return Err(CryptoError::MixedMessages);
        }
        shares.sort_by_key(|s| s.signer);
        Ok(ThresholdSignature { message_digest: digest, shares })
    }

    pub fn threshold_validate(&self, message: &Term, sig: &ThresholdSignature) -> bool {
        let digest = message.digest();
        if sig.message_digest != digest {
            return false;
        }
        let mut signers: Vec<PartyId> = sig
            .shares
            .iter()
            .filter(|s| s.message_digest == digest && self.share_ok(s))
            .map(|s| s.signer)
            .collect();
        signers.sort();
        signers.dedup();
        signers.len() >= self.quorum.strong()
    }

    pub fn coin_share_validate(&self, name: &Term, signer: PartyId, share: &CoinShare) -> bool {
        share.signer == signer && share.coin_name == name.digest() && self.coin_ok(share)
    }

    fn coin_ok(&self, share: &CoinShare) -> bool {
        self.coin_keys
            .get(share.signer.index())
            .is_some_and(|k| mac(k, share.coin_name.as_bytes()) == share.tag)
    }

    /// `G(name)`, released only against `f + 1` valid distinct shares.
    /// Invalid or surplus shares are ignored.
    pub fn coin_toss<'a>(
        &self,
        name: &Term,
        shares: impl IntoIterator<Item = &'a CoinShare>,
    ) -> Result<PartyId, CryptoError> {
        let digest = name.digest();
        let mut signers: Vec<PartyId> = shares
            .into_iter()
            .filter(|s| s.coin_name == digest && self.coin_ok(s))
            .map(|s| s.signer)
            .collect();
        signers.sort();
        signers.dedup();
        let need = self.quorum.weak();
        if signers.len() < need {
            return Err(CryptoError::InsufficientShares { have: signers.len(), need });
        }
        Ok(self.prg(&digest))
    }

    fn prg(&self, digest: &Digest) -> PartyId {
        let out = mac(&self.coin_master, digest.as_bytes());
        let wide = u128::from_be_bytes(out[..16].try_into().unwrap());
        PartyId((wide % self.quorum.n as u128) as u32)
    }

    pub fn validate_value_tag(&self, payload: u64, tag: &Digest) -> bool {
        mac(&self.value_tag_key, &payload.to_be_bytes()) == tag.0
    }
}

/// The trusted dealer: derives every key from one seed.
pub struct Dealer {
    quorum: Quorum,
    seed: u64,
    master_secret: Key,
    sign_keys: Vec<Key>,
    coin_keys: Vec<Key>,
    coin_master: Key,
}

impl Dealer {
    pub fn setup(n: usize, f: usize, seed: u64) -> Result<Dealer, CryptoError> {
        let quorum = Quorum::new(n, f).ok_or(CryptoError::InvalidParameters { n, f })?;
        let master_secret = derive("vaba/master", &seed.to_be_bytes(), None);
        let sign_keys = (0..n as u32).map(|i| derive("vaba/sign", &master_secret, Some(i))).collect();
        let coin_keys = (0..n as u32).map(|i| derive("vaba/coin-share", &master_secret, Some(i))).collect();
        let coin_master = derive("vaba/coin-master", &master_secret, None);
        Ok(Dealer { quorum, seed, master_secret, sign_keys, coin_keys, coin_master })
    }

    pub fn quorum(&self) -> Quorum {
        self.quorum
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn party_keys(&self, id: PartyId) -> PartyKeys {
        PartyKeys {
            id,
            sign_key: self.sign_keys[id.index()],
            coin_key: self.coin_keys[id.index()],
        }
    }

    pub fn verifier(&self) -> Verifier {
        Verifier {
            quorum: self.quorum,
            sign_keys: self.sign_keys.clone(),
            coin_keys: self.coin_keys.clone(),
            coin_master: self.coin_master,
            value_tag_key: self.value_tag_key(),
        }
    }

    fn value_tag_key(&self) -> Key {
        derive("vaba/value-tag", &self.master_secret, None)
    }

    /// A value carrying a dealer tag, accepted by the `signed` validator.
    pub fn tagged_value(&self, payload: u64) -> Value {
        let tag = mac(&self.value_tag_key(), &payload.to_be_bytes());
        Value { payload, tag: Some(Digest(tag)) }
    }

    pub fn to_fixture(&self) -> DealerFixture {
        DealerFixture {
            n: self.quorum.n,
            f: self.quorum.f,
            seed: self.seed,
            parties: (0..self.quorum.n)
                .map(|i| PartyFixture {
                    id: i as u32,
                    sign_key: hex::encode(self.sign_keys[i]),
                    coin_key: hex::encode(self.coin_keys[i]),
                })
                .collect(),
        }
    }

    /// Rebuilds the dealer from the fixture's seed and checks the recorded keys.
    pub fn from_fixture(fixture: &DealerFixture) -> Result<Dealer, CryptoError> {
        let dealer = Dealer::setup(fixture.n, fixture.f, fixture.seed)?;
        if fixture.parties.len() != fixture.n {
            return Err(CryptoError::FixtureMismatch);
        }
        for p in &fixture.parties {
            let i = p.id as usize;
            if i >= fixture.n {
                return Err(CryptoError::FixtureMismatch);
            }
            let sign = hex::decode(&p.sign_key).map_err(|e| CryptoError::Fixture(e.to_string()))?;
            let coin = hex::decode(&p.coin_key).map_err(|e| CryptoError::Fixture(e.to_string()))?;
            if sign != dealer.sign_keys[i] || coin != dealer.coin_keys[i] {
                return Err(CryptoError::FixtureMismatch);
            }
        }
        Ok(dealer)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DealerFixture {
    pub n: usize,
    pub f: usize,
    pub seed: u64,
    pub parties: Vec<PartyFixture>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartyFixture {
    pub id: u32,
    pub sign_key: String,
    pub coin_key: String,
}

mod hex_bytes {
    use serde::Serializer;

    pub fn serialize<S: Serializer>(bytes: &[u8; 32], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }
}
