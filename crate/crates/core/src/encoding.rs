//! Canonical length-prefixed tuple encoding for everything that gets signed.
//!
//! Every signed payload in the protocol is a nested tuple of integers and
//! byte strings (`<<id, k, j>, stage>`, `<id, "skip", j>`, ...). A [`Term`]
//! is that tuple; [`Term::encode`] is the single byte representation all
//! modules agree on, and [`Term::digest`] is what signature shares bind to.

use std::fmt;

use serde::ser::{SerializeSeq, Serializer};
use serde::Serialize;
use sha2::{Digest as _, Sha256};

const TAG_INT: u8 = 0x01;
const TAG_BYTES: u8 = 0x02;
const TAG_TUPLE: u8 = 0x03;

/// A canonical tuple over integers and byte strings.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Int(u64),
    Bytes(Vec<u8>),
    Tuple(Vec<Term>),
}

impl Term {
    pub fn tuple(items: impl IntoIterator<Item = Term>) -> Self {
        Term::Tuple(items.into_iter().collect())
    }

    pub fn bytes(bytes: impl AsRef<[u8]>) -> Self {
        Term::Bytes(bytes.as_ref().to_vec())
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.encode_into(&mut out);
        out
    }

    fn encode_into(&self, out: &mut Vec<u8>) {
        match self {
            Term::Int(x) => {
                out.push(TAG_INT);
                out.extend_from_slice(&x.to_be_bytes());
            }
            Term::Bytes(b) => {
                out.push(TAG_BYTES);
                out.extend_from_slice(&(b.len() as u32).to_be_bytes());
                out.extend_from_slice(b);
            }
            Term::Tuple(items) => {
                out.push(TAG_TUPLE);
                out.extend_from_slice(&(items.len() as u32).to_be_bytes());
                for item in items {
                    item.encode_into(out);
                }
            }
        }
    }

    pub fn digest(&self) -> Digest {
        Digest(Sha256::digest(self.encode()).into())
    }
}

impl From<u64> for Term {
    fn from(x: u64) -> Self {
        Term::Int(x)
    }
}

impl From<&str> for Term {
    fn from(s: &str) -> Self {
        Term::bytes(s)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Int(x) => write!(f, "{x}"),
            Term::Bytes(b) => match std::str::from_utf8(b) {
                Ok(s) if s.chars().all(|c| c.is_ascii_graphic()) => write!(f, "{s:?}"),
                _ => write!(f, "0x{}", hex::encode(b)),
            },
            Term::Tuple(items) => {
                write!(f, "<")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{item}")?;
                }
                write!(f, ">")
            }
        }
    }
}

// JSON shape for traces: integers stay numbers, byte strings become hex,
// tuples become arrays.
impl Serialize for Term {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Term::Int(x) => serializer.serialize_u64(*x),
            Term::Bytes(b) => serializer.serialize_str(&hex::encode(b)),
            Term::Tuple(items) => {
                let mut seq = serializer.serialize_seq(Some(items.len()))?;
                for item in items {
                    seq.serialize_element(item)?;
                }
                seq.end()
            }
        }
    }
}

/// SHA-256 digest of a canonical encoding.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", &hex::encode(self.0)[..12])
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

impl Serialize for Digest {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&hex::encode(self.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_term() -> impl Strategy<Value = Term> {
        let leaf = prop_oneof![
            any::<u64>().prop_map(Term::Int),
            proptest::collection::vec(any::<u8>(), 0..6).prop_map(Term::Bytes),
        ];
        leaf.prop_recursive(3, 16, 4, |inner| {
            proptest::collection::vec(inner, 0..4).prop_map(Term::Tuple)
        })
    }

    #[test]
    fn known_encoding() {
        let t = Term::tuple([Term::Int(1), Term::bytes("ab")]);
        assert_eq!(
            t.encode(),
            vec![3, 0, 0, 0, 2, 1, 0, 0, 0, 0, 0, 0, 0, 1, 2, 0, 0, 0, 2, b'a', b'b']
        );
    }

    #[test]
    fn nesting_is_not_flattened() {
        let a = Term::tuple([Term::tuple([Term::Int(1), Term::Int(2)]), Term::Int(3)]);
        let b = Term::tuple([Term::Int(1), Term::tuple([Term::Int(2), Term::Int(3)])]);
        assert_ne!(a.digest(), b.digest());
    }

    #[test]
    fn json_shape() {
        let t = Term::tuple([Term::bytes([0xab]), Term::Int(4)]);
        assert_eq!(serde_json::to_string(&t).unwrap(), r#"["ab",4]"#);
    }

    proptest! {
        // Encoding is injective: distinct terms never share bytes.
        #[test]
        fn encoding_injective(a in arb_term(), b in arb_term()) {
            prop_assert_eq!(a == b, a.encode() == b.encode());
        }
    }
}
