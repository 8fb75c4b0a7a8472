//! Domain values and the pluggable external-validity predicate.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::crypto::Verifier;
use crate::encoding::{Digest, Term};

/// A proposal. `tag` is only meaningful under [`ValidatorKind::Signed`].
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Value {
    pub payload: u64,
    pub tag: Option<Digest>,
}

impl Value {
    pub fn plain(payload: u64) -> Self {
        Value { payload, tag: None }
    }

    pub fn to_term(&self) -> Term {
        let tag = self.tag.map(|d| d.0.to_vec()).unwrap_or_default();
        Term::tuple([Term::Int(self.payload), Term::Bytes(tag)])
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.payload)?;
        if self.tag.is_some() {
            write!(f, "+tag")?;
        }
        Ok(())
    }
}

/// The agreement-level validity check every decided value must pass.
pub trait AppValidator: Send + Sync {
    fn validate(&self, value: &Value) -> bool;
}

impl<F> AppValidator for F
where
    F: Fn(&Value) -> bool + Send + Sync,
{
    fn validate(&self, value: &Value) -> bool {
        self(value)
    }
}

pub struct AlwaysValid;

impl AppValidator for AlwaysValid {
    fn validate(&self, _: &Value) -> bool {
        true
    }
}

pub struct EvenPayload;

impl AppValidator for EvenPayload {
    fn validate(&self, value: &Value) -> bool {
        value.payload.is_multiple_of(2)
    }
}

/// Accepts a value only if it carries a dealer-issued tag over its payload.
pub struct SignedTag(pub Arc<Verifier>);

impl AppValidator for SignedTag {
    fn validate(&self, value: &Value) -> bool {
        value
            .tag
            .is_some_and(|tag| self.0.validate_value_tag(value.payload, &tag))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValidatorKind {
    Always,
    Even,
    Signed,
}

impl ValidatorKind {
    pub fn build(self, verifier: &Arc<Verifier>) -> Arc<dyn AppValidator> {
        match self {
            ValidatorKind::Always => Arc::new(AlwaysValid),
            ValidatorKind::Even => Arc::new(EvenPayload),
            ValidatorKind::Signed => Arc::new(SignedTag(verifier.clone())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ValidatorKind::Always => "always",
            ValidatorKind::Even => "even",
            ValidatorKind::Signed => "signed",
        }
    }
}

impl FromStr for ValidatorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "always" | "always-true" => Ok(ValidatorKind::Always),
            "even" | "even-integers" => Ok(ValidatorKind::Even),
            "signed" | "signed-tag" => Ok(ValidatorKind::Signed),
            other => Err(format!("unknown validator `{other}`")),
        }
    }
}
