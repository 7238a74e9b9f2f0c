//! Commutative semigroups over vertex payloads.
//!
//! The index is generic over [`Semigroup`]; no identity element is ever
//! required, so every fold in the crate starts from a concrete payload.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// A commutative, associative combine operation.
pub trait Semigroup: Clone + Send + Sync + 'static {
    type Value: Copy + Eq + fmt::Debug + Send + Sync + 'static;

    fn combine(&self, a: Self::Value, b: Self::Value) -> Self::Value;

    /// Folds a non-empty sequence. Returns `None` for an empty one.
    fn fold<I: IntoIterator<Item = Self::Value>>(&self, values: I) -> Option<Self::Value> {
        let mut it = values.into_iter();
        let first = it.next()?;
        Some(it.fold(first, |acc, v| self.combine(acc, v)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SemigroupKind {
    /// Wrapping 64-bit sum.
    Sum,
    /// 64-bit minimum.
    Min,
    /// Wrapping sum of per-vertex random tokens; a multiset fingerprint.
    Fingerprint,
}

impl SemigroupKind {
    pub const ALL: [SemigroupKind; 3] = [Self::Sum, Self::Min, Self::Fingerprint];

    pub fn name(self) -> &'static str {
        match self {
            Self::Sum => "sum",
            Self::Min => "min",
            Self::Fingerprint => "fingerprint",
        }
    }

    /// Per-vertex payload values for this kind.
    ///
    /// Missing payloads default to 1 for sum and fingerprint, and to the
    /// vertex label for min. Fingerprint tokens mix `seed`, the label and the
    /// raw payload, so every vertex gets an independent 64-bit token.
    pub fn payloads(self, g: &Graph, seed: u64) -> Vec<u64> {
        (0..g.n() as u32)
            .map(|v| {
                let raw = g.raw_payload(v);
                match self {
                    Self::Sum => raw.unwrap_or(1),
                    Self::Min => raw.unwrap_or(g.label(v)),
                    Self::Fingerprint => {
                        let p = raw.unwrap_or(1);
                        splitmix64(seed ^ splitmix64(g.label(v) ^ splitmix64(p)))
                    }
                }
            })
            .collect()
    }
}

impl fmt::Display for SemigroupKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SemigroupKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(Self::Sum),
            "min" => Ok(Self::Min),
            "fingerprint" => Ok(Self::Fingerprint),
            other => Err(Error::Precondition(format!("unknown semigroup `{other}`"))),
        }
    }
}

pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// A built-in semigroup over `u64` payloads.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemigroupSpec {
    kind: SemigroupKind,
}

impl SemigroupSpec {
    pub fn new(kind: SemigroupKind) -> Self {
        Self { kind }
    }

    pub fn sum() -> Self {
        Self::new(SemigroupKind::Sum)
    }

    pub fn min() -> Self {
        Self::new(SemigroupKind::Min)
    }

    pub fn fingerprint() -> Self {
        Self::new(SemigroupKind::Fingerprint)
    }

    pub fn kind(&self) -> SemigroupKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn value(&self, v: u64) -> PayloadValue {
        PayloadValue {
            kind: self.kind,
            value: v,
        }
    }

    /// Checked combine over tagged values.
    pub fn combine_checked(&self, a: PayloadValue, b: PayloadValue) -> Result<PayloadValue> {
        for side in [a.kind, b.kind] {
            if side != self.kind {
                return Err(Error::KindMismatch {
                    left: self.kind,
                    right: side,
                });
            }
        }
        Ok(self.value(Semigroup::combine(self, a.value, b.value)))
    }
}

impl Semigroup for SemigroupSpec {
    type Value = u64;

    #[inline]
    fn combine(&self, a: u64, b: u64) -> u64 {
        match self.kind {
            SemigroupKind::Sum | SemigroupKind::Fingerprint => a.wrapping_add(b),
            SemigroupKind::Min => a.min(b),
        }
    }
}

/// A payload tagged with the kind it belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PayloadValue {
    pub kind: SemigroupKind,
    pub value: u64,
}

/// Combine two tagged payloads under `spec`.
pub fn combine(spec: &SemigroupSpec, a: PayloadValue, b: PayloadValue) -> Result<PayloadValue> {
    spec.combine_checked(a, b)
}
