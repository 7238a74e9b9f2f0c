//! Versioned binary files for built indices.
//!
//! Layout: magic `CFMG1`, format version (u32 LE), body length (u64 LE),
//! SHA-256 of the body, then the bincode body (little-endian integers).

use std::io::{Read, Write};

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::engine::IntervalIndex;
use crate::error::{Error, Result};
use crate::semigroup::Semigroup;

pub const MAGIC: &[u8; 5] = b"CFMG1";
pub const VERSION: u32 = 1;

impl<S> IntervalIndex<S>
where
    S: Semigroup + Serialize + DeserializeOwned,
    S::Value: Serialize + DeserializeOwned,
{
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let body = bincode::serialize(self).map_err(|e| Error::Format(e.to_string()))?;
        let mut out = Vec::with_capacity(body.len() + 49);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(body.len() as u64).to_le_bytes());
        out.extend_from_slice(&Sha256::digest(&body));
        out.extend_from_slice(&body);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Format(m.to_string());
        let rest = bytes.strip_prefix(MAGIC.as_slice()).ok_or_else(|| bad("missing CFMG1 magic"))?;
        if rest.len() < 44 {
            return Err(bad("truncated header"));
        }
        let version = u32::from_le_bytes(rest[..4].try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(Error::Format(format!("unsupported format version {version}")));
        }
        let len = u64::from_le_bytes(rest[4..12].try_into().expect("8 bytes")) as usize;
        let (sum, body) = rest[12..].split_at(32);
        if body.len() != len {
            return Err(bad("body length mismatch"));
        }
        if Sha256::digest(body).as_slice() != sum {
            return Err(bad("checksum mismatch"));
        }
        bincode::deserialize(body).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(&self.to_bytes()?)?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}
