use std::hash::Hasher;

use fnv::FnvHasher;

use super::{bin_of, sequence_code, xz2_element, XzConfig};
use crate::error::{Error, Result};
use crate::trajectory::Segment;

/// Bytes before the sid: 1 shard + 4 bin + 8 code.
pub const KEY_PREFIX_LEN: usize = 13;

/// Row key of a stored segment: `shard ‖ bin ‖ xz2 ‖ sid`.
///
/// Integers are big-endian so byte order equals tuple order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct STKey {
    pub shard: u8,
    pub bin: u32,
    pub xz2: u64,
    pub sid: String,
}

impl STKey {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(KEY_PREFIX_LEN + self.sid.len());
        out.extend_from_slice(&prefix(self.shard, self.bin, self.xz2));
        out.extend_from_slice(self.sid.as_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < KEY_PREFIX_LEN {
            return Err(Error::Decode(format!("key of {} bytes is shorter than its prefix", bytes.len())));
        }
        let shard = bytes[0];
        let bin = u32::from_be_bytes(bytes[1..5].try_into().expect("4 bytes"));
        let xz2 = u64::from_be_bytes(bytes[5..13].try_into().expect("8 bytes"));
        let sid = std::str::from_utf8(&bytes[13..])
            .map_err(|e| Error::Decode(format!("sid is not UTF-8: {e}")))?
            .to_string();
        Ok(Self { shard, bin, xz2, sid })
    }
}

pub(crate) fn prefix(shard: u8, bin: u32, code: u64) -> [u8; KEY_PREFIX_LEN] {
    let mut p = [0u8; KEY_PREFIX_LEN];
    p[0] = shard;
    p[1..5].copy_from_slice(&bin.to_be_bytes());
    p[5..13].copy_from_slice(&code.to_be_bytes());
    p
}

/// FNV-1a, 64-bit.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(bytes);
    h.finish()
}

/// Row key for a segment. The segment must not cross a time bin.
pub fn encode_key(seg: &Segment, cfg: &XzConfig) -> Result<STKey> {
    let bin = bin_of(seg.st, cfg)?;
    if bin_of(seg.et, cfg)? != bin {
        return Err(Error::CrossBin { sid: seg.sid.clone() });
    }
    let element = xz2_element(&seg.mbr, cfg)?;
    Ok(STKey {
        shard: (fnv1a64(seg.sid.as_bytes()) % cfg.num_shards as u64) as u8,
        bin,
        xz2: sequence_code(&element, cfg),
        sid: seg.sid.clone(),
    })
}
