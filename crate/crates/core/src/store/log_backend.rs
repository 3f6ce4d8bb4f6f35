//! Single-file log-structured store.
//!
//! Writes land in an in-memory table; a flush appends it to the file as one
//! sorted, checksummed block. On open the file is replayed into an in-memory
//! key index (newer blocks win) and values are read on demand.
//!
//! ```text
//! file   := MAGIC block*
//! block  := u32 BLOCK_TAG | u32 count | u64 body_len | body | u32 crc32(body)
//! body   := (u32 key_len | u32 value_len | key | value)*   keys strictly ascending
//! ```
//! Integers are little-endian. A block cut short at the end of the file is a
//! torn write and is truncated away on open.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufReader, Read, Seek, SeekFrom, Write};
use std::ops::Bound;
use std::path::{Path, PathBuf};

use super::{KvPairs, StoreBackend};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"CTLOG001";
const BLOCK_TAG: u32 = 0x314b_4c42; // "BLK1"
const BLOCK_HEADER: u64 = 16;
const DEFAULT_FLUSH_BYTES: usize = 4 << 20;
const COMPACT_BLOCK_ENTRIES: usize = 4096;

#[derive(Debug, Clone, Copy)]
struct ValueLoc {
    offset: u64,
    len: u32,
}

/// One entry of a decoded block body: key bytes and the value's byte range in the body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockEntry<'a> {
    pub key: &'a [u8],
    pub value_offset: usize,
    pub value_len: usize,
}

/// `(key, absolute value offset, value length)`
pub type IndexEntry = (Vec<u8>, u64, u32);

/// Parses a block body holding `count` entries with strictly ascending keys.
pub fn parse_block_body(body: &[u8], count: u32) -> Result<Vec<BlockEntry<'_>>> {
    let mut entries = Vec::with_capacity((count as usize).min(body.len() / 8));
    let mut pos = 0usize;
    let u32_at = |pos: usize| -> Result<u32> {
        body.get(pos..pos + 4)
            .map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")))
            .ok_or_else(|| Error::Decode("block entry header truncated".into()))
    };
    for _ in 0..count {
        let klen = u32_at(pos)? as usize;
        let vlen = u32_at(pos + 4)? as usize;
        pos += 8;
        let key_end = pos.checked_add(klen).filter(|&e| e <= body.len());
        let key_end = key_end.ok_or_else(|| Error::Decode("block key truncated".into()))?;
        let val_end = key_end.checked_add(vlen).filter(|&e| e <= body.len());
        let val_end = val_end.ok_or_else(|| Error::Decode("block value truncated".into()))?;
        let key = &body[pos..key_end];
        if let Some(prev) = entries.last() {
            let prev: &BlockEntry = prev;
            if prev.key >= key {
                return Err(Error::Decode("block keys are not strictly ascending".into()));
            }
        }
        entries.push(BlockEntry { key, value_offset: key_end, value_len: vlen });
        pos = val_end;
    }
    if pos != body.len() {
        return Err(Error::Decode(format!("{} trailing bytes after block entries", body.len() - pos)));
    }
    Ok(entries)
}

fn encode_block<'a>(entries: impl Iterator<Item = (&'a [u8], &'a [u8])>) -> (Vec<u8>, Vec<IndexEntry>) {
    let mut body = Vec::new();
    let mut locs = Vec::new();
    for (k, v) in entries {
        body.extend_from_slice(&(k.len() as u32).to_le_bytes());
        body.extend_from_slice(&(v.len() as u32).to_le_bytes());
        body.extend_from_slice(k);
        locs.push((k.to_vec(), body.len() as u64, v.len() as u32));
        body.extend_from_slice(v);
    }
    let mut out = Vec::with_capacity(body.len() + 20);
    out.extend_from_slice(&BLOCK_TAG.to_le_bytes());
    out.extend_from_slice(&(locs.len() as u32).to_le_bytes());
    out.extend_from_slice(&(body.len() as u64).to_le_bytes());
    out.extend_from_slice(&body);
    out.extend_from_slice(&crc32fast::hash(&body).to_le_bytes());
    (out, locs)
}

/// Outcome of replaying a log image.
#[derive(Debug, Default)]
pub struct Replay {
    /// Later entries override earlier ones.
    pub entries: Vec<IndexEntry>,
    /// Length of the valid prefix; anything beyond is a torn tail.
    pub valid_len: u64,
    pub blocks: usize,
}

fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> io::Result<bool> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..])? {
            0 => return Ok(false),
            n => filled += n,
        }
    }
    Ok(true)
}

/// Replays a log from a reader positioned at the start of the file.
pub fn replay<R: Read>(mut r: R) -> Result<Replay> {
    let mut magic = [0u8; 8];
    if !read_full(&mut r, &mut magic)? || &magic != MAGIC {
        return Err(Error::Decode("not a crowdtrace log file".into()));
    }
    let mut out = Replay { valid_len: MAGIC.len() as u64, ..Replay::default() };
    loop {
        let mut header = [0u8; BLOCK_HEADER as usize];
        if !read_full(&mut r, &mut header)? {
            break;
        }
        let tag = u32::from_le_bytes(header[0..4].try_into().expect("4"));
        let count = u32::from_le_bytes(header[4..8].try_into().expect("4"));
        let body_len = u64::from_le_bytes(header[8..16].try_into().expect("8"));
        if tag != BLOCK_TAG {
            return Err(Error::Decode(format!("bad block tag at offset {}", out.valid_len)));
        }
        let mut body = Vec::new();
        let got = (&mut r).take(body_len).read_to_end(&mut body)?;
        if (got as u64) < body_len {
            break;
        }
        let mut crc = [0u8; 4];
        if !read_full(&mut r, &mut crc)? {
            break;
        }
        if crc32fast::hash(&body) != u32::from_le_bytes(crc) {
            return Err(Error::Decode(format!("checksum mismatch in block at offset {}", out.valid_len)));
        }
        let body_start = out.valid_len + BLOCK_HEADER;
        for e in parse_block_body(&body, count)? {
            out.entries.push((e.key.to_vec(), body_start + e.value_offset as u64, e.value_len as u32));
        }
        out.valid_len = body_start + body_len + 4;
        out.blocks += 1;
    }
    Ok(out)
}

/// Persistent backend over one append-only file.
#[derive(Debug)]
pub struct LogBackend {
    path: PathBuf,
    file: File,
    index: BTreeMap<Vec<u8>, ValueLoc>,
    memtable: BTreeMap<Vec<u8>, Vec<u8>>,
    mem_bytes: usize,
    flush_bytes: usize,
    file_len: u64,
}

impl LogBackend {
    /// Opens or creates the log at `path`.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut file = OpenOptions::new().read(true).write(true).create(true).truncate(false).open(&path)?;
        if file.metadata()?.len() == 0 {
            file.write_all(MAGIC)?;
            file.sync_data()?;
        }
        file.seek(SeekFrom::Start(0))?;
        let replayed = replay(BufReader::new(&mut file))?;
        let actual = file.metadata()?.len();
        if actual > replayed.valid_len {
            log::warn!("{}: truncating {} bytes of torn tail", path.display(), actual - replayed.valid_len);
            file.set_len(replayed.valid_len)?;
        }
        let mut index = BTreeMap::new();
        for (k, offset, len) in replayed.entries {
            index.insert(k, ValueLoc { offset, len });
        }
        file.seek(SeekFrom::End(0))?;
        Ok(Self {
            path,
            file,
            index,
            memtable: BTreeMap::new(),
            mem_bytes: 0,
            flush_bytes: DEFAULT_FLUSH_BYTES,
            file_len: replayed.valid_len,
        })
    }

    /// Sets the in-memory table size that triggers an automatic flush.
    pub fn with_flush_bytes(mut self, bytes: usize) -> Self {
        self.flush_bytes = bytes.max(1);
        self
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn read_value(&self, loc: ValueLoc) -> Result<Vec<u8>> {
        let mut buf = vec![0u8; loc.len as usize];
        read_exact_at(&self.file, &mut buf, loc.offset)?;
        Ok(buf)
    }

    fn scan_bounds(&self, bounds: (Bound<&[u8]>, Bound<&[u8]>)) -> Result<KvPairs> {
        let mut mem = self.memtable.range::<[u8], _>(bounds).peekable();
        let mut disk = self.index.range::<[u8], _>(bounds).peekable();
        let mut out = Vec::new();
        loop {
            let take_mem = match (mem.peek(), disk.peek()) {
                (None, None) => break,
                (Some(_), None) => true,
                (None, Some(_)) => false,
                (Some((mk, _)), Some((dk, _))) => {
                    let ord = mk.cmp(dk);
                    if ord.is_eq() {
                        // the in-memory table shadows older flushed values
                        disk.next();
                    }
                    ord.is_le()
                }
            };
            if take_mem {
                let (k, v) = mem.next().expect("peeked");
                out.push((k.clone(), v.clone()));
            } else {
                let (k, loc) = disk.next().expect("peeked");
                out.push((k.clone(), self.read_value(*loc)?));
            }
        }
        Ok(out)
    }

    fn append_block<'a>(&mut self, entries: impl Iterator<Item = (&'a [u8], &'a [u8])>) -> Result<Vec<(Vec<u8>, ValueLoc)>> {
        let (bytes, locs) = encode_block(entries);
        let body_start = self.file_len + BLOCK_HEADER;
        self.file.write_all(&bytes)?;
        self.file_len += bytes.len() as u64;
        Ok(locs
            .into_iter()
            .map(|(k, off, len)| (k, ValueLoc { offset: body_start + off, len }))
            .collect())
    }

    /// Rewrites the file so it holds only live entries.
    pub fn compact(&mut self) -> Result<()> {
        let all = self.scan_bounds((Bound::Unbounded, Bound::Unbounded))?;
        let tmp = self.path.with_extension("compact");
        {
            let mut out = File::create(&tmp)?;
            out.write_all(MAGIC)?;
            for chunk in all.chunks(COMPACT_BLOCK_ENTRIES) {
                let (bytes, _) = encode_block(chunk.iter().map(|(k, v)| (k.as_slice(), v.as_slice())));
                out.write_all(&bytes)?;
            }
            out.sync_all()?;
        }
        std::fs::rename(&tmp, &self.path)?;
        let flush_bytes = self.flush_bytes;
        *self = Self::open(&self.path)?.with_flush_bytes(flush_bytes);
        Ok(())
    }
}

#[cfg(unix)]
fn read_exact_at(file: &File, buf: &mut [u8], offset: u64) -> io::Result<()> {
    use std::os::unix::fs::FileExt;
    file.read_exact_at(buf, offset)
}

#[cfg(windows)]
fn read_exact_at(file: &File, mut buf: &mut [u8], mut offset: u64) -> io::Result<()> {
    use std::os::windows::fs::FileExt;
    while !buf.is_empty() {
        match file.seek_read(buf, offset)? {
            0 => return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "short read")),
            n => {
                buf = &mut buf[n..];
                offset += n as u64;
            }
        }
    }
    Ok(())
}

impl StoreBackend for LogBackend {
    fn put(&mut self, key: &[u8], value: &[u8]) -> Result<()> {
        self.mem_bytes += key.len() + value.len() + 8;
        self.memtable.insert(key.to_vec(), value.to_vec());
        if self.mem_bytes >= self.flush_bytes {
            self.flush()?;
        }
        Ok(())
    }

    fn get(&self, key: &[u8]) -> Result<Option<Vec<u8>>> {
        if let Some(v) = self.memtable.get(key) {
            return Ok(Some(v.clone()));
        }
        self.index.get(key).map(|loc| self.read_value(*loc)).transpose()
    }

    fn scan(&self, low: &[u8], high: &[u8]) -> Result<KvPairs> {
        if low >= high {
            return Ok(Vec::new());
        }
        self.scan_bounds((Bound::Included(low), Bound::Excluded(high)))
    }

    fn flush(&mut self) -> Result<()> {
        if self.memtable.is_empty() {
            return Ok(());
        }
        let memtable = std::mem::take(&mut self.memtable);
        let locs = self.append_block(memtable.iter().map(|(k, v)| (k.as_slice(), v.as_slice())))?;
        self.file.sync_data()?;
        for (k, loc) in locs {
            self.index.insert(k, loc);
        }
        self.mem_bytes = 0;
        Ok(())
    }
}

impl Drop for LogBackend {
    fn drop(&mut self) {
        if let Err(e) = self.flush() {
            log::error!("{}: flush on close failed: {e}", self.path.display());
        }
    }
}
