//! Segment storage over an ordered key-value backend and the refined
//! spatio-temporal range query.

mod log_backend;
mod memory;
mod record;

pub use log_backend::{parse_block_body, replay, BlockEntry, LogBackend, Replay};
pub use memory::MemoryBackend;
pub use record::{decode_segment, encode_segment, peek_bounds, peek_ids};

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::{
    filter_noise, segment_binned, Location, Mbr, Segment, SegmentationConfig, TimeRange, Trajectory, EARTH_RADIUS_M,
};
use crate::xz::{encode_key, st_scan_ranges, XzConfig};

pub type KvPairs = Vec<(Vec<u8>, Vec<u8>)>;

/// Ordered key-value storage. `scan` returns keys in `[low, high)` in
/// ascending byte order.
pub trait StoreBackend: Send + Sync {
    fn put(&mut self, key: &[u8], value: &[u8]) -> Result<()>;
    fn get(&self, key: &[u8]) -> Result<Option<Vec<u8>>>;
    fn scan(&self, low: &[u8], high: &[u8]) -> Result<KvPairs>;
    /// Visits the same entries as [`scan`](Self::scan) without collecting them.
    fn scan_each(&self, low: &[u8], high: &[u8], f: &mut RowVisitor<'_>) -> Result<()> {
        for (k, v) in self.scan(low, high)? {
            f(&k, &v)?;
        }
        Ok(())
    }
    fn flush(&mut self) -> Result<()> {
        Ok(())
    }
}

/// Key of the store's metadata record; shard bytes never reach 0xFF.
pub const META_KEY: &[u8] = b"\xffmeta";

/// Configuration persisted alongside the data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoreMeta {
    pub xz: XzConfig,
    pub seg: SegmentationConfig,
}

/// Expands a lon/lat box so it contains every point within `theta_d` meters
/// (great-circle) of any point in it. Longitude padding uses the widest
/// latitude of the box; a box whose padded range reaches a pole gets the full
/// longitude range.
pub fn pad_window(mbr: &Mbr, theta_d: f64) -> Mbr {
    const SLACK: f64 = 1.0 + 1e-9;
    let delta = theta_d / EARTH_RADIUS_M;
    let lat_pad = delta.to_degrees() * SLACK + 1e-12;
    let max_abs_lat = mbr.min_lat.abs().max(mbr.max_lat.abs());
    let (min_lon, max_lon) = if max_abs_lat + lat_pad >= 90.0 || delta >= std::f64::consts::FRAC_PI_2 {
        (-180.0, 180.0)
    } else {
        let s = delta.sin() / max_abs_lat.to_radians().cos();
        if s >= 1.0 {
            (-180.0, 180.0)
        } else {
            let lon_pad = s.asin().to_degrees() * SLACK + 1e-12;
            ((mbr.min_lon - lon_pad).max(-180.0), (mbr.max_lon + lon_pad).min(180.0))
        }
    };
    Mbr {
        min_lon,
        min_lat: (mbr.min_lat - lat_pad).max(-90.0),
        max_lon,
        max_lat: (mbr.max_lat + lat_pad).min(90.0),
    }
}

/// Expands a time range by `theta_t` seconds on both sides. Timestamps are
/// whole seconds, so the fractional part never admits another instant.
pub fn pad_time(tr: &TimeRange, theta_t: f64) -> TimeRange {
    let pad = theta_t.floor() as i64;
    TimeRange { start: tr.start.saturating_sub(pad), end: tr.end.saturating_add(pad) }
}

/// The exact test applied after scanning.
pub fn st_matches(seg: &Segment, window: &Mbr, tr: &TimeRange) -> bool {
    seg.mbr.intersects(window) && seg.time_range().intersects(tr)
}

/// Callback of [`StoreBackend::scan_each`], handed each `(key, value)` in order.
pub type RowVisitor<'a> = dyn FnMut(&[u8], &[u8]) -> Result<()> + 'a;

/// Counters of a store's backend traffic.
#[derive(Debug, Default)]
pub struct StoreStats {
    pub queries: AtomicU64,
    pub scan_ranges: AtomicU64,
    pub rows_scanned: AtomicU64,
}

impl StoreStats {
    pub fn snapshot(&self) -> (u64, u64, u64) {
        (
            self.queries.load(Ordering::Relaxed),
            self.scan_ranges.load(Ordering::Relaxed),
            self.rows_scanned.load(Ordering::Relaxed),
        )
    }

    pub fn reset(&self) {
        self.queries.store(0, Ordering::Relaxed);
        self.scan_ranges.store(0, Ordering::Relaxed);
        self.rows_scanned.store(0, Ordering::Relaxed);
    }
}

/// Outcome of an ingest run.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct IngestReport {
    pub trajectories: usize,
    pub segments: usize,
    pub rejected_trajectories: usize,
    pub noise_points: usize,
}

/// Segments stored under XZ2T row keys.
#[derive(Debug)]
pub struct SegmentStore<B: StoreBackend> {
    backend: B,
    meta: StoreMeta,
    stats: StoreStats,
}

impl<B: StoreBackend> SegmentStore<B> {
    /// Wraps a backend, writing `meta` if the backend has none, or checking it matches.
    pub fn create(mut backend: B, xz: XzConfig, seg: SegmentationConfig) -> Result<Self> {
        xz.validate()?;
        seg.validate()?;
        let meta = StoreMeta { xz, seg };
        match backend.get(META_KEY)? {
            Some(bytes) => {
                let existing: StoreMeta = serde_json::from_slice(&bytes)
                    .map_err(|e| Error::Store(format!("unreadable store metadata: {e}")))?;
                if existing != meta {
                    return Err(Error::Store(format!(
                        "store was built with {existing:?}, refusing to mix with {meta:?}"
                    )));
                }
            }
            None => {
                let bytes = serde_json::to_vec(&meta).expect("meta serializes");
                backend.put(META_KEY, &bytes)?;
            }
        }
        Ok(Self { backend, meta, stats: StoreStats::default() })
    }

    /// Wraps a backend that already carries metadata.
    pub fn open(backend: B) -> Result<Self> {
        let bytes = backend
            .get(META_KEY)?
            .ok_or_else(|| Error::Store("store has no metadata; ingest data first".into()))?;
        let meta: StoreMeta =
            serde_json::from_slice(&bytes).map_err(|e| Error::Store(format!("unreadable store metadata: {e}")))?;
        meta.xz.validate()?;
        meta.seg.validate()?;
        Ok(Self { backend, meta, stats: StoreStats::default() })
    }

    pub fn xz(&self) -> &XzConfig {
        &self.meta.xz
    }

    pub fn seg_config(&self) -> &SegmentationConfig {
        &self.meta.seg
    }

    pub fn meta(&self) -> &StoreMeta {
        &self.meta
    }

    pub fn stats(&self) -> &StoreStats {
        &self.stats
    }

    pub fn backend(&self) -> &B {
        &self.backend
    }

    pub fn into_backend(self) -> B {
        self.backend
    }

    /// Segments a (noise-free) trajectory the way stored and query data are segmented.
    pub fn segment(&self, traj: &Trajectory) -> Vec<Segment> {
        segment_binned(traj, &self.meta.seg, &self.meta.xz.binning())
    }

    pub fn put_segment(&mut self, seg: &Segment) -> Result<()> {
        let key = encode_key(seg, &self.meta.xz)?;
        self.backend.put(&key.encode(), &encode_segment(seg))
    }

    /// Filters, segments and stores trajectories. Re-ingesting a trajectory
    /// overwrites segments with the same sid.
    pub fn ingest<I>(&mut self, trajectories: I) -> Result<IngestReport>
    where
        I: IntoIterator<Item = Trajectory>,
    {
        let mut report = IngestReport::default();
        for traj in trajectories {
            if let Some(bad) = traj.locations.iter().find(|l| l.t < self.meta.xz.epoch) {
                log::warn!("trajectory {}: timestamp {} precedes the epoch, rejected", traj.id, bad.t);
                report.rejected_trajectories += 1;
                continue;
            }
            if traj.locations.iter().any(|l| !self.meta.xz.world.contains_point(l.lon, l.lat)) {
                log::warn!("trajectory {}: location outside the index world, rejected", traj.id);
                report.rejected_trajectories += 1;
                continue;
            }
            let Some(clean) = filter_noise(&traj, &self.meta.seg) else {
                report.rejected_trajectories += 1;
                continue;
            };
            report.noise_points += traj.len() - clean.len();
            for seg in self.segment(&clean) {
                self.put_segment(&seg)?;
                report.segments += 1;
            }
            report.trajectories += 1;
        }
        self.backend.flush()?;
        Ok(report)
    }

    /// Segments whose box meets `window` padded by `theta_d` meters and whose
    /// time range meets `tr` padded by `theta_t` seconds; deduplicated and
    /// sorted by sid.
    pub fn st_query(&self, window: &Mbr, tr: &TimeRange, theta_d: f64, theta_t: f64) -> Result<Vec<Segment>> {
        let win = pad_window(window, theta_d);
        let time = pad_time(tr, theta_t);
        self.query_padded(&win, &time)
    }

    /// Exact query over an already padded window.
    pub fn query_padded(&self, win: &Mbr, time: &TimeRange) -> Result<Vec<Segment>> {
        self.query_rows(win, time)?.iter().map(StoredRow::decode).collect()
    }

    /// Rows meeting an already padded window, sorted by sid, with locations
    /// left encoded. Only the fixed-size header of non-matching rows is read.
    pub fn query_rows(&self, win: &Mbr, time: &TimeRange) -> Result<Vec<StoredRow>> {
        let ranges = st_scan_ranges(win, time, &self.meta.xz);
        self.stats.queries.fetch_add(1, Ordering::Relaxed);
        self.stats.scan_ranges.fetch_add(ranges.len() as u64, Ordering::Relaxed);
        let mut out = Vec::new();
        let mut rows = 0u64;
        for r in &ranges {
            self.backend.scan_each(&r.low, &r.high, &mut |_, value| {
                rows += 1;
                let (mbr, tr) = peek_bounds(value)?;
                if mbr.intersects(win) && tr.intersects(time) {
                    let (traj_id, sid) = peek_ids(value)?;
                    out.push(StoredRow { traj_id, sid, mbr, st: tr.start, et: tr.end, value: value.to_vec() });
                }
                Ok(())
            })?;
        }
        self.stats.rows_scanned.fetch_add(rows, Ordering::Relaxed);
        out.sort_by(|a, b| a.sid.cmp(&b.sid));
        out.dedup_by(|a, b| a.sid == b.sid);
        Ok(out)
    }

    /// Every stored segment, in key order.
    pub fn all_segments(&self) -> Result<Vec<Segment>> {
        self.backend
            .scan(&[], &[0xff])?
            .into_iter()
            .map(|(_, v)| decode_segment(&v))
            .collect()
    }

    /// Reassembles a stored trajectory by id with a full scan; `None` if absent.
    pub fn load_trajectory(&self, id: &str) -> Result<Option<Trajectory>> {
        let segs: Vec<Segment> = self.all_segments()?.into_iter().filter(|s| s.traj_id == id).collect();
        Ok(group_by_trajectory(&segs)
            .remove(id)
            .map(|locations| Trajectory { id: id.to_string(), locations }))
    }
}

/// A matched row: header fields decoded, locations still encoded.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredRow {
    pub traj_id: String,
    pub sid: String,
    pub mbr: Mbr,
    pub st: i64,
    pub et: i64,
    value: Vec<u8>,
}

impl StoredRow {
    pub fn time_range(&self) -> TimeRange {
        TimeRange { start: self.st, end: self.et }
    }

    /// Same test as [`st_matches`], on the header alone.
    pub fn matches(&self, window: &Mbr, tr: &TimeRange) -> bool {
        self.mbr.intersects(window) && self.time_range().intersects(tr)
    }

    pub fn decode(&self) -> Result<Segment> {
        decode_segment(&self.value)
    }
}

/// Decodes `rows` and merges their locations into one time-sorted list.
pub fn merge_locations<'a>(rows: impl IntoIterator<Item = &'a StoredRow>) -> Result<Vec<Location>> {
    let mut rows: Vec<&StoredRow> = rows.into_iter().collect();
    rows.sort_by(|a, b| (a.st, &a.sid).cmp(&(b.st, &b.sid)));
    let mut locs = Vec::new();
    for r in rows {
        locs.extend(r.decode()?.locations);
    }
    locs.sort_by_key(|l| l.t);
    Ok(locs)
}

/// Groups segments by trajectory id. Each trajectory's locations are
/// concatenated from its distinct segments and sorted by time.
pub fn group_by_trajectory(segments: &[Segment]) -> BTreeMap<String, Vec<Location>> {
    let mut by_traj: BTreeMap<&str, Vec<&Segment>> = BTreeMap::new();
    for s in segments {
        by_traj.entry(&s.traj_id).or_default().push(s);
    }
    by_traj
        .into_iter()
        .map(|(id, mut segs)| {
            segs.sort_by(|a, b| (a.st, &a.sid).cmp(&(b.st, &b.sid)));
            segs.dedup_by(|a, b| a.sid == b.sid);
            let mut locs: Vec<Location> = segs.iter().flat_map(|s| s.locations.iter().copied()).collect();
            locs.sort_by_key(|l| l.t);
            (id.to_string(), locs)
        })
        .collect()
}
