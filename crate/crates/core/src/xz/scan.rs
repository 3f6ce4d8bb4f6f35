use super::key::prefix;
use super::{bin_of, subtree_size, XzConfig};
use crate::trajectory::{Mbr, TimeRange};

/// Half-open byte-key interval `[low, high)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ScanRange {
    pub low: Vec<u8>,
    pub high: Vec<u8>,
}

/// Inclusive code intervals covering every element whose x-extension
/// intersects `window`. Sorted, disjoint, with adjacent intervals merged.
pub fn spatial_scan_ranges(window: &Mbr, cfg: &XzConfig) -> Vec<(u64, u64)> {
    let w = &cfg.world;
    if !window.intersects(w) {
        return Vec::new();
    }
    let clipped = Mbr {
        min_lon: window.min_lon.max(w.min_lon),
        min_lat: window.min_lat.max(w.min_lat),
        max_lon: window.max_lon.min(w.max_lon),
        max_lat: window.max_lat.min(w.max_lat),
    };
    let q = cfg.normalize(&clipped);
    let mut out = Vec::new();
    visit(&q, 0.0, 0.0, 1.0, 0, 0, cfg.resolution, &mut out);
    coalesce(out)
}

#[allow(clippy::too_many_arguments)]
fn visit(q: &[f64; 4], x0: f64, y0: f64, w: f64, level: usize, code: u64, g: u8, out: &mut Vec<(u64, u64)>) {
    let [qx0, qy0, qx1, qy1] = *q;
    // Whole cell inside the window: every descendant's x-extension overlaps it.
    if qx0 <= x0 && x0 + w <= qx1 && qy0 <= y0 && y0 + w <= qy1 {
        out.push((code, code + subtree_size(level, g) - 1));
        return;
    }
    let ext = 2.0 * w;
    if x0 > qx1 || x0 + ext < qx0 || y0 > qy1 || y0 + ext < qy0 {
        return;
    }
    out.push((code, code));
    if level == g as usize {
        return;
    }
    let half = w * 0.5;
    let child_size = subtree_size(level + 1, g);
    for d in 0..4u64 {
        let cx = if d & 1 == 1 { x0 + half } else { x0 };
        let cy = if d & 2 == 2 { y0 + half } else { y0 };
        visit(q, cx, cy, half, level + 1, code + 1 + d * child_size, g, out);
    }
}

fn coalesce(mut ranges: Vec<(u64, u64)>) -> Vec<(u64, u64)> {
    ranges.sort_unstable();
    let mut out: Vec<(u64, u64)> = Vec::with_capacity(ranges.len());
    for (lo, hi) in ranges {
        match out.last_mut() {
            Some(last) if lo <= last.1.saturating_add(1) => last.1 = last.1.max(hi),
            _ => out.push((lo, hi)),
        }
    }
    out
}

/// Byte-key ranges for a spatio-temporal window, sorted and coalesced.
///
/// Segments are keyed by the bin of their start time and span at most one
/// period, so one extra bin before `tr.start` is scanned.
pub fn st_scan_ranges(window: &Mbr, tr: &TimeRange, cfg: &XzConfig) -> Vec<ScanRange> {
    if tr.end < cfg.epoch {
        return Vec::new();
    }
    let first = bin_of(tr.start.saturating_sub(cfg.period_secs()).max(cfg.epoch), cfg);
    let last = bin_of(tr.end, cfg);
    let (Ok(first), Ok(last)) = (first, last) else {
        return Vec::new();
    };
    let codes = spatial_scan_ranges(window, cfg);
    let mut out: Vec<ScanRange> = Vec::new();
    for shard in 0..cfg.num_shards {
        for bin in first..=last {
            for &(lo, hi) in &codes {
                let low = prefix(shard, bin, lo).to_vec();
                let high = prefix(shard, bin, hi + 1).to_vec();
                match out.last_mut() {
                    Some(prev) if prev.high >= low => {
                        if high > prev.high {
                            prev.high = high;
                        }
                    }
                    _ => out.push(ScanRange { low, high }),
                }
            }
        }
    }
    out
}
