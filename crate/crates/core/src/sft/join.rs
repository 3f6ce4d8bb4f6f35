//! Batched infected-rate join over an SFT index.
//!
//! Every time-tree leaf issues one padded range query over its merged
//! envelope. Within a leaf each member query segment is scored against every
//! retrieved trajectory that its own padded window would have retrieved. A
//! pair whose segment score violates Lemma 2 is moved to the shared `removed`
//! set and never scored again; pairs only ever leave the result, so the final
//! output does not depend on leaf scheduling.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::RwLock;

use rayon::prelude::*;

use super::{Sft, SftConfig, TLeaf};
use crate::error::{Error, Result};
use crate::irq::PRUNE_SLACK;
use crate::metric::{p_weights, segment_ir_sorted, QueryParams};
use crate::store::{pad_time, pad_window, SegmentStore, StoreBackend};
use crate::trajectory::{Location, Segment, Trajectory};

/// Result key of the join.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PairKey {
    pub query_traj_id: String,
    pub candidate_traj_id: String,
}

/// Join output plus counters.
#[derive(Debug, Clone, Default)]
pub struct JoinOutcome {
    /// Sorted by query id, then descending `ir`, then candidate id.
    pub results: Vec<(PairKey, f64)>,
    /// Number of time-tree leaves, equal to the number of range queries issued.
    pub leaves: usize,
    pub query_segments: usize,
    /// Distinct pairs removed by Lemma 2.
    pub pruned_pairs: usize,
    /// Segment scores computed.
    pub evaluations: u64,
}

#[derive(Debug, Clone, Copy)]
struct QueryRef {
    query: usize,
    ordinal: usize,
    weight: f64,
}

/// (query index, candidate id)
type Pair = (usize, String);

#[derive(Default)]
struct LeafOutput {
    irps: Vec<(Pair, usize, f64)>,
    removed: Vec<Pair>,
    evaluations: u64,
}

/// Shared set of pruned pairs, indexed by query so candidate ids can be probed by reference.
#[derive(Default)]
struct Removed(RwLock<HashMap<usize, HashSet<String>>>);

impl Removed {
    fn contains(&self, q: usize, cand: &str) -> bool {
        let guard = self.0.read().unwrap_or_else(|e| e.into_inner());
        guard.get(&q).is_some_and(|s| s.contains(cand))
    }

    fn insert(&self, q: usize, cand: &str) {
        let mut guard = self.0.write().unwrap_or_else(|e| e.into_inner());
        guard.entry(q).or_default().insert(cand.to_string());
    }
}

#[allow(clippy::too_many_arguments)]
fn process_leaf<B: StoreBackend>(
    store: &SegmentStore<B>,
    leaf: &TLeaf,
    segments: &[Segment],
    refs: &[QueryRef],
    query_set: &[Trajectory],
    params: &QueryParams,
    prune: bool,
    removed: &Removed,
) -> Result<LeafOutput> {
    let rows = store.query_rows(&pad_window(&leaf.mbr, params.theta_d), &pad_time(&leaf.tr, params.theta_t))?;
    let mut by_traj: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (k, row) in rows.iter().enumerate() {
        by_traj.entry(&row.traj_id).or_default().push(k);
    }
    let mut decoded: Vec<Option<Vec<Location>>> = vec![None; rows.len()];

    let mut entries = leaf.entries.clone();
    entries.sort_unstable();
    let mut out = LeafOutput::default();
    for i in entries {
        let s = &segments[i];
        let r = refs[i];
        let qid = query_set[r.query].id.as_str();
        let win = pad_window(&s.mbr, params.theta_d);
        let time = pad_time(&s.time_range(), params.theta_t);
        for (&cid, crows) in &by_traj {
            if cid == qid {
                continue;
            }
            let near: Vec<usize> = crows.iter().copied().filter(|&k| rows[k].matches(&win, &time)).collect();
            if near.is_empty() || (prune && removed.contains(r.query, cid)) {
                continue;
            }
            let mut locs = Vec::new();
            for k in near {
                if decoded[k].is_none() {
                    decoded[k] = Some(rows[k].decode()?.locations);
                }
                locs.extend_from_slice(decoded[k].as_deref().unwrap_or(&[]));
            }
            locs.sort_by_key(|l| l.t);
            let irp = segment_ir_sorted(s, &locs, params) * r.weight;
            out.evaluations += 1;
            if prune && irp < params.theta - 1.0 + r.weight - PRUNE_SLACK {
                removed.insert(r.query, cid);
                out.removed.push((r.query, cid.to_string()));
                continue;
            }
            out.irps.push(((r.query, cid.to_string()), r.ordinal, irp));
        }
    }
    Ok(out)
}

/// Join with Lemma 2 enabled or disabled.
pub fn irjq_with<B: StoreBackend>(
    store: &SegmentStore<B>,
    query_set: &[Trajectory],
    params: &QueryParams,
    cfg: &SftConfig,
    prune: bool,
) -> Result<JoinOutcome> {
    params.validate()?;
    if query_set.is_empty() {
        return Err(Error::InvalidParam("query set is empty".into()));
    }
    let mut ids = HashSet::new();
    for q in query_set {
        if !ids.insert(q.id.as_str()) {
            return Err(Error::InvalidParam(format!("duplicate query trajectory id {:?}", q.id)));
        }
    }

    let mut segments = Vec::new();
    let mut refs = Vec::new();
    for (qi, q) in query_set.iter().enumerate() {
        let segs = store.segment(q);
        let weights = p_weights(&segs);
        for (k, (s, w)) in segs.into_iter().zip(weights).enumerate() {
            refs.push(QueryRef { query: qi, ordinal: k, weight: w });
            segments.push(s);
        }
    }
    let query_segments = segments.len();
    let sft = Sft::build(segments, store.xz().world, cfg);
    let leaves = sft.leaves();

    let removed = Removed::default();
    let outputs: Vec<LeafOutput> = leaves
        .par_iter()
        .map(|leaf| process_leaf(store, leaf, &sft.segments, &refs, query_set, params, prune, &removed))
        .collect::<Result<_>>()?;

    // Merge: a removed pair is dropped whatever other leaves recorded for it.
    let mut removed_all: HashSet<Pair> = HashSet::new();
    let mut partial: BTreeMap<Pair, BTreeMap<usize, f64>> = BTreeMap::new();
    let mut evaluations = 0;
    for out in outputs {
        evaluations += out.evaluations;
        removed_all.extend(out.removed);
        for (pair, ordinal, irp) in out.irps {
            let slot = partial.entry(pair).or_default().entry(ordinal).or_insert(irp);
            *slot = slot.max(irp);
        }
    }

    let mut results: Vec<(PairKey, f64)> = partial
        .into_iter()
        .filter(|(pair, _)| !removed_all.contains(pair))
        .filter_map(|((q, cand), irps)| {
            let ir = irps.values().fold(0.0, |acc, v| acc + v);
            (ir > params.theta).then(|| {
                (PairKey { query_traj_id: query_set[q].id.clone(), candidate_traj_id: cand }, ir)
            })
        })
        .collect();
    results.sort_by(|a, b| {
        a.0.query_traj_id
            .cmp(&b.0.query_traj_id)
            .then_with(|| b.1.total_cmp(&a.1))
            .then_with(|| a.0.candidate_traj_id.cmp(&b.0.candidate_traj_id))
    });
    Ok(JoinOutcome { results, leaves: leaves.len(), query_segments, pruned_pairs: removed_all.len(), evaluations })
}

/// Every `(Q, T)` with `Q` in `query_set`, `T` stored, `T != Q` and `IR(Q, T) > θ`.
pub fn irjq<B: StoreBackend>(
    store: &SegmentStore<B>,
    query_set: &[Trajectory],
    params: &QueryParams,
    cfg: &SftConfig,
) -> Result<JoinOutcome> {
    irjq_with(store, query_set, params, cfg, true)
}

/// Same contract as [`irjq`] without pruning.
pub fn irjq_unpruned<B: StoreBackend>(
    store: &SegmentStore<B>,
    query_set: &[Trajectory],
    params: &QueryParams,
    cfg: &SftConfig,
) -> Result<JoinOutcome> {
    irjq_with(store, query_set, params, cfg, false)
}
