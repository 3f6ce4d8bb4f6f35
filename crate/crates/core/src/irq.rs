//! Single-trajectory infected-rate query with four pruning bounds.
//!
//! Candidates come from one padded range query per query segment. Each
//! candidate is then scored segment by segment in the query's time order,
//! stopping as soon as an upper bound on its final infected rate falls below
//! `theta`:
//!
//! - **L1** `Σ P(s)` over intersecting segments `< θ`: skip before any scoring.
//! - **L2** `IRP(s) < θ - 1 + P(s)`: the other segments cannot make up the gap.
//! - **L3** for intersecting `s`, `IRP(s) < θ - (Σ P - P(s))`.
//! - **L4** `IRP(s) < θ - accumulated - remaining`, where `remaining` is
//!   `Σ P` over intersecting segments not yet scored.
//!
//! `IRP(s) = IR(s, T) * P(s)`. A segment no candidate location comes near has
//! `IR = 0` exactly, so only intersecting segments are scored.

use std::collections::{BTreeMap, HashMap};
use std::ops::AddAssign;

use rayon::prelude::*;

use crate::error::Result;
use crate::metric::{p_weights, segment_ir_sorted, sort_results, QueryParams};
use crate::store::{merge_locations, pad_time, pad_window, SegmentStore, StoreBackend, StoredRow};
use crate::trajectory::{Location, Segment, Trajectory};

/// Slack on every bound so rounding can never prune a qualifying candidate.
pub(crate) const PRUNE_SLACK: f64 = 1e-9;

/// Which pruning bounds are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LemmaSet {
    pub l1: bool,
    pub l2: bool,
    pub l3: bool,
    pub l4: bool,
}

impl LemmaSet {
    pub const ALL: LemmaSet = LemmaSet { l1: true, l2: true, l3: true, l4: true };
    pub const NONE: LemmaSet = LemmaSet { l1: false, l2: false, l3: false, l4: false };

    /// Only bound `n` (1-based) enabled.
    pub fn only(n: u8) -> LemmaSet {
        LemmaSet { l1: n == 1, l2: n == 2, l3: n == 3, l4: n == 4 }
    }
}

/// How many candidates each bound removed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LemmaCounters {
    pub l1: u64,
    pub l2: u64,
    pub l3: u64,
    pub l4: u64,
}

impl LemmaCounters {
    pub fn total(&self) -> u64 {
        self.l1 + self.l2 + self.l3 + self.l4
    }
}

impl AddAssign for LemmaCounters {
    fn add_assign(&mut self, o: Self) {
        self.l1 += o.l1;
        self.l2 += o.l2;
        self.l3 += o.l3;
        self.l4 += o.l4;
    }
}

/// A stored trajectory near the query.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub traj_id: String,
    /// Retrieved rows, deduplicated by sid; locations are decoded on demand.
    pub rows: Vec<StoredRow>,
    /// Query segment index to the rows its padded range retrieved.
    pub hits: BTreeMap<usize, Vec<usize>>,
}

impl Candidate {
    /// Time-sorted locations of the rows near query segment `i`.
    pub fn locations_near(&self, i: usize) -> Result<Vec<Location>> {
        let idx = self.hits.get(&i).map(Vec::as_slice).unwrap_or(&[]);
        merge_locations(idx.iter().map(|&r| &self.rows[r]))
    }

    /// As [`Candidate::locations_near`], decoding each row at most once across calls.
    fn locations_cached(&self, i: usize, cache: &mut [Option<Vec<Location>>]) -> Result<Vec<Location>> {
        let mut locs = Vec::new();
        for &r in self.hits.get(&i).map(Vec::as_slice).unwrap_or(&[]) {
            if cache[r].is_none() {
                cache[r] = Some(self.rows[r].decode()?.locations);
            }
            locs.extend_from_slice(cache[r].as_deref().unwrap_or(&[]));
        }
        locs.sort_by_key(|l| l.t);
        Ok(locs)
    }
}

/// Result of one query.
#[derive(Debug, Clone, Default)]
pub struct IrqOutcome {
    /// `(traj_id, ir)` with `ir > θ`, descending by `ir` then ascending id.
    pub results: Vec<(String, f64)>,
    pub counters: LemmaCounters,
    pub candidates: usize,
}

/// Runs one padded range query per query segment and groups the hits by
/// trajectory, skipping `exclude` (the query's own id).
pub fn extract_candidates<B: StoreBackend>(
    store: &SegmentStore<B>,
    query: &[Segment],
    params: &QueryParams,
    exclude: &str,
) -> Result<BTreeMap<String, Candidate>> {
    let mut out: BTreeMap<String, Candidate> = BTreeMap::new();
    let mut slot: HashMap<String, usize> = HashMap::new();
    for (i, s) in query.iter().enumerate() {
        let win = pad_window(&s.mbr, params.theta_d);
        let time = pad_time(&s.time_range(), params.theta_t);
        for row in store.query_rows(&win, &time)? {
            if row.traj_id == exclude {
                continue;
            }
            let cand = out
                .entry(row.traj_id.clone())
                .or_insert_with(|| Candidate { traj_id: row.traj_id.clone(), rows: Vec::new(), hits: BTreeMap::new() });
            let r = match slot.get(&row.sid) {
                Some(&r) => r,
                None => {
                    slot.insert(row.sid.clone(), cand.rows.len());
                    cand.rows.push(row);
                    cand.rows.len() - 1
                }
            };
            cand.hits.entry(i).or_default().push(r);
        }
    }
    Ok(out)
}

/// Per-candidate bookkeeping while scoring.
#[derive(Debug)]
struct CandidateState {
    sum_p: f64,
    total_ir: f64,
    rem_ps: f64,
    pruned: bool,
}

/// Scores one candidate under `lemmas`. Returns its infected rate when it
/// survives every enabled bound and exceeds `θ`.
pub fn evaluate_candidate(
    query: &[Segment],
    weights: &[f64],
    cand: &Candidate,
    params: &QueryParams,
    lemmas: LemmaSet,
    counters: &mut LemmaCounters,
) -> Result<Option<f64>> {
    let theta = params.theta;
    let sum_p: f64 = cand.hits.keys().map(|&i| weights[i]).sum();
    if lemmas.l1 && sum_p < theta - PRUNE_SLACK {
        counters.l1 += 1;
        return Ok(None);
    }
    let mut st = CandidateState { sum_p, total_ir: 0.0, rem_ps: sum_p, pruned: false };
    let mut cache = vec![None; cand.rows.len()];
    for (i, (s, &p)) in query.iter().zip(weights).enumerate() {
        let hit = cand.hits.contains_key(&i);
        let irp = if hit { segment_ir_sorted(s, &cand.locations_cached(i, &mut cache)?, params) * p } else { 0.0 };
        if lemmas.l2 && irp < theta - 1.0 + p - PRUNE_SLACK {
            counters.l2 += 1;
            st.pruned = true;
            break;
        }
        if hit {
            if lemmas.l3 && irp < theta - (st.sum_p - p) - PRUNE_SLACK {
                counters.l3 += 1;
                st.pruned = true;
                break;
            }
            st.rem_ps -= p;
        }
        debug_assert!({
            let expected: f64 = cand.hits.range(i + 1..).map(|(&j, _)| weights[j]).sum();
            (st.rem_ps - expected).abs() < 1e-9
        });
        if lemmas.l4 && irp < theta - st.total_ir - st.rem_ps - PRUNE_SLACK {
            counters.l4 += 1;
            st.pruned = true;
            break;
        }
        st.total_ir += irp;
    }
    Ok((!st.pruned && st.total_ir > theta).then_some(st.total_ir))
}

/// Scores every candidate in parallel and sorts the survivors.
pub fn score_candidates(
    query: &[Segment],
    candidates: &BTreeMap<String, Candidate>,
    params: &QueryParams,
    lemmas: LemmaSet,
) -> Result<IrqOutcome> {
    let weights = p_weights(query);
    let cands: Vec<&Candidate> = candidates.values().collect();
    let (mut results, counters) = cands
        .par_iter()
        .map(|c| {
            let mut counters = LemmaCounters::default();
            let ir = evaluate_candidate(query, &weights, c, params, lemmas, &mut counters)?;
            Ok((ir.map(|ir| (c.traj_id.clone(), ir)), counters))
        })
        .try_fold(
            || (Vec::new(), LemmaCounters::default()),
            |(mut acc, mut total), r: Result<_>| {
                let (hit, c) = r?;
                acc.extend(hit);
                total += c;
                Ok::<_, crate::error::Error>((acc, total))
            },
        )
        .try_reduce(
            || (Vec::new(), LemmaCounters::default()),
            |(mut a, mut ca), (b, cb)| {
                a.extend(b);
                ca += cb;
                Ok((a, ca))
            },
        )?;
    sort_results(&mut results);
    Ok(IrqOutcome { results, counters, candidates: candidates.len() })
}

/// Infected-rate query with a chosen set of pruning bounds.
pub fn irq_with<B: StoreBackend>(
    store: &SegmentStore<B>,
    query: &Trajectory,
    params: &QueryParams,
    lemmas: LemmaSet,
) -> Result<IrqOutcome> {
    params.validate()?;
    let segs = store.segment(query);
    let candidates = extract_candidates(store, &segs, params, &query.id)?;
    score_candidates(&segs, &candidates, params, lemmas)
}

/// Every stored trajectory (other than the query itself) with `IR(Q, T) > θ`.
pub fn irq<B: StoreBackend>(store: &SegmentStore<B>, query: &Trajectory, params: &QueryParams) -> Result<IrqOutcome> {
    irq_with(store, query, params, LemmaSet::ALL)
}

/// Same contract as [`irq`] with all pruning disabled.
pub fn irq_unpruned<B: StoreBackend>(
    store: &SegmentStore<B>,
    query: &Trajectory,
    params: &QueryParams,
) -> Result<IrqOutcome> {
    irq_with(store, query, params, LemmaSet::NONE)
}
