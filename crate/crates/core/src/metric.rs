//! Infected-rate metric: spatio-temporal correlation of locations, segment and
//! trajectory infected rates, and segment weights.
//!
//! Values are summed in storage order so every evaluation path that sees the
//! same inputs produces bit-identical results.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::{haversine, Location, Segment, Trajectory};

/// Parameters governing every metric evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryParams {
    /// Weight of the spatial term, in [0, 1].
    pub lambda: f64,
    /// Infected-rate threshold; results must be strictly above it.
    pub theta: f64,
    /// Spatial infection range, meters.
    pub theta_d: f64,
    /// Temporal infection range, seconds.
    pub theta_t: f64,
}

impl Default for QueryParams {
    fn default() -> Self {
        Self { lambda: 0.5, theta: 0.5, theta_d: 50.0, theta_t: 120.0 }
    }
}

impl QueryParams {
    pub fn new(lambda: f64, theta: f64, theta_d: f64, theta_t: f64) -> Result<Self> {
        let p = Self { lambda, theta, theta_d, theta_t };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::InvalidParam(format!("lambda {} not in [0, 1]", self.lambda)));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::InvalidParam(format!("theta {} not in [0, 1]", self.theta)));
        }
        if !(self.theta_d > 0.0 && self.theta_d.is_finite()) {
            return Err(Error::InvalidParam(format!("theta_d {} must be positive", self.theta_d)));
        }
        if !(self.theta_t > 0.0 && self.theta_t.is_finite()) {
            return Err(Error::InvalidParam(format!("theta_t {} must be positive", self.theta_t)));
        }
        Ok(())
    }

    /// Whether `v` lies in the influential range of `l`, given their distance.
    #[inline]
    fn in_range(&self, dist: f64, dt_abs: f64) -> bool {
        dist <= self.theta_d && dt_abs <= self.theta_t
    }
}

/// A query segment's contribution `IR(s, T) * P(s)` to a candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentScore {
    pub query_traj_id: String,
    pub candidate_traj_id: String,
    pub query_segment_sid: String,
    pub irp: f64,
}

#[inline]
fn st_dist_parts(dist: f64, dt_abs: f64, p: &QueryParams) -> f64 {
    p.lambda * (-dist / p.theta_d).exp() + (1.0 - p.lambda) * (-dt_abs / p.theta_t).exp()
}

/// Spatio-temporal correlation between two locations, in [0, 1].
pub fn st_dist(l: &Location, v: &Location, p: &QueryParams) -> f64 {
    st_dist_parts(haversine(l, v), (l.t - v.t).abs() as f64, p)
}

/// Best correlation of `l` against any location of `candidates` inside its
/// influential range; 0 when none qualifies. Scans every candidate.
pub fn st_cor(l: &Location, candidates: &[Location], p: &QueryParams) -> f64 {
    let mut best = 0.0f64;
    for v in candidates {
        let dt = (l.t - v.t).abs() as f64;
        if dt > p.theta_t {
            continue;
        }
        let dist = haversine(l, v);
        if p.in_range(dist, dt) {
            best = best.max(st_dist_parts(dist, dt, p));
        }
    }
    best
}

/// [`st_cor`] over time-sorted candidates, visiting only the `theta_t` window.
pub fn st_cor_sorted(l: &Location, sorted: &[Location], p: &QueryParams) -> f64 {
    let lo = sorted.partition_point(|v| (l.t - v.t) as f64 > p.theta_t);
    let mut best = 0.0f64;
    for v in &sorted[lo..] {
        let dt = (v.t - l.t) as f64;
        if dt > p.theta_t {
            break;
        }
        let dt = dt.abs();
        let dist = haversine(l, v);
        if p.in_range(dist, dt) {
            best = best.max(st_dist_parts(dist, dt, p));
        }
    }
    best
}

/// Weight of every segment: its inclusive time span over the total.
pub fn p_weights(segments: &[Segment]) -> Vec<f64> {
    let total: i64 = segments.iter().map(|s| s.et - s.st + 1).sum();
    segments.iter().map(|s| (s.et - s.st + 1) as f64 / total as f64).collect()
}

/// Weight of `s` within its trajectory's segment list.
pub fn p_weight(s: &Segment, segments: &[Segment]) -> f64 {
    let total: i64 = segments.iter().map(|x| x.et - x.st + 1).sum();
    (s.et - s.st + 1) as f64 / total as f64
}

/// Mean best correlation of the segment's locations against `candidates`.
pub fn segment_ir(s: &Segment, candidates: &[Location], p: &QueryParams) -> f64 {
    let sum: f64 = s.locations.iter().map(|l| st_cor(l, candidates, p)).sum();
    sum / s.locations.len() as f64
}

/// [`segment_ir`] against time-sorted candidates.
pub fn segment_ir_sorted(s: &Segment, sorted: &[Location], p: &QueryParams) -> f64 {
    let sum: f64 = s.locations.iter().map(|l| st_cor_sorted(l, sorted, p)).sum();
    sum / s.locations.len() as f64
}

/// Weighted sum of segment infected rates of `query` against `candidates`.
pub fn trajectory_ir(query: &[Segment], candidates: &[Location], p: &QueryParams) -> f64 {
    let weights = p_weights(query);
    query
        .iter()
        .zip(&weights)
        .map(|(s, w)| segment_ir(s, candidates, p) * w)
        .sum()
}

/// Exhaustive infected-rate query without index or pruning.
///
/// Returns every `(id, ir)` with `ir > theta`, sorted by descending `ir` then id.
pub fn oracle_irq(query: &[Segment], database: &[Trajectory], p: &QueryParams) -> Vec<(String, f64)> {
    let mut out: Vec<(String, f64)> = database
        .iter()
        .filter_map(|t| {
            let ir = trajectory_ir(query, &t.locations, p);
            (ir > p.theta).then(|| (t.id.clone(), ir))
        })
        .collect();
    sort_results(&mut out);
    out
}

/// Descending by score, ties broken by ascending id.
pub fn sort_results(results: &mut [(String, f64)]) {
    results.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
}
