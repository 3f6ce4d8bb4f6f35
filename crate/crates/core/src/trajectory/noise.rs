use super::{haversine, SegmentationConfig, Trajectory};

/// Greedy forward speed gate: a point is kept only if the speed implied from
/// the last kept point stays within `cfg.max_speed`. The first point is always kept.
///
/// Returns `None` for a trajectory with no locations.
pub fn filter_noise(traj: &Trajectory, cfg: &SegmentationConfig) -> Option<Trajectory> {
    let first = *traj.locations.first()?;
    let mut kept = Vec::with_capacity(traj.locations.len());
    kept.push(first);
    for l in &traj.locations[1..] {
        let last = kept.last().expect("non-empty");
        let dist = haversine(last, l);
        let dt = (l.t - last.t) as f64;
        // Coincident timestamps only pass when the position is unchanged.
        let ok = if dt > 0.0 { dist / dt <= cfg.max_speed } else { dist == 0.0 };
        if ok {
            kept.push(*l);
        }
    }
    Some(Trajectory { id: traj.id.clone(), locations: kept })
}
