use super::{haversine, Location, Segment, SegmentationConfig, TimeBinning, Trajectory};

/// Greedy stay-point segmentation.
///
/// A segment grows while every pair of its locations stays within `d_seg`
/// meters and `t_seg` seconds. The output partitions the input in order; sids
/// are `traj_id#k` with zero-based `k`.
pub fn segment(traj: &Trajectory, cfg: &SegmentationConfig) -> Vec<Segment> {
    split(traj, cfg, None)
}

/// Like [`segment`] but additionally closes a segment before it would leave
/// the time bin of its first location, so every segment maps to one bin and
/// spans less than one period.
pub fn segment_binned(traj: &Trajectory, cfg: &SegmentationConfig, binning: &TimeBinning) -> Vec<Segment> {
    split(traj, cfg, Some(binning))
}

fn bin_key(binning: Option<&TimeBinning>, t: i64) -> i64 {
    match binning {
        // Pre-epoch timestamps are rejected at ingest; floor keeps this total.
        Some(b) => (t - b.epoch).div_euclid(b.period_secs),
        None => 0,
    }
}

fn fits(current: &[Location], next: &Location, cfg: &SegmentationConfig, binning: Option<&TimeBinning>) -> bool {
    let first = &current[0];
    if next.t - first.t > cfg.t_seg {
        return false;
    }
    if bin_key(binning, next.t) != bin_key(binning, first.t) {
        return false;
    }
    current.iter().all(|l| haversine(l, next) <= cfg.d_seg)
}

fn split(traj: &Trajectory, cfg: &SegmentationConfig, binning: Option<&TimeBinning>) -> Vec<Segment> {
    let mut out = Vec::new();
    let mut current: Vec<Location> = Vec::new();
    for l in &traj.locations {
        if !current.is_empty() && !fits(&current, l, cfg, binning) {
            let done = std::mem::take(&mut current);
            out.push(Segment::new(&traj.id, out.len(), done));
        }
        current.push(*l);
    }
    if !current.is_empty() {
        out.push(Segment::new(&traj.id, out.len(), current));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const M: f64 = 1.0 / 111_195.08;

    fn loc(east_m: f64, north_m: f64, t: i64) -> Location {
        Location { lon: 116.0 + east_m * M / 40f64.to_radians().cos(), lat: 40.0 + north_m * M, t }
    }

    #[test]
    fn four_clusters_four_segments() {
        // four stays, each a few points within 60 m, separated by ~500 m jumps
        let mut locs = Vec::new();
        let mut t = 0;
        for c in 0..4 {
            for k in 0..5 {
                locs.push(loc(c as f64 * 500.0 + k as f64 * 10.0, (k % 2) as f64 * 20.0, t));
                t += 60;
            }
        }
        let traj = Trajectory::new("fig2", locs).unwrap();
        let segs = segment(&traj, &SegmentationConfig::default());
        assert_eq!(segs.len(), 4);
        assert!(segs.iter().all(|s| s.len() == 5));
        assert_eq!(segs[3].sid, "fig2#3");
    }

    #[test]
    fn stationary_points_one_segment() {
        let locs = (0..30).map(|i| loc(0.0, 0.0, i * 50)).collect();
        let traj = Trajectory::new("a", locs).unwrap();
        assert_eq!(segment(&traj, &SegmentationConfig::default()).len(), 1);
    }

    #[test]
    fn alternating_far_points_one_segment_each() {
        let locs = (0..6).map(|i| loc((i % 2) as f64 * 1000.0, 0.0, i * 30)).collect();
        let traj = Trajectory::new("a", locs).unwrap();
        let segs = segment(&traj, &SegmentationConfig::default());
        assert_eq!(segs.len(), 6);
    }

    #[test]
    fn single_location() {
        let traj = Trajectory::new("a", vec![loc(0.0, 0.0, 9)]).unwrap();
        let segs = segment(&traj, &SegmentationConfig::default());
        assert_eq!(segs.len(), 1);
        assert_eq!((segs[0].st, segs[0].et), (9, 9));
    }

    #[test]
    fn time_threshold_closes_segment() {
        let locs = vec![loc(0.0, 0.0, 0), loc(0.0, 0.0, 1800), loc(0.0, 0.0, 1801)];
        let traj = Trajectory::new("a", locs).unwrap();
        let segs = segment(&traj, &SegmentationConfig::default());
        assert_eq!(segs.iter().map(|s| s.len()).collect::<Vec<_>>(), vec![2, 1]);
    }

    #[test]
    fn binned_segments_do_not_cross_bins() {
        let b = TimeBinning { epoch: 0, period_secs: 600 };
        let locs = (0..10).map(|i| loc(0.0, 0.0, 500 + i * 30)).collect();
        let traj = Trajectory::new("a", locs).unwrap();
        let segs = segment_binned(&traj, &SegmentationConfig::default(), &b);
        assert_eq!(segs.len(), 2);
        for s in &segs {
            assert_eq!(b.bin_of(s.st).unwrap(), b.bin_of(s.et).unwrap());
        }
    }

    fn arb_traj() -> impl Strategy<Value = Trajectory> {
        prop::collection::vec((-400.0f64..400.0, -400.0f64..400.0, 1i64..900), 1..60).prop_map(|steps| {
            let mut t = 0;
            let locs = steps
                .into_iter()
                .map(|(e, n, dt)| {
                    t += dt;
                    loc(e, n, t)
                })
                .collect();
            Trajectory::new("p", locs).unwrap()
        })
    }

    proptest! {
        #[test]
        fn partition_pairwise_and_maximal(traj in arb_traj(), period in 600i64..7200) {
            let cfg = SegmentationConfig::default();
            let b = TimeBinning { epoch: 0, period_secs: period };
            let segs = segment_binned(&traj, &cfg, &b);
            let joined: Vec<Location> = segs.iter().flat_map(|s| s.locations.iter().copied()).collect();
            prop_assert_eq!(&joined, &traj.locations);
            for (k, s) in segs.iter().enumerate() {
                prop_assert_eq!(&s.sid, &format!("p#{k}"));
                prop_assert!(s.et - s.st <= period);
                for a in &s.locations {
                    for c in &s.locations {
                        prop_assert!(haversine(a, c) <= cfg.d_seg);
                        prop_assert!((a.t - c.t).abs() <= cfg.t_seg);
                    }
                }
            }
            for w in segs.windows(2) {
                let next = w[1].locations[0];
                let violates = w[0].locations.iter().any(|a| haversine(a, &next) > cfg.d_seg || (next.t - a.t).abs() > cfg.t_seg)
                    || b.bin_of(next.t).unwrap() != b.bin_of(w[0].st).unwrap();
                prop_assert!(violates);
                prop_assert!(w[0].st <= w[1].st);
            }
            prop_assert_eq!(segment_binned(&traj, &cfg, &b), segs);
        }
    }
}
