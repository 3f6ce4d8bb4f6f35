//! Trajectory data model, noise filtering and stay-point segmentation.

mod noise;
mod segmentation;

pub use noise::filter_noise;
pub use segmentation::{segment, segment_binned};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean Earth radius in meters used by every distance computation.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// One timestamped GPS fix. `t` is whole seconds since the Unix epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub lon: f64,
    pub lat: f64,
    pub t: i64,
}

impl Location {
    pub fn new(lon: f64, lat: f64, t: i64) -> Result<Self> {
        if !(-180.0..=180.0).contains(&lon) || !(-90.0..=90.0).contains(&lat) {
            return Err(Error::InvalidLocation(format!(
                "coordinates out of range: lon={lon} lat={lat}"
            )));
        }
        if t < 0 {
            return Err(Error::InvalidLocation(format!("negative timestamp {t}")));
        }
        Ok(Self { lon, lat, t })
    }
}

/// Great-circle distance in meters.
pub fn haversine(a: &Location, b: &Location) -> f64 {
    haversine_deg(a.lon, a.lat, b.lon, b.lat)
}

pub fn haversine_deg(lon1: f64, lat1: f64, lon2: f64, lat2: f64) -> f64 {
    let phi1 = lat1.to_radians();
    let phi2 = lat2.to_radians();
    let dphi = (lat2 - lat1).to_radians();
    let dlambda = (lon2 - lon1).to_radians();
    let h = (dphi * 0.5).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda * 0.5).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.min(1.0).sqrt().asin()
}

/// A moving object's time-ordered locations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub id: String,
    pub locations: Vec<Location>,
}

impl Trajectory {
    /// Builds a trajectory, sorting locations by time (stable).
    pub fn new(id: impl Into<String>, mut locations: Vec<Location>) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(Error::InvalidTrajectory("empty trajectory id".into()));
        }
        if locations.is_empty() {
            return Err(Error::InvalidTrajectory(format!("trajectory {id} has no locations")));
        }
        locations.sort_by_key(|l| l.t);
        Ok(Self { id, locations })
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }
}

/// Axis-aligned lon/lat box, closed on all sides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mbr {
    pub min_lon: f64,
    pub min_lat: f64,
    pub max_lon: f64,
    pub max_lat: f64,
}

impl Mbr {
    pub const WORLD: Mbr = Mbr { min_lon: -180.0, min_lat: -90.0, max_lon: 180.0, max_lat: 90.0 };

    pub fn new(min_lon: f64, min_lat: f64, max_lon: f64, max_lat: f64) -> Result<Self> {
        if !(min_lon <= max_lon && min_lat <= max_lat) {
            return Err(Error::InvalidParam(format!(
                "inverted box ({min_lon}, {min_lat}, {max_lon}, {max_lat})"
            )));
        }
        Ok(Self { min_lon, min_lat, max_lon, max_lat })
    }

    pub fn point(lon: f64, lat: f64) -> Self {
        Self { min_lon: lon, min_lat: lat, max_lon: lon, max_lat: lat }
    }

    pub fn width(&self) -> f64 {
        self.max_lon - self.min_lon
    }

    pub fn height(&self) -> f64 {
        self.max_lat - self.min_lat
    }

    pub fn extend_point(&mut self, lon: f64, lat: f64) {
        self.min_lon = self.min_lon.min(lon);
        self.min_lat = self.min_lat.min(lat);
        self.max_lon = self.max_lon.max(lon);
        self.max_lat = self.max_lat.max(lat);
    }

    pub fn union(&self, other: &Mbr) -> Mbr {
        Mbr {
            min_lon: self.min_lon.min(other.min_lon),
            min_lat: self.min_lat.min(other.min_lat),
            max_lon: self.max_lon.max(other.max_lon),
            max_lat: self.max_lat.max(other.max_lat),
        }
    }

    pub fn intersects(&self, other: &Mbr) -> bool {
        self.min_lon <= other.max_lon
            && other.min_lon <= self.max_lon
            && self.min_lat <= other.max_lat
            && other.min_lat <= self.max_lat
    }

    pub fn contains(&self, other: &Mbr) -> bool {
        self.min_lon <= other.min_lon
            && self.min_lat <= other.min_lat
            && other.max_lon <= self.max_lon
            && other.max_lat <= self.max_lat
    }

    pub fn contains_point(&self, lon: f64, lat: f64) -> bool {
        self.min_lon <= lon && lon <= self.max_lon && self.min_lat <= lat && lat <= self.max_lat
    }
}

/// Closed interval of whole seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimeRange {
    pub start: i64,
    pub end: i64,
}

impl TimeRange {
    pub fn new(start: i64, end: i64) -> Result<Self> {
        if start > end {
            return Err(Error::InvalidParam(format!("time range [{start}, {end}] is inverted")));
        }
        Ok(Self { start, end })
    }

    pub fn span(&self) -> i64 {
        self.end - self.start
    }

    pub fn intersects(&self, other: &TimeRange) -> bool {
        self.start <= other.end && other.start <= self.end
    }

    pub fn union(&self, other: &TimeRange) -> TimeRange {
        TimeRange { start: self.start.min(other.start), end: self.end.max(other.end) }
    }
}

/// Tight bounding box of a non-empty location list.
///
/// Panics on an empty slice.
pub fn mbr_of(locations: &[Location]) -> Mbr {
    let first = locations.first().expect("mbr_of on empty location list");
    let mut mbr = Mbr::point(first.lon, first.lat);
    for l in &locations[1..] {
        mbr.extend_point(l.lon, l.lat);
    }
    mbr
}

/// Time range of a non-empty location list (min and max timestamps).
///
/// Panics on an empty slice.
pub fn time_range_of(locations: &[Location]) -> TimeRange {
    let first = locations.first().expect("time_range_of on empty location list");
    let (start, end) = locations[1..]
        .iter()
        .fold((first.t, first.t), |(lo, hi), l| (lo.min(l.t), hi.max(l.t)));
    TimeRange { start, end }
}

/// A stay-point-bounded piece of a trajectory: the unit of storage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub sid: String,
    pub traj_id: String,
    pub locations: Vec<Location>,
    pub mbr: Mbr,
    pub st: i64,
    pub et: i64,
}

impl Segment {
    /// Builds a segment and caches its bounds. `locations` must be non-empty and time-sorted.
    pub fn new(traj_id: &str, ordinal: usize, locations: Vec<Location>) -> Self {
        Self::with_sid(format!("{traj_id}#{ordinal}"), traj_id.to_string(), locations)
    }

    pub fn with_sid(sid: String, traj_id: String, locations: Vec<Location>) -> Self {
        let mbr = mbr_of(&locations);
        let tr = time_range_of(&locations);
        Self { sid, traj_id, locations, mbr, st: tr.start, et: tr.end }
    }

    pub fn time_range(&self) -> TimeRange {
        TimeRange { start: self.st, end: self.et }
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }
}

/// Time-period partitioning shared by segmentation and the index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeBinning {
    pub epoch: i64,
    /// Length of one period in seconds.
    pub period_secs: i64,
}

impl TimeBinning {
    pub fn bin_of(&self, t: i64) -> Result<u32> {
        if t < self.epoch {
            return Err(Error::BeforeEpoch { t, epoch: self.epoch });
        }
        let bin = (t - self.epoch) / self.period_secs;
        u32::try_from(bin).map_err(|_| Error::InvalidParam(format!("bin {bin} exceeds u32")))
    }
}

/// Thresholds for noise filtering and segmentation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentationConfig {
    /// Max pairwise distance inside a segment, meters.
    pub d_seg: f64,
    /// Max pairwise time gap inside a segment, seconds.
    pub t_seg: i64,
    /// Speed bound of the noise filter, m/s.
    pub max_speed: f64,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self { d_seg: 200.0, t_seg: 1800, max_speed: 50.0 }
    }
}

impl SegmentationConfig {
    pub fn new(d_seg: f64, t_seg: i64, max_speed: f64) -> Result<Self> {
        let cfg = Self { d_seg, t_seg, max_speed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d_seg > 0.0 && self.t_seg > 0 && self.max_speed > 0.0) {
            return Err(Error::InvalidParam(format!(
                "segmentation thresholds must be positive: {self:?}"
            )));
        }
        Ok(())
    }
}
