//! XZ2 ordering for spatially extended objects, its XZ2T time-binned
//! extension, the row-key codec and scan-range planning.
//!
//! Quadrant digits are `x_bit + 2 * y_bit` relative to the parent cell's
//! center, so `0` is the lower-left child and `3` the upper-right one. An
//! element's x-extension is its cell doubled in width and height, anchored at
//! the cell's min corner.

mod element;
mod key;
mod scan;

pub use element::{sequence_code, subtree_size, total_elements, xz2_element, XzElement};
pub use key::{encode_key, fnv1a64, STKey, KEY_PREFIX_LEN};
pub use scan::{spatial_scan_ranges, st_scan_ranges, ScanRange};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::{Mbr, TimeBinning};

/// Maximum resolution whose codes fit in 64 bits.
pub const MAX_RESOLUTION: u8 = 31;

/// Units in which the period length is expressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeUnit {
    Second,
    Day,
    Week,
    /// 30 days.
    Month,
    /// 365 days.
    Year,
}

impl TimeUnit {
    pub fn seconds(self) -> i64 {
        match self {
            TimeUnit::Second => 1,
            TimeUnit::Day => 86_400,
            TimeUnit::Week => 7 * 86_400,
            TimeUnit::Month => 30 * 86_400,
            TimeUnit::Year => 365 * 86_400,
        }
    }
}

impl std::str::FromStr for TimeUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "second" | "s" => Ok(TimeUnit::Second),
            "day" | "d" => Ok(TimeUnit::Day),
            "week" | "w" => Ok(TimeUnit::Week),
            "month" => Ok(TimeUnit::Month),
            "year" | "y" => Ok(TimeUnit::Year),
            other => Err(Error::InvalidParam(format!("unknown time unit {other:?}"))),
        }
    }
}

/// Index configuration. Immutable once a store has been written with it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XzConfig {
    /// Max quadtree depth `g`.
    pub resolution: u8,
    pub world: Mbr,
    /// Reference instant, seconds since the Unix epoch.
    pub epoch: i64,
    /// Period length, in `unit`s.
    pub period_len: i64,
    pub unit: TimeUnit,
    pub num_shards: u8,
}

impl Default for XzConfig {
    fn default() -> Self {
        Self {
            resolution: 15,
            world: Mbr::WORLD,
            epoch: 0,
            period_len: 86_400,
            unit: TimeUnit::Second,
            num_shards: 4,
        }
    }
}

impl XzConfig {
    pub fn validate(&self) -> Result<()> {
        if self.resolution == 0 || self.resolution > MAX_RESOLUTION {
            return Err(Error::InvalidParam(format!(
                "resolution {} not in 1..={MAX_RESOLUTION}",
                self.resolution
            )));
        }
        if self.period_len <= 0 {
            return Err(Error::InvalidParam(format!("period length {} must be positive", self.period_len)));
        }
        if self.num_shards == 0 || self.num_shards == u8::MAX {
            // 0xFF is reserved for store metadata keys.
            return Err(Error::InvalidParam(format!("shard count {} not in 1..=254", self.num_shards)));
        }
        if !(self.world.width() > 0.0 && self.world.height() > 0.0) {
            return Err(Error::InvalidParam("world box must have positive area".into()));
        }
        Ok(())
    }

    /// Period length in seconds.
    pub fn period_secs(&self) -> i64 {
        self.period_len * self.unit.seconds()
    }

    pub fn binning(&self) -> TimeBinning {
        TimeBinning { epoch: self.epoch, period_secs: self.period_secs() }
    }

    /// Maps a lon/lat box into the unit square of the world.
    pub(crate) fn normalize(&self, mbr: &Mbr) -> [f64; 4] {
        let w = &self.world;
        [
            (mbr.min_lon - w.min_lon) / w.width(),
            (mbr.min_lat - w.min_lat) / w.height(),
            (mbr.max_lon - w.min_lon) / w.width(),
            (mbr.max_lat - w.min_lat) / w.height(),
        ]
    }
}

/// Time-period number of `t`: whole units since the epoch divided by the period length.
pub fn bin_of(t: i64, cfg: &XzConfig) -> Result<u32> {
    if t < cfg.epoch {
        return Err(Error::BeforeEpoch { t, epoch: cfg.epoch });
    }
    let units = (t - cfg.epoch) / cfg.unit.seconds();
    let bin = units / cfg.period_len;
    u32::try_from(bin).map_err(|_| Error::InvalidParam(format!("bin {bin} exceeds u32")))
}
