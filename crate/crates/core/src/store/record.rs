//! Binary value layout of a stored segment (all little-endian):
//!
//! ```text
//! u8 version (=1)
//! f64 min_lon, f64 min_lat, f64 max_lon, f64 max_lat
//! i64 st, i64 et
//! u32 len + traj_id bytes
//! u32 len + sid bytes
//! u32 count, then count * (f64 lon, f64 lat, i64 t)
//! ```

use crate::error::{Error, Result};
use crate::trajectory::{mbr_of, time_range_of, Location, Mbr, Segment, TimeRange};

const VERSION: u8 = 1;

pub fn encode_segment(s: &Segment) -> Vec<u8> {
    let mut out = Vec::with_capacity(1 + 48 + 12 + s.traj_id.len() + s.sid.len() + 24 * s.locations.len());
    out.push(VERSION);
    for v in [s.mbr.min_lon, s.mbr.min_lat, s.mbr.max_lon, s.mbr.max_lat] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&s.st.to_le_bytes());
    out.extend_from_slice(&s.et.to_le_bytes());
    for text in [&s.traj_id, &s.sid] {
        out.extend_from_slice(&(text.len() as u32).to_le_bytes());
        out.extend_from_slice(text.as_bytes());
    }
    out.extend_from_slice(&(s.locations.len() as u32).to_le_bytes());
    for l in &s.locations {
        out.extend_from_slice(&l.lon.to_le_bytes());
        out.extend_from_slice(&l.lat.to_le_bytes());
        out.extend_from_slice(&l.t.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(Error::Decode(format!("record truncated: need {n} bytes, have {}", self.buf.len())));
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        let bytes = self.take(n)?;
        String::from_utf8(bytes.to_vec()).map_err(|e| Error::Decode(format!("non UTF-8 text: {e}")))
    }
}

/// Length of the fixed-size prefix: version, box and time range.
const BOUNDS_LEN: usize = 1 + 32 + 16;

/// Reads the box and time range without touching the rest of the record.
pub fn peek_bounds(bytes: &[u8]) -> Result<(Mbr, TimeRange)> {
    if bytes.len() < BOUNDS_LEN {
        return Err(Error::Decode(format!("record of {} bytes is shorter than its header", bytes.len())));
    }
    let mut r = Reader { buf: bytes };
    let version = r.take(1)?[0];
    if version != VERSION {
        return Err(Error::Decode(format!("unknown record version {version}")));
    }
    let mbr = Mbr { min_lon: r.f64()?, min_lat: r.f64()?, max_lon: r.f64()?, max_lat: r.f64()? };
    Ok((mbr, TimeRange { start: r.i64()?, end: r.i64()? }))
}

/// Reads `(traj_id, sid)` following the fixed-size prefix.
pub fn peek_ids(bytes: &[u8]) -> Result<(String, String)> {
    let mut r = Reader { buf: bytes.get(BOUNDS_LEN..).unwrap_or_default() };
    Ok((r.string()?, r.string()?))
}

/// Decodes and validates a stored segment value.
pub fn decode_segment(bytes: &[u8]) -> Result<Segment> {
    let mut r = Reader { buf: bytes };
    let version = r.take(1)?[0];
    if version != VERSION {
        return Err(Error::Decode(format!("unknown record version {version}")));
    }
    let mbr = Mbr { min_lon: r.f64()?, min_lat: r.f64()?, max_lon: r.f64()?, max_lat: r.f64()? };
    let st = r.i64()?;
    let et = r.i64()?;
    let traj_id = r.string()?;
    let sid = r.string()?;
    let count = r.u32()? as usize;
    if count == 0 {
        return Err(Error::Decode("segment without locations".into()));
    }
    if r.buf.len() != count.saturating_mul(24) {
        return Err(Error::Decode(format!("expected {count} locations, found {} trailing bytes", r.buf.len())));
    }
    let mut locations = Vec::with_capacity(count);
    for _ in 0..count {
        let (lon, lat, t) = (r.f64()?, r.f64()?, r.i64()?);
        locations.push(Location::new(lon, lat, t).map_err(|e| Error::Decode(e.to_string()))?);
    }
    if locations.windows(2).any(|w| w[0].t > w[1].t) {
        return Err(Error::Decode(format!("segment {sid} locations are not time-ordered")));
    }
    let tr = time_range_of(&locations);
    if mbr_of(&locations) != mbr || tr.start != st || tr.end != et {
        return Err(Error::Decode(format!("segment {sid} header disagrees with its locations")));
    }
    Ok(Segment { sid, traj_id, locations, mbr, st, et })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_segment() -> impl Strategy<Value = Segment> {
        (
            "[a-zA-Z0-9_]{1,12}",
            0usize..50,
            prop::collection::vec((-180.0f64..=180.0, -90.0f64..=90.0, 0i64..100_000), 1..40),
        )
            .prop_map(|(id, k, pts)| {
                let mut locs: Vec<Location> = pts.into_iter().map(|(lon, lat, t)| Location { lon, lat, t }).collect();
                locs.sort_by_key(|l| l.t);
                Segment::new(&id, k, locs)
            })
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(s in arb_segment()) {
            let bytes = encode_segment(&s);
            let back = decode_segment(&bytes).unwrap();
            prop_assert_eq!(&back, &s);
            for (a, b) in back.locations.iter().zip(&s.locations) {
                prop_assert_eq!(a.lon.to_bits(), b.lon.to_bits());
                prop_assert_eq!(a.lat.to_bits(), b.lat.to_bits());
            }
        }

        #[test]
        fn peeks_agree_with_full_decode(s in arb_segment()) {
            let bytes = encode_segment(&s);
            prop_assert_eq!(peek_bounds(&bytes).unwrap(), (s.mbr, s.time_range()));
            prop_assert_eq!(peek_ids(&bytes).unwrap(), (s.traj_id.clone(), s.sid.clone()));
        }

        #[test]
        fn truncation_is_an_error(s in arb_segment(), cut in 0usize..64) {
            let bytes = encode_segment(&s);
            let n = bytes.len().saturating_sub(cut + 1);
            prop_assert!(decode_segment(&bytes[..n]).is_err());
        }
    }

    #[test]
    fn tampered_header_rejected() {
        let s = Segment::new("t", 0, vec![Location { lon: 1.0, lat: 2.0, t: 3 }]);
        let mut bytes = encode_segment(&s);
        bytes[1] ^= 0x01;
        assert!(decode_segment(&bytes).is_err());
        let mut bytes = encode_segment(&s);
        bytes[0] = 9;
        assert!(decode_segment(&bytes).is_err());
    }
}
