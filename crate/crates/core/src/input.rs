//! Point CSV reading and writing: `traj_id,lon,lat,unix_seconds`, header optional.

use std::collections::HashMap;
use std::io::{Read, Write};

use crate::error::Result;
use crate::trajectory::{Location, Trajectory};

/// Trajectories read from a CSV stream.
#[derive(Debug, Default)]
pub struct ParsedInput {
    /// In order of first appearance; locations sorted by time.
    pub trajectories: Vec<Trajectory>,
    pub malformed_lines: usize,
}

fn parse_record(rec: &csv::StringRecord) -> Option<(String, Location)> {
    if rec.len() != 4 {
        return None;
    }
    let id = rec.get(0)?.trim();
    if id.is_empty() {
        return None;
    }
    let lon: f64 = rec.get(1)?.trim().parse().ok()?;
    let lat: f64 = rec.get(2)?.trim().parse().ok()?;
    let t: i64 = rec.get(3)?.trim().parse().ok()?;
    Some((id.to_string(), Location::new(lon, lat, t).ok()?))
}

fn is_header(rec: &csv::StringRecord) -> bool {
    rec.get(1).is_some_and(|f| f.trim().eq_ignore_ascii_case("lon"))
}

/// Reads points and groups them into trajectories. Malformed lines are skipped and counted.
pub fn read_points<R: Read>(reader: R) -> Result<ParsedInput> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(reader);
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<Location>> = HashMap::new();
    let mut malformed = 0usize;
    let mut rec = csv::StringRecord::new();
    let mut first = true;
    loop {
        match rdr.read_record(&mut rec) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                // Invalid UTF-8 and similar per-record faults; I/O failures abort.
                if e.is_io_error() {
                    return Err(e.into());
                }
                log::warn!("skipping unreadable csv record: {e}");
                malformed += 1;
                first = false;
                continue;
            }
        }
        let header = first && is_header(&rec);
        first = false;
        if header {
            continue;
        }
        match parse_record(&rec) {
            Some((id, loc)) => {
                groups
                    .entry(id)
                    .or_insert_with_key(|k| {
                        order.push(k.clone());
                        Vec::new()
                    })
                    .push(loc);
            }
            None => {
                log::warn!("skipping malformed line {:?}", rec.position().map(|p| p.line()));
                malformed += 1;
            }
        }
    }
    let trajectories = order
        .into_iter()
        .map(|id| {
            let locs = groups.remove(&id).expect("grouped");
            Trajectory::new(id, locs).expect("non-empty group with id")
        })
        .collect();
    Ok(ParsedInput { trajectories, malformed_lines: malformed })
}

/// Writes trajectories as point CSV with a header line.
pub fn write_points<W: Write>(writer: W, trajectories: &[Trajectory]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(["traj_id", "lon", "lat", "unix_seconds"])?;
    for t in trajectories {
        for l in &t.locations {
            w.write_record([t.id.as_str(), &format!("{:.7}", l.lon), &format!("{:.7}", l.lat), &l.t.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
