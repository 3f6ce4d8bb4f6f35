//! Shared helpers for integration tests.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::PathBuf;

use crowdtrace::trajectory::{Location, Segment};
use crowdtrace::xz::{encode_key, sequence_code, XzConfig, XzElement};

pub fn testdata(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("testdata").join(name)
}

fn elements() -> Vec<(u8, String)> {
    let mut out = Vec::new();
    // every element of the depth-2 tree, in pre-order
    fn pre(prefix: String, left: u8, out: &mut Vec<(u8, String)>) {
        out.push((2, prefix.clone()));
        if left > 0 {
            for d in 0..4 {
                pre(format!("{prefix}{d}"), left - 1, out);
            }
        }
    }
    pre(String::new(), 2, &mut out);
    for (g, d) in [(3, "210"), (3, "333"), (15, "0"), (15, "3"), (15, "012301230123012"), (15, "333333333333333")] {
        out.push((g, d.to_string()));
    }
    out.push((31, "3".repeat(31)));
    out.push((31, "1".repeat(31)));
    out
}

pub fn render_elements() -> String {
    let mut s = String::from("g\tdigits\tcode\n");
    for (g, digits) in elements() {
        let e: XzElement = digits.parse().unwrap();
        let cfg = XzConfig { resolution: g, ..XzConfig::default() };
        writeln!(s, "{g}\t{digits}\t{}", sequence_code(&e, &cfg)).unwrap();
    }
    s
}

pub fn fixed_segments() -> Vec<Segment> {
    let places = [(116.3975, 39.9087), (-0.1276, 51.5072), (-74.006, 40.7128), (151.2093, -33.8688)];
    let mut out = Vec::new();
    for (i, &(lon, lat)) in places.iter().enumerate() {
        for (k, (span_m, t0)) in [(0.0, 0i64), (30.0, 86_399), (400.0, 1_600_000_000), (5000.0, 1_700_000_123)]
            .into_iter()
            .enumerate()
        {
            let d = span_m / 111_000.0;
            let t0 = t0 - t0 % 86_400 + (i as i64) * 600;
            let locs = vec![
                Location { lon, lat, t: t0 },
                Location { lon: lon + d, lat: lat + d / 2.0, t: t0 + 60 },
            ];
            out.push(Segment::new(&format!("p{i}"), k, locs));
        }
    }
    out
}

pub fn render_keys() -> String {
    let cfg = XzConfig::default();
    let mut s = String::from("sid\tkey_hex\n");
    for seg in fixed_segments() {
        let key = encode_key(&seg, &cfg).unwrap().encode();
        let hex: String = key.iter().map(|b| format!("{b:02x}")).collect();
        writeln!(s, "{}\t{hex}", seg.sid).unwrap();
    }
    s
}
