#![no_main]

use crowdtrace::store::{decode_segment, encode_segment, peek_bounds, peek_ids};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let bounds = peek_bounds(data);
    let ids = peek_ids(data);
    if let Ok(seg) = decode_segment(data) {
        // a full decode implies the header peeks succeed and agree
        let (mbr, tr) = bounds.expect("bounds of a decodable row");
        assert_eq!(mbr, seg.mbr);
        assert_eq!(tr, seg.time_range());
        assert_eq!(ids.expect("ids of a decodable row"), (seg.traj_id.clone(), seg.sid.clone()));
        assert_eq!(decode_segment(&encode_segment(&seg)).expect("re-decode"), seg);
    }
});
