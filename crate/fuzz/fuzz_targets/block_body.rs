#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if data.len() < 4 {
        return;
    }
    let count = u32::from_le_bytes(data[..4].try_into().unwrap());
    let body = &data[4..];
    if let Ok(entries) = crowdtrace::store::parse_block_body(body, count) {
        assert_eq!(entries.len(), count as usize);
        for e in &entries {
            assert!(e.value_offset + e.value_len <= body.len());
        }
    }
});
