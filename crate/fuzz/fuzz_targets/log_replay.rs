#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(r) = crowdtrace::store::replay(data) {
        assert!(r.valid_len as usize <= data.len());
        for (_, off, len) in &r.entries {
            assert!(off + u64::from(*len) <= r.valid_len);
        }
    }
});
