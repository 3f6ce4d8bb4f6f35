#![no_main]

use crowdtrace::xz::STKey;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(key) = STKey::decode(data) {
        assert_eq!(key.encode(), data);
    }
});
