#![no_main]

use crowdtrace::xz::XzElement;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(e) = s.parse::<XzElement>() {
        assert_eq!(e.to_string(), s);
    }
});
