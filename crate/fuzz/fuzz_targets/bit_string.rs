#![no_main]

use bell_hv_core::signalling::BitString;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(bits) = text.parse::<BitString>() {
        assert_eq!(bits.to_string(), text);
        assert_eq!(bits.len(), text.len());
    }
});
