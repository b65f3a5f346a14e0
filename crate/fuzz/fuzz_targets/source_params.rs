#![no_main]

use bell_hv_core::Source;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(source) = Source::from_json(text) {
        // accepted sources must survive a round trip
        let again = serde_json::to_string(&source).expect("serializable");
        assert_eq!(Source::from_json(&again).expect("reparses"), source);
    }
});
