#![no_main]

use bell_hv_core::geometry::LayoutDocument;
use bell_hv_core::{ChainSpec, Theorem2PrimeLayout};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(layout) = Theorem2PrimeLayout::from_json(text) {
        let doc = layout.to_document();
        assert!(Theorem2PrimeLayout::from_document(&doc).is_ok());
    }
    if let Ok(doc) = serde_json::from_str::<LayoutDocument>(text) {
        if let Ok(chain) = ChainSpec::from_document(&doc) {
            assert_eq!(chain.links().len(), 2 * chain.n());
        }
    }
});
