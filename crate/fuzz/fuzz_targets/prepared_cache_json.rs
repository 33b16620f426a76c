#![no_main]

use libfuzzer_sys::fuzz_target;
use metasel::experiment::PreparedCache;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(c) = PreparedCache::from_json(text) {
        assert_eq!(PreparedCache::from_json(&c.to_json()).expect("round trip"), c);
    }
});
